//! Boundary curves of the witness for each separability class.

pub mod analytic;
pub mod envelope;
pub mod general_n;
pub mod scan;

pub use analytic::{scaled_r, zero_variance_threshold};
pub use envelope::Envelope;
pub use general_n::{general_n_formula, verify_general_n};
pub use scan::{class_min, feasible, PointMin, ScanOptions, Witness4};

use crate::families::{random_family_point, ClassTag};
use crate::numeric::logspace;
use crate::{seeds, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveMethod {
    #[serde(rename = "pure")]
    PureScan,
    #[serde(rename = "envelope")]
    ConvexEnvelope,
    #[serde(rename = "analytic")]
    Analytic,
}

impl CurveMethod {
    pub fn name(self) -> &'static str {
        match self {
            CurveMethod::PureScan => "pure",
            CurveMethod::ConvexEnvelope => "envelope",
            CurveMethod::Analytic => "analytic",
        }
    }

    /// Default method: the envelope for the fully separable class, the pure
    /// scan for the biseparable ones.
    pub fn default_for(tag: ClassTag) -> Self {
        if tag == ClassTag::FullySeparable {
            CurveMethod::ConvexEnvelope
        } else {
            CurveMethod::PureScan
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryCurve {
    pub tag: ClassTag,
    pub q: f64,
    pub method: CurveMethod,
    pub points: Vec<CurvePoint>,
    /// Grid values of `r` where the class has no state.
    pub infeasible: Vec<f64>,
    pub verification: Option<Verification>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verification {
    pub samples: usize,
    pub exact_checks: usize,
    /// Smallest `delta_sample - bound` seen; negative means a sample beat the curve.
    pub worst_margin: f64,
}

#[derive(Clone, Debug)]
pub struct CurveConfig {
    pub witness: Witness4,
    pub scan: ScanOptions,
    pub grid: Option<Vec<f64>>,
    pub method: Option<CurveMethod>,
    /// Random family points checked against the pure minimum (0 disables).
    pub verify_samples: usize,
    /// Analytic family cloud resolution for ideal envelopes.
    pub cloud_resolution: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            witness: Witness4::ideal(),
            scan: ScanOptions::default(),
            grid: None,
            method: None,
            verify_samples: 10_000,
            cloud_resolution: 48,
        }
    }
}

/// Largest `r` with pure class states on the low-`r` branch at this `q`.
pub fn pure_r_limit(tag: ClassTag, q: f64) -> f64 {
    let t = match tag {
        ClassTag::FullySeparable => zero_variance_threshold(ClassTag::FullySeparable, q).ok(),
        _ => analytic::r_from_scaled(q, 2.0 / 3.0),
    };
    t.unwrap_or(1.0 - q)
}

/// Upper end of the default grid: where the fully separable envelope vanishes
/// (times 1.5), capped by the simplex.
fn envelope_r_top(q: f64) -> f64 {
    zero_variance_threshold(ClassTag::FullySeparable, q).map(|t| 1.5 * t).unwrap_or(1.0 - q).min(1.0 - q)
}

/// `r = 0` plus 199 log-spaced values from `1e-5` (or lower for small tops).
pub fn default_grid(tag: ClassTag, q: f64, method: CurveMethod) -> Vec<f64> {
    let top = match method {
        CurveMethod::ConvexEnvelope => envelope_r_top(q),
        _ => pure_r_limit(tag, q).min(envelope_r_top(q)),
    };
    let lo = 1e-5f64.min(top * 1e-3);
    let mut g = vec![0.0];
    g.extend(logspace(lo, top, 199));
    g
}

fn curve_point(q: f64, r: f64, delta: f64) -> CurvePoint {
    CurvePoint { r, big_r: scaled_r(q, r), delta }
}

/// Boundary curve of one class at fixed `q`.
pub fn min_variance_curve(tag: ClassTag, q: f64, cfg: &CurveConfig) -> Result<BoundaryCurve> {
    boundary_curve(&[tag], q, cfg)
}

/// Boundary of the union of several classes: the pointwise minimum for pure
/// scans and closed forms, the joint hull for envelopes.
pub fn boundary_curve(tags: &[ClassTag], q: f64, cfg: &CurveConfig) -> Result<BoundaryCurve> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must lie in (0, 1)")));
    }
    let tag = *tags.first().ok_or_else(|| Error::InvalidParameter("no class".into()))?;
    let method = cfg.method.unwrap_or(CurveMethod::default_for(tag));
    if method == CurveMethod::Analytic && tags.contains(&ClassTag::FullySeparable) {
        return Err(Error::InvalidParameter("no closed-form boundary for the fully separable class".into()));
    }
    let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(tag, q, method));
    if grid.iter().any(|&r| !(r >= 0.0 && r < 1.0 - q)) {
        return Err(Error::InvalidParameter("grid values must satisfy 0 <= r < 1 - q".into()));
    }
    let values: Vec<Option<f64>> = match method {
        CurveMethod::PureScan | CurveMethod::Analytic => grid
            .par_iter()
            .map(|&r| {
                tags.iter()
                    .filter_map(|&t| match method {
                        CurveMethod::Analytic => analytic::analytic_curve(t, q, r),
                        _ => class_min(t, q, r, &cfg.witness, &cfg.scan).map(|m| m.delta),
                    })
                    .min_by(f64::total_cmp)
            })
            .collect(),
        CurveMethod::ConvexEnvelope => {
            let mut env = class_envelope(tags, q, &grid, cfg);
            grid.iter().map(|&r| env.value(q, r)).collect()
        }
    };
    let mut points = Vec::new();
    let mut infeasible = Vec::new();
    for (&r, v) in grid.iter().zip(values) {
        match v {
            Some(d) => points.push(curve_point(q, r, d)),
            None => infeasible.push(r),
        }
    }
    let verification = if cfg.verify_samples > 0 {
        let mut worst: Option<Verification> = None;
        for &t in tags {
            let v = verify_pure_dominance(t, q, cfg.verify_samples, cfg)?;
            if worst.is_none_or(|w| v.worst_margin < w.worst_margin) {
                worst = Some(v);
            }
        }
        if let Some(v) = worst.filter(|v| v.worst_margin < -1e-6) {
            return Err(Error::Consistency(format!(
                "a random class state lies {:e} below the pure minimum",
                -v.worst_margin
            )));
        }
        worst
    } else {
        None
    };
    Ok(BoundaryCurve { tag, q, method, points, infeasible, verification })
}

fn slice_points(tag: ClassTag, q: f64, grid: &[f64], cfg: &CurveConfig) -> Vec<[f64; 3]> {
    grid.par_iter()
        .filter_map(|&r| class_min(tag, q, r, &cfg.witness, &cfg.scan).map(|m| [q, r, q * m.delta]))
        .collect()
}

/// Joint envelope of `tags` near the slice `q`.
pub fn class_envelope(tags: &[ClassTag], q: f64, grid: &[f64], cfg: &CurveConfig) -> Envelope {
    Envelope::new(tags.iter().flat_map(|&t| class_cloud(t, q, grid, cfg)).collect())
}

/// Point cloud of one class near the slice `q`: exact pointwise minima on the
/// slice, coarser minima on neighbouring slices, closure points and, for the
/// structured family clouds.
pub fn class_cloud(tag: ClassTag, q: f64, grid: &[f64], cfg: &CurveConfig) -> Vec<[f64; 3]> {
    let mut pts = Vec::new();
    let mut g: Vec<f64> = grid.iter().copied().filter(|&r| r <= pure_r_limit(tag, q) * 1.0000001).collect();
    if let Ok(t) = zero_variance_threshold(tag, q) {
        g.push(t);
    }
    g.push(pure_r_limit(tag, q));
    pts.extend(slice_points(tag, q, &g, cfg));
    for f in [0.5, 0.75, 1.25, 1.5, 2.0] {
        let q1 = q * f;
        if q1 >= 1.0 {
            continue;
        }
        let mut g1: Vec<f64> = default_grid(tag, q1, CurveMethod::PureScan).into_iter().step_by(5).collect();
        g1.push(pure_r_limit(tag, q1));
        pts.extend(slice_points(tag, q1, &g1, cfg));
    }
    let r0 = class_min(tag, q, 0.0, &cfg.witness, &cfg.scan).map(|m| m.delta).unwrap_or(1.0);
    pts.extend(envelope::limit_points(r0));
    if cfg.cloud_resolution > 0 {
        pts.extend(envelope::family_cloud(tag, cfg.cloud_resolution, &cfg.witness));
    }
    pts
}

/// Check random pure class states at `q` against the pointwise minimum.
pub fn verify_pure_dominance(tag: ClassTag, q: f64, samples: usize, cfg: &CurveConfig) -> Result<Verification> {
    let pts: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let pt = random_family_point(tag, q, seeds::derive(cfg.scan.seed, &[0x7e51, tag as u64, i]))?;
            let (_, _, r) = pt.pqr();
            Ok((r, cfg.witness.delta(&pt.one_vector())))
        })
        .collect::<Result<_>>()?;
    verify_points(tag, q, &pts, cfg)
}

/// Check `(r, delta)` samples of class states against the pointwise minimum.
/// Samples far above a dense reference curve are accepted without an exact
/// evaluation; the rest are compared with the minimum at their own `r`.
pub fn verify_points(tag: ClassTag, q: f64, pts: &[(f64, f64)], cfg: &CurveConfig) -> Result<Verification> {
    let rs: Vec<f64> = pts.iter().map(|p| p.0).filter(|&r| r > 0.0).collect();
    let (lo, hi) = rs.iter().fold((f64::INFINITY, 0.0f64), |a, &r| (a.0.min(r), a.1.max(r)));
    let reference: Vec<(f64, Option<f64>)> = if rs.is_empty() {
        Vec::new()
    } else {
        let grid = if hi > lo { logspace(lo, hi, 300) } else { vec![lo] };
        grid.par_iter().map(|&r| (r, class_min(tag, q, r, &cfg.witness, &cfg.scan).map(|m| m.delta))).collect()
    };
    let results: Vec<(f64, bool)> = pts
        .par_iter()
        .map(|&(r, d)| {
            let i = reference.partition_point(|x| x.0 <= r);
            if i >= 1 && i < reference.len() {
                if let ((r0, Some(a)), (r1, Some(b))) = (reference[i - 1], reference[i]) {
                    let interp = a + (b - a) * (r - r0) / (r1 - r0);
                    if d > interp + 0.05 {
                        return (d - interp, false);
                    }
                }
            }
            match class_min(tag, q, r, &cfg.witness, &cfg.scan) {
                Some(m) => (d - m.delta, true),
                None => (f64::INFINITY, true),
            }
        })
        .collect();
    Ok(Verification {
        samples: pts.len(),
        exact_checks: results.iter().filter(|x| x.1).count(),
        worst_margin: results.iter().map(|x| x.0).fold(f64::INFINITY, f64::min),
    })
}

/// Curves re-expressed as `(R, delta)` pairs.
pub fn curves_vs_r(curves: &[BoundaryCurve]) -> Vec<Vec<(f64, f64)>> {
    curves.iter().map(|c| c.points.iter().map(|p| (p.big_r, p.delta)).collect()).collect()
}
