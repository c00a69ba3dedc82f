//! Classification of a measured `(q, r, delta)` point against the class
//! boundaries.
//!
//! The three boundaries are cumulative: the fully separable envelope, the
//! envelope of fully separable and 2+2 states together, and the envelope of all
//! biseparable states. A point below the last one cannot be produced by any
//! mixture of biseparable states.

use crate::atlas::{class_cloud, default_grid, scaled_r, CurveConfig, CurveMethod, Envelope};
use crate::families::ClassTag;
use crate::optics::correction_factor;
use crate::{Error, Result, TOOL_VERSION};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Margins closer than this count as ties and give the weaker verdict.
pub const TIE_TOL: f64 = 1e-9;
/// Resolution of the `q` slices kept in the cache.
pub const Q_RESOLUTION: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub q: f64,
    pub r: f64,
    pub delta: f64,
    /// `delta` is a raw measured variance that needs the loss correction.
    #[serde(default)]
    pub delta_is_measured: bool,
    /// `|T|^2`, required when `delta_is_measured`.
    #[serde(default)]
    pub transmission: Option<f64>,
}

impl Measurement {
    pub fn new(q: f64, r: f64, delta: f64) -> Self {
        Measurement { q, r, delta, delta_is_measured: false, transmission: None }
    }

    pub fn measured(q: f64, r: f64, delta_m: f64, transmission: f64) -> Self {
        Measurement { q, r, delta: delta_m, delta_is_measured: true, transmission: Some(transmission) }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("q", self.q), ("r", self.r), ("delta", self.delta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.q + self.r > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter("q + r exceeds 1".into()));
        }
        if self.q <= 0.0 {
            return Err(Error::NoSingleExcitation);
        }
        if self.delta_is_measured && self.transmission.is_none() {
            return Err(Error::InvalidParameter("a measured variance needs the transmission".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Inconclusive,
    Entangled,
    AtLeastThreeMode,
    GenuineFourMode,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Inconclusive => "Inconclusive",
            Verdict::Entangled => "Entangled",
            Verdict::AtLeastThreeMode => "AtLeastThreeMode",
            Verdict::GenuineFourMode => "GenuineFourMode",
        }
    }
}

/// `R < 1`, `R < 2/3`, `R < 1/2`: necessary for any entanglement, for more
/// than two-mode and for genuine four-mode entanglement.
pub fn necessary_conditions(q: f64, r: f64) -> Result<[bool; 3]> {
    if q <= 0.0 {
        return Err(Error::NoSingleExcitation);
    }
    let big_r = scaled_r(q, r);
    Ok([big_r < 1.0, big_r < 2.0 / 3.0, big_r < 0.5])
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificationResult {
    pub verdict: Verdict,
    pub measurement: Measurement,
    pub delta_used: f64,
    pub correction_factor: f64,
    pub big_r: f64,
    /// Boundaries in the order fully separable, 2+2, 1+3 (cumulative).
    pub boundaries: [f64; 3],
    /// `boundary - delta_used`; positive excludes the class.
    pub margins: [f64; 3],
    pub r_conditions: [bool; 3],
    /// The `q` slice the boundaries were evaluated on.
    pub boundary_q: f64,
    pub seed: u64,
}

impl CertificationResult {
    pub fn to_json(&self) -> serde_json::Value {
        let keyed = |v: [f64; 3]| serde_json::json!({ "fs": v[0], "bisep22": v[1], "bisep13": v[2] });
        serde_json::json!({
            "verdict": self.verdict.name(),
            "q": self.measurement.q,
            "r": self.measurement.r,
            "delta_used": self.delta_used,
            "delta_measured": if self.measurement.delta_is_measured { Some(self.measurement.delta) } else { None },
            "correction_factor": self.correction_factor,
            "R": self.big_r,
            "margins": keyed(self.margins),
            "boundaries": keyed(self.boundaries),
            "r_conditions": { "R<1": self.r_conditions[0], "R<2/3": self.r_conditions[1], "R<1/2": self.r_conditions[2] },
            "boundary_q": self.boundary_q,
            "tool_version": TOOL_VERSION,
            "seed": self.seed,
        })
    }
}

type Slice = Arc<OnceLock<Mutex<[Envelope; 3]>>>;

/// Boundary evaluator with a per-`q`-slice cache of the class hulls.
pub struct Certifier {
    cfg: CurveConfig,
    cache: Mutex<HashMap<u64, Slice>>,
}

impl Default for Certifier {
    fn default() -> Self {
        Self::new(CurveConfig::default())
    }
}

impl Certifier {
    pub fn new(mut cfg: CurveConfig) -> Self {
        cfg.verify_samples = 0;
        Certifier { cfg, cache: Mutex::new(HashMap::new()) }
    }

    /// The slice used for `q`: rounded down to the cache resolution, since
    /// boundaries do not increase as `q` decreases.
    pub fn slice_q(q: f64) -> f64 {
        let s = (q / Q_RESOLUTION).floor() * Q_RESOLUTION;
        if s > 0.0 {
            s
        } else {
            q
        }
    }

    fn slice(&self, qs: f64) -> Slice {
        let mut map = self.cache.lock().expect("cache poisoned");
        map.entry(qs.to_bits()).or_default().clone()
    }

    /// Cumulative boundaries at `(q, r)`.
    pub fn boundaries(&self, q: f64, r: f64) -> Result<([f64; 3], f64)> {
        let qs = Self::slice_q(q);
        let slot = self.slice(qs);
        let envs = slot.get_or_init(|| {
            let grid = default_grid(ClassTag::FullySeparable, qs, CurveMethod::ConvexEnvelope);
            let clouds: Vec<Vec<[f64; 3]>> = ClassTag::ALL.iter().map(|&t| class_cloud(t, qs, &grid, &self.cfg)).collect();
            let mut acc = Vec::new();
            let envs: Vec<Envelope> = clouds
                .into_iter()
                .map(|c| {
                    acc.extend(c);
                    Envelope::new(acc.clone())
                })
                .collect();
            Mutex::new(envs.try_into().unwrap_or_else(|_| unreachable!()))
        });
        let mut envs = envs.lock().expect("envelope poisoned");
        let rr = r.min(1.0 - qs);
        let mut b = [0.0; 3];
        for (k, env) in envs.iter_mut().enumerate() {
            b[k] = env
                .value(qs, rr)
                .ok_or_else(|| Error::Infeasible(format!("no boundary at q = {qs}, r = {rr}")))?;
        }
        Ok((b, qs))
    }

    pub fn classify(&self, m: &Measurement) -> Result<CertificationResult> {
        m.validate()?;
        let c = match (m.delta_is_measured, m.transmission) {
            (true, Some(t2)) => correction_factor(m.q, m.r, t2)?,
            _ => 1.0,
        };
        let delta = (c * m.delta).min(1.0);
        let (boundaries, boundary_q) = self.boundaries(m.q, m.r)?;
        let margins = boundaries.map(|b| b - delta);
        let verdict = if margins[2] > TIE_TOL {
            Verdict::GenuineFourMode
        } else if margins[1] > TIE_TOL {
            Verdict::AtLeastThreeMode
        } else if margins[0] > TIE_TOL {
            Verdict::Entangled
        } else {
            Verdict::Inconclusive
        };
        let r_conditions = necessary_conditions(m.q, m.r)?;
        let implied = [Verdict::Entangled, Verdict::AtLeastThreeMode, Verdict::GenuineFourMode];
        for (cond, v) in r_conditions.iter().zip(implied) {
            if verdict >= v && !cond {
                return Err(Error::Consistency(format!(
                    "verdict {} at R = {} violates its necessary condition",
                    verdict.name(),
                    scaled_r(m.q, m.r)
                )));
            }
        }
        Ok(CertificationResult {
            verdict,
            measurement: *m,
            delta_used: delta,
            correction_factor: c,
            big_r: scaled_r(m.q, m.r),
            boundaries,
            margins,
            r_conditions,
            boundary_q,
            seed: self.cfg.scan.seed,
        })
    }
}

/// Classify with a fresh default certifier.
pub fn classify(m: &Measurement) -> Result<CertificationResult> {
    Certifier::default().classify(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_zero_constants_give_the_expected_verdicts() {
        let cert = Certifier::default();
        let v = |d| cert.classify(&Measurement::new(0.1, 0.0, d)).unwrap().verdict;
        assert_eq!(v(0.3), Verdict::GenuineFourMode);
        assert_eq!(v(0.45), Verdict::AtLeastThreeMode);
        assert_eq!(v(0.6), Verdict::Entangled);
        assert_eq!(v(0.8), Verdict::Inconclusive);
        let (b, _) = cert.boundaries(0.1, 0.0).unwrap();
        assert!((b[0] - 0.75).abs() < 1e-9 && (b[1] - 0.5).abs() < 1e-9 && (b[2] - 5.0 / 12.0).abs() < 1e-9);
    }

    #[test]
    fn large_r_is_inconclusive() {
        let res = classify(&Measurement::new(0.1, 0.005, 0.01)).unwrap();
        assert_eq!(res.verdict, Verdict::Inconclusive);
        assert_eq!(res.r_conditions, [false; 3]);
    }

    #[test]
    fn necessary_condition_examples() {
        assert_eq!(necessary_conditions(0.1, 1e-3).unwrap(), [true; 3]);
        assert_eq!(necessary_conditions(0.1, 0.0).unwrap(), [true; 3]);
        assert!(necessary_conditions(0.0, 0.1).is_err());
    }

    #[test]
    fn lossless_measured_variance_is_uncorrected() {
        let res = classify(&Measurement::measured(0.1, 0.0, 0.3, 1.0)).unwrap();
        assert_eq!(res.correction_factor, 1.0);
        assert!(classify(&Measurement { transmission: None, ..Measurement::measured(0.1, 0.0, 0.3, 1.0) }).is_err());
    }
}
