//! Pointwise minimum of the witness over pure states of a class at fixed
//! `(q, r)`.
//!
//! Product states are parametrized through the factor weights. The two
//! normalization constraints (fixed `p` and fixed `q`) are eliminated
//! exactly: for product-of-singles states two of the four mode weights are
//! free and the other two are the roots of a quadratic, for the two-factor
//! classes the factor weights themselves are the roots. The remaining freedom
//! (directions and phases inside each factor) is searched by multistart
//! Nelder-Mead.

use super::analytic::{bisep13_curve, bisep22_curve, fs_family_roots};
use crate::families::ClassTag;
use crate::numeric::{nelder_mead_restarted, NmOptions};
use crate::witness::{witness_basis, Projectors};
use crate::{seeds, Error, Result, C64};
use rand::Rng;
use std::f64::consts::PI;

/// Four-mode detection model used by the class scans.
#[derive(Clone, Debug)]
pub struct Witness4 {
    proj: Projectors,
    ideal: bool,
}

impl Witness4 {
    /// Hadamard basis with zero phases.
    pub fn ideal() -> Self {
        Witness4 { proj: witness_basis(4, &[0.0; 3]).expect("basis").projectors(), ideal: true }
    }

    pub fn from_projectors(proj: Projectors) -> Result<Self> {
        if proj.modes() != 4 || proj.vectors.iter().any(|v| v.len() != 4) {
            return Err(Error::ModeCount(proj.modes()));
        }
        let ideal = proj == Self::ideal().proj;
        Ok(Witness4 { proj, ideal })
    }

    pub fn is_ideal(&self) -> bool {
        self.ideal
    }
    pub fn projectors(&self) -> &Projectors {
        &self.proj
    }
    pub fn delta(&self, v: &[C64; 4]) -> f64 {
        self.proj.delta_vec(v)
    }
}

#[derive(Clone, Debug)]
pub struct ScanOptions {
    /// Total multistart budget per point (at least 20 is enforced).
    pub restarts: usize,
    pub seed: u64,
    /// Run the general search even where a closed form is known.
    pub exhaustive: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { restarts: 24, seed: 1, exhaustive: false }
    }
}

#[derive(Clone, Debug)]
pub struct PointMin {
    pub delta: f64,
    /// Normalized single-excitation amplitudes of the minimizer, when available.
    pub vector: Option<[C64; 4]>,
}

const PENALTY: f64 = 1e3;
const CHARTS: [(usize, usize, usize, usize); 6] = [(0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2), (1, 2, 0, 3), (1, 3, 0, 2), (2, 3, 0, 1)];
const PAIRINGS: [[usize; 4]; 3] = [[0, 1, 2, 3], [0, 2, 1, 3], [0, 3, 1, 2]];

fn nm_opts() -> NmOptions {
    NmOptions { step: 0.3, ftol: 1e-14, xtol: 1e-9, max_evals: 2500 }
}

fn pick_min(a: Option<PointMin>, b: PointMin) -> Option<PointMin> {
    match a {
        Some(a) if a.delta <= b.delta => Some(a),
        _ => Some(b),
    }
}

/// `(p, S = q/p, P = 1/p)`, or `None` if the point is outside the simplex.
fn sp(q: f64, r: f64) -> Option<(f64, f64, f64)> {
    let p = 1.0 - q - r;
    (q > 0.0 && r >= 0.0 && p > 0.0).then(|| (p, q / p, 1.0 / p))
}

/// Pure product-of-singles states exist at `(q, r)`.
pub fn fs_feasible(q: f64, r: f64) -> bool {
    match sp(q, r) {
        Some((_, s, pp)) => pp <= (1.0 + s / 4.0).powi(4) * (1.0 + 1e-13),
        None => false,
    }
}

/// Pure two-factor states (either biseparable class) exist at `(q, r)`.
pub fn pair_feasible(q: f64, r: f64) -> bool {
    match sp(q, r) {
        Some((p, s, _)) => s * s >= 4.0 * r / p * (1.0 - 1e-13),
        None => false,
    }
}

pub fn feasible(tag: ClassTag, q: f64, r: f64) -> bool {
    match tag {
        ClassTag::FullySeparable => fs_feasible(q, r),
        _ => pair_feasible(q, r),
    }
}

/// Minimum of the witness over pure states of `tag` at `(q, r)`; `None` where
/// the class has no pure state with these weights.
pub fn class_min(tag: ClassTag, q: f64, r: f64, w: &Witness4, opts: &ScanOptions) -> Option<PointMin> {
    if !feasible(tag, q, r) {
        return None;
    }
    match tag {
        ClassTag::FullySeparable => fs_min(q, r, w, opts),
        ClassTag::Biseparable2x2 => {
            if w.ideal && !opts.exhaustive {
                return bisep22_curve(q, r).map(|d| PointMin { delta: d, vector: None });
            }
            pair_min(tag, q, r, w, opts)
        }
        ClassTag::Biseparable1x3 => {
            if w.ideal && !opts.exhaustive {
                return bisep13_curve(q, r).map(|d| PointMin { delta: d, vector: None });
            }
            pair_min(tag, q, r, w, opts)
        }
    }
}

fn point_rng(opts: &ScanOptions, tag: ClassTag, q: f64, r: f64, combo: usize) -> rand_chacha::ChaCha8Rng {
    seeds::rng(opts.seed, &[tag as u64, q.to_bits(), r.to_bits(), combo as u64])
}

fn real_signs() -> impl Iterator<Item = [f64; 4]> {
    (0..8u8).map(|m| [1.0, if m & 1 == 0 { 1.0 } else { -1.0 }, if m & 2 == 0 { 1.0 } else { -1.0 }, if m & 4 == 0 { 1.0 } else { -1.0 }])
}

/// Best variance for mode weights `x` (summing to `s`), optionally with phases.
fn eval_weights(w: &Witness4, x: &[f64; 4], s: f64, phases: Option<&[f64]>) -> (f64, [C64; 4]) {
    let mags = x.map(|v| (v.max(0.0) / s).sqrt());
    match phases {
        Some(ph) => {
            let v = [C64::new(mags[0], 0.0), C64::from_polar(mags[1], ph[0]), C64::from_polar(mags[2], ph[1]), C64::from_polar(mags[3], ph[2])];
            (w.delta(&v), v)
        }
        None => {
            let mut best = (f64::INFINITY, [C64::default(); 4]);
            for sg in real_signs() {
                let v = [0, 1, 2, 3].map(|k| C64::new(sg[k] * mags[k], 0.0));
                let d = w.delta(&v);
                if d < best.0 {
                    best = (d, v);
                }
            }
            best
        }
    }
}

/// Solve the two constrained weights of a chart. Returns the weights or a
/// positive constraint violation.
fn fs_chart(s: f64, pp: f64, chart: (usize, usize, usize, usize), branch: usize, ti: f64, tj: f64) -> std::result::Result<[f64; 4], f64> {
    let (i, j, k, l) = chart;
    let xi = s * ti * ti;
    let xj = s * tj * tj;
    let sigma = s - xi - xj;
    let mu = pp / ((1.0 + xi) * (1.0 + xj)) - 1.0 - sigma;
    let disc = sigma * sigma - 4.0 * mu;
    let tol = 1e-14 * (1.0 + s);
    let viol = (-sigma).max(0.0) + (-mu - tol).max(0.0) + (-disc - tol).max(0.0);
    if viol > 0.0 {
        return Err(viol);
    }
    let sq = disc.max(0.0).sqrt();
    let (big, small) = (0.5 * (sigma + sq), (0.5 * (sigma - sq)).max(0.0));
    let mut x = [0.0; 4];
    x[i] = xi;
    x[j] = xj;
    if branch == 0 {
        x[k] = big;
        x[l] = small;
    } else {
        x[k] = small;
        x[l] = big;
    }
    Ok(x)
}

fn fs_min(q: f64, r: f64, w: &Witness4, opts: &ScanOptions) -> Option<PointMin> {
    let (_, s, pp) = sp(q, r)?;
    let complex = !w.ideal || opts.exhaustive;
    let mut best: Option<PointMin> = None;
    if r == 0.0 {
        for m in 0..4 {
            let mut v = [C64::default(); 4];
            v[m] = C64::new(1.0, 0.0);
            best = pick_min(best, PointMin { delta: w.delta(&v), vector: Some(v) });
        }
        return best;
    }
    // equal-weight family members placed on each mode
    let mut seeds_x: Vec<[f64; 4]> = Vec::new();
    for (x, y) in fs_family_roots(q, r) {
        for m in 0..4 {
            let mut xs = [y; 4];
            xs[m] = x;
            seeds_x.push(xs);
        }
    }
    for xs in &seeds_x {
        let (d, v) = eval_weights(w, xs, s, None);
        best = pick_min(best, PointMin { delta: d, vector: Some(v) });
    }
    let combos = CHARTS.len() * 2;
    let per = opts.restarts.max(20).div_ceil(combos);
    for (ci, &chart) in CHARTS.iter().enumerate() {
        for branch in 0..2 {
            let mut rng = point_rng(opts, ClassTag::FullySeparable, q, r, ci * 2 + branch);
            let obj = |z: &[f64]| match fs_chart(s, pp, chart, branch, z[0], z[1]) {
                Ok(x) => eval_weights(w, &x, s, if complex { Some(&z[2..5]) } else { None }).0,
                Err(v) => PENALTY + v,
            };
            let mut starts: Vec<Vec<f64>> = Vec::new();
            for xs in &seeds_x {
                let (i, j, k, l) = chart;
                if (branch == 0) == (xs[k] >= xs[l]) {
                    starts.push(vec![(xs[i] / s).sqrt(), (xs[j] / s).sqrt()]);
                }
            }
            starts.truncate(1);
            let mut tries = 0;
            while starts.len() < per + 1 && tries < 400 {
                tries += 1;
                let z = vec![rng.random::<f64>(), rng.random::<f64>()];
                if fs_chart(s, pp, chart, branch, z[0], z[1]).is_ok() {
                    starts.push(z);
                }
            }
            for mut z in starts {
                if complex {
                    z.extend((0..3).map(|_| rng.random_range(0.0..2.0 * PI)));
                }
                let (zb, _) = nelder_mead_restarted(obj, &z, &nm_opts(), 3);
                if let Ok(x) = fs_chart(s, pp, chart, branch, zb[0], zb[1]) {
                    let (d, v) = eval_weights(w, &x, s, if complex { Some(&zb[2..5]) } else { None });
                    best = pick_min(best, PointMin { delta: d, vector: Some(v) });
                }
            }
        }
    }
    best.map(|b| PointMin { delta: b.delta.max(0.0), ..b })
}

/// Two-factor classes: factor weights are fixed by `(q, r)` up to which factor
/// takes the larger root; directions inside the factors are searched.
fn pair_min(tag: ClassTag, q: f64, r: f64, w: &Witness4, opts: &ScanOptions) -> Option<PointMin> {
    let (p, s, _) = sp(q, r)?;
    let m = r / p;
    let disc = (s * s - 4.0 * m).max(0.0);
    let big = 0.5 * (s + disc.sqrt());
    let small = if big > 0.0 { m / big } else { 0.0 };
    let complex = !w.ideal || opts.exhaustive;
    let layouts = if tag == ClassTag::Biseparable2x2 { 3 } else { 4 };
    let per = opts.restarts.max(20).div_ceil(layouts * 2);
    let mut best: Option<PointMin> = None;
    for lay in 0..layouts {
        for branch in 0..2 {
            let (a, b) = if branch == 0 { (big, small) } else { (small, big) };
            let (sa, sb) = ((a / s).sqrt(), (b / s).sqrt());
            let build = |z: &[f64], flip: f64| -> [C64; 4] {
                let mut v = [C64::default(); 4];
                if tag == ClassTag::Biseparable2x2 {
                    let pm = PAIRINGS[lay];
                    let (ga, gb, gd) = if complex { (z[2], z[3], z[4]) } else { (0.0, 0.0, 0.0) };
                    v[pm[0]] = C64::new(sa * z[0].cos(), 0.0);
                    v[pm[1]] = C64::from_polar(sa * z[0].sin(), ga);
                    v[pm[2]] = C64::from_polar(flip * sb * z[1].cos(), gd);
                    v[pm[3]] = C64::from_polar(flip * sb * z[1].sin(), gd + gb);
                } else {
                    let others: Vec<usize> = (0..4).filter(|&k| k != lay).collect();
                    let (th, g1, g2) = if complex { (z[2], z[3], z[4]) } else { (0.0, 0.0, 0.0) };
                    v[lay] = C64::from_polar(sa, th);
                    v[others[0]] = C64::new(sb * z[0].cos(), 0.0);
                    v[others[1]] = C64::from_polar(sb * z[0].sin() * z[1].cos(), g1);
                    v[others[2]] = C64::from_polar(sb * z[0].sin() * z[1].sin(), g2);
                }
                v
            };
            let flips: &[f64] = if complex || tag == ClassTag::Biseparable1x3 { &[1.0] } else { &[1.0, -1.0] };
            let obj = |z: &[f64]| flips.iter().map(|&f| w.delta(&build(z, f))).fold(f64::INFINITY, f64::min);
            let mut rng = point_rng(opts, tag, q, r, lay * 2 + branch);
            for _ in 0..per {
                let dim = if complex { 5 } else { 2 };
                let z0: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                let (zb, _) = nelder_mead_restarted(obj, &z0, &nm_opts(), 3);
                for &f in flips {
                    let v = build(&zb, f);
                    best = pick_min(best, PointMin { delta: w.delta(&v), vector: Some(v) });
                }
            }
        }
    }
    best.map(|b| PointMin { delta: b.delta.max(0.0), ..b })
}
