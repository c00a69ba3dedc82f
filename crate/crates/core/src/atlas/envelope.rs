//! Lower convex envelope of class points `(q, r, q * delta)` sliced at fixed `q`.
//!
//! Mixing states of a class averages `q`, `r` and `q * delta` linearly while the
//! variance of the mixture is at least the weighted average, so the convex hull
//! of pure-state points bounds every mixture. The slice value at `(q0, r)` is
//! the optimum of a three-row linear program over the point cloud, solved here
//! with a small revised simplex.

use super::analytic::delta_one_three;
use crate::families::ClassTag;
use crate::numeric::logspace;
use super::scan::Witness4;
use crate::C64;
use nalgebra::{Matrix3, Matrix4, Vector3};
use rayon::prelude::*;

const BIG_M: f64 = 1e3;
const RC_TOL: f64 = 1e-13;

/// Cloud of `[q, r, q * delta]` points with a warm-started slice solver.
#[derive(Clone, Debug, Default)]
pub struct Envelope {
    pts: Vec<[f64; 3]>,
    warm: Option<[usize; 3]>,
}

impl Envelope {
    pub fn new(pts: Vec<[f64; 3]>) -> Self {
        Envelope { pts, warm: None }
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.pts
    }

    pub fn extend(&mut self, more: impl IntoIterator<Item = [f64; 3]>) {
        self.pts.extend(more);
        self.warm = None;
    }

    fn col(&self, j: usize) -> Vector3<f64> {
        let n = self.pts.len();
        if j < n {
            Vector3::new(1.0, self.pts[j][0], self.pts[j][1])
        } else {
            let mut e = Vector3::zeros();
            e[j - n] = 1.0;
            e
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.pts.len() {
            self.pts[j][2]
        } else {
            BIG_M
        }
    }

    fn inverse(&self, basis: &[usize; 3]) -> Option<Matrix3<f64>> {
        Matrix3::from_columns(&[self.col(basis[0]), self.col(basis[1]), self.col(basis[2])]).try_inverse()
    }

    /// Envelope variance at `(q0, r)`; `None` if the slice point is outside the hull.
    pub fn value(&mut self, q0: f64, r: f64) -> Option<f64> {
        self.lp(q0, r).map(|v| (v / q0).max(0.0))
    }

    /// Optimal `sum w f` at `(q0, r)`.
    pub fn lp(&mut self, q0: f64, r: f64) -> Option<f64> {
        let n = self.pts.len();
        let b = Vector3::new(1.0, q0, r);
        let cold = [n, n + 1, n + 2];
        let mut basis = cold;
        if let Some(w) = self.warm {
            if let Some(inv) = self.inverse(&w) {
                if (inv * b).iter().all(|&x| x >= -1e-12) {
                    basis = w;
                }
            }
        }
        let mut degenerate = 0;
        for _ in 0..5000 {
            let inv = match self.inverse(&basis) {
                Some(m) => m,
                None => {
                    basis = cold;
                    continue;
                }
            };
            let xb = inv * b;
            let cb = Vector3::new(self.cost(basis[0]), self.cost(basis[1]), self.cost(basis[2]));
            let y = inv.transpose() * cb;
            let bland = degenerate > 50;
            let mut enter = None;
            let mut best = -RC_TOL;
            for (j, p) in self.pts.iter().enumerate() {
                let d = p[2] - y[0] - y[1] * p[0] - y[2] * p[1];
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(e) = enter else {
                if basis.iter().zip(xb.iter()).any(|(&j, &x)| j >= n && x > 1e-9) {
                    self.warm = None;
                    return None;
                }
                self.warm = Some(basis);
                return Some(cb.dot(&xb));
            };
            let u = inv * self.col(e);
            let mut leave = None;
            let mut ratio = f64::INFINITY;
            for i in 0..3 {
                if u[i] > 1e-12 {
                    let t = xb[i].max(0.0) / u[i];
                    if t < ratio - 1e-15 || (bland && t <= ratio && leave.is_some_and(|l: usize| basis[i] < basis[l])) {
                        ratio = t;
                        leave = Some(i);
                    }
                }
            }
            let l = leave?;
            if ratio < 1e-15 {
                degenerate += 1;
            }
            basis[l] = e;
        }
        self.warm = None;
        None
    }
}

/// Closure points shared by every class: the vacuum, the large-amplitude limit
/// `(0, 1, 0)` and the `r = 0` limit `(1, 0, delta_r0)`.
pub fn limit_points(delta_r0: f64) -> Vec<[f64; 3]> {
    vec![[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, delta_r0]]
}

fn product_pqr(weights: &[f64]) -> (f64, f64, f64) {
    let p = 1.0 / weights.iter().map(|x| 1.0 + x).product::<f64>();
    let q = p * weights.iter().sum::<f64>();
    (p, q, (1.0 - p - q).max(0.0))
}

fn push(out: &mut Vec<[f64; 3]>, weights: &[f64], delta: f64) {
    let (_, q, r) = product_pqr(weights);
    if q > 0.0 && delta.is_finite() {
        out.push([q, r, q * delta]);
    }
}

/// Structured pure-state points for the ideal basis, covering the whole `(q, r)`
/// triangle with the known minimizing shapes of each class.
pub fn ideal_family_cloud(tag: ClassTag, n: usize) -> Vec<[f64; 3]> {
    let ideal = super::scan::Witness4::ideal();
    let g = logspace(1e-4, 1e2, n);
    let mut out = Vec::new();
    match tag {
        ClassTag::FullySeparable => {
            let patterns: [fn(f64, f64) -> [f64; 4]; 5] = [
                |a, b| [a, b, b, b],
                |a, b| [a, b, b, 0.0],
                |a, b| [a, b, 0.0, 0.0],
                |a, b| [a, a, b, b],
                |a, b| [a, a, b, 0.0],
            ];
            for pat in patterns {
                for &a in &g {
                    for &b in &g {
                        let x = pat(a, b);
                        let s: f64 = x.iter().sum();
                        let mags = x.map(|v| (v / s).sqrt());
                        let mut best = f64::INFINITY;
                        for m in 0..8u8 {
                            let sg = |bit: u8| if m & bit == 0 { 1.0 } else { -1.0 };
                            let v = [mags[0], sg(1) * mags[1], sg(2) * mags[2], sg(4) * mags[3]].map(|t| crate::C64::new(t, 0.0));
                            best = best.min(ideal.delta(&v));
                        }
                        push(&mut out, &x, best);
                    }
                }
            }
        }
        ClassTag::Biseparable2x2 => {
            for &a in &g {
                for &b in &g {
                    push(&mut out, &[a, b], 0.5 - 2.0 * a * b / ((a + b) * (a + b)));
                }
            }
        }
        ClassTag::Biseparable1x3 => {
            for &a in &g {
                for &b in &g {
                    push(&mut out, &[a, b], delta_one_three(a, b / 3.0));
                }
            }
        }
    }
    out
}

/// Structured pure-state cloud for a general detection model: the same weight
/// shapes as the ideal cloud under all mode permutations, with directions inside
/// each factor and relative phases taken from a coarse fixed set.
pub fn family_cloud(tag: ClassTag, n: usize, w: &Witness4) -> Vec<[f64; 3]> {
    if w.is_ideal() {
        return ideal_family_cloud(tag, n);
    }
    let g = logspace(1e-4, 1e2, n);
    let mut zero = zero_direction_points(tag, &g, w);
    zero.extend(shaped_cloud(tag, &g, w));
    zero
}

/// States whose single-excitation part is orthogonal to all projectors but
/// one, for every grouping of the class and every overall scale.
fn zero_direction_points(tag: ClassTag, g: &[f64], w: &Witness4) -> Vec<[f64; 3]> {
    let p = w.projectors();
    let vt = Matrix4::from_fn(|j, l| p.vectors[j][l].conj());
    let Some(inv) = vt.try_inverse() else { return Vec::new() };
    let groupings: Vec<Vec<Vec<usize>>> = match tag {
        ClassTag::FullySeparable => vec![(0..4).map(|k| vec![k]).collect()],
        ClassTag::Biseparable2x2 => vec![
            vec![vec![0, 1], vec![2, 3]],
            vec![vec![0, 2], vec![1, 3]],
            vec![vec![0, 3], vec![1, 2]],
        ],
        ClassTag::Biseparable1x3 => (0..4).map(|k| vec![vec![k], (0..4).filter(|&j| j != k).collect()]).collect(),
    };
    let mut out = Vec::new();
    for k in 0..4 {
        let col = inv.column(k);
        let n = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v: [C64; 4] = [0, 1, 2, 3].map(|l| col[l] / n);
        let d = w.delta(&v);
        for grouping in &groupings {
            let shares: Vec<f64> = grouping.iter().map(|gr| gr.iter().map(|&l| v[l].norm_sqr()).sum()).collect();
            for &s in g {
                let weights: Vec<f64> = shares.iter().map(|x| s * x).collect();
                push(&mut out, &weights, d);
            }
        }
    }
    out
}

fn shaped_cloud(tag: ClassTag, g: &[f64], w: &Witness4) -> Vec<[f64; 3]> {
    let quarter = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
    let phase_sets: Vec<[C64; 4]> = (0..64)
        .map(|m: usize| [C64::new(1.0, 0.0), quarter[m % 4], quarter[(m / 4) % 4], quarter[m / 16]])
        .collect();
    match tag {
        ClassTag::FullySeparable => {
            let patterns: [fn(f64, f64) -> [f64; 4]; 5] = [
                |a, b| [a, b, b, b],
                |a, b| [a, b, b, 0.0],
                |a, b| [a, b, 0.0, 0.0],
                |a, b| [a, a, b, b],
                |a, b| [a, a, b, 0.0],
            ];
            let perms = permutations4();
            g.par_iter()
                .flat_map_iter(|&a| {
                    let mut out = Vec::new();
                    for pat in patterns {
                        for &b in g {
                            let base = pat(a, b);
                            let s: f64 = base.iter().sum();
                            let mut seen: Vec<[usize; 4]> = Vec::new();
                            for perm in &perms {
                                // skip permutations that reproduce an earlier weight vector
                                let key = perm.map(|k| (base[k] * 1e6) as usize);
                                if seen.contains(&key) {
                                    continue;
                                }
                                seen.push(key);
                                let x = perm.map(|k| base[k]);
                                let mags = x.map(|v| (v / s).sqrt());
                                let best = phase_sets
                                    .iter()
                                    .map(|ph| w.delta(&[0, 1, 2, 3].map(|k| ph[k] * mags[k])))
                                    .fold(f64::INFINITY, f64::min);
                                push(&mut out, &x, best);
                            }
                        }
                    }
                    out
                })
                .collect()
        }
        ClassTag::Biseparable2x2 => {
            let dirs = factor_directions(2);
            let pairings = [[[0, 1], [2, 3]], [[0, 2], [1, 3]], [[0, 3], [1, 2]]];
            g.par_iter()
                .flat_map_iter(|&a| {
                    let mut out = Vec::new();
                    for &b in g {
                        let mut best = f64::INFINITY;
                        for pr in &pairings {
                            for da in &dirs {
                                for db in &dirs {
                                    let mut v = [C64::default(); 4];
                                    for k in 0..2 {
                                        v[pr[0][k]] = da[k] * a.sqrt();
                                        v[pr[1][k]] = db[k] * b.sqrt();
                                    }
                                    best = best.min(w.delta(&v));
                                }
                            }
                        }
                        push(&mut out, &[a, b], best);
                    }
                    out
                })
                .collect()
        }
        ClassTag::Biseparable1x3 => {
            let dirs = factor_directions(3);
            g.par_iter()
                .flat_map_iter(|&a| {
                    let mut out = Vec::new();
                    for &b in g {
                        let mut best = f64::INFINITY;
                        for single in 0..4 {
                            let rest: Vec<usize> = (0..4).filter(|&k| k != single).collect();
                            for d in &dirs {
                                let mut v = [C64::default(); 4];
                                v[single] = C64::new(a.sqrt(), 0.0);
                                for k in 0..3 {
                                    v[rest[k]] = d[k] * b.sqrt();
                                }
                                best = best.min(w.delta(&v));
                            }
                        }
                        push(&mut out, &[a, b], best);
                    }
                    out
                })
                .collect()
        }
    }
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    if (0..4).all(|k| p.contains(&k)) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Unit vectors of an `m`-mode factor: weight fractions in quarter steps,
/// relative phases in quarter turns.
fn factor_directions(m: usize) -> Vec<Vec<C64>> {
    let quarter = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
    let mut fracs: Vec<Vec<f64>> = Vec::new();
    let steps = 4;
    let mut rec = vec![0usize; m];
    fn fill(k: usize, left: usize, rec: &mut Vec<usize>, out: &mut Vec<Vec<f64>>, steps: usize) {
        if k + 1 == rec.len() {
            rec[k] = left;
            out.push(rec.iter().map(|&x| x as f64 / steps as f64).collect());
            return;
        }
        for x in 0..=left {
            rec[k] = x;
            fill(k + 1, left - x, rec, out, steps);
        }
    }
    fill(0, steps, &mut rec, &mut fracs, steps);
    // symmetric split for three modes is not on the quarter grid
    if m == 3 {
        fracs.push(vec![1.0 / 3.0; 3]);
    }
    let mut out = Vec::new();
    for f in fracs {
        for ph in 0..4usize.pow(m as u32 - 1) {
            let mut v = Vec::with_capacity(m);
            let mut code = ph;
            for (k, x) in f.iter().enumerate() {
                let z = if k == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    let q = quarter[code % 4];
                    code /= 4;
                    q
                };
                v.push(z * x.sqrt());
            }
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_on_a_simple_cloud() {
        // f = (r - 0.5)^2 sampled at q = 1 plus a cheap point at q = 0
        let mut pts: Vec<[f64; 3]> = (0..=10).map(|i| {
            let r = i as f64 / 10.0;
            [1.0, r, (r - 0.5) * (r - 0.5)]
        }).collect();
        let mut env = Envelope::new(pts.clone());
        assert!((env.lp(1.0, 0.45).unwrap() - 0.005).abs() < 1e-12);
        assert!((env.lp(1.0, 0.5).unwrap()).abs() < 1e-12);
        // outside the hull
        assert!(env.lp(1.0, 1.5).is_none());
        pts.push([0.0, 0.0, 0.0]);
        let mut env = Envelope::new(pts);
        // half vacuum, half the r = 0.6 point
        assert!((env.lp(0.5, 0.3).unwrap() - 0.5 * 0.01).abs() < 1e-12);
    }

    #[test]
    fn warm_start_matches_cold() {
        let cloud = ideal_family_cloud(ClassTag::Biseparable1x3, 30);
        let mut warm = Envelope::new(cloud.clone());
        for r in logspace(1e-5, 5e-3, 40) {
            let a = warm.value(0.1, r);
            let b = Envelope::new(cloud.clone()).value(0.1, r);
            assert_eq!(a.is_some(), b.is_some());
            if let (Some(a), Some(b)) = (a, b) {
                assert!((a - b).abs() < 1e-10, "{r}: {a} {b}");
            }
        }
    }
}
