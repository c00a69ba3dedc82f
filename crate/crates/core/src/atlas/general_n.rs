//! Minimum variance of single-excitation states that leave one mode empty, for
//! arbitrary mode counts. These are the `N - 1` mode biseparable states at zero
//! multi-excitation weight.

use crate::witness::dft_basis;
use crate::{seeds, Error, Result, C64};
use rand::Rng;
use rayon::prelude::*;

/// `(2N - 3) / (N (N - 1))`.
pub fn general_n_formula(n: usize) -> f64 {
    let n = n as f64;
    (2.0 * n - 3.0) / (n * (n - 1.0))
}

fn project(v: &mut [C64], empty: usize) {
    v[empty] = C64::default();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= n);
}

/// Maximize `sum_j |<W_j|v>|^4` over unit `v` with `v[empty] = 0` by fixed-point
/// ascent; the objective is convex so each step does not decrease it.
fn ascend(basis: &[Vec<C64>], mut v: Vec<C64>, empty: usize) -> f64 {
    project(&mut v, empty);
    let mut last = -1.0;
    for _ in 0..20_000 {
        let c: Vec<C64> = basis.iter().map(|w| w.iter().zip(&v).map(|(a, b)| a.conj() * b).sum()).collect();
        let f: f64 = c.iter().map(|z| z.norm_sqr().powi(2)).sum();
        if (f - last).abs() < 1e-16 {
            return f;
        }
        last = f;
        let mut g = vec![C64::default(); v.len()];
        for (w, cj) in basis.iter().zip(&c) {
            let k = *cj * cj.norm_sqr();
            for (gi, wi) in g.iter_mut().zip(w) {
                *gi += k * wi;
            }
        }
        project(&mut g, empty);
        v = g;
    }
    last
}

/// Numerical minimum of the variance over single-excitation states with one
/// empty mode, in the Fourier basis, together with the closed form.
pub fn verify_general_n(n: usize, seed: u64) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::ModeCount(n));
    }
    let basis = dft_basis(n, &vec![0.0; n - 1])?;
    let vecs = basis.vectors().to_vec();
    let restarts = 24u64;
    let best = (0..n as u64 * restarts)
        .into_par_iter()
        .map(|t| {
            let (empty, k) = ((t / restarts) as usize, t % restarts);
            let mut rng = seeds::rng(seed, &[n as u64, empty as u64, k]);
            let v: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            ascend(&vecs, v, empty)
        })
        .reduce(|| 0.0, f64::max);
    Ok((1.0 - best, general_n_formula(n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_modes() {
        let (num, formula) = verify_general_n(3, 5).unwrap();
        assert!((num - formula).abs() < 1e-6, "{num} vs {formula}");
        assert!((formula - 0.5).abs() < 1e-15);
    }
}
