//! W-like measurement bases and the outcome-variance witness.
//!
//! For four modes the basis rows follow the Hadamard sign pattern
//! `(+,+,+,+), (+,-,-,+), (+,+,-,-), (+,-,+,-)`, each with weight 1/2. Other
//! mode counts use the discrete Fourier basis. Local phases multiply the ket of
//! mode `k` by `exp(i phi_{k-1})` for `k >= 2`.

use crate::fock::{single_excitation_state, DensityMatrix, FockBasis, PureState};
use crate::numeric::{nelder_mead_restarted, NmOptions};
use crate::{seeds, Error, Result, C64};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

const HADAMARD_SIGNS: [[f64; 4]; 4] = [[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, -1.0, 1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0]];

/// Equal-weight single-excitation state in the default-cutoff basis.
pub fn w_state(modes: usize) -> Result<PureState> {
    if modes < 2 {
        return Err(Error::ModeCount(modes));
    }
    let b = FockBasis::with_default_cutoffs(modes)?;
    single_excitation_state(&b, &vec![C64::new(1.0, 0.0); modes])
}

#[derive(Clone, Debug)]
pub struct WitnessBasis {
    phases: Vec<f64>,
    /// `vectors[k][l]`: amplitude of basis vector `k` on mode `l`.
    vectors: Vec<Vec<C64>>,
}

fn check_phases(modes: usize, phases: &[f64]) -> Result<()> {
    if modes < 2 {
        return Err(Error::ModeCount(modes));
    }
    if phases.len() != modes - 1 {
        return Err(Error::InvalidParameter(format!("{} phases for {modes} modes", phases.len())));
    }
    Ok(())
}

fn phase_factors(phases: &[f64]) -> Vec<C64> {
    std::iter::once(C64::new(1.0, 0.0)).chain(phases.iter().map(|&p| C64::from_polar(1.0, p))).collect()
}

/// Witness basis: Hadamard pattern for four modes, Fourier basis otherwise.
pub fn witness_basis(modes: usize, phases: &[f64]) -> Result<WitnessBasis> {
    check_phases(modes, phases)?;
    if modes != 4 {
        return dft_basis(modes, phases);
    }
    let f = phase_factors(phases);
    let vectors = HADAMARD_SIGNS
        .iter()
        .map(|row| row.iter().zip(&f).map(|(&s, &e)| e * (0.5 * s)).collect())
        .collect();
    Ok(WitnessBasis { phases: phases.to_vec(), vectors })
}

/// Fourier basis `exp(2 pi i j k / N) / sqrt(N)` with local phases.
pub fn dft_basis(modes: usize, phases: &[f64]) -> Result<WitnessBasis> {
    check_phases(modes, phases)?;
    let f = phase_factors(phases);
    let norm = 1.0 / (modes as f64).sqrt();
    let vectors = (0..modes)
        .map(|j| {
            (0..modes)
                .map(|k| f[k] * C64::from_polar(norm, 2.0 * PI * (j * k) as f64 / modes as f64))
                .collect()
        })
        .collect();
    Ok(WitnessBasis { phases: phases.to_vec(), vectors })
}

impl WitnessBasis {
    pub fn modes(&self) -> usize {
        self.vectors.len()
    }
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }
    pub fn vectors(&self) -> &[Vec<C64>] {
        &self.vectors
    }
    /// Basis vectors as states of `basis`.
    pub fn states(&self, basis: &Arc<FockBasis>) -> Result<Vec<PureState>> {
        self.vectors.iter().map(|v| single_excitation_state(basis, v)).collect()
    }
    pub fn projectors(&self) -> Projectors {
        Projectors { vectors: self.vectors.clone(), weights: vec![1.0; self.vectors.len()] }
    }
}

/// Detection projectors with per-outcome efficiencies. Click probabilities are
/// `weights[k] <v_k|rho|v_k>` renormalized over outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct Projectors {
    pub vectors: Vec<Vec<C64>>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct VarianceResult {
    pub delta: f64,
    /// Outcome probabilities; for an orthonormal basis these are `<W_k|rho_1|W_k>`.
    pub overlaps: Vec<f64>,
}

impl Projectors {
    pub fn modes(&self) -> usize {
        self.vectors.len()
    }

    /// Outcome probabilities for a single-excitation amplitude vector.
    pub fn probabilities_vec(&self, v: &[C64]) -> Vec<f64> {
        let raw: Vec<f64> = self
            .vectors
            .iter()
            .zip(&self.weights)
            .map(|(w, &eta)| eta * w.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr())
            .collect();
        normalize(raw)
    }

    /// Outcome variance for a pure single-excitation vector.
    pub fn delta_vec(&self, v: &[C64]) -> f64 {
        let mut total = 0.0;
        let mut sq = 0.0;
        for (w, &eta) in self.vectors.iter().zip(&self.weights) {
            let m = eta * w.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr();
            total += m;
            sq += m * m;
        }
        1.0 - sq / (total * total)
    }

    /// Raw (unnormalized) weighted overlaps with an `N x N` block.
    pub fn raw_overlaps(&self, block: &DMatrix<C64>) -> Vec<f64> {
        self.vectors
            .iter()
            .zip(&self.weights)
            .map(|(w, &eta)| {
                let mut acc = C64::default();
                for (i, a) in w.iter().enumerate() {
                    for (j, b) in w.iter().enumerate() {
                        acc += a.conj() * block[(i, j)] * b;
                    }
                }
                eta * acc.re
            })
            .collect()
    }

    pub fn variance_block(&self, block: &DMatrix<C64>) -> VarianceResult {
        let overlaps = normalize(self.raw_overlaps(block));
        VarianceResult { delta: 1.0 - overlaps.iter().map(|p| p * p).sum::<f64>(), overlaps }
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let t: f64 = v.iter().sum();
    if t > 0.0 {
        v.iter_mut().for_each(|x| *x /= t);
    }
    v
}

/// Single-excitation block of a state that must live in that sector.
fn sector_block(rho: &DensityMatrix) -> Result<DMatrix<C64>> {
    let b = rho.basis();
    let s = b.sector(1);
    let m = rho.matrix();
    let leak: f64 = (0..b.dim()).filter(|i| !s.contains(i)).map(|i| m[(i, i)].re.abs()).sum();
    if leak > 1e-12 {
        return Err(Error::Leakage(leak));
    }
    Ok(m.view((s.start, s.start), (s.len(), s.len())).into_owned())
}

/// Outcome variance of a single-excitation state in the given basis.
pub fn variance(rho_one: &DensityMatrix, basis: &WitnessBasis) -> Result<VarianceResult> {
    if rho_one.basis().modes() != basis.modes() {
        return Err(Error::BasisMismatch("witness basis and state mode counts differ".into()));
    }
    Ok(basis.projectors().variance_block(&sector_block(rho_one)?))
}

/// Variance of the single-excitation part of an arbitrary state.
pub fn state_variance(rho: &DensityMatrix, basis: &WitnessBasis) -> Result<VarianceResult> {
    let prof = rho.excitation_profile();
    let rho_one = prof.rho_one.ok_or(Error::NoSingleExcitation)?;
    variance(&rho_one, basis)
}

/// Minimize the variance over local phases with seeded multistart Nelder-Mead.
/// Returns phases reduced to `[0, 2 pi)` and the minimum.
pub fn optimize_phases(rho_one: &DensityMatrix, seed: u64, restarts: usize) -> Result<(Vec<f64>, f64)> {
    let n = rho_one.basis().modes();
    if n < 2 {
        return Err(Error::ModeCount(n));
    }
    let block = sector_block(rho_one)?;
    let objective = |phi: &[f64]| {
        witness_basis(n, phi).map(|b| b.projectors().variance_block(&block).delta).unwrap_or(f64::INFINITY)
    };
    let restarts = restarts.max(20);
    let runs: Vec<(Vec<f64>, f64)> = (0..restarts as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds::rng(seed, &[0x9a5e, i]);
            let x0: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            nelder_mead_restarted(objective, &x0, &NmOptions { step: 0.5, ..Default::default() }, 4)
        })
        .collect();
    let (x, v) = runs.into_iter().fold((Vec::new(), f64::INFINITY), |acc, r| if r.1 < acc.1 { r } else { acc });
    Ok((x.into_iter().map(|p| p.rem_euclid(2.0 * PI)).collect(), v.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w_state_has_zero_variance() {
        let w = w_state(4).unwrap().density();
        let b = witness_basis(4, &[0.0; 3]).unwrap();
        let res = state_variance(&w, &b).unwrap();
        assert!(res.delta.abs() < 1e-14);
        assert!((res.overlaps[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bases_are_orthonormal() {
        for n in 2..9 {
            let b = witness_basis(n, &vec![0.4; n - 1]).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let ip: C64 = b.vectors()[i].iter().zip(&b.vectors()[j]).map(|(a, c)| a.conj() * c).sum();
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - C64::new(e, 0.0)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn mixed_single_excitation_state_has_maximal_variance() {
        let b = FockBasis::with_default_cutoffs(4).unwrap();
        let mut m = DMatrix::zeros(b.dim(), b.dim());
        for k in 1..5 {
            m[(k, k)] = C64::new(0.25, 0.0);
        }
        let rho = DensityMatrix::new(b, m).unwrap();
        let res = variance(&rho, &witness_basis(4, &[0.0; 3]).unwrap()).unwrap();
        assert!((res.delta - 0.75).abs() < 1e-14);
    }

    #[test]
    fn leakage_is_rejected() {
        let rho = crate::fock::PureState::vacuum(FockBasis::with_default_cutoffs(4).unwrap()).density();
        assert!(matches!(variance(&rho, &witness_basis(4, &[0.0; 3]).unwrap()), Err(Error::Leakage(_))));
    }
}
