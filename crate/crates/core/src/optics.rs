//! Four-mode measurement network: beamsplitter amplitudes, path losses,
//! threshold detectors, the conditional projectors a click selects, sector
//! propagation under balanced loss and Monte Carlo click statistics.
//!
//! Beamsplitters 1 and 2 mix inputs (1,2) and (3,4); beamsplitters 3 and 4 mix
//! their outputs toward detectors (1,3) and (2,4). A photon entering mode `l`
//! reaches detector `k` with amplitude `A[l][k]`; a click at `k` projects the
//! single-excitation input onto `sum_l conj(A[l][k]) |l>`.

use crate::fock::DensityMatrix;
use crate::witness::Projectors;
use crate::{seeds, Error, Result, C64};
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

const UNITARITY_TOL: f64 = 1e-12;

/// Input phase shifters that turn the projectors of a network with real
/// transmissions and imaginary reflections into the real W basis.
pub const ALIGNING_PHASES: [f64; 4] = [0.0, -FRAC_PI_2, -FRAC_PI_2, PI];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Beamsplitter {
    pub t: [f64; 2],
    pub r: [f64; 2],
}

impl Beamsplitter {
    /// Real transmission `sqrt(tprob)`, imaginary reflection `i sqrt(1 - tprob)`.
    pub fn with_transmission(tprob: f64) -> Self {
        Beamsplitter { t: [tprob.sqrt(), 0.0], r: [0.0, (1.0 - tprob).sqrt()] }
    }
    pub fn t(&self) -> C64 {
        C64::new(self.t[0], self.t[1])
    }
    pub fn r(&self) -> C64 {
        C64::new(self.r[0], self.r[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub beamsplitters: [Beamsplitter; 4],
    /// `transmissions[l][k]`: loss amplitude from input `l` to detector `k`.
    #[serde(rename = "path_transmissions")]
    pub transmissions: [[[f64; 2]; 4]; 4],
    /// Propagation phase on each `l -> k` path. Phases of the form
    /// `a[l] + b[k]` (input and detector arms) keep the lossless network
    /// unitary; arbitrary per-path phases do not.
    #[serde(default)]
    pub phases: [[f64; 4]; 4],
}

impl NetworkSpec {
    pub fn balanced() -> Self {
        Self::with_splitting(0.5)
    }

    /// All four beamsplitters with transmission probability `tprob`, no loss,
    /// input phases set to [`ALIGNING_PHASES`].
    pub fn with_splitting(tprob: f64) -> Self {
        NetworkSpec {
            beamsplitters: [Beamsplitter::with_transmission(tprob); 4],
            transmissions: [[[1.0, 0.0]; 4]; 4],
            phases: ALIGNING_PHASES.map(|p| [p; 4]),
        }
    }

    /// Returns a copy whose input arm `l` transmits probability `prob`.
    pub fn with_lossy_input(mut self, l: usize, prob: f64) -> Self {
        for k in 0..4 {
            let t = C64::new(self.transmissions[l][k][0], self.transmissions[l][k][1]) * prob.sqrt();
            self.transmissions[l][k] = [t.re, t.im];
        }
        self
    }

    /// Uniform loss amplitude `sqrt(prob)` on every path.
    pub fn with_balanced_loss(mut self, prob: f64) -> Self {
        for l in 0..4 {
            self = self.with_lossy_input(l, prob);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (k, bs) in self.beamsplitters.iter().enumerate() {
            let (t, r) = (bs.t(), bs.r());
            let norm = t.norm_sqr() + r.norm_sqr() - 1.0;
            let cross = t.conj() * r + t * r.conj();
            if norm.abs() > UNITARITY_TOL || cross.norm() > UNITARITY_TOL {
                return Err(Error::InvalidParameter(format!("beamsplitter {} is not unitary", k + 1)));
            }
        }
        for row in &self.transmissions {
            for t in row {
                if C64::new(t[0], t[1]).norm() > 1.0 + UNITARITY_TOL {
                    return Err(Error::InvalidParameter("transmission amplitude exceeds 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.transmissions.iter().flatten().all(|t| (C64::new(t[0], t[1]).norm() - 1.0).abs() < UNITARITY_TOL)
    }

    /// Lossless path amplitudes `A[l][k]`.
    pub fn path_amplitudes(&self) -> [[C64; 4]; 4] {
        let b = &self.beamsplitters;
        let (t1, r1, t2, r2, t3, r3, t4, r4) = (b[0].t(), b[0].r(), b[1].t(), b[1].r(), b[2].t(), b[2].r(), b[3].t(), b[3].r());
        let by_output = [
            [r1 * r3, t1 * r3, r2 * t3, t2 * t3],
            [t1 * r4, r1 * r4, t2 * t4, r2 * t4],
            [r1 * t3, t1 * t3, r2 * r3, t2 * r3],
            [t1 * t4, r1 * t4, t2 * r4, r2 * r4],
        ];
        let mut a = [[C64::default(); 4]; 4];
        for l in 0..4 {
            for k in 0..4 {
                a[l][k] = by_output[k][l];
            }
        }
        a
    }

    /// Path amplitudes including losses and propagation phases.
    pub fn lossy_amplitudes(&self) -> [[C64; 4]; 4] {
        let mut a = self.path_amplitudes();
        for l in 0..4 {
            for k in 0..4 {
                let t = C64::new(self.transmissions[l][k][0], self.transmissions[l][k][1]);
                a[l][k] *= t * C64::from_polar(1.0, self.phases[l][k]);
            }
        }
        a
    }

    /// Probability that a photon entering mode `l` is detected anywhere.
    pub fn input_efficiencies(&self) -> [f64; 4] {
        let a = self.lossy_amplitudes();
        [0, 1, 2, 3].map(|l| a[l].iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: NetworkSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug)]
pub struct ConditionalProjectors {
    /// Normalized projector states, `states[k][l]` = amplitude on input mode `l`.
    pub states: [[C64; 4]; 4],
    /// Squared norms of the unnormalized states (detection efficiency per output).
    pub efficiencies: [f64; 4],
    pub gram: [[C64; 4]; 4],
}

impl ConditionalProjectors {
    pub fn projectors(&self) -> Projectors {
        Projectors { vectors: self.states.iter().map(|s| s.to_vec()).collect(), weights: self.efficiencies.to_vec() }
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn gram_deviation(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                m = m.max((self.gram[i][j] - C64::new(e, 0.0)).norm());
            }
        }
        m
    }
}

fn build_projectors(a: [[C64; 4]; 4]) -> Result<ConditionalProjectors> {
    let mut states = [[C64::default(); 4]; 4];
    let mut eff = [0.0; 4];
    for k in 0..4 {
        let raw: [C64; 4] = [0, 1, 2, 3].map(|l| a[l][k].conj());
        let n2: f64 = raw.iter().map(|z| z.norm_sqr()).sum();
        if n2 <= 1e-300 {
            return Err(Error::InvalidParameter(format!("detector {} never clicks", k + 1)));
        }
        eff[k] = n2;
        states[k] = raw.map(|z| z / n2.sqrt());
    }
    let mut gram = [[C64::default(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            gram[i][j] = (0..4).map(|l| states[i][l].conj() * states[j][l]).sum();
        }
    }
    Ok(ConditionalProjectors { states, efficiencies: eff, gram })
}

/// Projectors of the lossless network (losses in the spec are ignored,
/// propagation phases kept).
pub fn wtilde_states(spec: &NetworkSpec) -> Result<ConditionalProjectors> {
    spec.validate()?;
    let lossless = NetworkSpec { transmissions: [[[1.0, 0.0]; 4]; 4], ..spec.clone() };
    build_projectors(lossless.lossy_amplitudes())
}

/// Normalized, generally non-orthogonal projectors of the lossy network.
pub fn lossy_projectors(spec: &NetworkSpec) -> Result<ConditionalProjectors> {
    spec.validate()?;
    build_projectors(spec.lossy_amplitudes())
}

#[derive(Clone, Debug)]
pub struct MeasuredVariance {
    pub delta_m: f64,
    /// Click distribution conditioned on at least one click.
    pub probabilities: Vec<f64>,
    /// Single-photon click distribution `P^(1)_{1,k}`.
    pub single_photon: Vec<f64>,
    /// Fraction of clicks caused by the single-excitation sector.
    pub q1: f64,
    /// Detector receiving all multi-photon clicks.
    pub routed_to: usize,
    /// Absolute probability of at least one click.
    pub click_probability: f64,
}

/// Click statistics with threshold detectors. Multi-excitation components
/// contribute their probability of producing any click, all routed to the most
/// likely single-photon outcome (the least favourable assignment for the witness).
pub fn measured_variance(rho: &DensityMatrix, spec: &NetworkSpec) -> Result<MeasuredVariance> {
    if rho.basis().modes() != 4 {
        return Err(Error::ModeCount(rho.basis().modes()));
    }
    let proj = lossy_projectors(spec)?;
    let basis = rho.basis();
    let s1 = basis.sector(1);
    let m = rho.matrix();
    let block = m.view((s1.start, s1.start), (4, 4)).into_owned();
    let raw = proj.projectors().raw_overlaps(&block);
    let w1: f64 = raw.iter().sum();
    let eta = spec.input_efficiencies();
    let mut w2 = 0.0;
    for i in s1.end..basis.dim() {
        let occ = &basis.kets()[i];
        let miss: f64 = occ.iter().zip(&eta).map(|(&n, &e)| (1.0 - e).powi(n as i32)).product();
        w2 += m[(i, i)].re * (1.0 - miss);
    }
    let total = w1 + w2;
    if total <= 0.0 {
        return Err(Error::Infeasible("the state never produces a click".into()));
    }
    let single: Vec<f64> = if w1 > 0.0 { raw.iter().map(|x| x / w1).collect() } else { vec![0.0; 4] };
    let j = (0..4).fold(0, |b, k| if single[k] > single[b] { k } else { b });
    let probabilities: Vec<f64> = (0..4).map(|k| (w1 * single[k] + if k == j { w2 } else { 0.0 }) / total).collect();
    let delta_m = 1.0 - probabilities.iter().map(|p| p * p).sum::<f64>();
    Ok(MeasuredVariance { delta_m, probabilities, single_photon: single, q1: w1 / total, routed_to: j, click_probability: total })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossPropagation {
    pub p_prime0: f64,
    pub p_prime1: f64,
    pub p_prime2: f64,
    pub q_prime1: f64,
    pub q1: f64,
    pub c: f64,
}

/// Sector weights after uniform transmission `t2 = |T|^2`, to leading order in
/// the two-photon sector.
pub fn apply_balanced_loss(p0: f64, p1: f64, p2: f64, t2: f64) -> Result<LossPropagation> {
    if !(t2 > 0.0 && t2 <= 1.0) {
        return Err(Error::InvalidParameter(format!("transmission {t2} outside (0, 1]")));
    }
    if [p0, p1, p2].iter().any(|&p| p < 0.0) || p1 + p2 <= 0.0 {
        return Err(Error::InvalidParameter("sector weights must be non-negative with p1 + p2 > 0".into()));
    }
    let l = 1.0 - t2;
    let p_prime0 = p0 + l * p1 + l * l * p2;
    let p_prime1 = t2 * p1 + 2.0 * t2 * l * p2;
    let p_prime2 = t2 * t2 * p2;
    let q_prime1 = t2 * p1 / p_prime1;
    let q1 = p_prime1 * q_prime1 / (p_prime1 + p_prime2);
    Ok(LossPropagation { p_prime0, p_prime1, p_prime2, q_prime1, q1, c: 1.0 / q1 })
}

/// `c = (p1 + (2 - |T|^2) p_{>=2}) / p1`.
pub fn correction_factor(p1: f64, p_ge2: f64, t2: f64) -> Result<f64> {
    if p1 <= 0.0 {
        return Err(Error::NoSingleExcitation);
    }
    if !(t2 > 0.0 && t2 <= 1.0) {
        return Err(Error::InvalidParameter(format!("transmission {t2} outside (0, 1]")));
    }
    Ok((p1 + (2.0 - t2) * p_ge2) / p1)
}

/// Small-`q` form `1 + (3/8)(2 - |T|^2) p1 R`.
pub fn correction_factor_approx(p1: f64, big_r: f64, t2: f64) -> f64 {
    1.0 + 0.375 * (2.0 - t2) * p1 * big_r
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClickCounts {
    pub counts: Vec<u64>,
    pub no_click: u64,
    pub estimated: Vec<f64>,
    pub delta_m_hat: f64,
}

impl ClickCounts {
    pub fn from_counts(counts: Vec<u64>, no_click: u64) -> Result<Self> {
        let clicks: u64 = counts.iter().sum();
        if clicks == 0 {
            return Err(Error::Infeasible("no clicks recorded".into()));
        }
        let estimated: Vec<f64> = counts.iter().map(|&c| c as f64 / clicks as f64).collect();
        let delta_m_hat = 1.0 - estimated.iter().map(|p| p * p).sum::<f64>();
        Ok(ClickCounts { counts, no_click, estimated, delta_m_hat })
    }
}

const SHOT_BLOCKS: u64 = 16;

/// Sample `shots` trials of the detection model. The work is split into a fixed
/// number of blocks with derived seeds, so results do not depend on the thread count.
pub fn simulate_clicks(rho: &DensityMatrix, spec: &NetworkSpec, shots: u64, seed: u64) -> Result<ClickCounts> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be positive".into()));
    }
    let mv = measured_variance(rho, spec)?;
    let absolute: Vec<f64> = mv.probabilities.iter().map(|p| p * mv.click_probability).collect();
    let blocks: Vec<Vec<u64>> = (0..SHOT_BLOCKS)
        .into_par_iter()
        .map(|b| {
            let n = shots / SHOT_BLOCKS + u64::from(b < shots % SHOT_BLOCKS);
            let mut rng = seeds::rng(seed, &[0xc11c, b]);
            let mut left = n;
            let mut mass = 1.0;
            let mut out = vec![0u64; 5];
            for (k, &p) in absolute.iter().enumerate() {
                let c = if left == 0 || mass <= 0.0 {
                    0
                } else {
                    let pk = (p / mass).clamp(0.0, 1.0);
                    Binomial::new(left, pk).map(|d| d.sample(&mut rng)).unwrap_or(0)
                };
                out[k] = c;
                left -= c;
                mass -= p;
            }
            out[4] = left;
            out
        })
        .collect();
    let mut counts = vec![0u64; 4];
    let mut none = 0;
    for b in blocks {
        for k in 0..4 {
            counts[k] += b[k];
        }
        none += b[4];
    }
    ClickCounts::from_counts(counts, none)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_network_is_a_phased_hadamard_basis() {
        let spec = NetworkSpec { phases: [[0.0; 4]; 4], ..NetworkSpec::balanced() };
        let p = wtilde_states(&spec).unwrap();
        assert!(p.gram_deviation() < 1e-14);
        for s in &p.states {
            for z in s {
                assert!((z.norm() - 0.5).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn aligned_network_projects_onto_the_w_basis() {
        let p = wtilde_states(&NetworkSpec::balanced()).unwrap();
        let w = crate::witness::witness_basis(4, &[0.0; 3]).unwrap();
        for v in w.vectors() {
            let best = p
                .states
                .iter()
                .map(|s| s.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<C64>().norm())
                .fold(0.0, f64::max);
            assert!((best - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn mirror_splits_two_outputs_into_pairs() {
        let mut spec = NetworkSpec::balanced();
        spec.beamsplitters[3] = Beamsplitter { t: [0.0, 0.0], r: [1.0, 0.0] };
        let p = wtilde_states(&spec).unwrap();
        assert_eq!(p.states[1][2], C64::default());
        assert_eq!(p.states[1][3], C64::default());
        assert_eq!(p.states[3][0], C64::default());
        assert_eq!(p.states[3][1], C64::default());
    }

    #[test]
    fn loss_examples() {
        let lp = apply_balanced_loss(0.0, 1.0, 0.0, 0.6).unwrap();
        assert!((lp.p_prime0 - 0.4).abs() < 1e-15 && (lp.p_prime1 - 0.6).abs() < 1e-15);
        assert_eq!(lp.q1, 1.0);
        let lp = apply_balanced_loss(0.89, 0.1, 0.01, 0.6).unwrap();
        assert!((lp.q1 - 0.1 / 0.114).abs() < 1e-12);
        assert!((correction_factor(0.1, 0.01, 0.6).unwrap() - 1.14).abs() < 1e-12);
        assert!(apply_balanced_loss(0.5, 0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn dead_detector_is_rejected() {
        let mut spec = NetworkSpec::balanced();
        for l in 0..4 {
            spec.transmissions[l][2] = [0.0, 0.0];
        }
        assert!(lossy_projectors(&spec).is_err());
    }
}
