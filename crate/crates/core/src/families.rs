//! Parametric state families for the separability classes, random points and
//! random mixtures drawn from them.
//!
//! Family states live in the four-mode basis with at most one excitation per
//! mode and up to four in total, which holds every product of single-mode
//! `|0> + e|1>` factors exactly.

use crate::fock::{Cutoffs, DensityMatrix, FamilyBlock, FockBasis, PureState, StateSnapshot};
use crate::numeric::{brent, logspace};
use crate::{seeds, Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassTag {
    #[serde(rename = "fs")]
    FullySeparable,
    #[serde(rename = "bisep22")]
    Biseparable2x2,
    #[serde(rename = "bisep13")]
    Biseparable1x3,
}

impl ClassTag {
    pub const ALL: [ClassTag; 3] = [ClassTag::FullySeparable, ClassTag::Biseparable2x2, ClassTag::Biseparable1x3];

    pub fn name(self) -> &'static str {
        match self {
            ClassTag::FullySeparable => "fs",
            ClassTag::Biseparable2x2 => "bisep22",
            ClassTag::Biseparable1x3 => "bisep13",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fs" => Ok(ClassTag::FullySeparable),
            "bisep22" => Ok(ClassTag::Biseparable2x2),
            "bisep13" => Ok(ClassTag::Biseparable1x3),
            other => Err(Error::Parse(format!("unknown class '{other}' (expected fs, bisep22 or bisep13)"))),
        }
    }

    /// Factor groups of the family product, as lists of modes.
    pub fn groups(self) -> &'static [&'static [usize]] {
        match self {
            ClassTag::FullySeparable => &[&[0], &[1], &[2], &[3]],
            ClassTag::Biseparable2x2 => &[&[0, 1], &[2, 3]],
            ClassTag::Biseparable1x3 => &[&[0], &[1, 2, 3]],
        }
    }
}

/// Shared basis for family states.
pub fn family_basis() -> Arc<FockBasis> {
    static B: OnceLock<Arc<FockBasis>> = OnceLock::new();
    B.get_or_init(|| FockBasis::new(4, Cutoffs { per_mode: 1, total: 4 }).expect("family basis")).clone()
}

/// A family member: `prod_g (|0..0> + sum_{k in g} e_k |1_k>)`, normalized.
#[derive(Clone, Debug)]
pub struct FamilyPoint {
    pub tag: ClassTag,
    pub epsilons: [C64; 4],
    pub state: PureState,
}

fn build_state(tag: ClassTag, eps: &[C64; 4]) -> Result<PureState> {
    let basis = family_basis();
    let mut amps = DVector::zeros(basis.dim());
    for (i, occ) in basis.kets().iter().enumerate() {
        let mut amp = C64::new(1.0, 0.0);
        for g in tag.groups() {
            let n: usize = g.iter().map(|&k| occ[k] as usize).sum();
            match n {
                0 => {}
                1 => amp *= g.iter().find(|&&k| occ[k] == 1).map(|&k| eps[k]).unwrap(),
                _ => amp = C64::default(),
            }
        }
        amps[i] = amp;
    }
    let norm: f64 = tag
        .groups()
        .iter()
        .map(|g| 1.0 + g.iter().map(|&k| eps[k].norm_sqr()).sum::<f64>())
        .product();
    if !norm.is_finite() {
        return Err(Error::InvalidParameter("family amplitudes overflow".into()));
    }
    PureState::new(basis, amps / C64::new(norm.sqrt(), 0.0))
}

impl FamilyPoint {
    pub fn new(tag: ClassTag, epsilons: [C64; 4]) -> Result<Self> {
        Ok(FamilyPoint { tag, epsilons, state: build_state(tag, &epsilons)? })
    }

    /// Rebuild the state from the stored parameters.
    pub fn rebuild(&self) -> Result<PureState> {
        build_state(self.tag, &self.epsilons)
    }

    /// Closed-form `(p, q, r)`.
    pub fn pqr(&self) -> (f64, f64, f64) {
        group_pqr(self.tag, &self.epsilons, 1.0)
    }

    /// Normalized single-excitation component (always pure for these families).
    pub fn one_vector(&self) -> [C64; 4] {
        let n = self.epsilons.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt();
        self.epsilons.map(|e| e / n)
    }

    pub fn snapshot(&self) -> StateSnapshot {
        let mut s = StateSnapshot::from_pure(&self.state);
        s.family = Some(FamilyBlock { tag: self.tag.name().into(), epsilons: self.epsilons.map(|e| [e.re, e.im]).to_vec() });
        s
    }

    pub fn from_snapshot(s: &StateSnapshot) -> Result<Self> {
        let fam = s.family.as_ref().ok_or_else(|| Error::Parse("snapshot has no family block".into()))?;
        let tag = ClassTag::parse(&fam.tag)?;
        if fam.epsilons.len() != 4 {
            return Err(Error::Parse("family block needs four epsilons".into()));
        }
        let eps = [0, 1, 2, 3].map(|k| C64::new(fam.epsilons[k][0], fam.epsilons[k][1]));
        Self::new(tag, eps)
    }
}

fn group_pqr(tag: ClassTag, eps: &[C64; 4], scale2: f64) -> (f64, f64, f64) {
    let xs: Vec<f64> = tag.groups().iter().map(|g| scale2 * g.iter().map(|&k| eps[k].norm_sqr()).sum::<f64>()).collect();
    let p = 1.0 / xs.iter().map(|x| 1.0 + x).product::<f64>();
    let q = p * xs.iter().sum::<f64>();
    (p, q, (1.0 - p - q).max(0.0))
}

pub fn fully_separable(eps: [C64; 4]) -> Result<FamilyPoint> {
    FamilyPoint::new(ClassTag::FullySeparable, eps)
}

/// `(|0> + e |1>) (|0> + et |1>)^3`: the one-parameter-pair family of the
/// fully separable boundary.
pub fn boundary_family_fs(e: C64, et: C64) -> Result<FamilyPoint> {
    FamilyPoint::new(ClassTag::FullySeparable, [e, et, et, et])
}

/// Pairs (1,2) and (3,4); `eps[k]` is the amplitude of mode `k` inside its pair.
pub fn bisep_2x2(eps: [C64; 4]) -> Result<FamilyPoint> {
    FamilyPoint::new(ClassTag::Biseparable2x2, eps)
}

/// Mode 1 alone, modes 2-4 sharing one excitation.
pub fn bisep_1x3(eps: [C64; 4]) -> Result<FamilyPoint> {
    FamilyPoint::new(ClassTag::Biseparable1x3, eps)
}

/// `p |W><W| + (1 - p) I / 4` on the single-excitation sector of the family basis.
pub fn werner_like(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("Werner weight {p} outside [0, 1]")));
    }
    let b = family_basis();
    let mut m = DMatrix::zeros(b.dim(), b.dim());
    for i in 0..4 {
        for j in 0..4 {
            let v = p * 0.25 + if i == j { (1.0 - p) * 0.25 } else { 0.0 };
            m[(b.single(i), b.single(j))] = C64::new(v, 0.0);
        }
    }
    DensityMatrix::new(b, m)
}

/// Mix `rho` with vacuum so that the single-excitation weight becomes `q`.
pub fn dilute(rho: &DensityMatrix, q: f64) -> Result<DensityMatrix> {
    let q0 = rho.excitation_profile().q;
    if q0 <= 0.0 || q > q0 + 1e-15 || q < 0.0 {
        return Err(Error::Unattainable(q));
    }
    let w = (q / q0).min(1.0);
    let vac = PureState::vacuum(rho.basis().clone()).density();
    DensityMatrix::mix(&[(w, rho.clone()), (1.0 - w, vac)])
}

/// Scale `s^2` hitting single-excitation weight `q`; picks one of the roots at random.
fn solve_scale<R: Rng>(tag: ClassTag, eps: &[C64; 4], q: f64, rng: &mut R) -> Option<f64> {
    let f = |ls: f64| group_pqr(tag, eps, ls.exp()).1 - q;
    let grid = logspace(1e-12, 1e12, 241).into_iter().map(f64::ln).collect::<Vec<_>>();
    let roots = crate::numeric::roots_on_grid(f, &grid, 1e-15);
    if roots.is_empty() {
        return None;
    }
    let pick = roots[rng.random_range(0..roots.len())];
    brent(f, pick - 1e-9, pick + 1e-9, 1e-16).or(Some(pick)).map(f64::exp)
}

fn random_point_with<R: Rng>(tag: ClassTag, q: f64, rng: &mut R) -> Result<FamilyPoint> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Unattainable(q));
    }
    if q == 0.0 {
        return FamilyPoint::new(tag, [C64::default(); 4]);
    }
    for _ in 0..10_000 {
        let eps = [(); 4].map(|_| {
            let rad = 10f64.powf(rng.random_range(-3.0..1.0));
            C64::from_polar(rad, rng.random_range(0.0..2.0 * PI))
        });
        let Some(s2) = solve_scale(tag, &eps, q, rng) else { continue };
        let s = s2.sqrt();
        let pt = FamilyPoint::new(tag, eps.map(|e| e * s))?;
        if (pt.pqr().1 - q).abs() < 1e-9 {
            return Ok(pt);
        }
    }
    Err(Error::Unattainable(q))
}

/// Random family point with single-excitation weight `q` (within 1e-9).
/// Radii are log-uniform on `[1e-3, 10]`, phases uniform, then all amplitudes
/// are rescaled to reach `q`.
pub fn random_family_point(tag: ClassTag, q: f64, seed: u64) -> Result<FamilyPoint> {
    random_point_with(tag, q, &mut seeds::rng(seed, &[0xfa, tag as u64]))
}

/// Random mixture of `terms` family points of one class, diluted with vacuum to
/// single-excitation weight exactly `q`. Each component has its own weight drawn
/// uniformly from `[q, (1 + q) / 2]` (exactly `q` for a single term) and the
/// mixing weights are Dirichlet(1, ..., 1).
pub fn random_mixture(tag: ClassTag, terms: usize, q: f64, seed: u64) -> Result<DensityMatrix> {
    if terms == 0 {
        return Err(Error::InvalidParameter("at least one term required".into()));
    }
    let mut rng = seeds::rng(seed, &[0x313, tag as u64, terms as u64]);
    let pts: Vec<FamilyPoint> = (0..terms)
        .map(|_| {
            let qm = if terms == 1 || q == 0.0 { q } else { rng.random_range(q..=(1.0 + q) / 2.0) };
            random_point_with(tag, qm, &mut rng)
        })
        .collect::<Result<_>>()?;
    let raw: Vec<f64> = (0..terms).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let qbar: f64 = w.iter().zip(&pts).map(|(w, p)| w * p.pqr().1).sum();
    let lam = if qbar > 0.0 { (q / qbar).min(1.0) } else { 1.0 };
    let mut comps: Vec<(f64, DensityMatrix)> = w.iter().zip(&pts).map(|(&wi, p)| (lam * wi, p.state.density())).collect();
    let vac_w = 1.0 - comps.iter().map(|c| c.0).sum::<f64>();
    comps.push((vac_w.max(0.0), PureState::vacuum(family_basis()).density()));
    let fix: f64 = comps.iter().map(|c| c.0).sum();
    comps.iter_mut().for_each(|c| c.0 /= fix);
    DensityMatrix::mix(&comps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn closed_form_profile_matches_state() {
        for tag in ClassTag::ALL {
            let pt = FamilyPoint::new(tag, [c(0.3), C64::new(0.1, 0.2), c(-0.7), C64::new(0.0, 1.3)]).unwrap();
            let prof = pt.state.excitation_profile();
            let (p, q, r) = pt.pqr();
            assert!((prof.p - p).abs() < 1e-14 && (prof.q - q).abs() < 1e-14 && (prof.r - r).abs() < 1e-14);
            let v = pt.one_vector();
            let blk = prof.one_block().unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert!((blk[(i, j)] - v[i] * v[j].conj()).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn single_term_mixture_hits_q() {
        let rho = random_mixture(ClassTag::Biseparable1x3, 1, 0.4, 3).unwrap();
        assert!((rho.excitation_profile().q - 0.4).abs() < 1e-9);
    }

    #[test]
    fn werner_limits() {
        let w = werner_like(1.0).unwrap().excitation_profile();
        assert!((w.q - 1.0).abs() < 1e-15);
        assert!(werner_like(1.5).is_err());
    }
}
