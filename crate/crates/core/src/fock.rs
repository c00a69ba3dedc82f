//! Truncated multimode Fock space, pure and mixed states, excitation profiles.
//!
//! Basis ordering: sectors by ascending total excitation number; inside a sector,
//! occupation tuples in descending lexicographic order, so excitations on
//! lower-indexed modes come first. For four modes the single-excitation kets are
//! `|1000>, |0100>, |0010>, |0001>` and the two-excitation sector starts with
//! `|2000>, |1100>, |1010>, ...`.

use crate::{Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-12;
pub const EIGEN_TOL: f64 = -1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Cutoffs {
    pub per_mode: u8,
    pub total: u8,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Cutoffs { per_mode: 2, total: 2 }
    }
}

#[derive(Debug)]
pub struct FockBasis {
    modes: usize,
    cutoffs: Cutoffs,
    kets: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    sectors: Vec<std::ops::Range<usize>>,
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes && self.cutoffs == other.cutoffs
    }
}

fn sector_kets(modes: usize, n: u8, per_mode: u8) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<u8>, left: u8, modes: usize, per_mode: u8, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == modes {
            if left == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        for k in (0..=left.min(per_mode)).rev() {
            prefix.push(k);
            rec(prefix, left - k, modes, per_mode, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, modes, per_mode, &mut out);
    out
}

impl FockBasis {
    pub fn new(modes: usize, cutoffs: Cutoffs) -> Result<Arc<Self>> {
        if modes == 0 {
            return Err(Error::ModeCount(0));
        }
        if cutoffs.per_mode == 0 || cutoffs.total == 0 {
            return Err(Error::InvalidParameter("cutoffs must be positive".into()));
        }
        let mut kets = Vec::new();
        let mut sectors = Vec::new();
        for n in 0..=cutoffs.total {
            let start = kets.len();
            kets.extend(sector_kets(modes, n, cutoffs.per_mode));
            sectors.push(start..kets.len());
        }
        let index = kets.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Ok(Arc::new(FockBasis { modes, cutoffs, kets, index, sectors }))
    }

    pub fn with_default_cutoffs(modes: usize) -> Result<Arc<Self>> {
        Self::new(modes, Cutoffs::default())
    }

    pub fn modes(&self) -> usize {
        self.modes
    }
    pub fn cutoffs(&self) -> Cutoffs {
        self.cutoffs
    }
    pub fn dim(&self) -> usize {
        self.kets.len()
    }
    pub fn kets(&self) -> &[Vec<u8>] {
        &self.kets
    }
    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }
    /// Index range of the sector with `n` total excitations (empty above the cutoff).
    pub fn sector(&self, n: usize) -> std::ops::Range<usize> {
        self.sectors.get(n).cloned().unwrap_or(0..0)
    }
    pub fn excitation(&self, i: usize) -> usize {
        self.kets[i].iter().map(|&k| k as usize).sum()
    }
    /// Basis index of the single excitation in `mode`.
    pub fn single(&self, mode: usize) -> usize {
        1 + mode
    }
}

fn same_basis(a: &FockBasis, b: &FockBasis) -> Result<()> {
    if a != b {
        return Err(Error::BasisMismatch(format!(
            "{} modes {:?} vs {} modes {:?}",
            a.modes, a.cutoffs, b.modes, b.cutoffs
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PureState {
    basis: Arc<FockBasis>,
    amps: DVector<C64>,
}

impl PureState {
    pub fn new(basis: Arc<FockBasis>, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!("{} amplitudes for dimension {}", amps.len(), basis.dim())));
        }
        let n2 = amps.norm_squared();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(PureState { basis, amps })
    }

    /// Build from occupation/amplitude pairs. Repeated occupations accumulate.
    pub fn from_map<I>(basis: Arc<FockBasis>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, C64)>,
    {
        let mut amps = DVector::zeros(basis.dim());
        for (occ, a) in entries {
            let i = basis.index_of(&occ).ok_or(Error::OutsideBasis { occupation: occ })?;
            amps[i] += a;
        }
        Self::new(basis, amps)
    }

    /// Normalize an unnormalized amplitude vector.
    pub fn normalized(basis: Arc<FockBasis>, amps: DVector<C64>) -> Result<Self> {
        let n = amps.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized(n * n));
        }
        Self::new(basis, amps / C64::new(n, 0.0))
    }

    pub fn vacuum(basis: Arc<FockBasis>) -> Self {
        let mut amps = DVector::zeros(basis.dim());
        amps[0] = C64::new(1.0, 0.0);
        PureState { basis, amps }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }
    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }
    pub fn amplitude(&self, occ: &[u8]) -> C64 {
        self.basis.index_of(occ).map(|i| self.amps[i]).unwrap_or_default()
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix { basis: self.basis.clone(), matrix: &self.amps * self.amps.adjoint() }
    }

    /// Re-express the state in a basis with different cutoffs.
    pub fn embed(&self, target: &Arc<FockBasis>) -> Result<Self> {
        if target.modes != self.basis.modes {
            return Err(Error::BasisMismatch("mode counts differ".into()));
        }
        let mut amps = DVector::zeros(target.dim());
        for (i, occ) in self.basis.kets.iter().enumerate() {
            let a = self.amps[i];
            match target.index_of(occ) {
                Some(j) => amps[j] = a,
                None if a.norm_sqr() > 0.0 => return Err(Error::OutsideBasis { occupation: occ.clone() }),
                None => {}
            }
        }
        Ok(PureState { basis: target.clone(), amps })
    }

    pub fn excitation_profile(&self) -> ExcitationProfile {
        profile_from_parts(&self.basis, |i| self.amps[i].norm_sqr(), |i, j| self.amps[i] * self.amps[j].conj())
    }
}

/// Tensor product. Result cutoffs: per-mode maximum of the two, total the sum.
pub fn tensor(a: &PureState, b: &PureState) -> Result<PureState> {
    let cut = Cutoffs {
        per_mode: a.basis.cutoffs.per_mode.max(b.basis.cutoffs.per_mode),
        total: a.basis.cutoffs.total.saturating_add(b.basis.cutoffs.total),
    };
    tensor_into(a, b, cut, false)
}

/// Tensor product into explicit cutoffs; fails if truncation drops weight >= 1e-12.
pub fn tensor_truncated(a: &PureState, b: &PureState, cutoffs: Cutoffs) -> Result<PureState> {
    tensor_into(a, b, cutoffs, true)
}

fn tensor_into(a: &PureState, b: &PureState, cutoffs: Cutoffs, allow_drop: bool) -> Result<PureState> {
    let basis = FockBasis::new(a.basis.modes + b.basis.modes, cutoffs)?;
    let mut amps = DVector::zeros(basis.dim());
    let mut dropped = 0.0;
    let mut occ = Vec::with_capacity(basis.modes);
    for (i, oa) in a.basis.kets.iter().enumerate() {
        if a.amps[i] == C64::default() {
            continue;
        }
        for (j, ob) in b.basis.kets.iter().enumerate() {
            let amp = a.amps[i] * b.amps[j];
            if amp == C64::default() {
                continue;
            }
            occ.clear();
            occ.extend_from_slice(oa);
            occ.extend_from_slice(ob);
            match basis.index_of(&occ) {
                Some(k) => amps[k] = amp,
                None => dropped += amp.norm_sqr(),
            }
        }
    }
    if dropped > 0.0 && (!allow_drop || dropped >= 1e-12) {
        return Err(Error::Truncation(dropped));
    }
    if dropped > 0.0 {
        return PureState::normalized(basis, amps);
    }
    Ok(PureState { basis, amps })
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    basis: Arc<FockBasis>,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(basis: Arc<FockBasis>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = basis.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::BasisMismatch(format!("matrix {}x{} for dimension {d}", matrix.nrows(), matrix.ncols())));
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensity(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let sym = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = sym.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < EIGEN_TOL {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(DensityMatrix { basis, matrix })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Convex combination of states on a common basis.
    pub fn mix(terms: &[(f64, DensityMatrix)]) -> Result<Self> {
        let first = terms.first().ok_or(Error::BadWeights)?;
        let total: f64 = terms.iter().map(|t| t.0).sum();
        if terms.iter().any(|t| t.0 < 0.0 || !t.0.is_finite()) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadWeights);
        }
        let mut m = DMatrix::zeros(first.1.basis.dim(), first.1.basis.dim());
        for (w, rho) in terms {
            same_basis(&first.1.basis, &rho.basis)?;
            m += &rho.matrix * C64::new(*w, 0.0);
        }
        DensityMatrix::new(first.1.basis.clone(), m)
    }

    pub fn embed(&self, target: &Arc<FockBasis>) -> Result<Self> {
        if target.modes != self.basis.modes {
            return Err(Error::BasisMismatch("mode counts differ".into()));
        }
        let map: Vec<Option<usize>> = self.basis.kets.iter().map(|o| target.index_of(o)).collect();
        let mut m = DMatrix::zeros(target.dim(), target.dim());
        for i in 0..self.basis.dim() {
            for j in 0..self.basis.dim() {
                let v = self.matrix[(i, j)];
                match (map[i], map[j]) {
                    (Some(a), Some(b)) => m[(a, b)] = v,
                    _ if v.norm() > 0.0 => {
                        return Err(Error::OutsideBasis { occupation: self.basis.kets[i].clone() })
                    }
                    _ => {}
                }
            }
        }
        Ok(DensityMatrix { basis: target.clone(), matrix: m })
    }

    pub fn excitation_profile(&self) -> ExcitationProfile {
        profile_from_parts(&self.basis, |i| self.matrix[(i, i)].re, |i, j| self.matrix[(i, j)])
    }
}

/// Vacuum, single-excitation and multi-excitation weights together with the
/// normalized single-excitation block. Coherences between sectors are dropped.
#[derive(Clone, Debug)]
pub struct ExcitationProfile {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// Single-excitation block divided by `q`, in the full basis; `None` when `q = 0`.
    pub rho_one: Option<DensityMatrix>,
}

impl ExcitationProfile {
    /// The `N x N` single-excitation block of `rho_one`, indexed by mode.
    pub fn one_block(&self) -> Option<DMatrix<C64>> {
        self.rho_one.as_ref().map(|rho| {
            let s = rho.basis.sector(1);
            rho.matrix.view((s.start, s.start), (s.len(), s.len())).into_owned()
        })
    }
}

fn profile_from_parts(
    basis: &Arc<FockBasis>,
    diag: impl Fn(usize) -> f64,
    entry: impl Fn(usize, usize) -> C64,
) -> ExcitationProfile {
    let p = diag(0);
    let s1 = basis.sector(1);
    let q: f64 = s1.clone().map(&diag).sum();
    let r: f64 = (s1.end..basis.dim()).map(&diag).sum();
    let rho_one = (q > 0.0).then(|| {
        let mut m = DMatrix::zeros(basis.dim(), basis.dim());
        for i in s1.clone() {
            for j in s1.clone() {
                m[(i, j)] = entry(i, j) / C64::new(q, 0.0);
            }
        }
        DensityMatrix { basis: basis.clone(), matrix: m }
    });
    ExcitationProfile { p, q, r, rho_one }
}

/// Pure state in the default-cutoff basis from occupation/amplitude pairs.
pub fn make_pure<I>(modes: usize, entries: I) -> Result<PureState>
where
    I: IntoIterator<Item = (Vec<u8>, C64)>,
{
    PureState::from_map(FockBasis::with_default_cutoffs(modes)?, entries)
}

/// Single-excitation ket `sum_k c_k |1_k>` lifted into `basis`.
pub fn single_excitation_state(basis: &Arc<FockBasis>, coeffs: &[C64]) -> Result<PureState> {
    if coeffs.len() != basis.modes {
        return Err(Error::ModeCount(coeffs.len()));
    }
    let mut amps = DVector::zeros(basis.dim());
    for (k, &c) in coeffs.iter().enumerate() {
        amps[basis.single(k)] = c;
    }
    PureState::normalized(basis.clone(), amps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyBlock {
    pub tag: String,
    pub epsilons: Vec<[f64; 2]>,
}

/// Serialized form of a state. Complex numbers are `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StateSnapshot {
    pub mode_count: usize,
    pub cutoffs: Cutoffs,
    pub basis: Vec<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub density: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family: Option<FamilyBlock>,
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

impl StateSnapshot {
    pub fn from_pure(s: &PureState) -> Self {
        StateSnapshot {
            mode_count: s.basis.modes,
            cutoffs: s.basis.cutoffs,
            basis: s.basis.kets.clone(),
            amplitudes: Some(s.amps.iter().map(|&z| pair(z)).collect()),
            density: None,
            family: None,
        }
    }

    pub fn from_density(s: &DensityMatrix) -> Self {
        let d = s.basis.dim();
        StateSnapshot {
            mode_count: s.basis.modes,
            cutoffs: s.basis.cutoffs,
            basis: s.basis.kets.clone(),
            amplitudes: None,
            density: Some((0..d).map(|i| (0..d).map(|j| pair(s.matrix[(i, j)])).collect()).collect()),
            family: None,
        }
    }

    fn basis(&self) -> Result<Arc<FockBasis>> {
        let b = FockBasis::new(self.mode_count, self.cutoffs)?;
        if b.kets != self.basis {
            return Err(Error::Parse("basis listing does not match the canonical ordering".into()));
        }
        Ok(b)
    }

    pub fn to_pure(&self) -> Result<PureState> {
        let b = self.basis()?;
        let amps = self.amplitudes.as_ref().ok_or_else(|| Error::Parse("snapshot has no amplitudes".into()))?;
        PureState::new(b, DVector::from_iterator(amps.len(), amps.iter().map(|a| C64::new(a[0], a[1]))))
    }

    /// Density matrix of the snapshot; pure snapshots are converted.
    pub fn to_density(&self) -> Result<DensityMatrix> {
        if self.amplitudes.is_some() {
            return Ok(self.to_pure()?.density());
        }
        let b = self.basis()?;
        let rows = self.density.as_ref().ok_or_else(|| Error::Parse("snapshot has no state data".into()))?;
        let d = b.dim();
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Parse(format!("density must be {d}x{d}")));
        }
        DensityMatrix::new(b, DMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serialization")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn four_mode_default_dimension_and_order() {
        let b = FockBasis::with_default_cutoffs(4).unwrap();
        assert_eq!(b.dim(), 15);
        assert_eq!(b.kets()[0], vec![0, 0, 0, 0]);
        assert_eq!(b.kets()[1], vec![1, 0, 0, 0]);
        assert_eq!(b.kets()[4], vec![0, 0, 0, 1]);
        assert_eq!(b.kets()[5], vec![2, 0, 0, 0]);
        assert_eq!(b.kets()[6], vec![1, 1, 0, 0]);
        assert_eq!(b.sector(2), 5..15);
    }

    #[test]
    fn rejects_out_of_basis_and_unnormalized() {
        assert!(matches!(make_pure(4, [(vec![3, 0, 0, 0], c(1.0))]), Err(Error::OutsideBasis { .. })));
        assert!(matches!(make_pure(4, [(vec![1, 0, 0, 0], c(0.5))]), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn product_state_tensor_and_truncation() {
        let single = FockBasis::new(1, Cutoffs { per_mode: 1, total: 1 }).unwrap();
        let a = PureState::normalized(single.clone(), DVector::from_vec(vec![c(1.0), c(0.3)])).unwrap();
        let ab = tensor(&a, &a).unwrap();
        assert_eq!(ab.basis().cutoffs(), Cutoffs { per_mode: 1, total: 2 });
        let prod = tensor(&ab, &ab).unwrap();
        assert_eq!(prod.basis().dim(), 16);
        assert!(matches!(
            tensor_truncated(&ab, &ab, Cutoffs { per_mode: 1, total: 2 }),
            Err(Error::Truncation(_))
        ));
        let tiny = PureState::normalized(single, DVector::from_vec(vec![c(1.0), c(1e-4)])).unwrap();
        let t2 = tensor(&tiny, &tiny).unwrap();
        let t4 = tensor_truncated(&t2, &t2, Cutoffs { per_mode: 1, total: 2 }).unwrap();
        assert!((t4.amplitudes().norm_squared() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn profile_of_simple_mixture() {
        let b = FockBasis::with_default_cutoffs(4).unwrap();
        let vac = PureState::vacuum(b.clone()).density();
        let one = single_excitation_state(&b, &[c(1.0), c(1.0), c(0.0), c(0.0)]).unwrap().density();
        let two = PureState::from_map(b.clone(), [(vec![1, 1, 0, 0], c(1.0))]).unwrap().density();
        let rho = DensityMatrix::mix(&[(0.7, vac), (0.2, one), (0.1, two)]).unwrap();
        let prof = rho.excitation_profile();
        assert!((prof.p - 0.7).abs() < 1e-15 && (prof.q - 0.2).abs() < 1e-15 && (prof.r - 0.1).abs() < 1e-15);
        let blk = prof.one_block().unwrap();
        assert!((blk[(0, 1)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn density_validation() {
        let b = FockBasis::with_default_cutoffs(2).unwrap();
        let mut m = DMatrix::zeros(b.dim(), b.dim());
        m[(0, 0)] = c(1.2);
        m[(1, 1)] = c(-0.2);
        assert!(matches!(DensityMatrix::new(b.clone(), m), Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn snapshot_round_trip_is_exact() {
        let b = FockBasis::with_default_cutoffs(4).unwrap();
        let s = single_excitation_state(&b, &[C64::new(0.1, 0.7), c(0.3), C64::new(-0.2, 1.0 / 3.0), c(0.9)]).unwrap();
        let js = StateSnapshot::from_pure(&s).to_json();
        let back = StateSnapshot::from_json(&js).unwrap().to_pure().unwrap();
        assert_eq!(back.amplitudes(), s.amplitudes());
        let rho = s.density();
        let js = StateSnapshot::from_density(&rho).to_json();
        let back = StateSnapshot::from_json(&js).unwrap().to_density().unwrap();
        assert_eq!(back.matrix(), rho.matrix());
    }
}
