use num_complex::Complex64 as C64;
use proptest::prelude::*;
use wmode::fock::{single_excitation_state, FockBasis};
use wmode::witness::{dft_basis, optimize_phases, state_variance, variance, w_state, witness_basis};
use wmode::families::werner_like;

fn single(coeffs: &[C64]) -> wmode::fock::DensityMatrix {
    let b = FockBasis::with_default_cutoffs(coeffs.len()).unwrap();
    single_excitation_state(&b, coeffs).unwrap().density()
}

#[test]
fn basis_states_have_zero_variance() {
    for n in 2..7 {
        let phases = vec![0.3; n - 1];
        let basis = witness_basis(n, &phases).unwrap();
        for v in basis.vectors() {
            let d = variance(&single(v), &basis).unwrap();
            assert!(d.delta.abs() < 1e-12, "n={n}: {}", d.delta);
        }
    }
}

#[test]
fn localized_excitation_is_maximal() {
    for n in 2..7 {
        let mut c = vec![C64::default(); n];
        c[0] = C64::new(1.0, 0.0);
        let d = variance(&single(&c), &dft_basis(n, &vec![0.0; n - 1]).unwrap()).unwrap();
        assert!((d.delta - (1.0 - 1.0 / n as f64)).abs() < 1e-12);
    }
}

#[test]
fn multi_excitation_leakage_is_rejected() {
    let rho = w_state(4).unwrap().density();
    let basis = witness_basis(4, &[0.0; 3]).unwrap();
    assert!(variance(&rho, &basis).is_ok());
    let fs = wmode::families::fully_separable([C64::new(0.3, 0.0); 4]).unwrap().state.density();
    assert!(variance(&fs, &basis).is_err());
    assert!(state_variance(&fs, &basis).unwrap().delta.abs() < 1e-12);
}

#[test]
fn phase_optimization_undoes_local_phases() {
    let phases = [0.7, 2.1, -1.3];
    let mut c = vec![C64::new(0.5, 0.0)];
    c.extend(phases.iter().map(|&p| C64::from_polar(0.5, p)));
    let rho = single(&c);
    let zero = variance(&rho, &witness_basis(4, &[0.0; 3]).unwrap()).unwrap().delta;
    assert!(zero > 0.1);
    let (found, d) = optimize_phases(&rho, 5, 20).unwrap();
    assert!(d < 1e-10, "{d} at {found:?}");
}

#[test]
fn werner_family_is_quadratic() {
    let basis = witness_basis(4, &[0.0; 3]).unwrap();
    for i in 0..=20 {
        let p = i as f64 / 20.0;
        let d = state_variance(&werner_like(p).unwrap(), &basis).unwrap().delta;
        assert!((d - 0.75 * (1.0 - p * p)).abs() < 1e-13);
    }
}

proptest! {
    #[test]
    fn variance_is_bounded(re in prop::collection::vec(-1.0..1.0f64, 4), im in prop::collection::vec(-1.0..1.0f64, 4), ph in prop::collection::vec(0.0..6.3f64, 3)) {
        let c: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        prop_assume!(c.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-4);
        let basis = witness_basis(4, &ph).unwrap();
        let r = variance(&single(&c), &basis).unwrap();
        prop_assert!(r.delta >= -1e-12 && r.delta <= 0.75 + 1e-12);
        prop_assert!((r.overlaps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn global_phase_does_not_matter(re in prop::collection::vec(-1.0..1.0f64, 4), g in 0.0..6.3f64) {
        let c: Vec<C64> = re.iter().map(|&a| C64::new(a, 0.1)).collect();
        let basis = witness_basis(4, &[0.0; 3]).unwrap();
        let a = variance(&single(&c), &basis).unwrap().delta;
        let rot: Vec<C64> = c.iter().map(|z| z * C64::from_polar(1.0, g)).collect();
        let b = variance(&single(&rot), &basis).unwrap().delta;
        prop_assert!((a - b).abs() < 1e-12);
    }
}
