use num_complex::Complex64;
use proptest::prelude::*;
use rfwigner::phase_space::{
    displace_density_matrix, integrated_negativity, wigner_at, wigner_from_density_matrix, GridSpec, TOTAL_MASS,
};
use rfwigner::tomography::FockDensityMatrix;

fn negativity(rho: &FockDensityMatrix, spec: &GridSpec) -> f64 {
    integrated_negativity(&wigner_from_density_matrix(rho, spec).unwrap()).unwrap().n
}

fn two_level(rho1: f64, rho10: Complex64) -> FockDensityMatrix {
    let m = nalgebra::DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0 - rho1, 0.0),
            rho10.conj(),
            rho10,
            Complex64::new(rho1, 0.0),
        ],
    );
    FockDensityMatrix::new(m).unwrap()
}

#[test]
fn mixture_threshold() {
    let spec = GridSpec::default();
    for rho1 in [0.3, 0.45, 0.5, 0.55, 0.7] {
        let n = negativity(&FockDensityMatrix::diagonal(&[1.0 - rho1, rho1]).unwrap(), &spec);
        if rho1 > 0.5 {
            assert!(n > 1e-3, "rho1={rho1}: N={n}");
        } else {
            assert!(n < 1e-6, "rho1={rho1}: N={n}");
        }
    }
}

#[test]
fn two_photon_admixture_lowers_negativity() {
    let spec = GridSpec::default();
    let sigma = FockDensityMatrix::diagonal(&[0.45, 0.55]).unwrap();
    let eps = 0.05;
    let mixed = FockDensityMatrix::diagonal(&[0.45 * (1.0 - eps), 0.55 * (1.0 - eps), eps]).unwrap();
    assert!(negativity(&mixed, &spec) < negativity(&sigma, &spec));
}

#[test]
fn step_halving_converges() {
    let spec = GridSpec::default();
    for rho in [
        FockDensityMatrix::fock(1, 2).unwrap(),
        FockDensityMatrix::diagonal(&[0.3, 0.6, 0.1]).unwrap(),
        two_level(0.7, Complex64::new(0.2, -0.1)),
    ] {
        let (a, b) = (negativity(&rho, &spec), negativity(&rho, &spec.refined()));
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn grid_mass_matches_convention() {
    let g = wigner_from_density_matrix(&FockDensityMatrix::diagonal(&[0.2, 0.3, 0.4, 0.1]).unwrap(), &GridSpec::default()).unwrap();
    assert!((g.mass - TOTAL_MASS).abs() < 1e-3);
    assert!(g.warning.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wigner_is_linear(
        a in 0.0..1.0f64,
        p1 in 0.0..1.0f64,
        frac in 0.0..0.99f64,
        arg in 0.0..std::f64::consts::TAU,
        x in -3.0..3.0f64,
        y in -3.0..3.0f64,
    ) {
        let c = frac * (p1 * (1.0 - p1)).sqrt();
        let r1 = two_level(p1, Complex64::from_polar(c, arg)).resized(3).unwrap();
        let r2 = FockDensityMatrix::diagonal(&[0.2, 0.3, 0.5]).unwrap();
        let mix = FockDensityMatrix::new(r1.matrix() * Complex64::new(a, 0.0) + r2.matrix() * Complex64::new(1.0 - a, 0.0)).unwrap();
        let al = Complex64::new(0.5 * x, 0.5 * y);
        let lhs = wigner_at(&mix, al);
        let rhs = a * wigner_at(&r1, al) + (1.0 - a) * wigner_at(&r2, al);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn negativity_is_displacement_invariant(r in 0.0..2.0f64, arg in 0.0..std::f64::consts::TAU, p1 in 0.6..1.0f64) {
        let spec = GridSpec { half_width: 7.0, step: 0.025 };
        let rho = FockDensityMatrix::diagonal(&[1.0 - p1, p1]).unwrap();
        let moved = displace_density_matrix(&rho, Complex64::from_polar(r, arg)).unwrap();
        prop_assert!((negativity(&rho, &spec) - negativity(&moved, &spec)).abs() < 1e-3);
    }
}
