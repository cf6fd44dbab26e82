use std::f64::consts::PI;

use proptest::prelude::*;
use sg2d_core::dynamics::{dpd_force, nonlinear_force, out_of_band_fraction};
use sg2d_core::gibbs::{compute_rn, rn_bound};
use sg2d_core::{
    build_linear_tables, evolve_linear, forward_transform, inverse_transform, make_chaos, sample_mu, sample_pair_mu1,
    FourierField, GridSpec, LinearModel, RngStream, SpectralGrid,
};

fn field(g: &SpectralGrid, seed: u64, s: f64) -> FourierField {
    sample_mu(g, s, &mut RngStream::new(seed, 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chaos_has_constant_modulus(seed in any::<u64>(), n in 1usize..12, beta_sq in 0.1f64..12.0) {
        let g = SpectralGrid::new(GridSpec::new(n, beta_sq)).unwrap();
        let psi = sg2d_core::fourier::project(&g, &field(&g, seed, 1.0));
        let theta = make_chaos(&g, &psi, g.constants(), 0.0).unwrap();
        for z in &theta.values {
            prop_assert!((z.norm() - g.constants().gamma_n).abs() <= 1e-12 * g.constants().gamma_n);
        }
    }

    #[test]
    fn rn_is_bounded_even_and_translation_invariant(seed in any::<u64>(), n in 1usize..10, shift in 0usize..40) {
        let g = SpectralGrid::new(GridSpec::new(n, PI)).unwrap();
        let u = field(&g, seed, 1.0);
        let r = compute_rn(&g, &u);
        prop_assert!(r.abs() <= rn_bound(&g) * (1.0 + 1e-12));
        prop_assert!((compute_rn(&g, &u.scaled(-1.0)) - r).abs() <= 1e-9 * rn_bound(&g));
        let m = g.m();
        let values = inverse_transform(&g, &u);
        let shifted: Vec<f64> = (0..g.len()).map(|k| values[((k / m + shift) % m) * m + k % m]).collect();
        let v = forward_transform(&g, &shifted).unwrap();
        prop_assert!((compute_rn(&g, &v) - r).abs() <= 1e-9 * rn_bound(&g));
    }

    #[test]
    fn forces_are_band_limited_and_real(seed in any::<u64>(), n in 2usize..10, beta_sq in 0.5f64..12.0) {
        let g = SpectralGrid::new(GridSpec::new(n, beta_sq)).unwrap();
        let u = field(&g, seed, 0.8);
        let f = nonlinear_force(&g, &u).unwrap();
        prop_assert_eq!(out_of_band_fraction(&g, &f), 0.0);
        prop_assert!(f.is_hermitian(1e-10));
        let theta = make_chaos(&g, &sg2d_core::fourier::project(&g, &u), g.constants(), 0.0).unwrap();
        let d = dpd_force(&g, &u, &theta).unwrap();
        prop_assert_eq!(out_of_band_fraction(&g, &d), 0.0);
        prop_assert!(d.is_hermitian(1e-10 * g.constants().gamma_n));
    }

    #[test]
    fn linear_flow_is_deterministic_and_real(seed in any::<u64>(), h in 0.001f64..2.0) {
        let g = SpectralGrid::new(GridSpec::new(4, 1.0)).unwrap();
        let tables = build_linear_tables(&g, h, LinearModel::Hyperbolic).unwrap();
        let s = sample_pair_mu1(&g, &mut RngStream::new(seed, 1));
        let a = evolve_linear(&g, &s, &tables, &mut RngStream::new(seed, 2)).unwrap();
        let b = evolve_linear(&g, &s, &tables, &mut RngStream::new(seed, 2)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.u.is_hermitian(1e-12) && a.v.is_hermitian(1e-12));
        prop_assert!((a.t - h).abs() < 1e-15);
    }
}
