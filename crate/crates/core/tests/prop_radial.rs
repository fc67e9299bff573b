mod common;

use common::*;
use ema_threshold::analyze::{fit_samples, FitMode};
use ema_threshold::radial::{density_along_ray, evolve, init_from_density, ray_grid};
use ema_threshold::thresholds::{classify_node, Verdict};
use ema_threshold::SpectralPoint;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn density_profile_satisfies_identity(
        n in 1usize..4,
        amp in -0.9f64..2.0,
        width in 0.2f64..3.0,
    ) {
        let params = make(1.0, 3.0).with_dim(n).unwrap();
        let grid = ray_grid(None, 5.0, 64).unwrap();
        let rho: Vec<f64> = grid.iter().map(|r| 1.0 + amp * (-(r / width).powi(2)).exp()).collect();
        let prof = init_from_density(&params, &grid, &vec![0.0; 64], &rho).unwrap();
        for (i, &rho_i) in rho.iter().enumerate() {
            prop_assert!(prof.mu0[i] <= 1.0 && prof.nu0[i] <= 1.0);
            let r = (1.0 - prof.mu0[i]) * (1.0 - prof.nu0[i]).powi(n as i32 - 1);
            prop_assert!((r - rho_i).abs() <= 1e-10 * rho_i.max(1.0));
        }
    }

    #[test]
    fn radial_and_tangential_pairs_are_interchangeable(
        params in any_regime(),
        p in -5.0f64..3.0, q in -5.0f64..3.0, mu in -2.0f64..0.9, nu in -2.0f64..0.9,
    ) {
        let a = classify_node(&params, &SpectralPoint::new(p, q, mu, nu)).unwrap();
        let b = classify_node(&params, &SpectralPoint::new(q, p, nu, mu)).unwrap();
        prop_assert_eq!(a.verdict, b.verdict);
        prop_assert_eq!(a.t_blowup, b.t_blowup);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tangential_eigenvalue_stays_below_radial_sup(
        params in prop_oneof![strong(), weak()],
        n in 2usize..4,
        a in -0.3f64..0.3,
        b in -0.4f64..0.4,
    ) {
        let params = params.with_dim(n).unwrap();
        let grid = ray_grid(Some(1e-3), 4.0, 64).unwrap();
        let u: Vec<f64> = grid.iter().map(|&r| a * r * (-r * r).exp()).collect();
        let rho: Vec<f64> = grid.iter().map(|&r| 1.0 + b * (-r * r).exp()).collect();
        let prof = init_from_density(&params, &grid, &u, &rho).unwrap();
        let all_sub = (0..64).all(|i| {
            let pt = SpectralPoint::new(prof.p0[i], prof.q0(i), prof.mu0[i], prof.nu0[i]);
            classify_node(&params, &pt).unwrap().verdict == Verdict::Subcritical
        });
        prop_assume!(all_sub);
        let times: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let sol = evolve(&params, &prof, 10.0, &times, 1e-10).unwrap();
        prop_assert!(sol.shock.is_none());
        for snap in sol.snapshots() {
            let states: Vec<_> = snap.states.iter().flatten().collect();
            let mu_sup = states.iter().map(|s| s.mu.abs()).fold(0.0, f64::max);
            let nu_sup = states.iter().map(|s| s.nu.abs()).fold(0.0, f64::max);
            // the true sup of |mu| can sit between rays; allow the largest
            // change of mu between neighbouring rays
            let jump = states.windows(2).map(|w| (w[1].mu - w[0].mu).abs()).fold(0.0, f64::max);
            prop_assert!(nu_sup <= mu_sup + jump, "t = {}: {nu_sup} > {mu_sup} + {jump}", snap.t);
        }
    }

    #[test]
    fn density_converges_at_fitted_rate(params in strong(), a in -0.3f64..0.3) {
        let grid = ray_grid(Some(0.5), 2.0, 8).unwrap();
        let u: Vec<f64> = grid.iter().map(|&r| a * r * (-r * r).exp()).collect();
        let prof = init_from_density(&params, &grid, &u, &[1.0; 8]).unwrap();
        let lambda1 = params.spectral_constants().lambdas().unwrap().0;
        let t_hi = 25.0 / lambda1;
        let sol = evolve(&params, &prof, t_hi, &[], 1e-12).unwrap();
        prop_assume!(sol.shock.is_none());
        for ray in &sol.rays {
            let (lo, hi) = (10.0 / lambda1, t_hi);
            let ts: Vec<f64> = (0..=200).map(|k| lo + (hi - lo) * k as f64 / 200.0).collect();
            let dev: Vec<f64> = ts
                .iter()
                .map(|&t| (density_along_ray(&ray.state_at(t).unwrap(), 2) - 1.0).abs())
                .collect();
            prop_assume!(dev.iter().all(|&d| d > 1e-250));
            let fit = fit_samples(&ts, &dev, FitMode::Raw).unwrap();
            let c = dev[0] * (fit.gamma * ts[0]).exp();
            for (&t, &d) in ts.iter().zip(&dev) {
                prop_assert!(d <= c * (-fit.gamma * t).exp() * 1.05, "t = {t}");
            }
        }
    }
}
