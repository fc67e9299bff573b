mod common;

use common::*;
use ema_threshold::closedform::{self, eval_critical, eval_strong, eval_weak, weak_polar};
use ema_threshold::odeint::{simulate_ws, Options};
use ema_threshold::Parameters;
use proptest::prelude::*;

fn max_error_vs_integrator(params: &Parameters<f64>, w0: f64, s0: f64) -> f64 {
    let opts = Options::with_tolerances(1e-13, 1e-13).dense();
    // integrate straight through s = 0: the linear flow is regular there
    let tr = ema_threshold::odeint::integrate(
        ema_threshold::odeint::ws_rhs(params),
        &[w0, s0],
        0.0,
        10.0,
        &opts,
        &[],
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..=200 {
        let t = 10.0 * k as f64 / 200.0;
        let y = tr.sample(t).unwrap();
        let cf = closedform::eval(params, w0, s0, t);
        worst = worst.max((cf.w - y[0]).abs()).max((cf.s - y[1]).abs());
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn strong_matches_integrator(params in strong(), w0 in -3.0f64..3.0, s0 in -1.0f64..4.0) {
        prop_assert!(max_error_vs_integrator(&params, w0, s0) <= 1e-8);
    }

    #[test]
    fn critical_matches_integrator(params in critical(), w0 in -3.0f64..3.0, s0 in -1.0f64..4.0) {
        prop_assert!(max_error_vs_integrator(&params, w0, s0) <= 1e-8);
    }

    #[test]
    fn weak_matches_integrator(params in weak(), w0 in -3.0f64..3.0, s0 in -1.0f64..4.0) {
        prop_assert!(max_error_vs_integrator(&params, w0, s0) <= 1e-8);
    }

    #[test]
    fn s_derivative_is_w(params in any_regime(), w0 in -3.0f64..3.0, s0 in -1.0f64..4.0, t in 0.0f64..10.0) {
        let h = 1e-6;
        let sp = closedform::eval(&params, w0, s0, t + h).s;
        let sm = closedform::eval(&params, w0, s0, t - h).s;
        let w = closedform::eval(&params, w0, s0, t).w;
        prop_assert!(((sp - sm) / (2.0 * h) - w).abs() <= 1e-5);
    }

    #[test]
    fn second_order_residual(params in any_regime(), w0 in -3.0f64..3.0, s0 in -1.0f64..4.0, t in 0.0f64..10.0) {
        // five-point stencils keep truncation and rounding well below the bound
        let h = 1e-3;
        let s = |x: f64| closedform::eval(&params, w0, s0, x).s;
        let (k, b) = (params.kappa(), params.beta());
        let (f2m, f1m, f0, f1p, f2p) = (s(t - 2.0 * h), s(t - h), s(t), s(t + h), s(t + 2.0 * h));
        let s1 = (f2m - 8.0 * f1m + 8.0 * f1p - f2p) / (12.0 * h);
        let s2 = (-f2m + 16.0 * f1m - 30.0 * f0 + 16.0 * f1p - f2p) / (12.0 * h * h);
        prop_assert!((s2 + b * s1 + k * f0 - k).abs() <= 1e-6);
    }

    #[test]
    fn weak_polar_form(params in weak(), w0 in -3.0f64..3.0, s0 in -1.0f64..4.0, t in 0.0f64..10.0) {
        let pol = weak_polar(&params, w0, s0).unwrap();
        let sc = params.spectral_constants();
        let (a, om) = (sc.alpha(), sc.omega());
        let polar = 1.0 + pol.r_amp * (-a * t).exp() * (om * t - pol.psi).cos();
        let s = eval_weak(&params, w0, s0, t).unwrap().s;
        prop_assert!((polar - s).abs() <= 1e-12 * (1.0 + pol.r_amp));
    }

    #[test]
    fn regime_specific_evaluators_agree_with_dispatch(params in any_regime(), w0 in -3.0f64..3.0, s0 in -1.0f64..4.0, t in 0.0f64..10.0) {
        let direct = match params.regime() {
            ema_threshold::DampingRegime::Strong => eval_strong(&params, w0, s0, t),
            ema_threshold::DampingRegime::Critical => eval_critical(&params, w0, s0, t),
            ema_threshold::DampingRegime::Weak => eval_weak(&params, w0, s0, t),
        }
        .unwrap();
        prop_assert_eq!(direct, closedform::eval(&params, w0, s0, t));
    }
}

#[test]
fn simulate_ws_stops_at_blowup() {
    let p = make(3.0, 4.0);
    let tr = simulate_ws(&p, -6.0, 1.0, 10.0, &Options::default()).unwrap();
    assert!(tr.terminal_event.is_some());
    assert!(tr.final_state()[1] <= 0.0);
}
