#![allow(dead_code)]

use ema_threshold::{DampingRegime, Parameters};
use proptest::prelude::*;

pub fn make(kappa: f64, beta: f64) -> Parameters<f64> {
    Parameters::new(kappa, beta, 2, 1e-9).unwrap()
}

/// beta as a multiple of 2 sqrt(kappa)
pub fn scaled(kappa: f64, ratio: f64) -> Parameters<f64> {
    make(kappa, 2.0 * kappa.sqrt() * ratio)
}

pub fn strong() -> impl Strategy<Value = Parameters<f64>> {
    (0.5f64..5.0, 1.01f64..3.0).prop_map(|(k, r)| scaled(k, r))
}

pub fn critical() -> impl Strategy<Value = Parameters<f64>> {
    (0.5f64..5.0).prop_map(|k| scaled(k, 1.0))
}

pub fn weak() -> impl Strategy<Value = Parameters<f64>> {
    (0.5f64..5.0, 0.05f64..0.99).prop_map(|(k, r)| scaled(k, r))
}

pub fn any_regime() -> impl Strategy<Value = Parameters<f64>> {
    prop_oneof![strong(), critical(), weak()]
}

pub fn regime_of(p: &Parameters<f64>) -> DampingRegime {
    p.regime()
}
