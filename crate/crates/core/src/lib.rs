//! Critical-threshold analysis of the damped radial Euler–Monge–Ampère system.
//!
//! Along each characteristic the radial eigenvalue pair `(p, mu)` obeys the
//! Riccati system `p' = -p^2 - kappa mu - beta p`, `mu' = p (1 - mu)`, which the
//! change of variables `w = p / (1 - mu)`, `s = 1 / (1 - mu)` linearises. The
//! crate evaluates that linear flow in closed form, classifies initial data as
//! subcritical or supercritical in three independent ways (explicit phase-plane
//! inequalities, Lyapunov comparison tables, direct simulation), predicts
//! blow-up times, simulates the full radial system by characteristics and
//! measures exponential decay rates.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analyze;
pub mod closedform;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod odeint;
pub mod radial;
pub mod real;
pub mod roots;
pub mod thresholds;

pub use analyze::{
    classify_simulated, cross_validate, decay_report, expected_rate, fit_rate, CrossValidation,
    DecayReport, FitMode, RateFit,
};
pub use error::{Error, Result};
pub use model::{
    from_transformed, make_params, regime, spectral_constants, to_transformed, DampingRegime,
    Parameters, SpectralConstants, SpectralPoint, TransformedPoint, DEFAULT_REGIME_TOL,
};
pub use lyapunov::{
    classify_lyapunov, lyapunov_value, s_star, solve_N, solve_P, LyapunovClassifier,
    LyapunovTable, TableKind,
};
pub use radial::{
    density_along_ray, diagnostics, evolve, init_from_density, init_from_potential,
    regularity_integral, InitialProfile, RadialSolution, RayState,
};
pub use real::Real;
pub use thresholds::{
    blowup_time, classify_explicit, classify_node, classify_vacuous, threshold_boundary,
    weak_density_bound, BoundaryPoint, Classification, Method, Verdict,
};

pub type Parameters64 = Parameters<f64>;
pub type Parameters32 = Parameters<f32>;
pub type SpectralPoint64 = SpectralPoint<f64>;
pub type TransformedPoint64 = TransformedPoint<f64>;
pub type SpectralConstants64 = SpectralConstants<f64>;
pub type Trajectory64 = odeint::Trajectory<f64>;
pub type Classification64 = Classification<f64>;
pub type BoundaryPoint64 = BoundaryPoint<f64>;
pub type LyapunovTable64 = LyapunovTable<f64>;
pub type InitialProfile64 = InitialProfile<f64>;
pub type RadialSolution64 = RadialSolution<f64>;
pub type RayState64 = RayState<f64>;
pub type DecayReport64 = DecayReport<f64>;
