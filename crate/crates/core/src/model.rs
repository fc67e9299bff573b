//! Physical parameters, damping regimes and the `(p, mu) <-> (w, s)` change of variables.

use std::fmt;

use crate::error::{Error, Result};
use crate::real::{lit, Real};

/// Default relative tolerance used to decide the critical damping regime.
pub const DEFAULT_REGIME_TOL: f64 = 1e-9;

/// Damping regime of the linearised `(w, s)` system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DampingRegime {
    /// `beta > 2 sqrt(kappa)`: two real decay rates.
    Strong,
    /// `beta = 2 sqrt(kappa)`: repeated rate `beta / 2`.
    Critical,
    /// `beta < 2 sqrt(kappa)`: damped oscillation.
    Weak,
}

impl DampingRegime {
    pub fn name(self) -> &'static str {
        match self {
            DampingRegime::Strong => "strong",
            DampingRegime::Critical => "critical",
            DampingRegime::Weak => "weak",
        }
    }
}

impl fmt::Display for DampingRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Validated physical constants of the damped system.
///
/// `kappa` is the repulsion strength, `beta` the velocity damping and `dim` the
/// spatial dimension. `beta = 0` is accepted (undamped limit) and is classified
/// as [`DampingRegime::Weak`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters<T> {
    kappa: T,
    beta: T,
    dim: usize,
    regime_tol: T,
    regime: DampingRegime,
}

impl<T: Real> Parameters<T> {
    /// Builds a parameter set, rejecting non-finite values, `kappa <= 0`,
    /// `beta < 0`, `dim < 1` and tolerances outside `(0, 1e-3)`.
    pub fn new(kappa: T, beta: T, dim: usize, regime_tol: T) -> Result<Self> {
        if !kappa.is_finite() || kappa <= T::zero() {
            return Err(Error::InvalidParameter {
                field: "kappa",
                reason: format!("must be finite and positive, got {kappa}"),
            });
        }
        if !beta.is_finite() || beta < T::zero() {
            return Err(Error::InvalidParameter {
                field: "beta",
                reason: format!("must be finite and nonnegative, got {beta}"),
            });
        }
        if dim < 1 {
            return Err(Error::InvalidParameter {
                field: "dim",
                reason: "dimension must be at least 1".into(),
            });
        }
        if !regime_tol.is_finite() || regime_tol <= T::zero() || regime_tol >= lit(1e-3) {
            return Err(Error::InvalidParameter {
                field: "regime_tol",
                reason: format!("must lie in (0, 1e-3), got {regime_tol}"),
            });
        }
        let regime = classify_regime(kappa, beta, regime_tol);
        Ok(Self {
            kappa,
            beta,
            dim,
            regime_tol,
            regime,
        })
    }

    /// Same as [`Parameters::new`] with the default regime tolerance.
    pub fn with_default_tol(kappa: T, beta: T, dim: usize) -> Result<Self> {
        Self::new(kappa, beta, dim, lit(DEFAULT_REGIME_TOL))
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn regime_tol(&self) -> T {
        self.regime_tol
    }

    pub fn regime(&self) -> DampingRegime {
        self.regime
    }

    /// Copy of these parameters in another dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.kappa, self.beta, dim, self.regime_tol)
    }

    pub fn spectral_constants(&self) -> SpectralConstants<T> {
        spectral_constants(self)
    }

    /// Slowest decay rate of the linear system: `lambda1` (strong) or `beta / 2`.
    ///
    /// For `beta = 0` this is zero.
    pub fn slowest_rate(&self) -> T {
        match self.spectral_constants() {
            SpectralConstants::Strong { lambda1, .. } => lambda1,
            SpectralConstants::Critical { alpha } | SpectralConstants::Weak { alpha, .. } => alpha,
        }
    }
}

/// Checked constructor mirroring [`Parameters::new`].
pub fn make_params<T: Real>(kappa: T, beta: T, dim: usize, regime_tol: T) -> Result<Parameters<T>> {
    Parameters::new(kappa, beta, dim, regime_tol)
}

fn classify_regime<T: Real>(kappa: T, beta: T, tol: T) -> DampingRegime {
    let four_kappa = lit::<T>(4.0) * kappa;
    let disc = beta * beta - four_kappa;
    let band = tol * four_kappa;
    if disc > band {
        DampingRegime::Strong
    } else if disc < -band {
        DampingRegime::Weak
    } else {
        DampingRegime::Critical
    }
}

/// The damping regime of `params`.
pub fn regime<T: Real>(params: &Parameters<T>) -> DampingRegime {
    params.regime
}

/// Rates of the linear `(w, s)` system.
///
/// The eigenvalues of the system matrix are `-lambda1, -lambda2` in the strong
/// regime, `-alpha` (double) in the critical regime and `-alpha +- i omega` in
/// the weak regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralConstants<T> {
    Strong { lambda1: T, lambda2: T },
    Critical { alpha: T },
    Weak { alpha: T, omega: T },
}

impl<T: Real> SpectralConstants<T> {
    pub fn regime(&self) -> DampingRegime {
        match self {
            SpectralConstants::Strong { .. } => DampingRegime::Strong,
            SpectralConstants::Critical { .. } => DampingRegime::Critical,
            SpectralConstants::Weak { .. } => DampingRegime::Weak,
        }
    }

    /// `(lambda1, lambda2)` in the strong regime.
    pub fn lambdas(&self) -> Option<(T, T)> {
        match *self {
            SpectralConstants::Strong { lambda1, lambda2 } => Some((lambda1, lambda2)),
            _ => None,
        }
    }

    /// `beta / 2` in every regime.
    pub fn alpha(&self) -> T {
        match *self {
            SpectralConstants::Strong { lambda1, lambda2 } => (lambda1 + lambda2) / lit(2.0),
            SpectralConstants::Critical { alpha } | SpectralConstants::Weak { alpha, .. } => alpha,
        }
    }

    /// Oscillation frequency; zero outside the weak regime.
    pub fn omega(&self) -> T {
        match *self {
            SpectralConstants::Weak { omega, .. } => omega,
            _ => T::zero(),
        }
    }
}

/// Computes the rates of the linear system for `params`.
///
/// In the strong regime `lambda2 = (beta + sqrt(beta^2 - 4 kappa)) / 2` and
/// `lambda1 = kappa / lambda2`, which avoids the cancellation in
/// `beta - sqrt(beta^2 - 4 kappa)`.
pub fn spectral_constants<T: Real>(params: &Parameters<T>) -> SpectralConstants<T> {
    let kappa = params.kappa;
    let beta = params.beta;
    let half = lit::<T>(0.5);
    match params.regime {
        DampingRegime::Strong => {
            let root = (beta * beta - lit::<T>(4.0) * kappa).sqrt();
            let lambda2 = half * (beta + root);
            let lambda1 = kappa / lambda2;
            SpectralConstants::Strong { lambda1, lambda2 }
        }
        DampingRegime::Critical => SpectralConstants::Critical { alpha: half * beta },
        DampingRegime::Weak => SpectralConstants::Weak {
            alpha: half * beta,
            omega: half * (lit::<T>(4.0) * kappa - beta * beta).sqrt(),
        },
    }
}

/// Eigenvalue state along one characteristic: `p = u_r`, `q = u / r`,
/// `mu = phi_rr`, `nu = phi_r / r`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpectralPoint<T> {
    pub p: T,
    pub q: T,
    pub mu: T,
    pub nu: T,
}

impl<T: Real> SpectralPoint<T> {
    pub fn new(p: T, q: T, mu: T, nu: T) -> Self {
        Self { p, q, mu, nu }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.q.is_finite() && self.mu.is_finite() && self.nu.is_finite()
    }

    /// Radial pair `(p, mu)`.
    pub fn radial(&self) -> (T, T) {
        (self.p, self.mu)
    }

    /// Tangential pair `(q, nu)`; it obeys the same ODE as the radial pair.
    pub fn tangential(&self) -> (T, T) {
        (self.q, self.nu)
    }
}

/// Image of `(p, mu)` under `w = p / (1 - mu)`, `s = 1 / (1 - mu)`.
///
/// `s <= 0` marks a singular state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransformedPoint<T> {
    pub w: T,
    pub s: T,
}

impl<T: Real> TransformedPoint<T> {
    pub fn new(w: T, s: T) -> Self {
        Self { w, s }
    }

    /// The equilibrium `(0, 1)`.
    pub fn equilibrium() -> Self {
        Self {
            w: T::zero(),
            s: T::one(),
        }
    }
}

/// Maps `(p, mu)` to `(w, s)`. Fails on the vacuous state `mu = 1`.
pub fn to_transformed<T: Real>(p: T, mu: T) -> Result<TransformedPoint<T>> {
    let gap = T::one() - mu;
    if gap == T::zero() {
        return Err(Error::VacuousState);
    }
    Ok(TransformedPoint {
        w: p / gap,
        s: gap.recip(),
    })
}

/// Maps `(w, s)` back to `(p, mu)`. Fails on the blow-up boundary `s = 0`.
pub fn from_transformed<T: Real>(tp: TransformedPoint<T>) -> Result<(T, T)> {
    if tp.s == T::zero() {
        return Err(Error::BlowUpState);
    }
    Ok((tp.w / tp.s, T::one() - tp.s.recip()))
}
