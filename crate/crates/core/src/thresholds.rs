//! Sharp subcritical/supercritical classification of initial data and
//! blow-up time prediction.
//!
//! Non-vacuous data (`mu0 < 1`) are classified through the explicit phase-plane
//! inequalities, vacuous data (`mu0 = 1`, opted into explicitly) through the
//! scalar Riccati equation `p' = -p^2 - beta p - kappa`. Points exactly on a
//! threshold curve are supercritical.

use crate::closedform::{self, ExtremumKind};
use crate::error::{Error, Result};
use crate::model::{to_transformed, DampingRegime, Parameters, SpectralConstants, SpectralPoint};
use crate::real::{lit, Real};
use crate::roots::{bisect_predicate, bracketed_root};

/// Subcritical data stay smooth for all time; supercritical data blow up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Subcritical,
    Supercritical,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Subcritical => "subcritical",
            Verdict::Supercritical => "supercritical",
        }
    }

    pub fn is_supercritical(self) -> bool {
        self == Verdict::Supercritical
    }
}

/// Which construction produced a classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ExplicitPhasePlane,
    Lyapunov,
    Simulation,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ExplicitPhasePlane => "explicit",
            Method::Lyapunov => "lyapunov",
            Method::Simulation => "simulation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification<T> {
    pub verdict: Verdict,
    /// Predicted blow-up time, for supercritical data where it is computable.
    pub t_blowup: Option<T>,
    pub method: Method,
}

impl<T: Real> Classification<T> {
    pub fn subcritical(method: Method) -> Self {
        Self {
            verdict: Verdict::Subcritical,
            t_blowup: None,
            method,
        }
    }

    pub fn supercritical(method: Method, t_blowup: Option<T>) -> Self {
        Self {
            verdict: Verdict::Supercritical,
            t_blowup: t_blowup.filter(|t| t.is_finite() && *t > T::zero()),
            method,
        }
    }
}

/// Classifies vacuous data (`mu0 = 1`, so `mu` stays 1 and `p` follows the
/// autonomous Riccati equation `p' = -p^2 - beta p - kappa`).
///
/// Strong damping is subcritical iff `p0 >= p_-`, critical damping iff
/// `p0 >= -sqrt(kappa)`; weak damping always blows up. The blow-up time is the
/// escape time of the Riccati equation.
pub fn classify_vacuous<T: Real>(params: &Parameters<T>, p0: T) -> Classification<T> {
    let kappa = params.kappa();
    let beta = params.beta();
    let two = lit::<T>(2.0);
    let method = Method::ExplicitPhasePlane;
    match params.regime() {
        DampingRegime::Strong => {
            let root = (beta * beta - lit::<T>(4.0) * kappa).sqrt();
            let p_minus = (-beta - root) / two;
            let p_plus = (-beta + root) / two;
            if p0 >= p_minus {
                Classification::subcritical(method)
            } else {
                let t = ((p0 - p_plus) / (p0 - p_minus)).abs().ln() / (p_plus - p_minus);
                Classification::supercritical(method, Some(t))
            }
        }
        DampingRegime::Critical => {
            let star = -kappa.sqrt();
            if p0 >= star {
                Classification::subcritical(method)
            } else {
                Classification::supercritical(method, Some(-(p0 - star).recip()))
            }
        }
        DampingRegime::Weak => {
            let freq = (kappa - beta * beta / lit(4.0)).sqrt();
            let t = (((p0 + beta / two) / freq).atan() + T::FRAC_PI_2()) / freq;
            Classification::supercritical(method, Some(t))
        }
    }
}

fn check_non_vacuous<T: Real>(p0: T, mu0: T) -> Result<()> {
    if !p0.is_finite() || !mu0.is_finite() {
        return Err(Error::InvalidParameter {
            field: "(p0, mu0)",
            reason: "initial data must be finite".into(),
        });
    }
    if mu0 >= T::one() {
        return Err(Error::NotNonVacuous {
            mu0: mu0.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `true` when the explicit threshold inequalities put `(p0, mu0)` on the
/// blow-up side. Requires `mu0 < 1`.
pub fn explicit_is_supercritical<T: Real>(params: &Parameters<T>, p0: T, mu0: T) -> Result<bool> {
    check_non_vacuous(p0, mu0)?;
    let kappa = params.kappa();
    let gap = T::one() - mu0;
    Ok(match params.spectral_constants() {
        SpectralConstants::Strong { lambda1, lambda2 } => {
            // The extremum tested by the inequality must lie in the future,
            // which needs s'(0) = w0 < 0.
            let side = (p0 + lambda2 * mu0).max(p0 + lambda1 * mu0) < T::zero() && p0 < T::zero();
            side && {
                let denom = kappa * gap;
                let lhs_base = -(lambda1 * p0 + kappa * mu0) / denom;
                let rhs_base = -(lambda2 * p0 + kappa * mu0) / denom;
                lambda2 * lhs_base.ln() >= lambda1 * rhs_base.ln()
            }
        }
        SpectralConstants::Critical { alpha } => {
            let b = p0 + alpha * mu0;
            p0 < T::zero() && b < T::zero() && p0 / b <= (-b / (alpha * gap)).ln()
        }
        SpectralConstants::Weak { alpha, omega } => {
            if p0 == T::zero() && mu0 == T::zero() {
                return Ok(false);
            }
            let tp = to_transformed(p0, mu0)?;
            let (t_star, _) = closedform::first_min_weak(params, tp.w, tp.s)?;
            let a = (p0 + alpha * mu0) / gap;
            let b = omega * mu0 / gap;
            // log form of a^2 + b^2 >= kappa e^{2 alpha t*}
            (a * a + b * b).ln() >= kappa.ln() + lit::<T>(2.0) * alpha * t_star
        }
    })
}

/// Classifies non-vacuous data `mu0 < 1` by the explicit threshold
/// inequalities. Supercritical verdicts carry the blow-up time of the closed
/// form.
pub fn classify_explicit<T: Real>(params: &Parameters<T>, p0: T, mu0: T) -> Result<Classification<T>> {
    let method = Method::ExplicitPhasePlane;
    if explicit_is_supercritical(params, p0, mu0)? {
        let tp = to_transformed(p0, mu0)?;
        Ok(Classification::supercritical(
            method,
            blowup_time(params, tp.w, tp.s)?,
        ))
    } else {
        Ok(Classification::subcritical(method))
    }
}

/// Classifies one node by both eigenvalue pairs: supercritical when either the
/// radial pair `(p, mu)` or the tangential pair `(q, nu)` is. The earlier
/// blow-up time is reported.
pub fn classify_node<T: Real>(params: &Parameters<T>, point: &SpectralPoint<T>) -> Result<Classification<T>> {
    let radial = classify_explicit(params, point.p, point.mu)?;
    let tangential = classify_explicit(params, point.q, point.nu)?;
    Ok(match (radial.verdict, tangential.verdict) {
        (Verdict::Subcritical, Verdict::Subcritical) => radial,
        (Verdict::Supercritical, Verdict::Subcritical) => radial,
        (Verdict::Subcritical, Verdict::Supercritical) => tangential,
        _ => {
            let t = match (radial.t_blowup, tangential.t_blowup) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            Classification::supercritical(Method::ExplicitPhasePlane, t)
        }
    })
}

/// Smallest `t > 0` with `s(t) = 0` on the closed-form trajectory from
/// `(w0, s0)`, or `None` when `s` stays positive.
///
/// Whether a zero exists is decided from the first local minimum of `s`; the
/// zero itself is then bracketed on `[0, t*]` and refined to `1e-10`.
pub fn blowup_time<T: Real>(params: &Parameters<T>, w0: T, s0: T) -> Result<Option<T>> {
    if !w0.is_finite() || !s0.is_finite() || s0 <= T::zero() {
        return Err(Error::InvalidParameter {
            field: "s0",
            reason: format!("blow-up time needs finite data with s0 > 0, got ({w0}, {s0})"),
        });
    }
    let t_min = match params.regime() {
        DampingRegime::Strong | DampingRegime::Critical => {
            match closedform::extremum_time(params, w0, s0)? {
                Some(e) if e.kind == ExtremumKind::Min => e.t_star,
                _ => return Ok(None),
            }
        }
        DampingRegime::Weak => {
            if w0 == T::zero() && s0 == T::one() {
                return Ok(None);
            }
            closedform::first_min_weak(params, w0, s0)?.0
        }
    };
    let s_at = |t: T| closedform::eval(params, w0, s0, t).s;
    if s_at(t_min) > T::zero() {
        return Ok(None);
    }
    let tol = lit::<T>(1e-10).max(lit::<T>(8.0) * T::epsilon() * t_min);
    Ok(Some(bracketed_root(s_at, T::zero(), t_min, tol)))
}

/// Critical `p0` values at one `mu0`.
///
/// `lower` and `upper` bound the open subcritical interval in `p0`. Strong and
/// critical damping only have a lower boundary. Both are `None` when no `p0`
/// is subcritical (weak damping with `1 / (1 - mu0) >= s*`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint<T> {
    pub mu0: T,
    pub lower: Option<T>,
    pub upper: Option<T>,
}

impl<T: Real> BoundaryPoint<T> {
    /// Distance from `p0` to the nearest boundary value, if any exists.
    pub fn distance(&self, p0: T) -> Option<T> {
        match (self.lower, self.upper) {
            (None, None) => None,
            (Some(l), None) => Some((p0 - l).abs()),
            (None, Some(u)) => Some((p0 - u).abs()),
            (Some(l), Some(u)) => Some((p0 - l).abs().min((p0 - u).abs())),
        }
    }

    /// Nearest boundary value to `p0`.
    pub fn nearest(&self, p0: T) -> Option<T> {
        match (self.lower, self.upper) {
            (Some(l), Some(u)) => Some(if (p0 - l).abs() <= (p0 - u).abs() { l } else { u }),
            (l, u) => l.or(u),
        }
    }
}

/// Locates the critical `p0` values for each `mu0` by bisection on
/// [`explicit_is_supercritical`] to `1e-10`.
pub fn threshold_boundary<T: Real>(params: &Parameters<T>, mu0_grid: &[T]) -> Result<Vec<BoundaryPoint<T>>> {
    mu0_grid
        .iter()
        .map(|&mu0| boundary_at(params, mu0))
        .collect()
}

fn boundary_at<T: Real>(params: &Parameters<T>, mu0: T) -> Result<BoundaryPoint<T>> {
    check_non_vacuous(T::zero(), mu0)?;
    let sup = |p: T| explicit_is_supercritical(params, p, mu0).unwrap_or(true);
    if sup(T::zero()) {
        return Ok(BoundaryPoint {
            mu0,
            lower: None,
            upper: None,
        });
    }
    let tol = lit::<T>(1e-10);
    let search = |dir: T| -> Option<T> {
        let mut far = dir;
        for _ in 0..200 {
            if sup(far) {
                let (_, edge) = bisect_predicate(sup, T::zero(), far, tol);
                return Some(edge);
            }
            far = far * lit(2.0);
            if !far.is_finite() {
                break;
            }
        }
        None
    };
    let lower = search(-T::one());
    let upper = match params.regime() {
        DampingRegime::Weak => search(T::one()),
        _ => None,
    };
    Ok(BoundaryPoint { mu0, lower, upper })
}

/// Density level below which weak-damping data at a node must blow up.
///
/// Each eigenvalue pair contributes the factor
/// `[((x + alpha y)^2 + (omega y)^2) / (kappa e^{2 alpha t*})]^{1/2}`, where
/// `t*` is the first minimum time of that pair's `(w, s)` trajectory. The
/// radial factor enters once and the tangential one with multiplicity `n - 1`,
/// matching `rho = (1 - mu)(1 - nu)^{n-1}`. `r` is the node radius; the
/// tangential pair is written through `u0 = q0 r` and `phi0' = nu0 r`.
pub fn weak_density_bound<T: Real>(
    params: &Parameters<T>,
    p0: T,
    mu0: T,
    q0: T,
    nu0: T,
    r: T,
) -> Result<T> {
    if params.regime() != DampingRegime::Weak {
        return Err(Error::WrongRegime {
            expected: "weak",
            actual: params.regime().name(),
        });
    }
    if !(r > T::zero()) || !r.is_finite() {
        return Err(Error::InvalidParameter {
            field: "r",
            reason: format!("node radius must be positive, got {r}"),
        });
    }
    check_non_vacuous(p0, mu0)?;
    check_non_vacuous(q0, nu0)?;
    let sc = params.spectral_constants();
    let (alpha, omega) = (sc.alpha(), sc.omega());
    let kappa = params.kappa();

    let factor_sq = |x: T, y: T, scale: T| -> Result<T> {
        let num = (x * scale + alpha * y * scale).powi(2) + (omega * y * scale).powi(2);
        if num == T::zero() {
            return Ok(T::zero());
        }
        let tp = to_transformed(x, y)?;
        let (t_star, _) = closedform::first_min_weak(params, tp.w, tp.s)?;
        Ok(num / (kappa * scale * scale * (lit::<T>(2.0) * alpha * t_star).exp()))
    };
    let radial = factor_sq(p0, mu0, T::one())?.sqrt();
    let tangential = factor_sq(q0, nu0, r)?;
    let n_minus_1 = lit::<T>((params.dim() - 1) as f64);
    Ok(radial * tangential.powf(n_minus_1 / lit(2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odeint::{integrate, simulate_pmu, Event, EventKind, Options};

    fn params(kappa: f64, beta: f64) -> Parameters<f64> {
        Parameters::new(kappa, beta, 2, 1e-9).unwrap()
    }

    // escape time of p' = -p^2 - beta p - kappa below -1e8
    fn riccati_escape(p: &Parameters<f64>, p0: f64) -> f64 {
        let (k, b) = (p.kappa(), p.beta());
        let ev = [Event::new(EventKind::BlowUp, |_t, y: &[f64]| y[0] + 1e8)];
        let tr = integrate(
            move |_t, y: &[f64], dy: &mut [f64]| dy[0] = -y[0] * y[0] - b * y[0] - k,
            &[p0],
            0.0,
            100.0,
            &Options::default(),
            &ev,
        )
        .unwrap();
        tr.terminal_event.expect("escape").time
    }

    #[test]
    fn vacuous_worked_values() {
        let p = params(2.0, 3.0);
        let c = classify_vacuous(&p, -3.0);
        assert_eq!(c.verdict, Verdict::Supercritical);
        let t = c.t_blowup.unwrap();
        assert!((t - 2f64.ln()).abs() < 1e-14);
        assert!((t - riccati_escape(&p, -3.0)).abs() < 1e-4);

        let p = params(1.0, 2.0);
        let t = classify_vacuous(&p, -2.0).t_blowup.unwrap();
        assert!((t - 1.0).abs() < 1e-14);
        assert!((t - riccati_escape(&p, -2.0)).abs() < 1e-4);

        let p = params(1.0, 1.0);
        let t = classify_vacuous(&p, 0.0).t_blowup.unwrap();
        assert!((t - 4.0 * std::f64::consts::PI / (3.0 * 3f64.sqrt())).abs() < 1e-14);
        assert!((t - riccati_escape(&p, 0.0)).abs() < 1e-4);
    }

    #[test]
    fn vacuous_subcritical_side() {
        // p_- = -2 for kappa = 2, beta = 3
        let p = params(2.0, 3.0);
        assert_eq!(classify_vacuous(&p, -2.0).verdict, Verdict::Subcritical);
        assert_eq!(classify_vacuous(&p, 5.0).verdict, Verdict::Subcritical);
        let p = params(1.0, 2.0);
        assert_eq!(classify_vacuous(&p, -1.0).verdict, Verdict::Subcritical);
    }

    #[test]
    fn strong_desk_case() {
        let p = params(3.0, 4.0);
        assert_eq!(classify_explicit(&p, -5.0, 0.0).unwrap().verdict, Verdict::Subcritical);
        let c = classify_explicit(&p, -6.0, 0.0).unwrap();
        assert_eq!(c.verdict, Verdict::Supercritical);
        assert!(c.t_blowup.is_some());

        // simulation oracle
        let opts = Options::default();
        let tr = simulate_pmu(&p, -5.0, 0.0, 200.0, &opts).unwrap();
        assert!(tr.terminal_event.is_none());
        let tr = simulate_pmu(&p, -6.0, 0.0, 200.0, &opts).unwrap();
        let ev = tr.terminal_event.unwrap();
        assert_eq!(ev.kind, EventKind::BlowUp);
        assert!((ev.time - c.t_blowup.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn equilibrium_is_subcritical() {
        for (k, b) in [(3.0, 4.0), (1.0, 2.0), (1.0, 1.0), (1.0, 0.0)] {
            let c = classify_explicit(&params(k, b), 0.0, 0.0).unwrap();
            assert_eq!(c.verdict, Verdict::Subcritical);
        }
    }

    #[test]
    fn vacuous_data_rejected_by_explicit() {
        assert!(matches!(
            classify_explicit(&params(1.0, 3.0), -1.0, 1.0),
            Err(Error::NotNonVacuous { .. })
        ));
    }

    #[test]
    fn strong_past_minimum_is_subcritical() {
        // w0 > 0 with the minimum of s in the past: s only grows from s0 > 0
        let p = params(3.0, 4.0);
        let (p0, mu0) = (0.5, -1e3);
        let tp = to_transformed(p0, mu0).unwrap();
        assert!(blowup_time(&p, tp.w, tp.s).unwrap().is_none());
        assert!(!explicit_is_supercritical(&p, p0, mu0).unwrap());
        let tr = simulate_pmu(&p, p0, mu0, 100.0, &Options::default()).unwrap();
        assert!(tr.terminal_event.is_none());
    }

    #[test]
    fn blowup_time_examples() {
        let p = params(3.0, 4.0);
        let tp = to_transformed(-6.0, 0.0).unwrap();
        let t = blowup_time(&p, tp.w, tp.s).unwrap().unwrap();
        assert!(closedform::eval(&p, tp.w, tp.s, t).s.abs() < 1e-9);
        assert!(blowup_time(&p, 0.0, 1.0).unwrap().is_none());

        let pw = params(1.0, 1.0);
        assert!(explicit_is_supercritical(&pw, 0.0, 0.9).unwrap());
        let tp = to_transformed(0.0, 0.9).unwrap();
        let t = blowup_time(&pw, tp.w, tp.s).unwrap().unwrap();
        let tr = simulate_pmu(&pw, 0.0, 0.9, 50.0, &Options::default()).unwrap();
        assert!((tr.terminal_event.unwrap().time - t).abs() < 1e-6);
        assert!(blowup_time(&pw, 0.0, 1.0).unwrap().is_none());
        assert!(blowup_time(&pw, 0.0, -1.0).is_err());
    }

    #[test]
    fn boundary_desk_values() {
        let b = threshold_boundary(&params(3.0, 4.0), &[0.0]).unwrap()[0];
        assert!((b.lower.unwrap() + 27f64.sqrt()).abs() < 1e-9);
        assert!(b.upper.is_none());

        let p = Parameters::new(1.0, 1e-8, 2, 1e-9).unwrap();
        let b = threshold_boundary(&p, &[0.25]).unwrap()[0];
        assert!((b.lower.unwrap() + 0.5f64.sqrt()).abs() < 1e-3);
        assert!((b.upper.unwrap() - 0.5f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn weak_boundary_empty_above_s_star() {
        // s* = e^{pi/sqrt 3} + 1 for kappa = beta = 1; mu0 = 0.9 gives s0 = 10
        let b = threshold_boundary(&params(1.0, 1.0), &[0.9]).unwrap()[0];
        assert!(b.lower.is_none() && b.upper.is_none());
    }

    #[test]
    fn density_bound_examples() {
        let p = params(1.0, 1.0);
        assert_eq!(weak_density_bound(&p, 0.0, 0.0, 0.0, 0.0, 1.0).unwrap(), 0.0);
        let v = weak_density_bound(&p, -0.5, 0.2, -0.4, 0.1, 1.0).unwrap();

        // independent evaluation with t* from a grid search for the first minimum
        let first_min = |x: f64, y: f64| {
            let tp = to_transformed(x, y).unwrap();
            let n = 400_000;
            let mut prev = tp.w;
            for i in 1..=n {
                let t = 20.0 * i as f64 / n as f64;
                let w = closedform::eval(&p, tp.w, tp.s, t).w;
                if prev < 0.0 && w >= 0.0 {
                    return t;
                }
                prev = w;
            }
            panic!("no minimum");
        };
        let (a, om) = (0.5, 3f64.sqrt() / 2.0);
        let ta = first_min(-0.5, 0.2);
        let tb = first_min(-0.4, 0.1);
        let fa = (((-0.5 + a * 0.2f64).powi(2) + (om * 0.2f64).powi(2)) / (a * 2.0 * ta).exp()).sqrt();
        let fb = (((-0.4 + a * 0.1f64).powi(2) + (om * 0.1f64).powi(2)) / (a * 2.0 * tb).exp()).sqrt();
        assert!(v > 0.0);
        assert!((v - fa * fb).abs() < 1e-4 * v);
        assert!(weak_density_bound(&params(1.0, 3.0), 0.0, 0.0, 0.0, 0.0, 1.0).is_err());
    }
}
