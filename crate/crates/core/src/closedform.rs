//! Exact trajectories of the linear system `w' = -beta w + kappa (1 - s)`, `s' = w`.
//!
//! Every evaluator returns `(w(t), s(t))` for the initial value `(w0, s0)` at
//! `t = 0`. Negative `t` is allowed and traces the trajectory backwards.

use crate::error::{Error, Result};
use crate::model::{DampingRegime, Parameters, SpectralConstants, TransformedPoint};
use crate::real::{exp_clamped, lit, Real};

/// Coefficients of `s(t) = 1 + a1 e^{-lambda1 t} + a2 e^{-lambda2 t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongCoefficients<T> {
    pub a1: T,
    pub a2: T,
}

impl<T: Real> StrongCoefficients<T> {
    pub fn new(lambda1: T, lambda2: T, w0: T, s0: T) -> Self {
        let gap = lambda2 - lambda1;
        let d = s0 - T::one();
        Self {
            a1: (w0 + lambda2 * d) / gap,
            a2: -(w0 + lambda1 * d) / gap,
        }
    }
}

/// Polar form `s(t) = 1 + R e^{-alpha t} cos(omega t - psi)` of a weak-regime
/// trajectory, together with the branch offset that locates its first minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakPolar<T> {
    pub r_amp: T,
    pub psi: T,
    pub beta0: T,
}

/// Kind of a local extremum of `s(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Min,
    Max,
}

/// A local extremum of `s(t)` at `t_star >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum<T> {
    pub t_star: T,
    pub kind: ExtremumKind,
}

fn require<T: Real>(params: &Parameters<T>, expected: DampingRegime) -> Result<()> {
    if params.regime() == expected {
        Ok(())
    } else {
        Err(Error::WrongRegime {
            expected: expected.name(),
            actual: params.regime().name(),
        })
    }
}

/// Strong-regime trajectory.
pub fn eval_strong<T: Real>(params: &Parameters<T>, w0: T, s0: T, t: T) -> Result<TransformedPoint<T>> {
    require(params, DampingRegime::Strong)?;
    let (l1, l2) = params
        .spectral_constants()
        .lambdas()
        .expect("strong regime has real rates");
    let c = StrongCoefficients::new(l1, l2, w0, s0);
    let e1 = exp_clamped(-l1 * t);
    let e2 = exp_clamped(-l2 * t);
    Ok(TransformedPoint {
        w: -c.a1 * l1 * e1 - c.a2 * l2 * e2,
        s: T::one() + c.a1 * e1 + c.a2 * e2,
    })
}

/// Critical-regime trajectory, using `alpha = beta / 2`.
pub fn eval_critical<T: Real>(
    params: &Parameters<T>,
    w0: T,
    s0: T,
    t: T,
) -> Result<TransformedPoint<T>> {
    require(params, DampingRegime::Critical)?;
    let alpha = params.spectral_constants().alpha();
    let d = s0 - T::one();
    let b = w0 + alpha * d;
    let e = exp_clamped(-alpha * t);
    Ok(TransformedPoint {
        w: (w0 - alpha * b * t) * e,
        s: T::one() + (d + b * t) * e,
    })
}

/// Weak-regime trajectory (including the undamped case `beta = 0`).
pub fn eval_weak<T: Real>(params: &Parameters<T>, w0: T, s0: T, t: T) -> Result<TransformedPoint<T>> {
    require(params, DampingRegime::Weak)?;
    let sc = params.spectral_constants();
    let (alpha, omega) = (sc.alpha(), sc.omega());
    let kappa = params.kappa();
    let d = s0 - T::one();
    let e = exp_clamped(-alpha * t);
    let (sin, cos) = (omega * t).sin_cos();
    Ok(TransformedPoint {
        w: e * (w0 * cos - (alpha * w0 + kappa * d) / omega * sin),
        s: T::one() + e * (d * cos + (w0 + alpha * d) / omega * sin),
    })
}

/// Dispatches to the evaluator of the parameters' regime.
pub fn eval<T: Real>(params: &Parameters<T>, w0: T, s0: T, t: T) -> TransformedPoint<T> {
    let r = match params.regime() {
        DampingRegime::Strong => eval_strong(params, w0, s0, t),
        DampingRegime::Critical => eval_critical(params, w0, s0, t),
        DampingRegime::Weak => eval_weak(params, w0, s0, t),
    };
    r.expect("dispatch matches regime")
}

/// Location and kind of the extremum of `s(t)` on `t >= 0` in the strong or
/// critical regime.
///
/// An extremum with `t_star < 0` lies in the past and is reported as absent;
/// roundoff-level negative values are clamped to `t_star = 0`.
pub fn extremum_time<T: Real>(params: &Parameters<T>, w0: T, s0: T) -> Result<Option<Extremum<T>>> {
    match params.spectral_constants() {
        SpectralConstants::Strong { lambda1, lambda2 } => {
            let c = StrongCoefficients::new(lambda1, lambda2, w0, s0);
            if c.a1 == T::zero() || c.a2 == T::zero() || c.a1.signum() == c.a2.signum() {
                return Ok(None);
            }
            let ratio = -(c.a2 * lambda2) / (c.a1 * lambda1);
            let t_star = ratio.ln() / (lambda2 - lambda1);
            let kind = if c.a1 < T::zero() {
                ExtremumKind::Min
            } else {
                ExtremumKind::Max
            };
            Ok(clamp_past(t_star, lambda2 - lambda1).map(|t_star| Extremum { t_star, kind }))
        }
        SpectralConstants::Critical { alpha } => {
            let b = w0 + alpha * (s0 - T::one());
            let same_sign = (w0 > T::zero() && b > T::zero()) || (w0 < T::zero() && b < T::zero());
            if !same_sign {
                return Ok(None);
            }
            let kind = if w0 < T::zero() {
                ExtremumKind::Min
            } else {
                ExtremumKind::Max
            };
            Ok(Some(Extremum {
                t_star: w0 / (alpha * b),
                kind,
            }))
        }
        SpectralConstants::Weak { .. } => Err(Error::WrongRegime {
            expected: "strong or critical",
            actual: "weak",
        }),
    }
}

fn clamp_past<T: Real>(t_star: T, rate: T) -> Option<T> {
    let slack = lit::<T>(64.0) * T::epsilon() / rate;
    if t_star >= T::zero() {
        Some(t_star)
    } else if t_star > -slack {
        Some(T::zero())
    } else {
        None
    }
}

/// Polar amplitude, phase and first-minimum branch offset of a weak-regime start.
pub fn weak_polar<T: Real>(params: &Parameters<T>, w0: T, s0: T) -> Result<WeakPolar<T>> {
    require(params, DampingRegime::Weak)?;
    let sc = params.spectral_constants();
    let (alpha, omega) = (sc.alpha(), sc.omega());
    let d = s0 - T::one();
    let sin_part = (w0 + alpha * d) / omega;
    Ok(WeakPolar {
        r_amp: d.hypot(sin_part),
        psi: sin_part.atan2(d),
        beta0: branch_offset(alpha * w0 + params.kappa() * d, w0),
    })
}

// Offset added to arctan(omega w0 / denom) so that omega t* lands on the first
// positive-time minimum of s.
fn branch_offset<T: Real>(denom: T, w0: T) -> T {
    if denom > T::zero() || denom == T::zero() {
        T::PI()
    } else if w0 < T::zero() {
        T::zero()
    } else {
        lit::<T>(2.0) * T::PI()
    }
}

/// First positive-time local minimum `(t*, s(t*))` of a weak-regime trajectory.
///
/// When `alpha w0 + kappa (s0 - 1) = 0` the arctan argument diverges and its
/// limit is used: `omega t* = pi/2` for `w0 < 0`, `3 pi/2` for `w0 > 0`.
/// A start with `w0 = 0`, `s0 < 1` sits on a minimum at `t = 0`; the next one,
/// `omega t* = 2 pi`, is returned.
pub fn first_min_weak<T: Real>(params: &Parameters<T>, w0: T, s0: T) -> Result<(T, T)> {
    let polar = weak_polar(params, w0, s0)?;
    let sc = params.spectral_constants();
    let (alpha, omega) = (sc.alpha(), sc.omega());
    let kappa = params.kappa();
    let denom = alpha * w0 + kappa * (s0 - T::one());
    if denom == T::zero() && w0 == T::zero() {
        return Err(Error::InvalidParameter {
            field: "(w0, s0)",
            reason: "the equilibrium (0, 1) has no local minimum".into(),
        });
    }
    let half_pi = T::FRAC_PI_2();
    let phase = if denom == T::zero() {
        if w0 < T::zero() {
            half_pi
        } else {
            lit::<T>(3.0) * half_pi
        }
    } else {
        polar.beta0 + (omega * w0 / denom).atan()
    };
    let t_star = phase / omega;
    let s_min = T::one() - omega / kappa.sqrt() * polar.r_amp * exp_clamped(-alpha * t_star);
    Ok((t_star, s_min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kappa: f64, beta: f64) -> Parameters<f64> {
        Parameters::new(kappa, beta, 2, 1e-9).unwrap()
    }

    // Classical RK4 on the linear system with a fixed small step; independent of
    // the closed forms.
    fn rk4(p: &Parameters<f64>, w0: f64, s0: f64, t: f64, steps: usize) -> (f64, f64) {
        let (k, b) = (p.kappa(), p.beta());
        let f = |w: f64, s: f64| (-b * w + k * (1.0 - s), w);
        let h = t / steps as f64;
        let (mut w, mut s) = (w0, s0);
        for _ in 0..steps {
            let (a1, b1) = f(w, s);
            let (a2, b2) = f(w + 0.5 * h * a1, s + 0.5 * h * b1);
            let (a3, b3) = f(w + 0.5 * h * a2, s + 0.5 * h * b2);
            let (a4, b4) = f(w + h * a3, s + h * b3);
            w += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            s += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        (w, s)
    }

    #[test]
    fn initial_condition_reproduced() {
        for (k, b) in [(3.0, 4.0), (1.0, 2.0), (1.0, 1.0), (2.0, 0.0)] {
            let p = params(k, b);
            let tp = eval(&p, -0.7, 1.3, 0.0);
            assert!((tp.w + 0.7).abs() < 1e-14 && (tp.s - 1.3).abs() < 1e-14);
        }
    }

    #[test]
    fn strong_trajectory_through_origin() {
        let p = params(3.0, 4.0);
        let c = StrongCoefficients::<f64>::new(1.0, 3.0, 0.0, 0.0);
        assert!((c.a1 + 1.5).abs() < 1e-15 && (c.a2 - 0.5).abs() < 1e-15);
        for t in [-2.0, -0.5, 0.3, 1.0, 4.0] {
            let tp = eval_strong(&p, 0.0, 0.0, t).unwrap();
            let expect = 1.0 - 1.5 * (-t).exp() + 0.5 * (-3.0 * t).exp();
            assert!((tp.s - expect).abs() < 1e-12 * expect.abs().max(1.0));
        }
        let far = eval_strong(&p, 0.0, 0.0, 60.0).unwrap();
        assert!(far.w.abs() < 1e-20 && (far.s - 1.0).abs() < 1e-20);
    }

    #[test]
    fn critical_examples() {
        let p = params(1.0, 2.0);
        for t in [0.0, 0.5, 2.0] {
            let tp = eval_critical(&p, 0.0, 0.0, t).unwrap();
            let expect = 1.0 - (-t).exp() - t * (-t).exp();
            assert!((tp.s - expect).abs() < 1e-15);
        }
        let tp = eval_critical(&p, 0.0, 2.0, 1.0).unwrap();
        assert!((tp.s - 1.735_758_882_342_884_7).abs() < 1e-14);
        let (_, s_rk) = rk4(&p, 0.0, 2.0, 1.0, 2000);
        assert!((tp.s - s_rk).abs() < 1e-10);
    }

    #[test]
    fn weak_examples() {
        let p = params(1.0, 1.0);
        let omega = 3f64.sqrt() / 2.0;
        let t = -std::f64::consts::PI / omega;
        let tp = eval_weak(&p, 0.0, 0.0, t).unwrap();
        let expect = (std::f64::consts::PI / 3f64.sqrt()).exp() + 1.0;
        assert!((tp.s - expect).abs() < 1e-12);
        assert!((tp.s - 7.133_707_4).abs() < 1e-6);
        let (_, s_rk) = rk4(&p, 0.0, 0.0, t, 20_000);
        assert!((tp.s - s_rk).abs() < 1e-8);

        for t in [-3.0, 0.0, 1.0, 17.0] {
            let tp = eval_weak(&p, 0.0, 1.0, t).unwrap();
            assert_eq!(tp, TransformedPoint::new(0.0, 1.0));
        }
    }

    #[test]
    fn wrong_regime_is_rejected() {
        assert!(eval_strong(&params(1.0, 1.0), 0.0, 0.0, 1.0).is_err());
        assert!(eval_weak(&params(1.0, 3.0), 0.0, 0.0, 1.0).is_err());
        assert!(eval_critical(&params(1.0, 3.0), 0.0, 0.0, 1.0).is_err());
        assert!(first_min_weak(&params(1.0, 2.0), 0.0, 0.0).is_err());
        assert!(extremum_time(&params(1.0, 1.0), 0.0, 0.0).is_err());
    }

    // sign change of w on a fine grid, and extremum of s
    fn grid_extremum(p: &Parameters<f64>, w0: f64, s0: f64, t_max: f64) -> Option<(f64, bool)> {
        let n = 200_000;
        let mut prev = eval(p, w0, s0, 0.0).w;
        for i in 1..=n {
            let t = t_max * i as f64 / n as f64;
            let w = eval(p, w0, s0, t).w;
            if prev != 0.0 && w.signum() != prev.signum() {
                return Some((t, prev < 0.0));
            }
            prev = w;
        }
        None
    }

    #[test]
    fn extremum_examples() {
        let p = params(3.0, 4.0);
        let e = extremum_time(&p, 0.0, 0.0).unwrap().unwrap();
        assert_eq!(e.t_star, 0.0);
        assert_eq!(e.kind, ExtremumKind::Min);

        let e = extremum_time(&p, 1.0, 1.0).unwrap().unwrap();
        assert_eq!(e.kind, ExtremumKind::Max);
        assert!((e.t_star - 3f64.ln() / 2.0).abs() < 1e-14);
        let (tg, falling_before) = grid_extremum(&p, 1.0, 1.0, 5.0).unwrap();
        assert!(!falling_before && (tg - e.t_star).abs() < 1e-4);

        let pc = params(1.0, 2.0);
        let e = extremum_time(&pc, -1.0, 1.0).unwrap().unwrap();
        assert_eq!(e.kind, ExtremumKind::Min);
        assert!((e.t_star - 1.0).abs() < 1e-15);
        let (tg, falling) = grid_extremum(&pc, -1.0, 1.0, 5.0).unwrap();
        assert!(falling && (tg - 1.0).abs() < 1e-4);

        // monotone cases
        assert!(extremum_time(&pc, 1.0, 0.0).unwrap().is_none());
        assert!(extremum_time(&p, 0.0, 1.0).unwrap().is_none());
    }

    #[test]
    fn first_min_weak_examples() {
        let p = params(1.0, 1.0);
        let (t, s_min) = first_min_weak(&p, 0.0, 2.0).unwrap();
        assert!((t - 2.0 * std::f64::consts::PI / 3f64.sqrt()).abs() < 1e-13);
        assert!((t - 3.6276).abs() < 1e-4);
        assert!((eval_weak(&p, 0.0, 2.0, t).unwrap().s - s_min).abs() < 1e-12);
        // grid search for the first minimum
        let n = 100_000;
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=n {
            let tt = 6.0 * i as f64 / n as f64;
            let s = eval_weak(&p, 0.0, 2.0, tt).unwrap().s;
            if s < best.1 {
                best = (tt, s);
            }
        }
        assert!((best.0 - t).abs() < 1e-3);

        let polar = weak_polar(&p, -1.0, 1.0).unwrap();
        assert_eq!(polar.beta0, 0.0);
        let (t, s_min) = first_min_weak(&p, -1.0, 1.0).unwrap();
        assert!(t > 0.0);
        assert!((eval_weak(&p, -1.0, 1.0, t).unwrap().s - s_min).abs() < 1e-12);
        assert!(eval_weak(&p, -1.0, 1.0, t).unwrap().w.abs() < 1e-12);
    }

    #[test]
    fn first_min_weak_degenerate_denominator() {
        let p = params(1.0, 1.0);
        // alpha w0 + kappa (s0 - 1) = 0 with w0 = -1: s0 = 1.5
        for (w0, s0) in [(-1.0, 1.5), (1.0, 0.5)] {
            let (t, s_min) = first_min_weak(&p, w0, s0).unwrap();
            let tp = eval_weak(&p, w0, s0, t).unwrap();
            assert!(tp.w.abs() < 1e-12);
            assert!((tp.s - s_min).abs() < 1e-12);
            let before = eval_weak(&p, w0, s0, t - 1e-3).unwrap().s;
            let after = eval_weak(&p, w0, s0, t + 1e-3).unwrap().s;
            assert!(before > s_min && after > s_min);
        }
        assert!(first_min_weak(&p, 0.0, 1.0).is_err());
    }

    #[test]
    fn first_min_weak_branches_match_grid() {
        let p = params(2.0, 0.7);
        for (w0, s0) in [(0.5, 2.0), (-0.5, 2.0), (-2.0, 0.3), (2.0, 0.3), (0.0, 0.4), (0.0, 1.6)] {
            let (t, s_min) = first_min_weak(&p, w0, s0).unwrap();
            let tp = eval_weak(&p, w0, s0, t).unwrap();
            assert!(tp.w.abs() < 1e-10, "w at t* for {w0},{s0}");
            assert!((tp.s - s_min).abs() < 1e-12);
            // no earlier positive-time minimum
            let n = 20_000;
            let mut prev = eval_weak(&p, w0, s0, 0.0).unwrap().w;
            for i in 1..n {
                let tt = t * i as f64 / n as f64;
                let w = eval_weak(&p, w0, s0, tt).unwrap().w;
                assert!(!(prev < 0.0 && w > 0.0), "earlier minimum near {tt} for {w0},{s0}");
                prev = w;
            }
        }
    }

    #[test]
    fn polar_form_matches() {
        let p = params(1.5, 0.9);
        let sc = p.spectral_constants();
        let (w0, s0) = (0.8, 0.4);
        let polar = weak_polar(&p, w0, s0).unwrap();
        let d = s0 - 1.0;
        let r2 = d * d + (w0 + sc.alpha() * d).powi(2) / sc.omega().powi(2);
        assert!((polar.r_amp.powi(2) - r2).abs() < 1e-12 * r2);
        for t in [0.0, 0.7, 3.0, 9.0] {
            let s = 1.0
                + polar.r_amp * (-sc.alpha() * t).exp() * (sc.omega() * t - polar.psi).cos();
            assert!((s - eval_weak(&p, w0, s0, t).unwrap().s).abs() < 1e-12);
        }
    }
}
