//! Decay-rate estimation and three-way classifier cross-validation.

use rayon::prelude::*;

use crate::closedform;
use crate::error::{Error, Result};
use crate::lyapunov::LyapunovClassifier;
use crate::model::{DampingRegime, Parameters, SpectralConstants};
use crate::odeint::{integrate, pmu_rhs, Event, EventKind, Options, Trajectory, BLOWUP_GUARD};
use crate::real::{lit, Real};
use crate::thresholds::{classify_explicit, threshold_boundary, Classification, Method, Verdict};

fn exceptional<T: Real>(x: T, y: T) -> bool {
    // x + y == 0 up to the rounding of forming the sum
    (x + y).abs() <= lit::<T>(64.0) * T::epsilon() * (x.abs() + y.abs())
}

/// Decay rate predicted for subcritical `(p0, mu0)` and whether the generic
/// (slow) branch applies. `eps` only enters under critical damping, where the
/// generic rate is `beta / 2 - eps`.
pub fn expected_rate<T: Real>(params: &Parameters<T>, p0: T, mu0: T, eps: T) -> (T, bool) {
    match params.spectral_constants() {
        SpectralConstants::Strong { lambda1, lambda2 } => {
            if exceptional(p0, lambda2 * mu0) {
                (lambda2, false)
            } else {
                (lambda1, true)
            }
        }
        SpectralConstants::Critical { alpha } => {
            if exceptional(p0, alpha * mu0) {
                (alpha, false)
            } else {
                (alpha - eps, true)
            }
        }
        SpectralConstants::Weak { alpha, .. } => (alpha, true),
    }
}

/// How samples are reduced before the log-linear regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Every sample; all must be positive.
    Raw,
    /// Local maxima only, for oscillating signals.
    PeakEnvelope,
}

/// Least-squares exponential rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit<T> {
    pub gamma: T,
    /// RMS of the regression residuals in log space.
    pub residual: T,
    pub window: (T, T),
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayReport<T> {
    pub gamma_fit: T,
    pub gamma_expected: T,
    pub window: (T, T),
    pub residual: T,
    pub generic_branch: bool,
}

impl<T: Real> DecayReport<T> {
    pub fn relative_error(&self) -> T {
        ((self.gamma_fit - self.gamma_expected) / self.gamma_expected).abs()
    }
}

/// Fits `log q(t) ~ c - gamma t` to samples.
pub fn fit_samples<T: Real>(times: &[T], values: &[T], mode: FitMode) -> Result<RateFit<T>> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::Fit("need at least two samples".into()));
    }
    let (ts, vs): (Vec<T>, Vec<T>) = match mode {
        FitMode::Raw => {
            if let Some(i) = values.iter().position(|&v| !(v > T::zero()) || !v.is_finite()) {
                return Err(Error::Fit(format!(
                    "quantity is {} at t = {} inside the window; widen or move the window",
                    values[i], times[i]
                )));
            }
            (times.to_vec(), values.to_vec())
        }
        FitMode::PeakEnvelope => {
            let mut ts = Vec::new();
            let mut vs = Vec::new();
            for i in 1..values.len() - 1 {
                let v = values[i];
                if v > values[i - 1] && v >= values[i + 1] && v > T::zero() {
                    ts.push(times[i]);
                    vs.push(v);
                }
            }
            if ts.len() < 2 {
                return Err(Error::Fit(format!("only {} peaks in the window", ts.len())));
            }
            (ts, vs)
        }
    };
    let m = lit::<T>(ts.len() as f64);
    let logs: Vec<T> = vs.iter().map(|v| v.ln()).collect();
    let tm = ts.iter().fold(T::zero(), |a, &b| a + b) / m;
    let lm = logs.iter().fold(T::zero(), |a, &b| a + b) / m;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&t, &l) in ts.iter().zip(&logs) {
        sxx = sxx + (t - tm) * (t - tm);
        sxy = sxy + (t - tm) * (l - lm);
    }
    if sxx == T::zero() {
        return Err(Error::Fit("degenerate sample times".into()));
    }
    let slope = sxy / sxx;
    let icpt = lm - slope * tm;
    let ss = ts
        .iter()
        .zip(&logs)
        .fold(T::zero(), |a, (&t, &l)| a + (l - icpt - slope * t).powi(2));
    Ok(RateFit {
        gamma: -slope,
        residual: (ss / m).sqrt(),
        window: (ts[0], *ts.last().unwrap()),
        points: ts.len(),
    })
}

/// Samples `quantity` on a uniform grid of the window (from the dense output)
/// and fits an exponential rate.
pub fn fit_rate<T: Real>(
    trajectory: &Trajectory<T>,
    quantity: impl Fn(T, &[T]) -> T,
    window: (T, T),
    mode: FitMode,
) -> Result<RateFit<T>> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Fit(format!("empty window ({lo}, {hi})")));
    }
    const SAMPLES: usize = 4000;
    let mut times = Vec::with_capacity(SAMPLES + 1);
    let mut values = Vec::with_capacity(SAMPLES + 1);
    for k in 0..=SAMPLES {
        let t = lo + (hi - lo) * lit::<T>(k as f64) / lit::<T>(SAMPLES as f64);
        let y = trajectory
            .sample(t)
            .ok_or_else(|| Error::Fit(format!("trajectory has no dense output at t = {t}")))?;
        times.push(t);
        values.push(quantity(t, &y));
    }
    let mut fit = fit_samples(&times, &values, mode)?;
    if mode == FitMode::Raw {
        fit.window = window;
    }
    Ok(fit)
}

/// Fit window skipping the transient.
///
/// Strong damping starts once the fast mode is below `1e-3` of the slow one
/// (at least `5 / lambda1`) and spans `15 / lambda1`; on the exceptional branch
/// it is `[3 / lambda2, 10 / lambda2]`. Critical damping uses
/// `[10 / alpha, 40 / alpha]`, where the `t e^{-alpha t}` factor has flattened.
/// Weak damping starts after one period and spans at least two periods.
pub fn default_window<T: Real>(params: &Parameters<T>, p0: T, mu0: T) -> (T, T) {
    let gap = T::one() - mu0;
    let (w0, s0) = (p0 / gap, gap.recip());
    match params.spectral_constants() {
        SpectralConstants::Strong { lambda1, lambda2 } => {
            if exceptional(p0, lambda2 * mu0) {
                (lit::<T>(3.0) / lambda2, lit::<T>(10.0) / lambda2)
            } else {
                let c = closedform::StrongCoefficients::new(lambda1, lambda2, w0, s0);
                let ratio = (c.a2 / c.a1).abs();
                let settle = (lit::<T>(1e3) * ratio).ln() / (lambda2 - lambda1);
                let lo = (lit::<T>(5.0) / lambda1).max(settle);
                (lo, lo + lit::<T>(15.0) / lambda1)
            }
        }
        SpectralConstants::Critical { alpha } => (lit::<T>(10.0) / alpha, lit::<T>(40.0) / alpha),
        SpectralConstants::Weak { alpha, omega } => {
            let two_pi = T::PI() * lit(2.0);
            let lo = (two_pi / omega).max(lit::<T>(2.0) / alpha);
            (lo, lo + (lit::<T>(2.0) * two_pi / omega).max(lit::<T>(8.0) / alpha))
        }
    }
}

/// Simulates subcritical `(p0, mu0)` and fits the decay of `|s - 1| =
/// |mu / (1 - mu)|` over `window` (or [`default_window`]). Weak damping fits
/// the peak envelope.
pub fn decay_report<T: Real>(
    params: &Parameters<T>,
    p0: T,
    mu0: T,
    eps: T,
    window: Option<(T, T)>,
) -> Result<DecayReport<T>> {
    if classify_explicit(params, p0, mu0)?.verdict != Verdict::Subcritical {
        return Err(Error::InvalidParameter {
            field: "(p0, mu0)",
            reason: "decay rates are defined for subcritical data only".into(),
        });
    }
    let window = window.unwrap_or_else(|| default_window(params, p0, mu0));
    if !(window.0 >= T::zero() && window.0 < window.1) {
        return Err(Error::InvalidParameter {
            field: "window",
            reason: format!("need 0 <= t_lo < t_hi, got ({}, {})", window.0, window.1),
        });
    }
    // relative error control only: the signal shrinks by many decades
    let floor = lit::<T>(100.0) * T::epsilon();
    let mut opts = Options::with_tolerances(lit::<T>(1e-12).max(floor), T::min_positive_value()).dense();
    opts.max_steps = 2_000_000;
    let traj = integrate(pmu_rhs(params), &[p0, mu0], T::zero(), window.1, &opts, &[])?;
    let mode = match params.regime() {
        DampingRegime::Weak => FitMode::PeakEnvelope,
        _ => FitMode::Raw,
    };
    let fit = fit_rate(&traj, |_t, y| (y[1] / (T::one() - y[1])).abs(), window, mode)?;
    let (gamma_expected, generic_branch) = expected_rate(params, p0, mu0, eps);
    Ok(DecayReport {
        gamma_fit: fit.gamma,
        gamma_expected,
        window,
        residual: fit.residual,
        generic_branch,
    })
}

/// Classifies `(p0, mu0)` by direct simulation of the `(p, mu)` system.
///
/// Supercritical when `p` reaches `-1e8`; subcritical once the trajectory
/// enters `{L < kappa / 4}`, `L = w^2 + kappa (1 - s)^2`, because `L` never
/// increases and `L < kappa` keeps `s` away from zero.
pub fn classify_simulated<T: Real>(params: &Parameters<T>, p0: T, mu0: T) -> Result<Classification<T>> {
    if mu0 >= T::one() {
        return Err(Error::NotNonVacuous {
            mu0: mu0.to_f64_lossy(),
        });
    }
    let kappa = params.kappa();
    let settle = kappa / lit(4.0);
    let lyap = move |y: &[T]| {
        let gap = T::one() - y[1];
        let w = y[0] / gap;
        let d = T::one() - gap.recip();
        w * w + kappa * d * d
    };
    let method = Method::Simulation;
    if lyap(&[p0, mu0]) < settle {
        return Ok(Classification::subcritical(method));
    }
    let guard = lit::<T>(BLOWUP_GUARD);
    let events = [
        Event::new(EventKind::BlowUp, move |_t, y: &[T]| y[0] + guard),
        Event::new(EventKind::Custom, move |_t, y: &[T]| lyap(y) - settle),
    ];
    let horizon = lit::<T>(1e3) / params.slowest_rate().max(lit::<T>(1e-3) * kappa.sqrt());
    let opts = Options::default();
    let tr = integrate(pmu_rhs(params), &[p0, mu0], T::zero(), horizon, &opts, &events)?;
    match tr.terminal_event {
        Some(ev) if ev.index == 0 => Ok(Classification::supercritical(method, Some(ev.time))),
        Some(_) => Ok(Classification::subcritical(method)),
        None => Err(Error::Integration {
            t: horizon.to_f64_lossy(),
            reason: "neither blow-up nor settling before the horizon".into(),
        }),
    }
}

/// One point where the classifiers disagree (or one of them failed).
#[derive(Debug, Clone, PartialEq)]
pub struct Disagreement<T> {
    pub p0: T,
    pub mu0: T,
    pub explicit: Option<Verdict>,
    pub lyapunov: Option<Verdict>,
    pub simulation: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation<T> {
    pub n_total: usize,
    pub n_agree: usize,
    /// Samples dropped for lying inside the boundary band.
    pub n_skipped: usize,
    pub disagreements: Vec<Disagreement<T>>,
}

impl<T> CrossValidation<T> {
    pub fn all_agree(&self) -> bool {
        self.n_agree == self.n_total
    }
}

/// `true` when `p0` lies within `margin (1 + |p_c|)` of a threshold value
/// `p_c` at the same `mu0`.
pub fn near_boundary<T: Real>(params: &Parameters<T>, p0: T, mu0: T, margin: T) -> Result<bool> {
    let b = threshold_boundary(params, &[mu0])?[0];
    Ok([b.lower, b.upper]
        .into_iter()
        .flatten()
        .any(|pc| (p0 - pc).abs() <= margin * (T::one() + pc.abs())))
}

/// Runs the explicit, Lyapunov and simulation classifiers on every sample not
/// within the relative `margin` of the threshold, in parallel.
pub fn cross_validate<T: Real>(params: &Parameters<T>, samples: &[(T, T)], margin: T) -> Result<CrossValidation<T>> {
    let mut lyap = LyapunovClassifier::new(params, LyapunovClassifier::<T>::default_tol())?;
    let s_top = samples
        .iter()
        .filter(|(_, mu)| *mu < T::one())
        .map(|(_, mu)| (T::one() - *mu).recip())
        .fold(T::zero(), T::max);
    lyap.ensure_domain(s_top)?;
    let lyap = &lyap;

    let verdicts: Vec<Option<Disagreement<T>>> = samples
        .par_iter()
        .map(|&(p0, mu0)| {
            if near_boundary(params, p0, mu0, margin).unwrap_or(false) {
                return None;
            }
            let e = classify_explicit(params, p0, mu0).ok().map(|c| c.verdict);
            let l = lyap.classify_fixed(p0, mu0).ok().map(|c| c.verdict);
            let s = classify_simulated(params, p0, mu0).ok().map(|c| c.verdict);
            Some(Disagreement {
                p0,
                mu0,
                explicit: e,
                lyapunov: l,
                simulation: s,
            })
        })
        .collect();

    let mut out = CrossValidation {
        n_total: 0,
        n_agree: 0,
        n_skipped: 0,
        disagreements: Vec::new(),
    };
    for v in verdicts {
        match v {
            None => out.n_skipped += 1,
            Some(d) => {
                out.n_total += 1;
                let agree = d.explicit.is_some() && d.explicit == d.lyapunov && d.explicit == d.simulation;
                if agree {
                    out.n_agree += 1;
                } else {
                    out.disagreements.push(d);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kappa: f64, beta: f64) -> Parameters<f64> {
        Parameters::new(kappa, beta, 2, 1e-9).unwrap()
    }

    #[test]
    fn expected_rate_examples() {
        assert_eq!(expected_rate(&params(3.0, 4.0), -0.5, 0.0, 0.05), (1.0, true));
        let (g, generic) = expected_rate(&params(3.0, 4.0), -0.3, 0.1, 0.05);
        assert!((g - 3.0).abs() < 1e-12 && !generic);
        assert_eq!(expected_rate(&params(1.0, 1.0), -0.1, 0.2, 0.05), (0.5, true));
        let (g, generic) = expected_rate(&params(1.0, 2.0), -0.2, 0.1, 0.05);
        assert!((g - 0.95).abs() < 1e-12 && generic);
        assert_eq!(expected_rate(&params(1.0, 2.0), -0.1, 0.1, 0.05), (1.0, false));
    }

    #[test]
    fn synthetic_exponential() {
        let opts = Options::with_tolerances(1e-12, 1e-300).dense();
        let tr = integrate(|_t, y: &[f64], dy: &mut [f64]| dy[0] = -2.0 * y[0], &[1.0], 0.0, 10.0, &opts, &[]).unwrap();
        let fit = fit_rate(&tr, |_t, y| y[0], (1.0, 9.0), FitMode::Raw).unwrap();
        assert!((fit.gamma - 2.0).abs() < 1e-6);
        assert!(fit.residual < 1e-8);

        let ts: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let vs: Vec<f64> = ts.iter().map(|t| ((-0.3 * t).exp() * (2.0 * t).cos()).abs()).collect();
        let fit = fit_samples(&ts, &vs, FitMode::PeakEnvelope).unwrap();
        assert!((fit.gamma - 0.3).abs() < 1e-3);
        assert!(fit_samples(&ts, &vs, FitMode::Raw).is_ok());
        let signed: Vec<f64> = ts.iter().map(|t| (-0.3 * t).exp() * (2.0 * t).cos()).collect();
        assert!(matches!(fit_samples(&ts, &signed, FitMode::Raw), Err(Error::Fit(_))));
    }

    #[test]
    fn decay_examples() {
        let r = decay_report(&params(3.0, 4.0), -0.5, 0.0, 0.05, None).unwrap();
        assert!(r.relative_error() < 0.05, "{r:?}");
        let r = decay_report(&params(3.0, 4.0), -0.3, 0.1, 0.05, None).unwrap();
        assert!(!r.generic_branch);
        assert!(r.relative_error() < 0.05, "{r:?}");
        let r = decay_report(&params(1.0, 1.0), -0.2, 0.1, 0.05, Some((5.0, 25.0))).unwrap();
        assert!(r.relative_error() < 0.05, "{r:?}");
        let r = decay_report(&params(1.0, 2.0), -0.2, 0.1, 0.05, None).unwrap();
        assert!(r.gamma_fit >= 0.9 && r.gamma_fit <= 1.02, "{r:?}");
        assert!(decay_report(&params(3.0, 4.0), -6.0, 0.0, 0.05, None).is_err());
    }

    #[test]
    fn simulated_classification() {
        let p = params(3.0, 4.0);
        assert_eq!(classify_simulated(&p, -5.0, 0.0).unwrap().verdict, Verdict::Subcritical);
        let c = classify_simulated(&p, -6.0, 0.0).unwrap();
        assert_eq!(c.verdict, Verdict::Supercritical);
        let te = classify_explicit(&p, -6.0, 0.0).unwrap().t_blowup.unwrap();
        assert!((c.t_blowup.unwrap() - te).abs() < 1e-6);
        assert_eq!(classify_simulated(&p, 0.0, 0.0).unwrap().verdict, Verdict::Subcritical);
        let w = params(1.0, 1.0);
        assert_eq!(classify_simulated(&w, 0.0, 0.9).unwrap().verdict, Verdict::Supercritical);
    }

    #[test]
    fn cross_validation_examples() {
        let p = params(1.0, 1.0);
        let eq = vec![(0.0, 0.0); 10];
        let cv = cross_validate(&p, &eq, 1e-3).unwrap();
        assert_eq!((cv.n_total, cv.n_agree), (10, 10));
        let sub = vec![(-0.1, 0.0), (0.1, 0.2), (-0.3, -0.5)];
        let cv = cross_validate(&p, &sub, 1e-3).unwrap();
        assert!(cv.all_agree(), "{cv:?}");
        let cv = cross_validate(&params(3.0, 4.0), &[(-5.0, 0.0), (-6.0, 0.0), (-27f64.sqrt(), 0.0)], 1e-3).unwrap();
        assert!(cv.all_agree());
        assert_eq!(cv.n_skipped, 1);
    }
}
