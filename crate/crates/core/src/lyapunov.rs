//! Lyapunov comparison construction of the threshold.
//!
//! `P(s)` solves `dP/ds = beta sqrt(2P) + kappa (1 - s)`, `P(0) = 0`, and the
//! curve `w = -sqrt(2P(s))` is the trajectory of the `(w, s)` flow that enters
//! the origin. Under weak damping that curve meets the `s`-axis again at `s*`,
//! and `N(s)` solves `dN/ds = -beta sqrt(2N) + kappa (1 - s)`, `N(s*) = 0`, so
//! that `w = sqrt(2N(s))` closes the subcritical region from above.
//!
//! Both square-root equations are non-Lipschitz where the solution vanishes.
//! The tables integrate them in desingularised form: with `y = sqrt(2P)` and a
//! curve parameter `tau`,
//!
//! ```text
//! ds/dtau = y,   dy/dtau = +-beta y + kappa (1 - s)
//! ```
//!
//! which is linear, so the endpoints where `y = 0` need no special start-up.

use crate::error::{Error, Result};
use crate::model::{DampingRegime, Parameters, TransformedPoint};
use crate::odeint::{integrate, Event, EventKind, Options, Trajectory};
use crate::real::{lit, Real};
use crate::roots::bracketed_root;
use crate::thresholds::{blowup_time, Classification, Method};

/// Which Lyapunov function a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableKind {
    P,
    N,
}

impl TableKind {
    pub fn name(self) -> &'static str {
        match self {
            TableKind::P => "P",
            TableKind::N => "N",
        }
    }

    fn sign<T: Real>(self) -> T {
        match self {
            TableKind::P => T::one(),
            TableKind::N => -T::one(),
        }
    }
}

/// Tabulated `P(s)` or `N(s)` with high-order interpolation.
///
/// Nodes are the accepted integrator steps in `tau`; between nodes the
/// integrator's continuous extension is used, and `s` is inverted on it by a
/// bracketed root search.
#[derive(Debug, Clone)]
pub struct LyapunovTable<T> {
    kind: TableKind,
    kappa: T,
    beta: T,
    tau: Vec<T>,
    s: Vec<T>,
    y: Vec<T>,
    domain: (T, T),
    /// `s` where `y` returned to zero, when the integration reached it.
    terminal_s: Option<T>,
    curve: Trajectory<T>,
}

impl<T: Real> LyapunovTable<T> {
    pub fn kind(&self) -> TableKind {
        self.kind
    }

    /// Closed interval on which the table may be queried.
    pub fn domain(&self) -> (T, T) {
        self.domain
    }

    /// Node abscissae, strictly increasing.
    pub fn s_grid(&self) -> &[T] {
        &self.s
    }

    /// `P` or `N` at the nodes.
    pub fn values(&self) -> Vec<T> {
        self.y.iter().map(|&y| y * y / lit(2.0)).collect()
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// For a weak-damping `P` table: the `s` at which `sqrt(2P)` returned to
    /// zero, i.e. the numerically located `s*`.
    pub fn terminal_s(&self) -> Option<T> {
        self.terminal_s
    }

    fn check(&self, s: T) -> Result<()> {
        let (lo, hi) = self.domain;
        if !(s >= lo && s <= hi) {
            return Err(Error::OutOfDomain {
                s: s.to_f64_lossy(),
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
            });
        }
        Ok(())
    }

    fn sample(&self, tau: T) -> (T, T) {
        match self.curve.sample(tau) {
            Some(v) => (v[0], v[1]),
            None => {
                // tau at the very end of the span; fall back to the node
                let i = self.tau.partition_point(|&t| t < tau).min(self.tau.len() - 1);
                (self.s[i], self.y[i])
            }
        }
    }

    /// `sqrt(2P(s))` (or `sqrt(2N(s))`).
    pub fn sqrt2_value(&self, s: T) -> Result<T> {
        self.check(s)?;
        let i = self.s.partition_point(|&x| x < s);
        if i < self.s.len() && self.s[i] == s {
            return Ok(self.y[i]);
        }
        if i == 0 {
            return Ok(self.y[0]);
        }
        if i == self.s.len() {
            return Ok(self.y[i - 1]);
        }
        let (t0, t1) = (self.tau[i - 1], self.tau[i]);
        let tol = T::epsilon() * lit::<T>(4.0) * (t0.abs().max(t1.abs()) + T::one());
        let tau = bracketed_root(|t| self.sample(t).0 - s, t0, t1, tol);
        Ok(self.sample(tau).1.max(T::zero()))
    }

    /// `P(s)` (or `N(s)`).
    pub fn value(&self, s: T) -> Result<T> {
        let y = self.sqrt2_value(s)?;
        Ok(y * y / lit(2.0))
    }

    /// `dP/ds` from the defining equation at the interpolated value.
    pub fn derivative(&self, s: T) -> Result<T> {
        let y = self.sqrt2_value(s)?;
        Ok(self.kind.sign::<T>() * self.beta * y + self.kappa * (T::one() - s))
    }

    /// Two-column `(s, value)` export at the table nodes.
    pub fn columns(&self) -> Vec<(T, T)> {
        self.s.iter().copied().zip(self.values()).collect()
    }

    /// Two-column export on `n + 1` evenly spaced points of the domain.
    pub fn resample(&self, n: usize) -> Result<Vec<(T, T)>> {
        let (lo, hi) = self.domain;
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let s = if i == n {
                    hi
                } else {
                    lo + (hi - lo) * lit::<T>(i as f64) / lit::<T>(n as f64)
                };
                Ok((s, self.value(s)?))
            })
            .collect()
    }
}

fn table_options<T: Real>(tol: T) -> Result<Options<T>> {
    if !(tol > T::zero()) || !tol.is_finite() {
        return Err(Error::InvalidParameter {
            field: "tol",
            reason: format!("tolerance must be positive, got {tol}"),
        });
    }
    let mut opts = Options::with_tolerances(tol, tol * lit(1e-2)).dense();
    opts.max_steps = 1_000_000;
    Ok(opts)
}

// Longest curve parameter span tried before giving up; s grows at least
// exponentially in tau once y > 0, so this is never the binding limit in
// practice.
fn tau_span<T: Real>(params: &Parameters<T>) -> T {
    lit::<T>(1e4) / params.kappa().sqrt().min(T::one())
}

type Nodes<T> = (Vec<T>, Vec<T>, Vec<T>, Trajectory<T>);

fn build_table<T: Real>(kind: TableKind, curve: Trajectory<T>) -> Nodes<T> {
    let mut tau = curve.times.clone();
    let mut s: Vec<T> = curve.states.iter().map(|v| v[0]).collect();
    let mut y: Vec<T> = curve.states.iter().map(|v| v[1].max(T::zero())).collect();
    if kind == TableKind::N {
        tau.reverse();
        s.reverse();
        y.reverse();
    }
    // drop nodes that fail strict monotonicity in s (only possible at a
    // tangential endpoint)
    let mut keep = vec![true; s.len()];
    let mut last = s[0];
    for i in 1..s.len() {
        if s[i] <= last {
            keep[i] = false;
        } else {
            last = s[i];
        }
    }
    let filt = |v: Vec<T>| v.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(x, _)| x).collect::<Vec<_>>();
    (filt(tau), filt(s), filt(y), curve)
}

/// Solves the `P` equation forward from `s = 0` and tabulates it on
/// `[0, s_max]`.
///
/// Under weak damping `s_max` may not exceed `s*`; the integration runs on to
/// the point where `sqrt(2P)` vanishes again, which is recorded as
/// [`LyapunovTable::terminal_s`].
#[allow(non_snake_case)]
pub fn solve_P<T: Real>(params: &Parameters<T>, s_max: T, tol: T) -> Result<LyapunovTable<T>> {
    if !(s_max > T::zero()) || !s_max.is_finite() {
        return Err(Error::InvalidParameter {
            field: "s_max",
            reason: format!("must be positive and finite, got {s_max}"),
        });
    }
    let weak = params.regime() == DampingRegime::Weak;
    if weak {
        let star = s_star(params)?;
        if s_max > star * (T::one() + lit::<T>(1e-12)) {
            return Err(Error::InvalidParameter {
                field: "s_max",
                reason: format!("weak damping requires s_max <= s* = {star}, got {s_max}"),
            });
        }
    }
    let opts = table_options(tol)?;
    let (kappa, beta) = (params.kappa(), params.beta());
    let rhs = move |_t: T, v: &[T], dv: &mut [T]| {
        dv[0] = v[1];
        dv[1] = beta * v[1] + kappa * (T::one() - v[0]);
    };
    let mut events = Vec::new();
    if weak {
        events.push(Event::new(EventKind::Custom, |_t, v: &[T]| v[1]));
    } else {
        events.push(Event::new(EventKind::Custom, move |_t, v: &[T]| s_max - v[0]));
    }
    let curve = integrate(rhs, &[T::zero(), T::zero()], T::zero(), tau_span(params), &opts, &events)?;
    if curve.terminal_event.is_none() {
        return Err(Error::Integration {
            t: curve.final_state()[0].to_f64_lossy(),
            reason: "P curve did not reach the end of the requested domain".into(),
        });
    }
    let end_s = curve.final_state()[0];
    let terminal_s = weak.then_some(end_s);
    let hi = if weak { s_max.min(end_s) } else { s_max };
    let (tau, s, y, curve) = build_table(TableKind::P, curve);
    Ok(LyapunovTable {
        kind: TableKind::P,
        kappa,
        beta,
        tau,
        s,
        y,
        domain: (T::zero(), hi),
        terminal_s,
        curve,
    })
}

/// Solves the `N` equation backward from `N(s*) = 0` down to `s = 0`. Weak
/// damping only.
#[allow(non_snake_case)]
pub fn solve_N<T: Real>(params: &Parameters<T>, tol: T) -> Result<LyapunovTable<T>> {
    let star = s_star(params)?;
    let opts = table_options(tol)?;
    let (kappa, beta) = (params.kappa(), params.beta());
    let rhs = move |_t: T, v: &[T], dv: &mut [T]| {
        dv[0] = v[1];
        dv[1] = -beta * v[1] + kappa * (T::one() - v[0]);
    };
    let events = [Event::new(EventKind::SZero, |_t, v: &[T]| v[0])];
    let curve = integrate(rhs, &[star, T::zero()], T::zero(), -tau_span(params), &opts, &events)?;
    if curve.terminal_event.is_none() {
        return Err(Error::Integration {
            t: curve.final_state()[0].to_f64_lossy(),
            reason: "N curve did not reach s = 0".into(),
        });
    }
    let (tau, s, y, curve) = build_table(TableKind::N, curve);
    Ok(LyapunovTable {
        kind: TableKind::N,
        kappa,
        beta,
        tau,
        s,
        y,
        domain: (T::zero(), star),
        terminal_s: None,
        curve,
    })
}

/// `s* = e^{beta pi / sqrt(4 kappa - beta^2)} + 1`, the second `s`-axis
/// intercept of the trajectory through the origin. Weak damping only.
pub fn s_star<T: Real>(params: &Parameters<T>) -> Result<T> {
    if params.regime() != DampingRegime::Weak {
        return Err(Error::WrongRegime {
            expected: "weak",
            actual: params.regime().name(),
        });
    }
    let (kappa, beta) = (params.kappa(), params.beta());
    let root = (lit::<T>(4.0) * kappa - beta * beta).sqrt();
    Ok((beta * T::PI() / root).exp() + T::one())
}

/// `L(w, s) = w^2 + kappa (1 - s)^2`.
pub fn lyapunov_value<T: Real>(params: &Parameters<T>, tp: TransformedPoint<T>) -> T {
    let d = T::one() - tp.s;
    tp.w * tp.w + params.kappa() * d * d
}

/// `L_P(w, s) = w + sqrt(2P(s))`: zero on the threshold curve, negative below.
pub fn level_set_residual<T: Real>(table: &LyapunovTable<T>, tp: TransformedPoint<T>) -> Result<T> {
    Ok(tp.w + table.sqrt2_value(tp.s)?)
}

/// Classifies `(p0, mu0)`, `mu0 < 1`, by the Lyapunov inequalities.
///
/// Strong/critical: subcritical iff `p0 > (mu0 - 1) sqrt(2P(s0))`. Weak:
/// subcritical iff `(mu0 - 1) sqrt(2P(s0)) < p0 < (1 - mu0) sqrt(2N(s0))`, and
/// data with `s0 >= s*` are supercritical. `s0 = 1 / (1 - mu0)`.
pub fn classify_lyapunov<T: Real>(
    params: &Parameters<T>,
    p0: T,
    mu0: T,
    p_table: &LyapunovTable<T>,
    n_table: Option<&LyapunovTable<T>>,
) -> Result<Classification<T>> {
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
    if p_table.kind() != TableKind::P {
        return Err(Error::InvalidParameter {
            field: "tables",
            reason: "first table must hold P".into(),
        });
    }
    let gap = T::one() - mu0;
    let s0 = gap.recip();
    let method = Method::Lyapunov;
    let sub = match params.regime() {
        DampingRegime::Strong | DampingRegime::Critical => p0 > -gap * p_table.sqrt2_value(s0)?,
        DampingRegime::Weak => {
            let star = s_star(params)?;
            if s0 >= star {
                false
            } else {
                let n_table = n_table.filter(|t| t.kind() == TableKind::N).ok_or(Error::InvalidParameter {
                    field: "tables",
                    reason: "weak damping needs an N table".into(),
                })?;
                // the numerically located s* may fall a few ulps short of
                // the exact one; sqrt(2P) is zero there anyway
                let hi = p_table.domain().1;
                let s_p = match p_table.terminal_s() {
                    Some(end) if hi >= end => s0.min(hi),
                    _ => s0,
                };
                let lower = -gap * p_table.sqrt2_value(s_p)?;
                let upper = gap * n_table.sqrt2_value(s0)?;
                lower < p0 && p0 < upper
            }
        }
    };
    if sub {
        Ok(Classification::subcritical(method))
    } else {
        let t = blowup_time(params, p0 / gap, s0)?;
        Ok(Classification::supercritical(method, t))
    }
}

/// Holds the tables for one parameter set and extends the `P` table on demand.
#[derive(Debug, Clone)]
pub struct LyapunovClassifier<T> {
    params: Parameters<T>,
    tol: T,
    p_table: LyapunovTable<T>,
    n_table: Option<LyapunovTable<T>>,
}

impl<T: Real> LyapunovClassifier<T> {
    /// Default table tolerance.
    pub fn default_tol() -> T {
        lit::<T>(1e-12).max(lit::<T>(100.0) * T::epsilon())
    }

    pub fn new(params: &Parameters<T>, tol: T) -> Result<Self> {
        let (p_table, n_table) = match params.regime() {
            DampingRegime::Weak => (
                solve_P(params, s_star(params)?, tol)?,
                Some(solve_N(params, tol)?),
            ),
            _ => (solve_P(params, lit(4.0), tol)?, None),
        };
        Ok(Self {
            params: *params,
            tol,
            p_table,
            n_table,
        })
    }

    pub fn params(&self) -> &Parameters<T> {
        &self.params
    }

    pub fn p_table(&self) -> &LyapunovTable<T> {
        &self.p_table
    }

    pub fn n_table(&self) -> Option<&LyapunovTable<T>> {
        self.n_table.as_ref()
    }

    /// Makes the `P` table cover `[0, s]` (strong/critical damping).
    pub fn ensure_domain(&mut self, s: T) -> Result<()> {
        if self.params.regime() == DampingRegime::Weak || s <= self.p_table.domain().1 {
            return Ok(());
        }
        let s_max = (s * lit(2.0)).max(self.p_table.domain().1 * lit(2.0));
        self.p_table = solve_P(&self.params, s_max, self.tol)?;
        Ok(())
    }

    pub fn classify(&mut self, p0: T, mu0: T) -> Result<Classification<T>> {
        if mu0 < T::one() {
            self.ensure_domain((T::one() - mu0).recip())?;
        }
        classify_lyapunov(&self.params, p0, mu0, &self.p_table, self.n_table.as_ref())
    }

    /// Same as [`classify`](Self::classify) without extending the table; data
    /// outside the current domain are an error.
    pub fn classify_fixed(&self, p0: T, mu0: T) -> Result<Classification<T>> {
        classify_lyapunov(&self.params, p0, mu0, &self.p_table, self.n_table.as_ref())
    }
}
