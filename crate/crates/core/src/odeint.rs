//! Adaptive Dormand–Prince 5(4) integrator with dense output and event location.
//!
//! This is the numerical oracle for every closed form in the crate, and the
//! engine behind the `(p, mu)` and radial simulations.

use crate::error::{Error, Result};
use crate::model::{DampingRegime, Parameters};
use crate::real::{lit, Real};

/// Magnitude at which a Riccati variable is declared blown up.
pub const BLOWUP_GUARD: f64 = 1e8;

/// Integrator settings.
#[derive(Debug, Clone, Copy)]
pub struct Options<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// Hard cap on accepted plus rejected steps.
    pub max_steps: usize,
    /// Initial step magnitude; chosen automatically when `None`.
    pub h_init: Option<T>,
    /// Largest step magnitude allowed.
    pub h_max: Option<T>,
    /// Keep the per-step interpolants so the trajectory can be sampled anywhere.
    pub dense: bool,
}

impl<T: Real> Default for Options<T> {
    fn default() -> Self {
        let floor = lit::<T>(100.0) * T::epsilon();
        Self {
            rel_tol: lit::<T>(1e-10).max(floor),
            abs_tol: lit::<T>(1e-12).max(floor * floor.sqrt()),
            max_steps: 2_000_000,
            h_init: None,
            h_max: None,
            dense: false,
        }
    }
}

impl<T: Real> Options<T> {
    pub fn with_tolerances(rel_tol: T, abs_tol: T) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn dense(mut self) -> Self {
        self.dense = true;
        self
    }
}

/// What a terminal event signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    /// A Riccati component crossed the blow-up guard.
    BlowUp,
    /// `s` reached zero in the linear `(w, s)` system.
    SZero,
    Custom,
}

type EventFn<'a, T> = Box<dyn Fn(T, &[T]) -> T + Send + Sync + 'a>;

/// Scalar event function; the integration stops at its first sign change.
pub struct Event<'a, T> {
    pub kind: EventKind,
    func: EventFn<'a, T>,
}

impl<'a, T: Real> Event<'a, T> {
    pub fn new(kind: EventKind, func: impl Fn(T, &[T]) -> T + Send + Sync + 'a) -> Self {
        Self {
            kind,
            func: Box::new(func),
        }
    }

    pub fn eval(&self, t: T, y: &[T]) -> T {
        (self.func)(t, y)
    }
}

/// The event that stopped an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalEvent<T> {
    pub kind: EventKind,
    pub time: T,
    /// Position of the event in the list passed to [`integrate`].
    pub index: usize,
}

#[derive(Debug, Clone)]
struct DenseSegment<T> {
    t0: T,
    h: T,
    // end of validity; shorter than `t0 + h` for a step cut by an event
    t_end: T,
    coeffs: [Vec<T>; 5],
}

impl<T: Real> DenseSegment<T> {
    fn eval_into(&self, t: T, out: &mut [T]) {
        let theta = (t - self.t0) / self.h;
        let theta1 = T::one() - theta;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        for i in 0..out.len() {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
    }

    fn t1(&self) -> T {
        self.t_end
    }
}

/// Accepted steps of an integration, plus the terminal event if one fired.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub terminal_event: Option<TerminalEvent<T>>,
    dense: Vec<DenseSegment<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> T {
        *self.times.last().expect("trajectory holds the initial point")
    }

    pub fn final_state(&self) -> &[T] {
        self.states.last().expect("trajectory holds the initial point")
    }

    pub fn has_dense_output(&self) -> bool {
        !self.dense.is_empty() || self.times.len() == 1
    }

    /// Interpolated state at `t`, or `None` outside the integrated span or
    /// when dense output was not requested.
    pub fn sample(&self, t: T) -> Option<Vec<T>> {
        if self.times.len() == 1 {
            return (t == self.times[0]).then(|| self.states[0].clone());
        }
        let seg = self.segment_for(t)?;
        let mut out = vec![T::zero(); self.states[0].len()];
        seg.eval_into(t, &mut out);
        Some(out)
    }

    fn segment_for(&self, t: T) -> Option<&DenseSegment<T>> {
        let first = self.dense.first()?;
        let forward = first.h > T::zero();
        let (lo, hi) = if forward {
            (self.times[0], self.final_time())
        } else {
            (self.final_time(), self.times[0])
        };
        // accept requests a few ulps outside the span, e.g. rounded end times
        let slack = lit::<T>(4.0) * T::epsilon() * lo.abs().max(hi.abs());
        if t < lo - slack || t > hi + slack {
            return None;
        }
        // segments are ordered along the direction of integration
        let idx = self.dense.partition_point(|seg| {
            if forward {
                seg.t1() < t
            } else {
                seg.t1() > t
            }
        });
        self.dense.get(idx.min(self.dense.len() - 1))
    }
}

// Dormand–Prince 5(4) tableau.
struct Tableau<T> {
    c: [T; 7],
    a: [[T; 6]; 7],
    e: [T; 7],
    d: [T; 7],
}

impl<T: Real> Tableau<T> {
    fn new() -> Self {
        let z = T::zero();
        let f = |n: f64, d: f64| lit::<T>(n) / lit::<T>(d);
        Self {
            c: [z, f(1.0, 5.0), f(3.0, 10.0), f(4.0, 5.0), f(8.0, 9.0), T::one(), T::one()],
            a: [
                [z; 6],
                [f(1.0, 5.0), z, z, z, z, z],
                [f(3.0, 40.0), f(9.0, 40.0), z, z, z, z],
                [f(44.0, 45.0), f(-56.0, 15.0), f(32.0, 9.0), z, z, z],
                [
                    f(19372.0, 6561.0),
                    f(-25360.0, 2187.0),
                    f(64448.0, 6561.0),
                    f(-212.0, 729.0),
                    z,
                    z,
                ],
                [
                    f(9017.0, 3168.0),
                    f(-355.0, 33.0),
                    f(46732.0, 5247.0),
                    f(49.0, 176.0),
                    f(-5103.0, 18656.0),
                    z,
                ],
                [
                    f(35.0, 384.0),
                    z,
                    f(500.0, 1113.0),
                    f(125.0, 192.0),
                    f(-2187.0, 6784.0),
                    f(11.0, 84.0),
                ],
            ],
            e: [
                f(71.0, 57600.0),
                z,
                f(-71.0, 16695.0),
                f(71.0, 1920.0),
                f(-17253.0, 339200.0),
                f(22.0, 525.0),
                f(-1.0, 40.0),
            ],
            d: [
                f(-12715105075.0, 11282082432.0),
                z,
                f(87487479700.0, 32700410799.0),
                f(-10690763975.0, 1880347072.0),
                f(701980252875.0, 199316789632.0),
                f(-1453857185.0, 822651844.0),
                f(69997945.0, 29380423.0),
            ],
        }
    }
}

fn all_finite<T: Real>(y: &[T]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` (either direction).
///
/// The local error of every accepted step satisfies
/// `|err_i| <= rel_tol * max(|y_i|, |y_i_new|) + abs_tol`. Integration stops at
/// the first sign change of any event function; the event time is refined on
/// the step interpolant until the bracket is below `1e-12` (or a few ulps of
/// `t`), and the reported time lies on the far side of the crossing.
pub fn integrate<T, F>(
    mut rhs: F,
    y0: &[T],
    t0: T,
    t1: T,
    opts: &Options<T>,
    events: &[Event<'_, T>],
) -> Result<Trajectory<T>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    let n = y0.len();
    let tab = Tableau::<T>::new();
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![y0.to_vec()],
        terminal_event: None,
        dense: Vec::new(),
    };
    if !all_finite(y0) {
        return Err(Error::Integration {
            t: t0.to_f64_lossy(),
            reason: "non-finite initial state".into(),
        });
    }
    let span = (t1 - t0).abs();
    if span == T::zero() {
        return Ok(traj);
    }
    let dir = (t1 - t0).signum();
    let h_floor = lit::<T>(1e-14) * span;
    let h_max = opts.h_max.unwrap_or(span).min(span);

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); n]; 7];
    rhs(t, &y, &mut k[0]);
    let mut g_prev: Vec<T> = events.iter().map(|e| e.eval(t, &y)).collect();

    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&mut rhs, t, &y, &k[0], dir, opts, h_max))
        .abs()
        .min(h_max);
    let mut y_stage = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    let mut steps = 0usize;
    let safety = lit::<T>(0.9);
    let fifth = lit::<T>(0.2);

    loop {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration {
                t: t.to_f64_lossy(),
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = dir * h;

        for stage in 1..7 {
            for i in 0..n {
                let mut acc = T::zero();
                for j in 0..stage {
                    acc = acc + tab.a[stage][j] * k[j][i];
                }
                y_stage[i] = y[i] + hs * acc;
            }
            rhs(t + tab.c[stage] * hs, &y_stage, &mut k[stage]);
        }
        // stage 6 evaluates at y_new (FSAL)
        y_new.copy_from_slice(&y_stage);

        let mut err = T::zero();
        for i in 0..n {
            let mut e = T::zero();
            for j in 0..7 {
                e = e + tab.e[j] * k[j][i];
            }
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
            err = err.max((hs * e).abs() / sc);
        }
        let finite = all_finite(&y_new) && all_finite(&k[6]) && err.is_finite();

        if !finite || err > T::one() {
            let fac = if finite {
                (safety * err.powf(-fifth)).max(lit(0.1))
            } else {
                lit(0.25)
            };
            h = h * fac;
            if h < h_floor {
                return Err(Error::Integration {
                    t: t.to_f64_lossy(),
                    reason: format!("step size underflow (h < {h_floor})"),
                });
            }
            continue;
        }

        let t_new = if last { t1 } else { t + hs };
        let seg = dense_segment(&tab, t, hs, &y, &y_new, &k);

        // events
        let mut hit: Option<(usize, T)> = None;
        for (idx, ev) in events.iter().enumerate() {
            let g_new = ev.eval(t_new, &y_new);
            let g0 = g_prev[idx];
            let crossed = (g0 > T::zero() && g_new <= T::zero())
                || (g0 < T::zero() && g_new >= T::zero());
            if crossed {
                let te = locate_event(ev, &seg, t, t_new, g0, n);
                let earlier = match hit {
                    None => true,
                    Some((_, tb)) => (te - tb) * dir < T::zero(),
                };
                if earlier {
                    hit = Some((idx, te));
                }
            }
        }

        if let Some((idx, te)) = hit {
            let mut ye = vec![T::zero(); n];
            seg.eval_into(te, &mut ye);
            traj.times.push(te);
            traj.states.push(ye);
            if opts.dense {
                traj.dense.push(DenseSegment { t_end: te, ..seg });
            }
            traj.terminal_event = Some(TerminalEvent {
                kind: events[idx].kind,
                time: te,
                index: idx,
            });
            return Ok(traj);
        }

        for (idx, ev) in events.iter().enumerate() {
            g_prev[idx] = ev.eval(t_new, &y_new);
        }
        t = t_new;
        y.copy_from_slice(&y_new);
        let k6 = k[6].clone();
        k[0].copy_from_slice(&k6);
        traj.times.push(t);
        traj.states.push(y.clone());
        if opts.dense {
            traj.dense.push(seg);
        }
        if last {
            return Ok(traj);
        }

        let fac = if err == T::zero() {
            lit(5.0)
        } else {
            (safety * err.powf(-fifth)).min(lit(5.0)).max(lit(0.2))
        };
        h = (h * fac).min(h_max);
        if h < h_floor {
            return Err(Error::Integration {
                t: t.to_f64_lossy(),
                reason: format!("step size underflow (h < {h_floor})"),
            });
        }
    }
}

fn dense_segment<T: Real>(
    tab: &Tableau<T>,
    t: T,
    hs: T,
    y: &[T],
    y_new: &[T],
    k: &[Vec<T>],
) -> DenseSegment<T> {
    let n = y.len();
    let mut r = [
        y.to_vec(),
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
    ];
    for i in 0..n {
        let ydiff = y_new[i] - y[i];
        let bspl = hs * k[0][i] - ydiff;
        r[1][i] = ydiff;
        r[2][i] = bspl;
        r[3][i] = ydiff - hs * k[6][i] - bspl;
        let mut acc = T::zero();
        for j in 0..7 {
            acc = acc + tab.d[j] * k[j][i];
        }
        r[4][i] = hs * acc;
    }
    DenseSegment {
        t0: t,
        h: hs,
        t_end: t + hs,
        coeffs: r,
    }
}

fn locate_event<T: Real>(
    ev: &Event<'_, T>,
    seg: &DenseSegment<T>,
    ta: T,
    tb: T,
    ga: T,
    n: usize,
) -> T {
    let mut buf = vec![T::zero(); n];
    let mut g_at = |t: T| {
        seg.eval_into(t, &mut buf);
        ev.eval(t, &buf)
    };
    let (mut a, mut b) = (ta, tb);
    let (mut fa, mut fb) = (ga, g_at(tb));
    if fb == T::zero() {
        return b;
    }
    let tol = lit::<T>(1e-12).max(lit::<T>(4.0) * T::epsilon() * a.abs().max(b.abs()));
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        // Illinois-modified regula falsi, falling back to bisection
        let mut m = (a * fb - b * fa) / (fb - fa);
        let lo = a.min(b);
        let hi = a.max(b);
        if !(m > lo && m < hi) {
            m = (a + b) / lit(2.0);
        }
        let fm = g_at(m);
        if fm == T::zero() {
            return m;
        }
        if fm.signum() == fb.signum() {
            b = m;
            fb = fm;
            if side == 1 {
                fa = fa / lit(2.0);
            }
            side = 1;
        } else {
            a = m;
            fa = fm;
            if side == -1 {
                fb = fb / lit(2.0);
            }
            side = -1;
        }
    }
    b
}

fn initial_step<T, F>(rhs: &mut F, t: T, y: &[T], f0: &[T], dir: T, opts: &Options<T>, h_max: T) -> T
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    let n = y.len();
    let sc: Vec<T> = y
        .iter()
        .map(|v| opts.abs_tol + opts.rel_tol * v.abs())
        .collect();
    let rms = |v: &dyn Fn(usize) -> T| {
        let mut acc = T::zero();
        for i in 0..n {
            let x = v(i) / sc[i];
            acc = acc + x * x;
        }
        (acc / lit::<T>(n.max(1) as f64)).sqrt()
    };
    let d0 = rms(&|i| y[i]);
    let d1 = rms(&|i| f0[i]);
    let mut h0 = if d0 < lit(1e-5) || d1 < lit(1e-5) {
        lit(1e-6)
    } else {
        lit::<T>(0.01) * d0 / d1
    };
    h0 = h0.min(h_max);
    let y1: Vec<T> = (0..n).map(|i| y[i] + dir * h0 * f0[i]).collect();
    let mut f1 = vec![T::zero(); n];
    rhs(t + dir * h0, &y1, &mut f1);
    let d2 = rms(&|i| f1[i] - f0[i]) / h0;
    let h1 = if d1.max(d2) <= lit(1e-15) {
        (h0 * lit(1e-3)).max(lit(1e-6))
    } else {
        (lit::<T>(0.01) / d1.max(d2)).powf(lit(0.2))
    };
    let h = (lit::<T>(100.0) * h0).min(h1).min(h_max);
    if h.is_finite() && h > T::zero() {
        h
    } else {
        lit::<T>(1e-6).min(h_max)
    }
}

/// Closed Riccati system along a characteristic:
/// `p' = -p^2 - kappa mu - beta p`, `mu' = p (1 - mu)`.
pub fn pmu_rhs<T: Real>(params: &Parameters<T>) -> impl Fn(T, &[T], &mut [T]) + Copy {
    let (kappa, beta) = (params.kappa(), params.beta());
    move |_t, y, dy| {
        let (p, mu) = (y[0], y[1]);
        dy[0] = -p * p - kappa * mu - beta * p;
        dy[1] = p * (T::one() - mu);
    }
}

/// Linear system `w' = -beta w + kappa (1 - s)`, `s' = w`.
pub fn ws_rhs<T: Real>(params: &Parameters<T>) -> impl Fn(T, &[T], &mut [T]) + Copy {
    let (kappa, beta) = (params.kappa(), params.beta());
    move |_t, y, dy| {
        dy[0] = -beta * y[0] + kappa * (T::one() - y[1]);
        dy[1] = y[0];
    }
}

/// Simulates the `(p, mu)` system from `(p0, mu0)` up to `t_max`, stopping with
/// a [`EventKind::BlowUp`] event once `|p|` reaches the blow-up guard.
///
/// State layout: `[p, mu]`.
pub fn simulate_pmu<T: Real>(
    params: &Parameters<T>,
    p0: T,
    mu0: T,
    t_max: T,
    opts: &Options<T>,
) -> Result<Trajectory<T>> {
    let guard = lit::<T>(BLOWUP_GUARD);
    let events = [Event::new(EventKind::BlowUp, move |_t, y: &[T]| {
        guard - y[0].abs()
    })];
    integrate(pmu_rhs(params), &[p0, mu0], T::zero(), t_max, opts, &events)
}

/// Simulates the linear `(w, s)` system, stopping with [`EventKind::SZero`]
/// when `s` reaches zero.
///
/// State layout: `[w, s]`.
pub fn simulate_ws<T: Real>(
    params: &Parameters<T>,
    w0: T,
    s0: T,
    t_max: T,
    opts: &Options<T>,
) -> Result<Trajectory<T>> {
    let events = [Event::new(EventKind::SZero, |_t, y: &[T]| y[1])];
    integrate(ws_rhs(params), &[w0, s0], T::zero(), t_max, opts, &events)
}

/// Time horizon used when simulation decides subcritical vs supercritical:
/// `50 / rate`, where `rate` is the slowest decay rate of the regime.
pub fn classification_horizon<T: Real>(params: &Parameters<T>) -> T {
    let rate = params.slowest_rate();
    let rate = if params.regime() == DampingRegime::Weak && rate == T::zero() {
        params.kappa().sqrt()
    } else {
        rate
    };
    lit::<T>(50.0) / rate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_test_equation() {
        let opts = Options::default();
        let tr = integrate(|_t, y: &[f64], dy: &mut [f64]| dy[0] = -y[0], &[1.0], 0.0, 1.0, &opts, &[])
            .unwrap();
        let y1 = tr.final_state()[0];
        assert_eq!(tr.final_time(), 1.0);
        assert!((y1 - (-1.0f64).exp()).abs() < 1e-10);
        assert!(tr.terminal_event.is_none());
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn backward_integration() {
        let opts = Options::default();
        let tr = integrate(|_t, y: &[f64], dy: &mut [f64]| dy[0] = -y[0], &[1.0], 0.0, -2.0, &opts, &[])
            .unwrap();
        assert!((tr.final_state()[0] - 2f64.exp()).abs() < 1e-9);
        assert!(tr.times.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn dense_output_interpolates() {
        let opts = Options::default().dense();
        let tr = integrate(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &[0.0, 1.0],
            0.0,
            10.0,
            &opts,
            &[],
        )
        .unwrap();
        for i in 0..=1000 {
            let t = 10.0 * i as f64 / 1000.0;
            let y = tr.sample(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-8, "t = {t}");
        }
        assert!(tr.sample(10.5).is_none());
    }

    #[test]
    fn riccati_escape_time() {
        // p' = -(p + 1)^2, p0 = -2 escapes at t = 1
        let opts = Options::default();
        let guard = -1e8;
        let ev = [Event::new(EventKind::BlowUp, move |_t, y: &[f64]| y[0] - guard)];
        let tr = integrate(
            |_t, y: &[f64], dy: &mut [f64]| dy[0] = -y[0] * y[0] - 2.0 * y[0] - 1.0,
            &[-2.0],
            0.0,
            10.0,
            &opts,
            &ev,
        )
        .unwrap();
        let te = tr.terminal_event.unwrap();
        assert_eq!(te.kind, EventKind::BlowUp);
        assert!((te.time - 1.0).abs() < 1e-4);
    }

    #[test]
    fn event_is_bracketed() {
        let opts = Options::default().dense();
        let ev = [Event::new(EventKind::Custom, |_t, y: &[f64]| y[0] - 0.3)];
        let tr = integrate(|_t, y: &[f64], dy: &mut [f64]| dy[0] = -y[0], &[1.0], 0.0, 5.0, &opts, &ev)
            .unwrap();
        let te = tr.terminal_event.unwrap().time;
        let exact = -(0.3f64).ln();
        assert!((te - exact).abs() < 1e-9);
        assert!(tr.final_state()[0] <= 0.3);
        let before = tr.sample(te - 1e-12).unwrap()[0];
        assert!(before >= 0.3 - 1e-15);
    }

    #[test]
    fn pmu_fixed_point_and_vacuum() {
        let params = Parameters::<f64>::with_default_tol(2.0, 1.0, 2).unwrap();
        let opts = Options::default();
        let tr = simulate_pmu(&params, 0.0, 0.0, 20.0, &opts).unwrap();
        assert!(tr.states.iter().all(|y| y[0] == 0.0 && y[1] == 0.0));

        let tr = simulate_pmu(&params, 0.4, 1.0, 20.0, &opts).unwrap();
        assert!(tr.states.iter().all(|y| (y[1] - 1.0).abs() < 1e-12));
        // weak vacuous data always blow up
        assert_eq!(tr.terminal_event.unwrap().kind, EventKind::BlowUp);
    }

    #[test]
    fn ws_constant_at_equilibrium() {
        let params = Parameters::with_default_tol(1.0, 0.5, 2).unwrap();
        let tr = simulate_ws(&params, 0.0, 1.0, 10.0, &Options::default()).unwrap();
        assert!(tr.states.iter().all(|y| y[0] == 0.0 && y[1] == 1.0));
    }

    #[test]
    fn single_precision_runs() {
        let opts = Options::<f32>::default();
        let tr = integrate(|_t, y: &[f32], dy: &mut [f32]| dy[0] = -y[0], &[1.0], 0.0, 1.0, &opts, &[])
            .unwrap();
        assert!((tr.final_state()[0] - (-1.0f32).exp()).abs() < 1e-5);
    }
}
