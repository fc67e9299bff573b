//! Method-of-characteristics simulator for radial data.
//!
//! Each launch radius `r0` carries the closed system
//!
//! ```text
//! r' = u              u' = -kappa r nu - beta u
//! p' = -p^2 - kappa mu - beta p      mu' = p (1 - mu)
//! q' = -q^2 - kappa nu - beta q      nu' = q (1 - nu)
//! rho' = -rho (p + (n - 1) q)
//! ```
//!
//! so rays are integrated independently. `q` is carried redundantly next to
//! `u / r`, and the density both through the transport equation and through
//! `rho = (1 - mu)(1 - nu)^{n-1}`; the differences are the accuracy monitors.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::Parameters;
use crate::odeint::{integrate, Event, EventKind, Options, Trajectory, BLOWUP_GUARD};
use crate::real::{lit, Real};

/// Number of state components per ray.
pub const RAY_DIM: usize = 7;

const R: usize = 0;
const U: usize = 1;
const P: usize = 2;
const Q: usize = 3;
const MU: usize = 4;
const NU: usize = 5;
const RHO: usize = 6;

/// Point on one characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayState<T> {
    pub r0: T,
    pub t: T,
    pub r: T,
    pub u: T,
    pub p: T,
    pub q: T,
    pub mu: T,
    pub nu: T,
    /// Density carried by the transport equation.
    pub rho_transport: T,
}

impl<T: Real> RayState<T> {
    fn from_slice(r0: T, t: T, v: &[T]) -> Self {
        Self {
            r0,
            t,
            r: v[R],
            u: v[U],
            p: v[P],
            q: v[Q],
            mu: v[MU],
            nu: v[NU],
            rho_transport: v[RHO],
        }
    }
}

/// Density from the spectral identity `rho = (1 - mu)(1 - nu)^{n-1}`.
pub fn density_along_ray<T: Real>(state: &RayState<T>, n: usize) -> T {
    (T::one() - state.mu) * (T::one() - state.nu).powi(n as i32 - 1)
}

/// Pointwise diagnostics of one ray state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics<T> {
    /// Divergence `p + (n - 1) q`.
    pub d: T,
    /// Spectral gap `(p - q)^2 / (n - 1)`; zero in one dimension.
    pub eta: T,
    /// Lagrangian mass `(r (1 - nu))^n / n`.
    pub mass_e: T,
    pub r_one_minus_nu: T,
    /// `max(|p|, |q|, |mu|, |nu|)`.
    pub omega_sup_contrib: T,
}

pub fn diagnostics<T: Real>(state: &RayState<T>, params: &Parameters<T>) -> Diagnostics<T> {
    let n = params.dim();
    let nm1 = lit::<T>((n - 1) as f64);
    let eta = if n >= 2 {
        (state.p - state.q).powi(2) / nm1
    } else {
        T::zero()
    };
    let r1 = state.r * (T::one() - state.nu);
    Diagnostics {
        d: state.p + nm1 * state.q,
        eta,
        mass_e: r1.powi(n as i32) / lit((n) as f64),
        r_one_minus_nu: r1,
        omega_sup_contrib: state.p.abs().max(state.q.abs()).max(state.mu.abs()).max(state.nu.abs()),
    }
}

/// Radial initial data sampled on launch radii.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfile<T> {
    pub dim: usize,
    pub grid: Vec<T>,
    pub u0: Vec<T>,
    pub p0: Vec<T>,
    pub mu0: Vec<T>,
    pub nu0: Vec<T>,
    pub rho0: Vec<T>,
}

impl<T: Real> InitialProfile<T> {
    /// Profile from spectral samples; `rho0` follows from the identity.
    pub fn from_spectral(dim: usize, grid: Vec<T>, u0: Vec<T>, p0: Vec<T>, mu0: Vec<T>, nu0: Vec<T>) -> Result<Self> {
        check_grid(&grid)?;
        for (name, v) in [("u0", &u0), ("p0", &p0), ("mu0", &mu0), ("nu0", &nu0)] {
            check_len(name, v, grid.len())?;
        }
        for (i, (&m, &v)) in mu0.iter().zip(&nu0).enumerate() {
            if !(m <= T::one()) || !(v <= T::one()) {
                return Err(Error::InconsistentProfile {
                    node: i,
                    reason: format!("mu0 = {m}, nu0 = {v}; both must be <= 1"),
                });
            }
        }
        let rho0 = mu0
            .iter()
            .zip(&nu0)
            .map(|(&m, &v)| (T::one() - m) * (T::one() - v).powi(dim as i32 - 1))
            .collect();
        Ok(Self {
            dim,
            grid,
            u0,
            p0,
            mu0,
            nu0,
            rho0,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `q0 = u0 / r` at node `i`.
    pub fn q0(&self, i: usize) -> T {
        self.u0[i] / self.grid[i]
    }

    fn initial_state(&self, i: usize) -> [T; RAY_DIM] {
        [
            self.grid[i],
            self.u0[i],
            self.p0[i],
            self.q0(i),
            self.mu0[i],
            self.nu0[i],
            self.rho0[i],
        ]
    }

    /// Whether node `i` starts in vacuum; output along such rays is formal.
    pub fn is_vacuous(&self, i: usize) -> bool {
        self.mu0[i] == T::one() || self.nu0[i] == T::one()
    }
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter {
            field: "grid",
            reason: "needs at least one radius".into(),
        });
    }
    if !grid.iter().all(|&r| r > T::zero() && r.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            field: "grid",
            reason: "radii must be positive, finite and strictly increasing".into(),
        });
    }
    Ok(())
}

fn check_len<T>(field: &'static str, v: &[T], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::InvalidParameter {
            field,
            reason: format!("expected {n} samples, got {}", v.len()),
        });
    }
    Ok(())
}

/// Launch radii on `[r_min, r_max]`: geometric when the span exceeds two
/// decades, uniform otherwise. `r_min` defaults to `1e-3 r_max`.
pub fn ray_grid<T: Real>(r_min: Option<T>, r_max: T, count: usize) -> Result<Vec<T>> {
    let r_min = r_min.unwrap_or(r_max * lit(1e-3));
    if !(r_min > T::zero()) || !(r_max > r_min) || count < 2 {
        return Err(Error::InvalidParameter {
            field: "grid",
            reason: format!("need 0 < r_min < r_max and at least 2 rays, got [{r_min}, {r_max}] x {count}"),
        });
    }
    let m = lit::<T>((count - 1) as f64);
    let geometric = r_max / r_min > lit(100.0);
    Ok((0..count)
        .map(|i| {
            let f = lit::<T>(i as f64) / m;
            if i == count - 1 {
                r_max
            } else if geometric {
                r_min * (r_max / r_min).powf(f)
            } else {
                r_min + (r_max - r_min) * f
            }
        })
        .collect())
}

/// Derivative of samples on a nonuniform grid: three-point centred formula in
/// the interior, three-point one-sided at the ends (two-point for two nodes).
pub fn grid_derivative<T: Real>(grid: &[T], f: &[T]) -> Vec<T> {
    let n = grid.len();
    match n {
        0 => vec![],
        1 => vec![T::zero()],
        2 => {
            let d = (f[1] - f[0]) / (grid[1] - grid[0]);
            vec![d, d]
        }
        _ => (0..n)
            .map(|i| {
                // weights of the quadratic through three consecutive nodes
                let (a, b, c) = if i == 0 {
                    (0, 1, 2)
                } else if i == n - 1 {
                    (n - 3, n - 2, n - 1)
                } else {
                    (i - 1, i, i + 1)
                };
                let x = grid[i];
                let (xa, xb, xc) = (grid[a], grid[b], grid[c]);
                let la = ((x - xb) + (x - xc)) / ((xa - xb) * (xa - xc));
                let lb = ((x - xa) + (x - xc)) / ((xb - xa) * (xb - xc));
                let lc = ((x - xa) + (x - xb)) / ((xc - xa) * (xc - xb));
                la * f[a] + lb * f[b] + lc * f[c]
            })
            .collect(),
    }
}

/// Profile from velocity and potential samples: `p0 = u0'`, `q0 = u0 / r`,
/// `mu0 = phi0''`, `nu0 = phi0' / r`.
pub fn init_from_potential<T: Real>(
    params: &Parameters<T>,
    grid: &[T],
    u0_samples: &[T],
    phi0_second: &[T],
    phi0_first: &[T],
) -> Result<InitialProfile<T>> {
    check_grid(grid)?;
    check_len("u0", u0_samples, grid.len())?;
    check_len("phi0_second", phi0_second, grid.len())?;
    check_len("phi0_first", phi0_first, grid.len())?;
    let p0 = grid_derivative(grid, u0_samples);
    let nu0 = phi0_first.iter().zip(grid).map(|(&f, &r)| f / r).collect();
    InitialProfile::from_spectral(
        params.dim(),
        grid.to_vec(),
        u0_samples.to_vec(),
        p0,
        phi0_second.to_vec(),
        nu0,
    )
}

/// Profile from velocity and density samples.
///
/// The enclosed mass `e(r) = int_0^r s^{n-1} rho0 ds` is integrated exactly for
/// the piecewise-linear interpolant of `rho0` (constant below the first node),
/// then `1 - nu0 = (n e / r^n)^{1/n}` and `mu0 = 1 - rho0 / (1 - nu0)^{n-1}`.
pub fn init_from_density<T: Real>(
    params: &Parameters<T>,
    grid: &[T],
    u0_samples: &[T],
    rho0_samples: &[T],
) -> Result<InitialProfile<T>> {
    check_grid(grid)?;
    check_len("u0", u0_samples, grid.len())?;
    check_len("rho0", rho0_samples, grid.len())?;
    if let Some(i) = rho0_samples.iter().position(|&x| !(x >= T::zero()) || !x.is_finite()) {
        return Err(Error::InconsistentProfile {
            node: i,
            reason: format!("density must be finite and nonnegative, got {}", rho0_samples[i]),
        });
    }
    let n = params.dim() as i32;
    let nf = lit::<T>(n as f64);
    let n1 = lit::<T>((n + 1) as f64);
    let mut e = Vec::with_capacity(grid.len());
    let mut acc = rho0_samples[0] * grid[0].powi(n) / nf;
    e.push(acc);
    for i in 1..grid.len() {
        let (a, b) = (grid[i - 1], grid[i]);
        let slope = (rho0_samples[i] - rho0_samples[i - 1]) / (b - a);
        let icpt = rho0_samples[i - 1] - slope * a;
        acc = acc + icpt * (b.powi(n) - a.powi(n)) / nf + slope * (b.powi(n + 1) - a.powi(n + 1)) / n1;
        e.push(acc);
    }
    let mut mu0 = Vec::with_capacity(grid.len());
    let mut nu0 = Vec::with_capacity(grid.len());
    for (i, (&r, &ei)) in grid.iter().zip(&e).enumerate() {
        let gap = (nf * ei.max(T::zero()) / r.powi(n)).powf(nf.recip());
        let rho = rho0_samples[i];
        nu0.push(T::one() - gap);
        let tang = gap.powi(n - 1);
        if tang == T::zero() {
            if rho > T::zero() {
                return Err(Error::InconsistentProfile {
                    node: i,
                    reason: format!("no enclosed mass but density {rho}"),
                });
            }
            mu0.push(T::one());
        } else {
            mu0.push(T::one() - rho / tang);
        }
    }
    let p0 = grid_derivative(grid, u0_samples);
    let mut prof = InitialProfile::from_spectral(params.dim(), grid.to_vec(), u0_samples.to_vec(), p0, mu0, nu0)?;
    // keep the supplied samples rather than their round trip through mu, nu
    prof.rho0 = rho0_samples.to_vec();
    Ok(prof)
}

/// What stopped a ray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RayEvent {
    /// `p` reached the blow-up guard.
    RadialBlowUp,
    /// `q` reached the blow-up guard.
    TangentialBlowUp,
    /// `1 / (1 - mu)` dropped to the guard.
    Concentration,
}

/// Outcome of one characteristic.
#[derive(Debug, Clone)]
pub struct RayResult<T> {
    pub r0: T,
    /// Starts in vacuum (`mu0 = 1` or `nu0 = 1`); results are formal.
    pub formal: bool,
    pub outcome: Result<Trajectory<T>>,
    pub event: Option<(RayEvent, T)>,
}

impl<T: Real> RayResult<T> {
    pub fn trajectory(&self) -> Option<&Trajectory<T>> {
        self.outcome.as_ref().ok()
    }

    /// State at time `t`, if the ray reached it.
    pub fn state_at(&self, t: T) -> Option<RayState<T>> {
        let tr = self.trajectory()?;
        tr.sample(t).map(|v| RayState::from_slice(self.r0, t, &v))
    }

    /// Every accepted integrator node as a state.
    pub fn states(&self) -> impl Iterator<Item = RayState<T>> + '_ {
        self.trajectory()
            .into_iter()
            .flat_map(move |tr| tr.times.iter().zip(&tr.states).map(move |(&t, v)| RayState::from_slice(self.r0, t, v)))
    }
}

/// Earliest blow-up over all rays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shock<T> {
    pub t_c: T,
    pub r_c: T,
    pub r0: T,
    pub ray: usize,
    pub kind: RayEvent,
}

/// States of all rays at one time; `None` for rays that stopped earlier or
/// failed.
#[derive(Debug, Clone)]
pub struct Snapshot<T> {
    pub t: T,
    pub states: Vec<Option<RayState<T>>>,
}

#[derive(Debug, Clone)]
pub struct RadialSolution<T> {
    pub params: Parameters<T>,
    pub t_max: T,
    pub rays: Vec<RayResult<T>>,
    pub snapshot_times: Vec<T>,
    pub shock: Option<Shock<T>>,
}

/// Largest invariant violations seen at the accepted nodes of all rays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport<T> {
    /// `max |r (1 - nu) - r0 (1 - nu0)| / r0`.
    pub drift: T,
    /// `max |q - u / r|`, relative to the ray's largest `|q|` (at least 1e-300).
    pub q_consistency: T,
    /// `max |rho_spectral - rho_transport| / |rho_spectral|`.
    pub density_gap: T,
}

/// Integrates every ray of `profile` to `t_max` (or its blow-up event).
///
/// `tol` is the relative local error tolerance per step. Rays are evolved in
/// parallel; a failing ray is reported in its [`RayResult`] and does not stop
/// the others.
pub fn evolve<T: Real>(
    params: &Parameters<T>,
    profile: &InitialProfile<T>,
    t_max: T,
    snapshot_times: &[T],
    tol: T,
) -> Result<RadialSolution<T>> {
    if !(t_max > T::zero()) || !t_max.is_finite() {
        return Err(Error::InvalidParameter {
            field: "t_max",
            reason: format!("must be positive and finite, got {t_max}"),
        });
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter {
            field: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    if profile.dim != params.dim() {
        return Err(Error::InvalidParameter {
            field: "dim",
            reason: format!("profile has n = {}, parameters n = {}", profile.dim, params.dim()),
        });
    }
    let (kappa, beta) = (params.kappa(), params.beta());
    let nm1 = lit::<T>((params.dim() - 1) as f64);
    let mut opts = Options::with_tolerances(tol, tol * lit(1e-6)).dense();
    opts.max_steps = 1_000_000;
    let guard = lit::<T>(BLOWUP_GUARD);

    let rays: Vec<RayResult<T>> = (0..profile.len())
        .into_par_iter()
        .map(|i| {
            let rhs = move |_t: T, y: &[T], dy: &mut [T]| {
                let one = T::one();
                dy[R] = y[U];
                dy[U] = -kappa * y[R] * y[NU] - beta * y[U];
                dy[P] = -y[P] * y[P] - kappa * y[MU] - beta * y[P];
                dy[Q] = -y[Q] * y[Q] - kappa * y[NU] - beta * y[Q];
                dy[MU] = y[P] * (one - y[MU]);
                dy[NU] = y[Q] * (one - y[NU]);
                dy[RHO] = -y[RHO] * (y[P] + nm1 * y[Q]);
            };
            let events = [
                Event::new(EventKind::BlowUp, move |_t, y: &[T]| y[P] + guard),
                Event::new(EventKind::BlowUp, move |_t, y: &[T]| y[Q] + guard),
                Event::new(EventKind::BlowUp, move |_t, y: &[T]| y[MU] - (T::one() - guard)),
            ];
            let outcome = integrate(rhs, &profile.initial_state(i), T::zero(), t_max, &opts, &events);
            let event = outcome.as_ref().ok().and_then(|tr| {
                tr.terminal_event.map(|ev| {
                    let kind = match ev.index {
                        0 => RayEvent::RadialBlowUp,
                        1 => RayEvent::TangentialBlowUp,
                        _ => RayEvent::Concentration,
                    };
                    (kind, ev.time)
                })
            });
            RayResult {
                r0: profile.grid[i],
                formal: profile.is_vacuous(i),
                outcome,
                event,
            }
        })
        .collect();

    let mut shock: Option<Shock<T>> = None;
    for (i, ray) in rays.iter().enumerate() {
        if let Some((kind, t)) = ray.event {
            // rays are ordered by r0, so strict comparison keeps the smaller r0 on ties
            if shock.is_none_or(|s| t < s.t_c) {
                let r_c = ray.trajectory().map(|tr| tr.final_state()[R]).unwrap_or(ray.r0);
                shock = Some(Shock {
                    t_c: t,
                    r_c,
                    r0: ray.r0,
                    ray: i,
                    kind,
                });
            }
        }
    }
    Ok(RadialSolution {
        params: *params,
        t_max,
        rays,
        snapshot_times: snapshot_times.to_vec(),
        shock,
    })
}

impl<T: Real> RadialSolution<T> {
    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// End of the smooth evolution: shock time or `t_max`.
    pub fn t_end(&self) -> T {
        self.shock.map_or(self.t_max, |s| s.t_c)
    }

    pub fn snapshot(&self, t: T) -> Snapshot<T> {
        Snapshot {
            t,
            states: self.rays.iter().map(|r| r.state_at(t)).collect(),
        }
    }

    pub fn snapshots(&self) -> Vec<Snapshot<T>> {
        self.snapshot_times.iter().map(|&t| self.snapshot(t)).collect()
    }

    /// Rays whose integration failed, with their errors.
    pub fn failures(&self) -> Vec<(usize, &Error)> {
        self.rays
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.outcome.as_ref().err().map(|e| (i, e)))
            .collect()
    }

    /// `true` when radii are strictly increasing in `r0` at every snapshot
    /// taken before the shock.
    pub fn no_crossing(&self) -> bool {
        self.snapshot_times
            .iter()
            .filter(|&&t| t < self.t_end())
            .all(|&t| {
                let radii: Vec<T> = self.rays.iter().filter_map(|r| r.state_at(t).map(|s| s.r)).collect();
                radii.windows(2).all(|w| w[1] > w[0])
            })
    }

    pub fn invariants(&self) -> InvariantReport<T> {
        let n = self.dim();
        let mut rep = InvariantReport {
            drift: T::zero(),
            q_consistency: T::zero(),
            density_gap: T::zero(),
        };
        for ray in &self.rays {
            let Some(tr) = ray.trajectory() else { continue };
            let first = RayState::from_slice(ray.r0, T::zero(), &tr.states[0]);
            let c0 = first.r * (T::one() - first.nu);
            let q_scale = tr
                .states
                .iter()
                .map(|v| v[Q].abs())
                .fold(lit::<T>(1e-300), T::max);
            for st in ray.states() {
                rep.drift = rep.drift.max((st.r * (T::one() - st.nu) - c0).abs() / ray.r0);
                rep.q_consistency = rep.q_consistency.max((st.q - st.u / st.r).abs() / q_scale);
                let rho = density_along_ray(&st, n);
                if rho != T::zero() {
                    rep.density_gap = rep.density_gap.max(((rho - st.rho_transport) / rho).abs());
                }
            }
        }
        rep
    }

    /// Time integral of `sup_rays max(|p|, |q|, |mu|, |nu|)` over the smooth
    /// evolution, by the trapezoid rule on `samples` uniform intervals.
    pub fn regularity_integral_with(&self, samples: usize) -> T {
        let samples = samples.max(1);
        let t_end = self.t_end();
        let h = t_end / lit((samples) as f64);
        let sup_at = |t: T| {
            self.rays
                .iter()
                .filter_map(|r| r.state_at(t))
                .map(|s| diagnostics(&s, &self.params).omega_sup_contrib)
                .fold(T::zero(), T::max)
        };
        let mut acc = T::zero();
        let mut prev = sup_at(T::zero());
        for k in 1..=samples {
            let t = if k == samples { t_end } else { h * lit((k) as f64) };
            let cur = sup_at(t);
            acc = acc + (prev + cur) * h / lit(2.0);
            prev = cur;
        }
        acc
    }

    /// Rows `t, r0, r, u, p, q, mu, nu, rho, d, eta`, one per ray per snapshot.
    pub fn snapshot_rows(&self) -> Vec<[T; 11]> {
        let mut rows = Vec::new();
        for snap in self.snapshots() {
            for st in snap.states.into_iter().flatten() {
                let dg = diagnostics(&st, &self.params);
                rows.push([
                    snap.t,
                    st.r0,
                    st.r,
                    st.u,
                    st.p,
                    st.q,
                    st.mu,
                    st.nu,
                    density_along_ray(&st, self.dim()),
                    dg.d,
                    dg.eta,
                ]);
            }
        }
        rows
    }
}

/// Column names matching [`RadialSolution::snapshot_rows`].
pub const SNAPSHOT_COLUMNS: [&str; 11] = ["t", "r0", "r", "u", "p", "q", "mu", "nu", "rho", "d", "eta"];

/// [`RadialSolution::regularity_integral_with`] on 2000 intervals.
pub fn regularity_integral<T: Real>(solution: &RadialSolution<T>) -> T {
    solution.regularity_integral_with(2000)
}
