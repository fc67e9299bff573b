//! Subcommand execution.

use ema_threshold::analyze::{classify_simulated, decay_report};
use ema_threshold::radial::{evolve, init_from_density, init_from_potential, regularity_integral, RayEvent, SNAPSHOT_COLUMNS};
use ema_threshold::{
    classify_explicit, classify_node, classify_vacuous, threshold_boundary, Classification, InitialProfile,
    LyapunovClassifier, LyapunovTable, Parameters, SpectralConstants, SpectralPoint, Verdict,
};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{ClassifyCommand, Command, LyapunovSection, MethodName, ProfileData, RunConfig, SimulateCommand};
use crate::error::CliError;
use crate::output::{num, opt_num, Cell, Report, Table};

/// A finished run: the report is written even when `failure` is set.
pub struct Outcome {
    pub report: Report,
    pub failure: Option<CliError>,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let p = &cfg.params;
    let mut report = Report {
        command: cfg.command.name().to_string(),
        params: params_json(p),
        summary: Map::new(),
        tables: Vec::new(),
        diagnostics: regime_diagnostics(p),
    };
    let failure = match &cfg.command {
        Command::Classify(c) => classify(p, c, &mut report)?,
        Command::Boundary { mu0 } => boundary(p, mu0, &mut report)?,
        Command::Simulate(s) => simulate(p, s, &mut report)?,
        Command::PhasePortrait { w, s } => {
            phase_portrait(p, w, s, &mut report);
            None
        }
        Command::Lyapunov(l) => lyapunov(p, l, &mut report)?,
        Command::Decay(d) => decay(p, &d.points, d.eps, d.window.map(|[a, b]| (a, b)), &mut report),
    };
    Ok(Outcome { report, failure })
}

fn params_json(p: &Parameters<f64>) -> Value {
    json!({
        "kappa": num(p.kappa()),
        "beta": num(p.beta()),
        "dim": p.dim(),
        "regime_tol": num(p.regime_tol()),
    })
}

fn regime_diagnostics(p: &Parameters<f64>) -> Map<String, Value> {
    let mut d = Map::new();
    d.insert("regime".into(), Value::String(p.regime().name().into()));
    match p.spectral_constants() {
        SpectralConstants::Strong { lambda1, lambda2 } => {
            d.insert("lambda1".into(), num(lambda1));
            d.insert("lambda2".into(), num(lambda2));
        }
        SpectralConstants::Critical { alpha } => {
            d.insert("alpha".into(), num(alpha));
        }
        SpectralConstants::Weak { alpha, omega } => {
            d.insert("alpha".into(), num(alpha));
            d.insert("omega".into(), num(omega));
        }
    }
    d
}

fn verdict_cells(c: &Classification<f64>) -> [Cell; 2] {
    [Cell::from(c.verdict.name()), Cell::from(c.t_blowup)]
}

fn classify(p: &Parameters<f64>, c: &ClassifyCommand, report: &mut Report) -> Result<Option<CliError>, CliError> {
    let lyap = if c.methods.contains(&MethodName::Lyapunov) {
        let mut l = LyapunovClassifier::new(p, c.lyapunov_tol)?;
        let s_max = c
            .points
            .iter()
            .filter(|(_, mu0)| *mu0 < 1.0)
            .map(|(_, mu0)| 1.0 / (1.0 - mu0))
            .fold(0.0, f64::max);
        l.ensure_domain(s_max)?;
        Some(l)
    } else {
        None
    };

    type Row = (Option<Classification<f64>>, Vec<Option<Classification<f64>>>, Option<String>);
    let rows: Vec<Row> = c
        .points
        .par_iter()
        .map(|&(p0, mu0)| {
            if mu0 == 1.0 {
                return (Some(classify_vacuous(p, p0)), vec![None; c.methods.len()], None);
            }
            let mut err = None;
            let per: Vec<Option<Classification<f64>>> = c
                .methods
                .iter()
                .map(|m| {
                    let r = match m {
                        MethodName::Explicit => classify_explicit(p, p0, mu0),
                        MethodName::Lyapunov => lyap.as_ref().expect("tables built").classify_fixed(p0, mu0),
                        MethodName::Simulation => classify_simulated(p, p0, mu0),
                    };
                    r.map_err(|e| err.get_or_insert(format!("{}: {e}", m.name()))).ok()
                })
                .collect();
            (per.iter().flatten().next().copied(), per, err)
        })
        .collect();

    let mut cols = vec!["p0", "mu0", "verdict", "t_c"];
    let names: Vec<(String, String)> = c
        .methods
        .iter()
        .map(|m| (m.name().to_string(), format!("{}_t_c", m.name())))
        .collect();
    for (a, b) in &names {
        cols.push(a);
        cols.push(b);
    }
    cols.extend(["agree", "error"]);
    let mut table = Table::new("points", &cols);
    let (mut n_sub, mut n_sup, mut n_err, mut n_disagree) = (0usize, 0usize, 0usize, 0usize);
    let mut any_super = false;
    for (&(p0, mu0), (primary, per, err)) in c.points.iter().zip(&rows) {
        let mut row = vec![Cell::from(p0), Cell::from(mu0)];
        match primary {
            Some(cl) => {
                row.extend(verdict_cells(cl));
                if cl.verdict.is_supercritical() {
                    n_sup += 1;
                } else {
                    n_sub += 1;
                }
            }
            None => row.extend([Cell::Empty, Cell::Empty]),
        }
        for cl in per {
            match cl {
                Some(cl) => row.extend(verdict_cells(cl)),
                None => row.extend([Cell::Empty, Cell::Empty]),
            }
        }
        let verdicts: Vec<Verdict> = per.iter().flatten().map(|cl| cl.verdict).collect();
        any_super |= verdicts.iter().chain(primary.as_ref().map(|c| &c.verdict)).any(|v| v.is_supercritical());
        let agree = verdicts.windows(2).all(|w| w[0] == w[1]);
        if !agree {
            n_disagree += 1;
        }
        row.push(Cell::from(agree));
        row.push(match err {
            Some(e) => {
                n_err += 1;
                Cell::from(e.as_str())
            }
            None => Cell::Empty,
        });
        table.push(row);
    }
    report.tables.push(table);
    let d = &mut report.diagnostics;
    d.insert("n_points".into(), c.points.len().into());
    d.insert("n_subcritical".into(), n_sub.into());
    d.insert("n_supercritical".into(), n_sup.into());
    d.insert("n_disagreements".into(), n_disagree.into());
    d.insert("n_errors".into(), n_err.into());
    let methods: Vec<&str> = c.methods.iter().map(|m| m.name()).collect();
    d.insert("methods".into(), Value::String(methods.join(" ")));

    Ok(if n_err > 0 {
        Some(CliError::Numerical(ema_threshold::Error::Fit(format!(
            "{n_err} point(s) could not be classified"
        ))))
    } else if c.assert_subcritical && any_super {
        Some(CliError::AssertionFailed {
            message: "supercritical data found while assert_subcritical is set".into(),
        })
    } else {
        None
    })
}

fn boundary(p: &Parameters<f64>, mu0: &[f64], report: &mut Report) -> Result<Option<CliError>, CliError> {
    let pts: Vec<_> = mu0
        .par_iter()
        .map(|&m| threshold_boundary(p, &[m]).map(|v| v[0]))
        .collect::<Result<_, _>>()?;
    let mut table = Table::new("curve", &["mu0", "p0_lower", "p0_upper"]);
    for b in &pts {
        table.push(vec![b.mu0.into(), b.lower.into(), b.upper.into()]);
    }
    report.tables.push(table);
    let empty = pts.iter().filter(|b| b.lower.is_none() && b.upper.is_none()).count();
    report.diagnostics.insert("n_without_subcritical_interval".into(), empty.into());
    Ok(None)
}

pub fn build_profile(p: &Parameters<f64>, data: &ProfileData) -> ema_threshold::Result<InitialProfile<f64>> {
    match data {
        ProfileData::Density { grid, u0, rho0 } => init_from_density(p, grid, u0, rho0),
        ProfileData::Potential { grid, u0, first, second } => init_from_potential(p, grid, u0, second, first),
    }
}

fn event_name(e: RayEvent) -> &'static str {
    match e {
        RayEvent::RadialBlowUp => "radial_blowup",
        RayEvent::TangentialBlowUp => "tangential_blowup",
        RayEvent::Concentration => "concentration",
    }
}

fn simulate(p: &Parameters<f64>, s: &SimulateCommand, report: &mut Report) -> Result<Option<CliError>, CliError> {
    let profile = build_profile(p, &s.profile)?;
    let nodes: Vec<Option<Classification<f64>>> = (0..profile.len())
        .into_par_iter()
        .map(|i| {
            let pt = SpectralPoint::new(profile.p0[i], profile.q0(i), profile.mu0[i], profile.nu0[i]);
            classify_node(p, &pt).ok()
        })
        .collect();
    let sol = evolve(p, &profile, s.t_max, &s.snapshots, s.tol)?;

    let mut snaps = Table::new("snapshots", &SNAPSHOT_COLUMNS);
    for row in sol.snapshot_rows() {
        snaps.push(row.iter().map(|&x| Cell::from(x)).collect());
    }
    let mut rays = Table::new(
        "rays",
        &["ray", "r0", "formal", "node_verdict", "node_t_c", "event", "t_event", "error"],
    );
    for (i, (ray, node)) in sol.rays.iter().zip(&nodes).enumerate() {
        rays.push(vec![
            i.into(),
            ray.r0.into(),
            ray.formal.into(),
            node.map_or(Cell::Empty, |c| c.verdict.name().into()),
            node.and_then(|c| c.t_blowup).into(),
            ray.event.map_or(Cell::Empty, |(e, _)| event_name(e).into()),
            ray.event.map(|(_, t)| t).into(),
            ray.outcome.as_ref().err().map_or(Cell::Empty, |e| e.to_string().into()),
        ]);
    }
    report.tables.push(snaps);
    report.tables.push(rays);

    let predicted = nodes.iter().flatten().filter_map(|c| c.t_blowup).fold(None, |acc: Option<f64>, t| {
        Some(acc.map_or(t, |a| a.min(t)))
    });
    let sm = &mut report.summary;
    sm.insert("t_end".into(), num(sol.t_end()));
    sm.insert("shock_t".into(), opt_num(sol.shock.map(|x| x.t_c)));
    sm.insert("shock_r".into(), opt_num(sol.shock.map(|x| x.r_c)));
    sm.insert("shock_r0".into(), opt_num(sol.shock.map(|x| x.r0)));
    sm.insert("shock_ray".into(), sol.shock.map_or(Value::Null, |x| x.ray.into()));
    sm.insert("shock_kind".into(), sol.shock.map_or(Value::Null, |x| event_name(x.kind).into()));
    sm.insert("predicted_t_c".into(), opt_num(predicted));

    let inv = sol.invariants();
    let failures = sol.failures().len();
    let d = &mut report.diagnostics;
    d.insert("rays".into(), sol.rays.len().into());
    d.insert("failed_rays".into(), failures.into());
    d.insert("drift".into(), num(inv.drift));
    d.insert("q_consistency".into(), num(inv.q_consistency));
    d.insert("density_gap".into(), num(inv.density_gap));
    d.insert("no_crossing".into(), sol.no_crossing().into());
    d.insert("regularity_integral".into(), num(regularity_integral(&sol)));

    Ok(if failures > 0 {
        Some(CliError::Numerical(ema_threshold::Error::Integration {
            t: sol.t_end(),
            reason: format!("{failures} ray(s) failed"),
        }))
    } else if s.assert_subcritical && sol.shock.is_some() {
        Some(CliError::AssertionFailed {
            message: "shock formed while assert_subcritical is set".into(),
        })
    } else {
        None
    })
}

fn phase_portrait(p: &Parameters<f64>, w: &[f64], s: &[f64], report: &mut Report) {
    let (k, b) = (p.kappa(), p.beta());
    let mut table = Table::new("field", &["w", "s", "dw", "ds"]);
    for &wi in w {
        for &si in s {
            table.push(vec![wi.into(), si.into(), (-b * wi + k * (1.0 - si)).into(), wi.into()]);
        }
    }
    report.tables.push(table);
}

fn table_export(t: &LyapunovTable<f64>, samples: Option<usize>) -> ema_threshold::Result<Table> {
    let name = t.kind().name();
    let cols = ["s", name, &format!("sqrt_2{name}")];
    let mut table = Table::new(name, &cols);
    let pts = match samples {
        Some(n) => t.resample(n)?,
        None => t.columns(),
    };
    for (s, v) in pts {
        table.push(vec![s.into(), v.into(), (2.0 * v).max(0.0).sqrt().into()]);
    }
    Ok(table)
}

fn lyapunov(p: &Parameters<f64>, l: &LyapunovSection, report: &mut Report) -> Result<Option<CliError>, CliError> {
    let mut c = LyapunovClassifier::new(p, l.tol)?;
    c.ensure_domain(l.s_max)?;
    report.tables.push(table_export(c.p_table(), l.samples)?);
    if let Some(n) = c.n_table() {
        report.tables.push(table_export(n, l.samples)?);
    }
    let sm = &mut report.summary;
    let star = match p.regime() {
        ema_threshold::DampingRegime::Weak => Some(ema_threshold::s_star(p)?),
        _ => None,
    };
    sm.insert("s_star".into(), opt_num(star));
    sm.insert("s_star_numeric".into(), opt_num(c.p_table().terminal_s()));
    sm.insert("p_domain_max".into(), num(c.p_table().domain().1));
    Ok(None)
}

fn decay(
    p: &Parameters<f64>,
    points: &[[f64; 2]],
    eps: f64,
    window: Option<(f64, f64)>,
    report: &mut Report,
) -> Option<CliError> {
    let fits: Vec<_> = points
        .par_iter()
        .map(|&[p0, mu0]| decay_report(p, p0, mu0, eps, window))
        .collect();
    let mut table = Table::new(
        "fits",
        &["p0", "mu0", "gamma_fit", "gamma_expected", "relative_error", "t_lo", "t_hi", "residual", "branch", "error"],
    );
    let mut n_err = 0;
    for (&[p0, mu0], fit) in points.iter().zip(&fits) {
        let mut row = vec![p0.into(), mu0.into()];
        match fit {
            Ok(r) => {
                row.extend([
                    r.gamma_fit.into(),
                    r.gamma_expected.into(),
                    r.relative_error().into(),
                    r.window.0.into(),
                    r.window.1.into(),
                    r.residual.into(),
                    if r.generic_branch { "generic" } else { "exceptional" }.into(),
                    Cell::Empty,
                ]);
            }
            Err(e) => {
                n_err += 1;
                row.extend(std::iter::repeat_n(Cell::Empty, 7));
                row.push(e.to_string().into());
            }
        }
        table.push(row);
    }
    report.tables.push(table);
    report.diagnostics.insert("n_errors".into(), n_err.into());
    (n_err > 0).then(|| {
        CliError::Numerical(ema_threshold::Error::Fit(format!("{n_err} decay fit(s) failed")))
    })
}
