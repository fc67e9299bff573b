//! TOML run configuration.

use std::path::{Path, PathBuf};

use ema_threshold::{Parameters, DEFAULT_REGIME_TOL};
use serde::Deserialize;

use crate::error::CliError;
use crate::output::Format;

/// `count` evenly spaced values from `from` to `to` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinSpace {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl LinSpace {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.from],
            n => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        self.to
                    } else {
                        self.from + (self.to - self.from) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }

    fn check(&self, field: &str) -> Result<(), CliError> {
        if !self.from.is_finite() || !self.to.is_finite() {
            return Err(CliError::config(field, format!("{field}: bounds must be finite")));
        }
        if self.count == 0 {
            return Err(CliError::config(format!("{field}.count"), format!("{field}.count must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub kappa: f64,
    pub beta: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_regime_tol")]
    pub regime_tol: f64,
}

fn default_dim() -> usize {
    2
}

fn default_regime_tol() -> f64 {
    DEFAULT_REGIME_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Explicit,
    Lyapunov,
    Simulation,
}

impl MethodName {
    pub fn name(self) -> &'static str {
        match self {
            MethodName::Explicit => "explicit",
            MethodName::Lyapunov => "lyapunov",
            MethodName::Simulation => "simulation",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub p0: LinSpace,
    pub mu0: LinSpace,
}

/// Uniform random points from a seeded ChaCha8 stream.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSection {
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    pub p0: [f64; 2],
    pub mu0: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
    #[serde(default)]
    pub vacuous: Vec<f64>,
    pub grid: Option<GridSection>,
    pub random: Option<RandomSection>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodName>,
    #[serde(default)]
    pub assert_subcritical: bool,
    #[serde(default = "default_table_tol")]
    pub lyapunov_tol: f64,
}

fn default_methods() -> Vec<MethodName> {
    vec![MethodName::Explicit]
}

fn default_table_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub mu0: Option<Vec<f64>>,
    pub mu0_range: Option<LinSpace>,
}

/// Initial velocity `u0(r)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySource {
    /// `u0(r) = a r exp(-r^2 / (2 sigma^2))`.
    GaussianBump { a: f64, sigma: f64 },
    Inline { values: Vec<f64> },
}

/// Initial density `rho0(r)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySource {
    ConstantDensity { c: f64 },
    Inline { values: Vec<f64> },
}

/// Initial potential, given through `phi0'` and `phi0''`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSource {
    /// `phi0(r) = c r^m / m`, so `phi0' = c r^{m-1}`, `phi0'' = c (m-1) r^{m-2}`.
    PowerPotential {
        c: f64,
        #[serde(default = "default_power")]
        m: f64,
    },
    Inline { first: Vec<f64>, second: Vec<f64> },
}

fn default_power() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub t_max: f64,
    pub snapshots: Option<Vec<f64>>,
    pub snapshot_step: Option<f64>,
    #[serde(default = "default_sim_tol")]
    pub tol: f64,
    pub rays: Option<usize>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub u0: Option<VelocitySource>,
    pub density: Option<DensitySource>,
    pub potential: Option<PotentialSource>,
    /// CSV with header `r,u0,rho0`.
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub assert_subcritical: bool,
}

fn default_sim_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasePortraitSection {
    pub w: LinSpace,
    pub s: LinSpace,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_table_tol")]
    pub tol: f64,
    /// Resample on this many intervals instead of exporting table nodes.
    pub samples: Option<usize>,
}

fn default_s_max() -> f64 {
    4.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    pub points: Vec<[f64; 2]>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub window: Option<[f64; 2]>,
}

fn default_eps() -> f64 {
    0.05
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    params: ParamsSection,
    classify: Option<ClassifySection>,
    boundary: Option<BoundarySection>,
    simulate: Option<SimulateSection>,
    #[serde(rename = "phase-portrait", alias = "phase_portrait")]
    phase_portrait: Option<PhasePortraitSection>,
    lyapunov: Option<LyapunovSection>,
    decay: Option<DecaySection>,
    #[serde(default)]
    output: OutputSection,
}

/// Sampled radial initial data, before conversion to spectral form.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileData {
    Density { grid: Vec<f64>, u0: Vec<f64>, rho0: Vec<f64> },
    Potential { grid: Vec<f64>, u0: Vec<f64>, first: Vec<f64>, second: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct SimulateCommand {
    pub t_max: f64,
    pub snapshots: Vec<f64>,
    pub tol: f64,
    pub profile: ProfileData,
    pub assert_subcritical: bool,
}

#[derive(Debug, Clone)]
pub struct ClassifyCommand {
    /// `(p0, mu0)`; vacuous entries carry `mu0 = 1`.
    pub points: Vec<(f64, f64)>,
    pub methods: Vec<MethodName>,
    pub assert_subcritical: bool,
    pub lyapunov_tol: f64,
}

#[derive(Debug, Clone)]
pub enum Command {
    Classify(ClassifyCommand),
    Boundary { mu0: Vec<f64> },
    Simulate(SimulateCommand),
    PhasePortrait { w: Vec<f64>, s: Vec<f64> },
    Lyapunov(LyapunovSection),
    Decay(DecaySection),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::Boundary { .. } => "boundary",
            Command::Simulate(_) => "simulate",
            Command::PhasePortrait { .. } => "phase-portrait",
            Command::Lyapunov(_) => "lyapunov",
            Command::Decay(_) => "decay",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: Parameters<f64>,
    pub command: Command,
    pub output: OutputSection,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses and validates; relative file paths resolve against `base`.
pub fn parse(text: &str, base: &Path) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config {
        field: None,
        message: format!("config: {}", e.to_string().trim_end()),
    })?;
    let p = &raw.params;
    let params = Parameters::new(p.kappa, p.beta, p.dim, p.regime_tol).map_err(|e| CliError::from_params("params", e))?;

    let present: Vec<&str> = [
        ("classify", raw.classify.is_some()),
        ("boundary", raw.boundary.is_some()),
        ("simulate", raw.simulate.is_some()),
        ("phase-portrait", raw.phase_portrait.is_some()),
        ("lyapunov", raw.lyapunov.is_some()),
        ("decay", raw.decay.is_some()),
    ]
    .into_iter()
    .filter_map(|(n, on)| on.then_some(n))
    .collect();
    if present.len() != 1 {
        let msg = if present.is_empty() {
            "no command block; expected one of [classify], [boundary], [simulate], [phase-portrait], [lyapunov], [decay]".to_string()
        } else {
            format!("conflicting command blocks: {}", present.join(", "))
        };
        return Err(CliError::Config { field: None, message: msg });
    }

    let command = if let Some(c) = raw.classify {
        Command::Classify(classify_command(c)?)
    } else if let Some(b) = raw.boundary {
        Command::Boundary { mu0: boundary_grid(b)? }
    } else if let Some(s) = raw.simulate {
        Command::Simulate(simulate_command(s, &params, base)?)
    } else if let Some(pp) = raw.phase_portrait {
        pp.w.check("phase-portrait.w")?;
        pp.s.check("phase-portrait.s")?;
        Command::PhasePortrait {
            w: pp.w.values(),
            s: pp.s.values(),
        }
    } else if let Some(l) = raw.lyapunov {
        positive("lyapunov.tol", l.tol)?;
        positive("lyapunov.s_max", l.s_max)?;
        if l.samples == Some(0) {
            return Err(CliError::config("lyapunov.samples", "lyapunov.samples must be positive"));
        }
        Command::Lyapunov(l)
    } else if let Some(d) = raw.decay {
        if d.points.is_empty() {
            return Err(CliError::config("decay.points", "decay.points is empty"));
        }
        for (i, pt) in d.points.iter().enumerate() {
            point_check(&format!("decay.points[{i}]"), *pt)?;
        }
        positive("decay.eps", d.eps)?;
        if let Some([lo, hi]) = d.window {
            if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
                return Err(CliError::config("decay.window", "decay.window must satisfy 0 <= lo < hi"));
            }
        }
        Command::Decay(d)
    } else {
        unreachable!("exactly one block is present")
    };

    Ok(RunConfig {
        params,
        command,
        output: raw.output,
    })
}

fn positive(field: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(field, format!("{field} must be positive and finite, got {x}")))
    }
}

fn point_check(field: &str, [p0, mu0]: [f64; 2]) -> Result<(), CliError> {
    if !p0.is_finite() || !mu0.is_finite() {
        return Err(CliError::config(field, format!("{field}: values must be finite")));
    }
    if mu0 >= 1.0 {
        return Err(CliError::config(
            field,
            format!("{field}: mu0 = {mu0} >= 1; list vacuous data under `vacuous` instead"),
        ));
    }
    Ok(())
}

fn classify_command(c: ClassifySection) -> Result<ClassifyCommand, CliError> {
    use rand::{Rng, SeedableRng};

    let mut points = Vec::new();
    for (i, pt) in c.points.iter().enumerate() {
        point_check(&format!("classify.points[{i}]"), *pt)?;
        points.push((pt[0], pt[1]));
    }
    for (i, &p0) in c.vacuous.iter().enumerate() {
        if !p0.is_finite() {
            return Err(CliError::config(format!("classify.vacuous[{i}]"), "vacuous p0 must be finite"));
        }
        points.push((p0, 1.0));
    }
    if let Some(g) = &c.grid {
        g.p0.check("classify.grid.p0")?;
        g.mu0.check("classify.grid.mu0")?;
        if g.mu0.from.max(g.mu0.to) >= 1.0 {
            return Err(CliError::config("classify.grid.mu0", "classify.grid.mu0 must stay below 1"));
        }
        for mu0 in g.mu0.values() {
            for p0 in g.p0.values() {
                points.push((p0, mu0));
            }
        }
    }
    if let Some(r) = &c.random {
        let ok = |[lo, hi]: [f64; 2]| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(r.p0) {
            return Err(CliError::config("classify.random.p0", "classify.random.p0 must be [lo, hi] with lo < hi"));
        }
        if !ok(r.mu0) || r.mu0[1] > 1.0 {
            return Err(CliError::config(
                "classify.random.mu0",
                "classify.random.mu0 must be [lo, hi] with lo < hi <= 1",
            ));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(r.seed);
        for _ in 0..r.count {
            let p0 = rng.gen_range(r.p0[0]..r.p0[1]);
            let mu0 = rng.gen_range(r.mu0[0]..r.mu0[1]);
            points.push((p0, mu0));
        }
    }
    if points.is_empty() {
        return Err(CliError::config("classify", "classify: no points given"));
    }
    if c.methods.is_empty() {
        return Err(CliError::config("classify.methods", "classify.methods is empty"));
    }
    let mut methods = Vec::new();
    for m in c.methods {
        if methods.contains(&m) {
            return Err(CliError::config("classify.methods", format!("classify.methods lists `{}` twice", m.name())));
        }
        methods.push(m);
    }
    positive("classify.lyapunov_tol", c.lyapunov_tol)?;
    Ok(ClassifyCommand {
        points,
        methods,
        assert_subcritical: c.assert_subcritical,
        lyapunov_tol: c.lyapunov_tol,
    })
}

fn boundary_grid(b: BoundarySection) -> Result<Vec<f64>, CliError> {
    let mu0 = match (b.mu0, b.mu0_range) {
        (Some(v), None) => v,
        (None, Some(r)) => {
            r.check("boundary.mu0_range")?;
            r.values()
        }
        _ => {
            return Err(CliError::config(
                "boundary",
                "boundary needs exactly one of `mu0` and `mu0_range`",
            ))
        }
    };
    if mu0.is_empty() {
        return Err(CliError::config("boundary.mu0", "boundary.mu0 is empty"));
    }
    if let Some(i) = mu0.iter().position(|m| !(m.is_finite() && *m < 1.0)) {
        return Err(CliError::config(format!("boundary.mu0[{i}]"), "mu0 must be finite and below 1"));
    }
    Ok(mu0)
}

fn simulate_command(s: SimulateSection, params: &Parameters<f64>, base: &Path) -> Result<SimulateCommand, CliError> {
    positive("simulate.t_max", s.t_max)?;
    positive("simulate.tol", s.tol)?;
    let snapshots = match (s.snapshots, s.snapshot_step) {
        (Some(_), Some(_)) => {
            return Err(CliError::config("simulate", "give `snapshots` or `snapshot_step`, not both"));
        }
        (Some(v), None) => {
            if let Some(i) = v.iter().position(|t| !(*t >= 0.0 && *t <= s.t_max)) {
                return Err(CliError::config(
                    format!("simulate.snapshots[{i}]"),
                    "snapshot times must lie in [0, t_max]",
                ));
            }
            let mut v = v;
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        }
        (None, step) => {
            let step = step.unwrap_or(s.t_max / 20.0);
            positive("simulate.snapshot_step", step)?;
            let n = (s.t_max / step * (1.0 + 1e-12)).floor() as usize;
            let mut v: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
            if *v.last().unwrap() < s.t_max * (1.0 - 1e-12) {
                v.push(s.t_max);
            }
            v
        }
    };

    let profile = if let Some(file) = s.file {
        if s.u0.is_some() || s.density.is_some() || s.potential.is_some() || s.grid.is_some() || s.rays.is_some() {
            return Err(CliError::config(
                "simulate.file",
                "simulate.file supplies the whole profile; drop grid, rays, u0, density and potential",
            ));
        }
        let path = if file.is_absolute() { file } else { base.join(file) };
        read_profile_file(&path)?
    } else {
        let grid = match (s.grid, s.rays) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("simulate.grid", "give `grid` or `rays`, not both"));
            }
            (Some(g), None) => g,
            (None, rays) => {
                let r_max = s.r_max.unwrap_or(4.0);
                ema_threshold::radial::ray_grid(s.r_min, r_max, rays.unwrap_or(256))
                    .map_err(|e| CliError::from_params("simulate", e))?
            }
        };
        let u0 = match s.u0 {
            None => return Err(CliError::config("simulate.u0", "simulate.u0 is required")),
            Some(VelocitySource::GaussianBump { a, sigma }) => {
                positive("simulate.u0.sigma", sigma)?;
                grid.iter().map(|&r| a * r * (-(r * r) / (2.0 * sigma * sigma)).exp()).collect()
            }
            Some(VelocitySource::Inline { values }) => sized("simulate.u0.values", values, grid.len())?,
        };
        match (s.density, s.potential) {
            (Some(d), None) => {
                let rho0 = match d {
                    DensitySource::ConstantDensity { c } => vec![c; grid.len()],
                    DensitySource::Inline { values } => sized("simulate.density.values", values, grid.len())?,
                };
                ProfileData::Density { grid, u0, rho0 }
            }
            (None, Some(p)) => {
                let (first, second) = match p {
                    PotentialSource::PowerPotential { c, m } => {
                        if m.is_nan() || m < 1.0 {
                            return Err(CliError::config("simulate.potential.m", "power_potential needs m >= 1"));
                        }
                        (
                            grid.iter().map(|&r| c * r.powf(m - 1.0)).collect(),
                            grid.iter().map(|&r| c * (m - 1.0) * r.powf(m - 2.0)).collect(),
                        )
                    }
                    PotentialSource::Inline { first, second } => (
                        sized("simulate.potential.first", first, grid.len())?,
                        sized("simulate.potential.second", second, grid.len())?,
                    ),
                };
                ProfileData::Potential { grid, u0, first, second }
            }
            _ => {
                return Err(CliError::config(
                    "simulate",
                    "simulate needs exactly one of `density` and `potential`",
                ))
            }
        }
    };

    // catch malformed profiles now so they report as configuration errors
    crate::commands::build_profile(params, &profile).map_err(|e| CliError::from_params("simulate", e))?;
    Ok(SimulateCommand {
        t_max: s.t_max,
        snapshots,
        tol: s.tol,
        profile,
        assert_subcritical: s.assert_subcritical,
    })
}

fn sized(field: &str, v: Vec<f64>, n: usize) -> Result<Vec<f64>, CliError> {
    if v.len() != n {
        return Err(CliError::config(field, format!("{field} has {} entries, grid has {n}", v.len())));
    }
    Ok(v)
}

fn read_profile_file(path: &Path) -> Result<ProfileData, CliError> {
    let field = "simulate.file";
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(field, format!("cannot read profile {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header: Vec<&str> = match lines.next() {
        Some((_, h)) => h.split(',').map(str::trim).collect(),
        None => return Err(CliError::config(field, format!("{} is empty", path.display()))),
    };
    if header != ["r", "u0", "rho0"] {
        return Err(CliError::config(
            field,
            format!("{}: header must be `r,u0,rho0`", path.display()),
        ));
    }
    let (mut grid, mut u0, mut rho0) = (Vec::new(), Vec::new(), Vec::new());
    for (lineno, line) in lines {
        let vals: Result<Vec<f64>, _> = line.split(',').map(|x| x.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) if v.len() == 3 => {
                grid.push(v[0]);
                u0.push(v[1]);
                rho0.push(v[2]);
            }
            _ => {
                return Err(CliError::config(
                    field,
                    format!("{} line {}: expected three numbers", path.display(), lineno + 1),
                ))
            }
        }
    }
    Ok(ProfileData::Density { grid, u0, rho0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> Result<RunConfig, CliError> {
        parse(text, Path::new("."))
    }

    #[test]
    fn minimal_classify() {
        let cfg = parse_str("[params]\nkappa = 1.0\nbeta = 3.0\n[classify]\npoints = [[0.0, 0.0]]\n").unwrap();
        assert_eq!(cfg.command.name(), "classify");
        assert_eq!(cfg.params.dim(), 2);
    }

    #[test]
    fn two_blocks_conflict() {
        let err = parse_str(
            "[params]\nkappa = 1.0\nbeta = 3.0\n[classify]\npoints = [[0.0, 0.0]]\n[simulate]\nt_max = 1.0\n",
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("conflicting"));
    }

    #[test]
    fn negative_beta_names_the_field() {
        let err = parse_str("[params]\nkappa = 1.0\nbeta = -1.0\n[classify]\npoints = [[0.0, 0.0]]\n").unwrap_err();
        match err {
            CliError::Config { field, .. } => assert_eq!(field.as_deref(), Some("params.beta")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_str("[params]\nkappa = 1.0\nbeta = 3.0\nbogus = 2\n[classify]\npoints = [[0.0, 0.0]]\n")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn missing_profile_file() {
        let err = parse_str(
            "[params]\nkappa = 1.0\nbeta = 3.0\n[simulate]\nt_max = 1.0\nfile = \"does-not-exist.csv\"\n",
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn linspace_endpoints_exact() {
        let v = LinSpace { from: -1.0, to: 0.3, count: 7 }.values();
        assert_eq!(v.len(), 7);
        assert_eq!((v[0], v[6]), (-1.0, 0.3));
    }
}
