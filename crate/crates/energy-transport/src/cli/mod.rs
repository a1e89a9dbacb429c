//! Run configuration, the Gaussian-wells experiment preset, and command
//! orchestration: simulate, parameter sweeps, region scans, and the
//! invariant verifier.
//!
//! Configs are TOML with strict unknown-key rejection. Every simulate run
//! writes the fully-resolved config next to its outputs so reruns are
//! byte-reproducible.

pub mod expr;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{
    self, algebraic_envelope, distance_to_equilibrium, entropy_inequality_report, fit_decay,
    relative_distance, DecayFit, EntropyInequalityReport,
};
use crate::discretization::{BoundaryKind, Grid1D, State};
use crate::model::{self, EntropyPair, ModelParams, Relaxation};
use crate::solver::{advance, RunStatus, SolverConfig, Trajectory};

/// Errors that map to exit code 2.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("TOML parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config at {field}: {reason}")]
    Invalid { field: String, reason: String },
}

/// Errors from running commands.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver aborted: {0}")]
    SolverAbort(String),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    /// Process exit code: 2 config error, 3 solver abort, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::SolverAbort(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RelaxationSection {
    Constant { tau: f64 },
    TemperatureDependent { tau0: f64, tau1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub beta: f64,
    pub n_d: f64,
    pub theta_d: f64,
    pub relaxation: RelaxationSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcSection {
    Dirichlet,
    NeumannZeroFlux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub num_points: usize,
    pub bc_left: BcSection,
    pub bc_right: BcSection,
}

fn default_newton_tol() -> f64 {
    1e-10
}
fn default_newton_max_iters() -> usize {
    25
}
fn default_dt_min() -> f64 {
    1e-12
}
fn default_grow() -> f64 {
    1.25
}
fn default_shrink() -> f64 {
    0.75
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iters")]
    pub newton_max_iters: usize,
    pub dt_init: f64,
    pub dt_max: f64,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_grow")]
    pub grow_factor: f64,
    #[serde(default = "default_shrink")]
    pub shrink_factor: f64,
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_true")]
    pub adaptive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSection {
    /// Built-in profile; currently `"gaussian-wells"`.
    Preset { preset: String },
    /// Closed-form n(x) and θ(x) in the piecewise grammar of [`expr`].
    Expression { n: String, theta: String },
    /// CSV file with header `x,n,theta` matching the grid nodes.
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// (b1, b2) exponent pairs; the first one drives the trajectory CSV.
    pub entropy_pairs: Vec<[f64; 2]>,
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub allow_extended_beta: bool,
    pub model: ModelSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub initial: InitialSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }
}

/// Domain objects resolved from a [`RunConfig`].
#[derive(Debug)]
pub struct BuiltRun {
    pub params: ModelParams,
    pub grid: Grid1D,
    pub solver: SolverConfig,
    pub initial: State,
    pub pairs: Vec<EntropyPair>,
}

/// The preset reproducing the two-well experiment: Ω = (0, 1), 501 nodes,
/// Dirichlet (1, 1) at both ends, dt_max = 2e-3, mirrored Gaussian wells
/// with θ0 = n0 (minimum exp(−12) at the midpoint), τ = 1.
pub fn gaussian_wells_preset(beta: f64) -> RunConfig {
    RunConfig {
        allow_extended_beta: !(-0.5..0.5).contains(&beta),
        model: ModelSection {
            beta,
            n_d: 1.0,
            theta_d: 1.0,
            relaxation: RelaxationSection::Constant { tau: 1.0 },
        },
        grid: GridSection {
            x_min: 0.0,
            x_max: 1.0,
            num_points: 501,
            bc_left: BcSection::Dirichlet,
            bc_right: BcSection::Dirichlet,
        },
        solver: SolverSection {
            newton_tol: 1e-10,
            newton_max_iters: 25,
            dt_init: 2e-3,
            dt_max: 2e-3,
            dt_min: 1e-12,
            grow_factor: 1.25,
            shrink_factor: 0.75,
            t_end: 1.0,
            snapshot_times: vec![0.0, 1e-3, 5e-3, 2e-2, 1e-1, 1.0],
            adaptive: true,
        },
        initial: InitialSection::Preset {
            preset: "gaussian-wells".into(),
        },
        output: OutputSection {
            dir: PathBuf::from("out"),
            entropy_pairs: vec![[beta - 0.5, 5.0]],
        },
    }
}

/// The preset's initial profile: n0(x) = exp(−48x²) on [0, 1/2],
/// exp(−48(x−1)²) on (1/2, 1], θ0 = n0.
fn gaussian_wells_profile(x: f64) -> f64 {
    if x <= 0.5 {
        (-48.0 * x * x).exp()
    } else {
        (-48.0 * (x - 1.0) * (x - 1.0)).exp()
    }
}

fn evaluate_initial(
    section: &InitialSection,
    grid: &Grid1D,
    config_dir: Option<&Path>,
) -> Result<State, ConfigError> {
    let (n, theta): (Vec<f64>, Vec<f64>) = match section {
        InitialSection::Preset { preset } => {
            if preset != "gaussian-wells" {
                return Err(invalid(
                    "initial.preset",
                    format!("unknown preset '{preset}'"),
                ));
            }
            let n: Vec<f64> = (0..grid.num_points)
                .map(|i| gaussian_wells_profile(grid.x(i)))
                .collect();
            let theta = n.clone();
            (n, theta)
        }
        InitialSection::Expression { n, theta } => {
            let n_expr = expr::parse(n).map_err(|e| invalid("initial.n", e.to_string()))?;
            let t_expr = expr::parse(theta).map_err(|e| invalid("initial.theta", e.to_string()))?;
            let mut nv = Vec::with_capacity(grid.num_points);
            let mut tv = Vec::with_capacity(grid.num_points);
            for i in 0..grid.num_points {
                let x = grid.x(i);
                nv.push(
                    n_expr
                        .eval(x)
                        .map_err(|e| invalid("initial.n", e.to_string()))?,
                );
                tv.push(
                    t_expr
                        .eval(x)
                        .map_err(|e| invalid("initial.theta", e.to_string()))?,
                );
            }
            (nv, tv)
        }
        InitialSection::Tabulated { path } => {
            let resolved = match (path.is_relative(), config_dir) {
                (true, Some(dir)) => dir.join(path),
                _ => path.clone(),
            };
            let text = fs::read_to_string(&resolved).map_err(|source| ConfigError::Read {
                path: resolved.clone(),
                source,
            })?;
            read_tabulated(&text, grid)?
        }
    };
    for (i, (&ni, &ti)) in n.iter().zip(&theta).enumerate() {
        if !(ni > 0.0 && ti > 0.0) {
            return Err(invalid(
                "initial",
                format!(
                    "initial condition must be strictly positive; node {i} has n={ni}, theta={ti}"
                ),
            ));
        }
    }
    let w = n.iter().zip(&theta).map(|(&ni, &ti)| ni * ti).collect();
    Ok(State { n, w, t: 0.0 })
}

fn read_tabulated(text: &str, grid: &Grid1D) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != "x,n,theta" {
        return Err(invalid(
            "initial.path",
            "tabulated file must start with header 'x,n,theta'",
        ));
    }
    let mut n = Vec::new();
    let mut theta = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(invalid(
                "initial.path",
                format!("line {}: expected 3 comma-separated fields", lineno + 2),
            ));
        }
        let parse = |s: &str, what: &str| -> Result<f64, ConfigError> {
            s.trim().parse().map_err(|_| {
                invalid(
                    "initial.path",
                    format!("line {}: bad {what} '{s}'", lineno + 2),
                )
            })
        };
        let x = parse(fields[0], "x")?;
        let i = n.len();
        if i >= grid.num_points {
            return Err(invalid("initial.path", "more rows than grid nodes"));
        }
        let expected = grid.x(i);
        if (x - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(invalid(
                "initial.path",
                format!(
                    "line {}: x={x} does not match grid node {expected}",
                    lineno + 2
                ),
            ));
        }
        n.push(parse(fields[1], "n")?);
        theta.push(parse(fields[2], "theta")?);
    }
    if n.len() != grid.num_points {
        return Err(invalid(
            "initial.path",
            format!("{} rows for a grid of {} nodes", n.len(), grid.num_points),
        ));
    }
    Ok((n, theta))
}

/// Resolve a config into domain objects, validating every section.
///
/// `force_extended_beta` is the CLI override; the config's own
/// `allow_extended_beta` flag works too.
pub fn build(
    config: &RunConfig,
    force_extended_beta: bool,
    config_dir: Option<&Path>,
) -> Result<BuiltRun, ConfigError> {
    let relaxation = match config.model.relaxation {
        RelaxationSection::Constant { tau } => Relaxation::Constant { tau },
        RelaxationSection::TemperatureDependent { tau0, tau1 } => {
            Relaxation::TemperatureDependent { tau0, tau1 }
        }
    };
    let extended = force_extended_beta || config.allow_extended_beta;
    let params = if extended {
        ModelParams::new_extended(
            config.model.beta,
            relaxation,
            config.model.n_d,
            config.model.theta_d,
        )
    } else {
        ModelParams::new(
            config.model.beta,
            relaxation,
            config.model.n_d,
            config.model.theta_d,
        )
    }
    .map_err(|e| invalid("model", e.to_string()))?;

    let bc = |section: BcSection| match section {
        BcSection::Dirichlet => BoundaryKind::Dirichlet {
            n: params.n_d,
            theta: params.theta_d,
        },
        BcSection::NeumannZeroFlux => BoundaryKind::NeumannZeroFlux,
    };
    let grid = Grid1D::new(
        config.grid.x_min,
        config.grid.x_max,
        config.grid.num_points,
        bc(config.grid.bc_left),
        bc(config.grid.bc_right),
    )
    .map_err(|e| invalid("grid", e.to_string()))?;

    let s = &config.solver;
    let solver = SolverConfig {
        newton_tol: s.newton_tol,
        newton_max_iters: s.newton_max_iters,
        dt_init: s.dt_init,
        dt_max: s.dt_max,
        dt_min: s.dt_min,
        grow_factor: s.grow_factor,
        shrink_factor: s.shrink_factor,
        t_end: s.t_end,
        snapshot_times: s.snapshot_times.clone(),
        adaptive: s.adaptive,
    };
    solver
        .validate()
        .map_err(|e| invalid("solver", e.to_string()))?;

    if config.output.entropy_pairs.is_empty() {
        return Err(invalid(
            "output.entropy_pairs",
            "at least one entropy pair is required",
        ));
    }
    let mut pairs = Vec::new();
    for (k, &[b1, b2]) in config.output.entropy_pairs.iter().enumerate() {
        pairs.push(
            EntropyPair::new(b1, b2)
                .map_err(|e| invalid(&format!("output.entropy_pairs[{k}]"), e.to_string()))?,
        );
    }

    let initial = evaluate_initial(&config.initial, &grid, config_dir)?;
    Ok(BuiltRun {
        params,
        grid,
        solver,
        initial,
        pairs,
    })
}

/// Decay fits of one run.
///
/// The exponential fits act on the unsquared relative distances over the
/// late window (the semilog regime); the algebraic fit acts on the squared
/// absolute distance over the early window, where the reciprocal is close
/// to linear, and feeds the one-sided envelope.
pub struct RunFits {
    pub exp_window: (f64, f64),
    pub alg_window: (f64, f64),
    pub exp_rel_n: Option<DecayFit>,
    pub exp_rel_w: Option<DecayFit>,
    /// Fit of sqrt of the mean squared relative distance.
    pub exp_combined: Option<DecayFit>,
    /// Algebraic fit of the squared absolute distance dist_n² + dist_w².
    pub alg_squared: Option<DecayFit>,
    /// One-sided envelope constants (C1, C2) for the squared distance.
    pub envelope: Option<(f64, f64)>,
    pub envelope_holds: bool,
}

/// Everything a caller needs to assert on a finished run.
pub struct RunSummary {
    pub status: RunStatus,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub t_final: f64,
    pub initial_min_n: f64,
    pub initial_min_theta: f64,
    /// Minima over all accepted (post-initial) states.
    pub min_n_over_run: f64,
    pub min_theta_over_run: f64,
    /// Per recorded-state series: (t, rel_dist_n, rel_dist_w).
    pub decay_series: Vec<(f64, f64, f64)>,
    /// Squared absolute distance series (t, dist_n² + dist_w²).
    pub squared_distance_series: Vec<(f64, f64)>,
    pub entropy_report: EntropyInequalityReport,
    pub fits: RunFits,
}

fn write_snapshot_csv(
    path: &Path,
    state: &State,
    grid: &Grid1D,
    beta: f64,
) -> Result<(), CliError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(b"x,n,theta,u,v\n")?;
    for i in 0..grid.num_points {
        let theta = state.theta(i);
        let (u, v) = model::to_uv(state.n[i], theta, beta)
            .map_err(|e| CliError::SolverAbort(e.to_string()))?;
        writeln!(out, "{},{},{},{},{}", grid.x(i), state.n[i], theta, u, v)?;
    }
    Ok(())
}

fn compute_fits(exp_window: (f64, f64), alg_window: (f64, f64), summary: &mut RunSummary) {
    let times: Vec<f64> = summary.decay_series.iter().map(|r| r.0).collect();
    let rel_n: Vec<f64> = summary.decay_series.iter().map(|r| r.1).collect();
    let rel_w: Vec<f64> = summary.decay_series.iter().map(|r| r.2).collect();
    let combined: Vec<f64> = rel_n
        .iter()
        .zip(&rel_w)
        .map(|(&a, &b)| ((a * a + b * b) / 2.0).sqrt())
        .collect();
    let sq_times: Vec<f64> = summary
        .squared_distance_series
        .iter()
        .map(|r| r.0)
        .collect();
    let sq_vals: Vec<f64> = summary
        .squared_distance_series
        .iter()
        .map(|r| r.1)
        .collect();

    summary.fits.exp_window = exp_window;
    summary.fits.alg_window = alg_window;
    summary.fits.exp_rel_n = fit_decay(&times, &rel_n, exp_window).ok();
    summary.fits.exp_rel_w = fit_decay(&times, &rel_w, exp_window).ok();
    summary.fits.exp_combined = fit_decay(&times, &combined, exp_window).ok();
    summary.fits.alg_squared = fit_decay(&sq_times, &sq_vals, alg_window).ok();
    if let Some(alg) = &summary.fits.alg_squared {
        if alg.alg_c2 > 0.0 {
            let (c1, c2) = algebraic_envelope(&sq_times, &sq_vals, alg.alg_c2);
            let holds = sq_times
                .iter()
                .zip(&sq_vals)
                .all(|(&t, &v)| v <= c1 / (1.0 + c2 * t) * (1.0 + 1e-12));
            summary.fits.envelope = Some((c1, c2));
            summary.fits.envelope_holds = holds;
        }
    }
}

fn write_summary_file(
    path: &Path,
    config: &RunConfig,
    summary: &RunSummary,
    pair: EntropyPair,
) -> Result<(), CliError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let status = match summary.status {
        RunStatus::Completed => "completed".to_string(),
        RunStatus::DtUnderflow { t } => format!("aborted-dt-underflow at t={t}"),
        RunStatus::NewtonFailed { t, dt } => format!("aborted-newton-failure at t={t} dt={dt}"),
    };
    writeln!(out, "status = {status}")?;
    writeln!(out, "beta = {}", config.model.beta)?;
    writeln!(out, "accepted_steps = {}", summary.accepted_steps)?;
    writeln!(out, "rejected_steps = {}", summary.rejected_steps)?;
    writeln!(out, "t_final = {}", summary.t_final)?;
    writeln!(out, "initial_min_n = {}", summary.initial_min_n)?;
    writeln!(out, "initial_min_theta = {}", summary.initial_min_theta)?;
    writeln!(out, "min_n_over_run = {}", summary.min_n_over_run)?;
    writeln!(out, "min_theta_over_run = {}", summary.min_theta_over_run)?;
    writeln!(out, "entropy_pair = ({}, {})", pair.b1, pair.b2)?;
    writeln!(
        out,
        "entropy_monotone = {}",
        summary.entropy_report.monotone
    )?;
    writeln!(
        out,
        "entropy_worst_excess = {}",
        summary.entropy_report.worst_excess
    )?;
    match summary.entropy_report.min_c_ratio {
        Some(c) => writeln!(out, "entropy_min_c_ratio = {c}")?,
        None => writeln!(
            out,
            "entropy_min_c_ratio = unavailable (dissipation below floor)"
        )?,
    }
    writeln!(
        out,
        "exp_fit_window = [{}, {}]",
        summary.fits.exp_window.0, summary.fits.exp_window.1
    )?;
    writeln!(
        out,
        "alg_fit_window = [{}, {}]",
        summary.fits.alg_window.0, summary.fits.alg_window.1
    )?;
    // exponential fits act on the UNSQUARED relative distance (semilog
    // convention); the algebraic fit acts on the SQUARED absolute distance
    let exp_line = |name: &str, fit: &Option<DecayFit>| -> String {
        match fit {
            Some(f) => format!("{name}_rate = {}\n{name}_r2 = {}", f.exp_rate, f.exp_r2),
            None => format!("{name} = unavailable"),
        }
    };
    writeln!(
        out,
        "{}",
        exp_line("exp_fit_rel_n", &summary.fits.exp_rel_n)
    )?;
    writeln!(
        out,
        "{}",
        exp_line("exp_fit_rel_w", &summary.fits.exp_rel_w)
    )?;
    writeln!(
        out,
        "{}",
        exp_line("exp_fit_combined", &summary.fits.exp_combined)
    )?;
    match &summary.fits.alg_squared {
        Some(f) => {
            writeln!(out, "alg_fit_c1 = {}", f.alg_c1)?;
            writeln!(out, "alg_fit_c2 = {}", f.alg_c2)?;
            writeln!(out, "alg_fit_r2 = {}", f.alg_r2)?;
        }
        None => writeln!(out, "alg_fit = unavailable")?,
    }
    match summary.fits.envelope {
        Some((c1, c2)) => {
            writeln!(out, "envelope_c1 = {c1}")?;
            writeln!(out, "envelope_c2 = {c2}")?;
            writeln!(
                out,
                "envelope_holds_pointwise = {}",
                summary.fits.envelope_holds
            )?;
        }
        None => writeln!(out, "envelope = unavailable")?,
    }
    writeln!(out, "newton_tol = {} (config)", config.solver.newton_tol)?;
    let tau_note = match config.model.relaxation {
        RelaxationSection::Constant { tau } => format!("tau = {tau} (config)"),
        RelaxationSection::TemperatureDependent { tau0, tau1 } => {
            format!("tau0 = {tau0}, tau1 = {tau1} (config)")
        }
    };
    writeln!(out, "{tau_note}")?;
    Ok(())
}

/// Execute one simulation run and write its outputs.
///
/// Writes `run_config.toml`, `trajectory.csv`, one `snapshot_t<t>.csv` per
/// satisfied snapshot request, and `summary.txt` into the output directory.
pub fn run(
    config: &RunConfig,
    out_dir_override: Option<&Path>,
    force_extended_beta: bool,
    config_dir: Option<&Path>,
) -> Result<RunSummary, CliError> {
    let built = build(config, force_extended_beta, config_dir)?;
    let out_dir = out_dir_override.unwrap_or(&config.output.dir).to_path_buf();
    fs::create_dir_all(&out_dir)?;

    let mut resolved = config.clone();
    resolved.output.dir = out_dir.clone();
    fs::write(out_dir.join("run_config.toml"), resolved.to_toml())?;

    let traj = advance(
        built.initial.clone(),
        &built.params,
        &built.grid,
        &built.solver,
    );

    let pair = built.pairs[0];
    let summary = summarize(&traj, &built, pair)?;

    // trajectory diagnostics CSV (first entropy pair)
    {
        let file = BufWriter::new(fs::File::create(out_dir.join("trajectory.csv"))?);
        diagnostics::write_trajectory_csv(file, &traj, pair, &built.params, &built.grid)?;
    }
    for snap in &traj.snapshots {
        let name = format!("snapshot_t{}.csv", snap.requested_t);
        write_snapshot_csv(
            &out_dir.join(name),
            &traj.states[snap.state_index],
            &built.grid,
            built.params.beta,
        )?;
    }
    write_summary_file(&out_dir.join("summary.txt"), &resolved, &summary, pair)?;

    match traj.status {
        RunStatus::Completed => Ok(summary),
        RunStatus::DtUnderflow { t } => Err(CliError::SolverAbort(format!(
            "time step underflow at t={t}; outputs hold the last good state"
        ))),
        RunStatus::NewtonFailed { t, dt } => Err(CliError::SolverAbort(format!(
            "Newton failed at t={t} with fixed dt={dt}; outputs hold the last good state"
        ))),
    }
}

fn summarize(
    traj: &Trajectory,
    built: &BuiltRun,
    pair: EntropyPair,
) -> Result<RunSummary, CliError> {
    let mut decay_series = Vec::with_capacity(traj.states.len());
    let mut squared = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        let (rn, rw) = relative_distance(s, &built.params, &built.grid);
        let (dn, dw) = distance_to_equilibrium(s, &built.params, &built.grid);
        decay_series.push((s.t, rn, rw));
        squared.push((s.t, dn * dn + dw * dw));
    }
    let entropy_report = entropy_inequality_report(traj, pair, &built.params, &built.grid)
        .map_err(|e| CliError::SolverAbort(e.to_string()))?;

    let accepted_steps = traj.accepted().count();
    let mut summary = RunSummary {
        status: traj.status,
        accepted_steps,
        rejected_steps: traj.records.len() - accepted_steps,
        t_final: traj.final_state().t,
        initial_min_n: traj.states[0].min_n(),
        initial_min_theta: traj.states[0].min_theta(),
        min_n_over_run: traj
            .accepted()
            .map(|r| r.min_n)
            .fold(f64::INFINITY, f64::min),
        min_theta_over_run: traj
            .accepted()
            .map(|r| r.min_theta)
            .fold(f64::INFINITY, f64::min),
        decay_series,
        squared_distance_series: squared,
        entropy_report,
        fits: RunFits {
            exp_window: (0.0, 0.0),
            alg_window: (0.0, 0.0),
            exp_rel_n: None,
            exp_rel_w: None,
            exp_combined: None,
            alg_squared: None,
            envelope: None,
            envelope_holds: false,
        },
    };
    let exp_window = (0.2 * built.solver.t_end, built.solver.t_end);
    let alg_window = (0.0, 0.1 * built.solver.t_end);
    compute_fits(exp_window, alg_window, &mut summary);
    Ok(summary)
}

/// Directory name for a per-β sweep run (`-0.25` → `beta_m0.25`).
fn beta_dir_name(beta: f64) -> String {
    if beta < 0.0 {
        format!("beta_m{}", -beta)
    } else {
        format!("beta_{beta}")
    }
}

/// Per-β status of a sweep.
pub struct SweepEntry {
    pub beta: f64,
    pub result: Result<RunSummary, CliError>,
}

/// Run the base config once per β, each into its own subdirectory, and write
/// the combined decay CSV `beta,t,rel_dist_n,rel_dist_w`.
pub fn sweep(
    betas: &[f64],
    base: &RunConfig,
    out_root: &Path,
    force_extended_beta: bool,
    config_dir: Option<&Path>,
) -> Result<Vec<SweepEntry>, CliError> {
    if betas.is_empty() {
        return Err(ConfigError::Invalid {
            field: "betas".into(),
            reason: "sweep needs at least one beta".into(),
        }
        .into());
    }
    fs::create_dir_all(out_root)?;

    // runs are independent; one worker per β, no shared mutable state
    let entries: Vec<SweepEntry> = std::thread::scope(|scope| {
        let handles: Vec<_> = betas
            .iter()
            .map(|&beta| {
                let mut config = base.clone();
                let out_dir = out_root.join(beta_dir_name(beta));
                scope.spawn(move || {
                    config.model.beta = beta;
                    config.output.entropy_pairs = vec![[beta - 0.5, 5.0]];
                    let result = run(&config, Some(&out_dir), force_extended_beta, config_dir);
                    SweepEntry { beta, result }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let mut combined = BufWriter::new(fs::File::create(out_root.join("decay_combined.csv"))?);
    combined.write_all(b"beta,t,rel_dist_n,rel_dist_w\n")?;
    for entry in &entries {
        if let Ok(summary) = &entry.result {
            for (t, rel_n, rel_w) in &summary.decay_series {
                writeln!(combined, "{},{},{},{}", entry.beta, t, rel_n, rel_w)?;
            }
        }
    }
    Ok(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

pub struct VerifyCheck {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

pub struct VerifyReport {
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }
}

/// Run a shortened trajectory and check the solver invariants on it.
pub fn verify(
    config: &RunConfig,
    force_extended_beta: bool,
    config_dir: Option<&Path>,
) -> Result<VerifyReport, CliError> {
    let mut short = config.clone();
    short.solver.t_end = short.solver.t_end.min(50.0 * short.solver.dt_max);
    let built = build(&short, force_extended_beta, config_dir)?;
    let traj = advance(
        built.initial.clone(),
        &built.params,
        &built.grid,
        &built.solver,
    );

    let mut checks = Vec::new();
    let push = |checks: &mut Vec<VerifyCheck>, name: &'static str, ok: bool, detail: String| {
        checks.push(VerifyCheck {
            name,
            status: if ok {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail,
        });
    };

    push(
        &mut checks,
        "run-completes",
        traj.status.is_completed(),
        format!(
            "status {:?}, {} accepted steps",
            traj.status,
            traj.accepted().count()
        ),
    );

    let min_n = traj
        .accepted()
        .map(|r| r.min_n)
        .fold(f64::INFINITY, f64::min);
    let min_theta = traj
        .accepted()
        .map(|r| r.min_theta)
        .fold(f64::INFINITY, f64::min);
    push(
        &mut checks,
        "positivity",
        min_n > 0.0 && min_theta > 0.0,
        format!("min n {min_n:e}, min theta {min_theta:e}"),
    );

    let worst_residual = traj
        .accepted()
        .map(|r| r.residual_norm)
        .fold(0.0f64, f64::max);
    push(
        &mut checks,
        "residual-tolerance",
        worst_residual <= built.solver.newton_tol,
        format!(
            "worst accepted residual {worst_residual:e} vs tol {:e}",
            built.solver.newton_tol
        ),
    );

    // (n,θ) ↔ (u,v) round trip on the final state
    let last = traj.final_state();
    let mut worst_rt: f64 = 0.0;
    for i in 0..last.len() {
        let theta = last.theta(i);
        if let Ok((u, v)) = model::to_uv(last.n[i], theta, built.params.beta) {
            if let Ok((n2, t2)) = model::from_uv(u, v, built.params.beta) {
                worst_rt = worst_rt.max((n2 - last.n[i]).abs() / last.n[i].abs().max(1e-300));
                worst_rt = worst_rt.max((t2 - theta).abs() / theta.abs().max(1e-300));
            }
        }
    }
    push(
        &mut checks,
        "uv-round-trip",
        worst_rt <= 1e-12,
        format!("worst relative error {worst_rt:e}"),
    );

    let pair = built.pairs[0];
    let report = entropy_inequality_report(&traj, pair, &built.params, &built.grid)
        .map_err(|e| CliError::SolverAbort(e.to_string()))?;
    if built.params.theta_d == 1.0 {
        push(
            &mut checks,
            "entropy-monotone",
            report.monotone,
            format!("worst excess {:e}", report.worst_excess),
        );
    } else {
        checks.push(VerifyCheck {
            name: "entropy-monotone",
            status: CheckStatus::Skipped,
            detail: "boundary data is not the relaxation equilibrium".into(),
        });
    }
    let dissipation_ok = report.steps.iter().all(|s| s.dissipation >= 0.0);
    push(
        &mut checks,
        "dissipation-nonnegative",
        dissipation_ok,
        format!("{} steps checked", report.steps.len()),
    );

    Ok(VerifyReport { checks })
}

/// Write a region-scan CSV to `path`.
pub fn write_region_scan(
    spec: &crate::admissible::RegionScanSpec,
    path: &Path,
) -> Result<(), CliError> {
    let scan = crate::admissible::region_scan(spec).map_err(|e| ConfigError::Invalid {
        field: "scan".into(),
        reason: e.to_string(),
    })?;
    let file = BufWriter::new(fs::File::create(path)?);
    scan.write_csv(file)?;
    Ok(())
}
