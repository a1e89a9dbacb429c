//! Entropy functionals over states and trajectories, dissipation integrals,
//! distance-to-equilibrium norms, decay-rate fitting, and the nonlinear
//! Gronwall sequence bound.
//!
//! Quadrature conventions: trapezoid for nodal integrands; midpoint with
//! one-sided cell gradients and cell-averaged coefficients for the
//! dissipation integral.

use std::io::{self, Write};

use thiserror::Error;

use crate::discretization::{Grid1D, State};
use crate::model::{self, DomainError, EntropyPair, ModelParams};
use crate::solver::Trajectory;

/// Relative slack used for the step-to-step entropy monotonicity check.
pub const ENTROPY_MONOTONE_TOL: f64 = 1e-10;

fn trapezoid(values: impl ExactSizeIterator<Item = f64>, dx: f64) -> f64 {
    let m = values.len();
    let mut sum = 0.0;
    for (i, v) in values.enumerate() {
        let weight = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
        sum += weight * v;
    }
    sum * dx
}

/// Relative entropy φ_b: trapezoid quadrature of
/// f_b(n, w) − f_b(n_D, w_D) − ∇f_b(n_D, w_D)·((n, w) − (n_D, w_D)).
///
/// For b ≤ 0 or b ≥ 2 convexity makes the integrand pointwise nonnegative.
pub fn phi_b(
    state: &State,
    b: f64,
    params: &ModelParams,
    grid: &Grid1D,
) -> Result<f64, DomainError> {
    let (n_d, w_d) = (params.n_d, params.w_d());
    let f_d = model::f_b(n_d, w_d, b)?;
    let (gn_d, gw_d) = model::f_b_grad(n_d, w_d, b)?;
    let mut integrand = Vec::with_capacity(state.len());
    for i in 0..state.len() {
        let f = model::f_b(state.n[i], state.w[i], b)?;
        integrand.push(f - f_d - gn_d * (state.n[i] - n_d) - gw_d * (state.w[i] - w_d));
    }
    Ok(trapezoid(integrand.into_iter(), grid.dx))
}

/// Entropy functional S_{b1,b2} = φ_{b1}/|b1| + φ_{b2}/|b2|.
pub fn entropy_s(
    state: &State,
    pair: EntropyPair,
    params: &ModelParams,
    grid: &Grid1D,
) -> Result<f64, DomainError> {
    Ok(phi_b(state, pair.b1, params, grid)? / pair.b1.abs()
        + phi_b(state, pair.b2, params, grid)? / pair.b2.abs())
}

/// Gradient dissipation integral
/// ∫ (θ^(b1+1/2−β) + θ^(b2+1/2−β))|∇n|² + n²(θ^(b1−3/2−β) + θ^(b2−3/2−β))|∇θ|² dx,
/// midpoint rule with one-sided gradients per cell; the inequality's
/// prefactor C1 is not included.
pub fn dissipation_integral(
    state: &State,
    pair: EntropyPair,
    beta: f64,
    grid: &Grid1D,
) -> Result<f64, DomainError> {
    let m = state.len();
    let en = |b: f64| b + 0.5 - beta;
    let et = |b: f64| b - 1.5 - beta;
    let mut coeff_n = Vec::with_capacity(m);
    let mut coeff_t = Vec::with_capacity(m);
    let mut theta = Vec::with_capacity(m);
    for i in 0..m {
        let th = state.theta(i);
        if !(th > 0.0) {
            return Err(DomainError::NonPositive {
                name: "theta",
                value: th,
            });
        }
        theta.push(th);
        coeff_n.push(model::checked_pow(th, en(pair.b1))? + model::checked_pow(th, en(pair.b2))?);
        coeff_t.push(
            state.n[i]
                * state.n[i]
                * (model::checked_pow(th, et(pair.b1))? + model::checked_pow(th, et(pair.b2))?),
        );
    }
    let mut total = 0.0;
    for i in 0..m - 1 {
        let grad_n = (state.n[i + 1] - state.n[i]) / grid.dx;
        let grad_t = (theta[i + 1] - theta[i]) / grid.dx;
        let cn = 0.5 * (coeff_n[i] + coeff_n[i + 1]);
        let ct = 0.5 * (coeff_t[i] + coeff_t[i + 1]);
        total += (cn * grad_n * grad_n + ct * grad_t * grad_t) * grid.dx;
    }
    Ok(total)
}

/// Entropy and dissipation sampled along the accepted states of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub pair: EntropyPair,
}

/// Evaluate S and D at every accepted state (index 0 is the initial state).
pub fn entropy_series(
    traj: &Trajectory,
    pair: EntropyPair,
    params: &ModelParams,
    grid: &Grid1D,
) -> Result<EntropySeries, DomainError> {
    let mut times = Vec::with_capacity(traj.states.len());
    let mut values = Vec::with_capacity(traj.states.len());
    let mut dissipation = Vec::with_capacity(traj.states.len());
    for s in &traj.states {
        times.push(s.t);
        values.push(entropy_s(s, pair, params, grid)?);
        dissipation.push(dissipation_integral(s, pair, params.beta, grid)?);
    }
    Ok(EntropySeries {
        times,
        values,
        dissipation,
        pair,
    })
}

/// Per-step entry of the entropy-inequality report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyStep {
    pub t: f64,
    pub h: f64,
    pub s_prev: f64,
    pub s_curr: f64,
    pub delta_s: f64,
    /// Dissipation evaluated at the new state.
    pub dissipation: f64,
    /// Empirical ratio −ΔS/(h·D) where the dissipation is positive.
    pub c_ratio: Option<f64>,
}

/// Step-by-step check of the discrete entropy inequality with vanishing
/// boundary constant.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyInequalityReport {
    pub steps: Vec<EntropyStep>,
    /// ΔS ≤ tol·max(1, |S_prev|) at every accepted step.
    pub monotone: bool,
    /// Largest ΔS − tol·max(1, |S_prev|) observed (≤ 0 when monotone).
    pub worst_excess: f64,
    /// Smallest empirical ratio over steps with dissipation above the floor.
    pub min_c_ratio: Option<f64>,
    /// Dissipation floor below which the ratio is not formed.
    pub dissipation_floor: f64,
}

/// Evaluate ΔS against the dissipation along every accepted step.
///
/// The strict monotone verdict is meaningful for equilibrium boundary data
/// (constant n_D, θ_D = 1), where the inequality's right-hand constant
/// vanishes; the report itself is produced for any data.
pub fn entropy_inequality_report(
    traj: &Trajectory,
    pair: EntropyPair,
    params: &ModelParams,
    grid: &Grid1D,
) -> Result<EntropyInequalityReport, DomainError> {
    let series = entropy_series(traj, pair, params, grid)?;
    let floor = 1e-14;
    let mut steps = Vec::new();
    let mut monotone = true;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut min_c: Option<f64> = None;
    let accepted: Vec<_> = traj.accepted().collect();
    for (k, rec) in accepted.iter().enumerate() {
        let s_prev = series.values[k];
        let s_curr = series.values[k + 1];
        let delta_s = s_curr - s_prev;
        let d = series.dissipation[k + 1];
        let c_ratio = if d > floor {
            Some(-delta_s / (rec.dt * d))
        } else {
            None
        };
        if let Some(c) = c_ratio {
            min_c = Some(min_c.map_or(c, |m: f64| m.min(c)));
        }
        let excess = delta_s - ENTROPY_MONOTONE_TOL * s_prev.abs().max(1.0);
        worst_excess = worst_excess.max(excess);
        if excess > 0.0 {
            monotone = false;
        }
        steps.push(EntropyStep {
            t: rec.t,
            h: rec.dt,
            s_prev,
            s_curr,
            delta_s,
            dissipation: d,
            c_ratio,
        });
    }
    if steps.is_empty() {
        worst_excess = 0.0;
    }
    Ok(EntropyInequalityReport {
        steps,
        monotone,
        worst_excess,
        min_c_ratio: min_c,
        dissipation_floor: floor,
    })
}

/// L² distances (‖n − n_D‖, ‖w − n_D·θ_D‖) by trapezoid quadrature.
pub fn distance_to_equilibrium(state: &State, params: &ModelParams, grid: &Grid1D) -> (f64, f64) {
    let n_d = params.n_d;
    let w_d = params.w_d();
    let dn = trapezoid(state.n.iter().map(|&v| (v - n_d) * (v - n_d)), grid.dx);
    let dw = trapezoid(state.w.iter().map(|&v| (v - w_d) * (v - w_d)), grid.dx);
    (dn.sqrt(), dw.sqrt())
}

/// Distances normalized by the equilibrium norms ‖n_D‖ and ‖n_D·θ_D‖ over
/// the domain.
pub fn relative_distance(state: &State, params: &ModelParams, grid: &Grid1D) -> (f64, f64) {
    let (dn, dw) = distance_to_equilibrium(state, params, grid);
    let extent = (grid.x_max - grid.x_min).sqrt();
    (dn / (params.n_d * extent), dw / (params.w_d() * extent))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("decay fit needs at least {need} samples in the window, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("nonpositive value {value} at t={t} cannot be fitted")]
    NonPositiveValue { t: f64, value: f64 },
    #[error("times and values must have equal lengths ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
}

/// Decay-rate fits over a time window.
///
/// The exponential fit regresses log v against t; the algebraic fit
/// regresses 1/v against t, which recovers v = C1/(1 + C2·t) as intercept
/// 1/C1 and slope C2/C1. Callers feed the squared distance to the algebraic
/// fit and the plain distance to the exponential one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub samples: usize,
    /// Decay rate: v ≈ A·exp(−exp_rate·t).
    pub exp_rate: f64,
    pub exp_r2: f64,
    pub alg_c1: f64,
    pub alg_c2: f64,
    pub alg_r2: f64,
}

fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / m;
    let mean_y = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let fit = intercept + slope * x;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= f64::EPSILON {
        1.0
    } else {
        0.0
    };
    (slope, intercept, r2)
}

/// Fit exponential and algebraic decay laws to a positive series inside
/// `window` (closed on both ends).
pub fn fit_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit, FitError> {
    if times.len() != values.len() {
        return Err(FitError::LengthMismatch {
            times: times.len(),
            values: values.len(),
        });
    }
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t >= window.0 && t <= window.1 {
            if !(v > 0.0) {
                return Err(FitError::NonPositiveValue { t, value: v });
            }
            ts.push(t);
            vs.push(v);
        }
    }
    if ts.len() < 10 {
        return Err(FitError::TooFewSamples {
            need: 10,
            got: ts.len(),
        });
    }
    if vs.iter().all(|&v| v == vs[0]) {
        // an exactly constant window defeats the regression's variance
        // normalization; both laws fit it perfectly with zero slope
        return Ok(DecayFit {
            window,
            samples: ts.len(),
            exp_rate: 0.0,
            exp_r2: 1.0,
            alg_c1: vs[0],
            alg_c2: 0.0,
            alg_r2: 1.0,
        });
    }
    let logs: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let (slope_log, _, exp_r2) = linear_regression(&ts, &logs);
    // constant series regress to slope 0, reported as rate 0
    let exp_rate = if slope_log == 0.0 { 0.0 } else { -slope_log };

    let inv: Vec<f64> = vs.iter().map(|v| 1.0 / v).collect();
    let (slope_inv, intercept_inv, alg_r2) = linear_regression(&ts, &inv);
    let alg_c1 = 1.0 / intercept_inv;
    let alg_c2 = slope_inv * alg_c1;

    Ok(DecayFit {
        window,
        samples: ts.len(),
        exp_rate,
        exp_r2,
        alg_c1,
        alg_c2,
        alg_r2,
    })
}

/// One-sided algebraic envelope: keep the fitted C2 and raise C1 until
/// v(t) ≤ C1/(1 + C2·t) holds at every sample.
///
/// Returns (C1, C2); feed the squared distance series. The construction
/// succeeds whenever the fitted C2 is positive.
pub fn algebraic_envelope(times: &[f64], values: &[f64], c2: f64) -> (f64, f64) {
    let c1 = times
        .iter()
        .zip(values)
        .map(|(&t, &v)| v * (1.0 + c2 * t))
        .fold(0.0f64, f64::max);
    (c1, c2)
}

/// Outcome of checking a sequence against the nonlinear Gronwall lemma
/// x_j + κ·x_j² ≤ x_{j−1}  ⇒  x_j ≤ x_0/(1 + κ·x_0·j/(1 + 2κ·x_0)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GronwallReport {
    /// First index j ≥ 1 where the recursion hypothesis fails.
    pub hypothesis_violation: Option<usize>,
    /// First index where the conclusion bound fails.
    pub conclusion_violation: Option<usize>,
}

impl GronwallReport {
    /// Both the hypothesis and the bound hold everywhere.
    pub fn pass(&self) -> bool {
        self.hypothesis_violation.is_none() && self.conclusion_violation.is_none()
    }
}

/// Check hypothesis and conclusion of the Gronwall lemma with a 1e−12
/// relative rounding slack.
pub fn gronwall_bound_check(x: &[f64], kappa_g: f64) -> GronwallReport {
    let slack = |scale: f64| 1e-12 * scale.abs().max(1.0);
    let mut hypothesis_violation = None;
    let mut conclusion_violation = None;
    if x.is_empty() {
        return GronwallReport {
            hypothesis_violation,
            conclusion_violation,
        };
    }
    let x0 = x[0];
    for j in 1..x.len() {
        if hypothesis_violation.is_none()
            && x[j] + kappa_g * x[j] * x[j] > x[j - 1] + slack(x[j - 1])
        {
            hypothesis_violation = Some(j);
        }
    }
    for (j, &xj) in x.iter().enumerate() {
        let bound = x0 / (1.0 + kappa_g * x0 * j as f64 / (1.0 + 2.0 * kappa_g * x0));
        if conclusion_violation.is_none() && xj > bound + slack(bound) {
            conclusion_violation = Some(j);
        }
    }
    GronwallReport {
        hypothesis_violation,
        conclusion_violation,
    }
}

/// Trapezoid quadrature of the logarithmic entropy density n·log(n/θ^(3/2)).
pub fn log_entropy(state: &State, grid: &Grid1D) -> Result<f64, DomainError> {
    let mut vals = Vec::with_capacity(state.len());
    for i in 0..state.len() {
        vals.push(model::log_entropy_density(state.n[i], state.theta(i))?);
    }
    Ok(trapezoid(vals.into_iter(), grid.dx))
}

/// Write the per-accepted-step diagnostics series as CSV.
///
/// Columns: `t,dt,newton_iters,S_pair,dissipation,dist_n,dist_w,rel_dist_n,
/// rel_dist_w,min_n,min_theta,log_entropy`. The first row reports the
/// initial state with dt = 0.
pub fn write_trajectory_csv<W: Write>(
    mut out: W,
    traj: &Trajectory,
    pair: EntropyPair,
    params: &ModelParams,
    grid: &Grid1D,
) -> io::Result<()> {
    out.write_all(
        b"t,dt,newton_iters,S_pair,dissipation,dist_n,dist_w,rel_dist_n,rel_dist_w,min_n,min_theta,log_entropy\n",
    )?;
    let to_io = |e: DomainError| io::Error::new(io::ErrorKind::InvalidData, e.to_string());
    let mut write_row = |state: &State, dt: f64, iters: usize| -> io::Result<()> {
        let s = entropy_s(state, pair, params, grid).map_err(to_io)?;
        let d = dissipation_integral(state, pair, params.beta, grid).map_err(to_io)?;
        let (dist_n, dist_w) = distance_to_equilibrium(state, params, grid);
        let (rel_n, rel_w) = relative_distance(state, params, grid);
        let le = log_entropy(state, grid).map_err(to_io)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            state.t,
            dt,
            iters,
            s,
            d,
            dist_n,
            dist_w,
            rel_n,
            rel_w,
            state.min_n(),
            state.min_theta(),
            le
        )
    };
    write_row(&traj.states[0], 0.0, 0)?;
    for (k, rec) in traj.accepted().enumerate() {
        write_row(&traj.states[k + 1], rec.dt, rec.newton_iters)?;
    }
    Ok(())
}
