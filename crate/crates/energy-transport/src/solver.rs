//! Newton solver with block-Thomas linear solves and the adaptive
//! time-step controller.
//!
//! The controller follows two rules: the step is multiplied by the grow
//! factor (default 1.25) when the initial Newton guess already satisfies the
//! residual tolerance, and by the shrink factor (default 0.75) when the
//! Newton update is not feasible (a nonpositive iterate) or does not
//! converge.

use thiserror::Error;

use crate::discretization::{
    assemble_jacobian, assemble_residual, Block, BlockTridiagonal, Grid1D, State,
};
use crate::model::ModelParams;

/// Solver parameters for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Newton stopping tolerance on the residual max-norm.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub dt_init: f64,
    pub dt_max: f64,
    /// Abort threshold; the run stops when shrinking can no longer help.
    pub dt_min: f64,
    pub grow_factor: f64,
    pub shrink_factor: f64,
    pub t_end: f64,
    /// Each requested time is satisfied by the first recorded state at or
    /// after it (the initial state counts for t = 0).
    pub snapshot_times: Vec<f64>,
    /// With adaptation off the step size stays at `dt_init` and any Newton
    /// failure aborts the run.
    pub adaptive: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            newton_max_iters: 25,
            dt_init: 2e-3,
            dt_max: 2e-3,
            dt_min: 1e-12,
            grow_factor: 1.25,
            shrink_factor: 0.75,
            t_end: 1.0,
            snapshot_times: Vec::new(),
            adaptive: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverConfigError {
    #[error("time step bounds must satisfy 0 < dt_min <= dt_init <= dt_max, got {dt_min}, {dt_init}, {dt_max}")]
    BadStepBounds {
        dt_min: f64,
        dt_init: f64,
        dt_max: f64,
    },
    #[error("grow factor must exceed 1, got {0}")]
    BadGrowFactor(f64),
    #[error("shrink factor must lie in (0, 1), got {0}")]
    BadShrinkFactor(f64),
    #[error("newton tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("newton iteration budget must be at least 1")]
    NoIterations,
    #[error("end time must be positive, got {0}")]
    BadEndTime(f64),
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverConfigError> {
        if !(0.0 < self.dt_min && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return Err(SolverConfigError::BadStepBounds {
                dt_min: self.dt_min,
                dt_init: self.dt_init,
                dt_max: self.dt_max,
            });
        }
        if !(self.grow_factor > 1.0) {
            return Err(SolverConfigError::BadGrowFactor(self.grow_factor));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(SolverConfigError::BadShrinkFactor(self.shrink_factor));
        }
        if !(self.newton_tol > 0.0) {
            return Err(SolverConfigError::BadTolerance(self.newton_tol));
        }
        if self.newton_max_iters == 0 {
            return Err(SolverConfigError::NoIterations);
        }
        if !(self.t_end > 0.0) {
            return Err(SolverConfigError::BadEndTime(self.t_end));
        }
        Ok(())
    }
}

/// Singular pivot during the block elimination sweep.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("singular pivot block at block row {row}")]
pub struct LinearBreakdown {
    pub row: usize,
}

fn invert_block(b: &Block, row: usize) -> Result<Block, LinearBreakdown> {
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    if !det.is_finite() || det == 0.0 {
        return Err(LinearBreakdown { row });
    }
    let inv = 1.0 / det;
    Ok([
        [b[1][1] * inv, -b[0][1] * inv],
        [-b[1][0] * inv, b[0][0] * inv],
    ])
}

fn mat_mul(a: &Block, b: &Block) -> Block {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat_vec(a: &Block, v: &[f64; 2]) -> [f64; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

/// Solve J·x = rhs by block LU (forward elimination, back substitution).
pub fn block_thomas_solve(
    jac: &BlockTridiagonal,
    rhs: &[[f64; 2]],
) -> Result<Vec<[f64; 2]>, LinearBreakdown> {
    let m = jac.num_block_rows();
    assert_eq!(rhs.len(), m, "rhs length must match block rows");
    assert!(m >= 1);

    // c[i] = pivot⁻¹·upper[i], y[i] = pivot⁻¹·(rhs[i] − lower·y[i−1])
    let mut c = vec![[[0.0; 2]; 2]; m.saturating_sub(1)];
    let mut y = vec![[0.0; 2]; m];

    let mut pivot_inv = invert_block(&jac.diag[0], 0)?;
    if m > 1 {
        c[0] = mat_mul(&pivot_inv, &jac.upper[0]);
    }
    y[0] = mat_vec(&pivot_inv, &rhs[0]);

    for i in 1..m {
        let l = &jac.lower[i - 1];
        let lc = mat_mul(l, &c[i - 1]);
        let pivot = [
            [jac.diag[i][0][0] - lc[0][0], jac.diag[i][0][1] - lc[0][1]],
            [jac.diag[i][1][0] - lc[1][0], jac.diag[i][1][1] - lc[1][1]],
        ];
        pivot_inv = invert_block(&pivot, i)?;
        if i + 1 < m {
            c[i] = mat_mul(&pivot_inv, &jac.upper[i]);
        }
        let ly = mat_vec(l, &y[i - 1]);
        y[i] = mat_vec(&pivot_inv, &[rhs[i][0] - ly[0], rhs[i][1] - ly[1]]);
    }

    let mut x = y;
    for i in (0..m - 1).rev() {
        let cx = mat_vec(&c[i], &x[i + 1]);
        x[i][0] -= cx[0];
        x[i][1] -= cx[1];
    }
    Ok(x)
}

fn norm_inf(v: &[[f64; 2]]) -> f64 {
    v.iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Why a Newton attempt was declared infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleCause {
    /// An iterate left the positive cone (n or w nonpositive).
    NonpositiveIterate,
    /// The linear solve broke down; treated the same way by the controller.
    LinearBreakdown,
}

/// Outcome of one Newton solve attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum NewtonOutcome {
    Converged {
        state: State,
        iters: usize,
        residual_history: Vec<f64>,
    },
    Infeasible {
        cause: InfeasibleCause,
        iters: usize,
        residual_history: Vec<f64>,
    },
    NoConvergence {
        iters: usize,
        residual_history: Vec<f64>,
    },
}

/// One implicit Euler step by undamped Newton iteration starting from
/// `state_old`.
///
/// Success requires the residual max-norm to drop below the tolerance while
/// every iterate stays strictly positive; 0 iterations means the initial
/// guess already satisfied the tolerance.
pub fn newton_solve(
    state_old: &State,
    h: f64,
    params: &ModelParams,
    grid: &Grid1D,
    config: &SolverConfig,
) -> NewtonOutcome {
    let mut x = state_old.clone();
    x.t = state_old.t + h;
    let mut history = Vec::new();

    for iter in 0..=config.newton_max_iters {
        let res = match assemble_residual(&x, state_old, h, params, grid) {
            Ok(r) => r,
            // positivity is checked before each evaluation, so a domain error
            // here means the state left the representable region anyway
            Err(_) => {
                return NewtonOutcome::Infeasible {
                    cause: InfeasibleCause::NonpositiveIterate,
                    iters: iter,
                    residual_history: history,
                }
            }
        };
        let rnorm = norm_inf(&res);
        history.push(rnorm);
        if rnorm.is_finite() && rnorm <= config.newton_tol {
            return NewtonOutcome::Converged {
                state: x,
                iters: iter,
                residual_history: history,
            };
        }
        if iter == config.newton_max_iters || !rnorm.is_finite() {
            return NewtonOutcome::NoConvergence {
                iters: iter,
                residual_history: history,
            };
        }

        let jac = match assemble_jacobian(&x, h, params, grid) {
            Ok(j) => j,
            Err(_) => {
                return NewtonOutcome::Infeasible {
                    cause: InfeasibleCause::NonpositiveIterate,
                    iters: iter,
                    residual_history: history,
                }
            }
        };
        let delta = match block_thomas_solve(&jac, &res) {
            Ok(d) => d,
            Err(_) => {
                return NewtonOutcome::Infeasible {
                    cause: InfeasibleCause::LinearBreakdown,
                    iters: iter,
                    residual_history: history,
                }
            }
        };
        for (i, d) in delta.iter().enumerate() {
            x.n[i] -= d[0];
            x.w[i] -= d[1];
        }
        if !x.all_positive() {
            return NewtonOutcome::Infeasible {
                cause: InfeasibleCause::NonpositiveIterate,
                iters: iter + 1,
                residual_history: history,
            };
        }
    }
    unreachable!("loop returns on the final iteration");
}

/// Per-attempt log entry; `accepted` distinguishes accepted steps from
/// rejected attempts that only steered the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Time after the step for accepted entries, the attempt's base time for
    /// rejected ones.
    pub t: f64,
    pub dt: f64,
    pub newton_iters: usize,
    pub accepted: bool,
    pub min_n: f64,
    pub min_theta: f64,
    pub residual_norm: f64,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    /// The controller shrank the step to `dt_min` and the attempt still
    /// failed.
    DtUnderflow {
        t: f64,
    },
    /// A Newton failure with adaptation disabled.
    NewtonFailed {
        t: f64,
        dt: f64,
    },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// Snapshot request satisfied by an accepted state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub requested_t: f64,
    /// Index into [`Trajectory::states`].
    pub state_index: usize,
}

/// Full record of one run: every accepted state (index 0 is the initial
/// state), per-attempt records, and satisfied snapshot requests.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub states: Vec<State>,
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }

    /// Accepted records only, in time order.
    pub fn accepted(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter(|r| r.accepted)
    }
}

/// Integrate from `initial` until `t_end` with the adaptive controller.
pub fn advance(
    initial: State,
    params: &ModelParams,
    grid: &Grid1D,
    config: &SolverConfig,
) -> Trajectory {
    let mut snapshot_times: Vec<f64> = config.snapshot_times.clone();
    snapshot_times.sort_by(|a, b| a.partial_cmp(b).expect("snapshot times must be orderable"));

    let mut records = Vec::new();
    let mut states = vec![initial];
    let mut snapshots = Vec::new();
    let mut next_snapshot = 0;
    let mut dt = config.dt_init;
    let mut t = states[0].t;

    // the initial state serves every snapshot request at or before its time
    while next_snapshot < snapshot_times.len() && t >= snapshot_times[next_snapshot] {
        snapshots.push(Snapshot {
            requested_t: snapshot_times[next_snapshot],
            state_index: 0,
        });
        next_snapshot += 1;
    }

    let status = loop {
        if t >= config.t_end {
            break RunStatus::Completed;
        }
        let outcome = newton_solve(states.last().unwrap(), dt, params, grid, config);
        match outcome {
            NewtonOutcome::Converged {
                state,
                iters,
                residual_history,
            } => {
                t = state.t;
                let record = StepRecord {
                    t,
                    dt,
                    newton_iters: iters,
                    accepted: true,
                    min_n: state.min_n(),
                    min_theta: state.min_theta(),
                    residual_norm: *residual_history.last().unwrap(),
                };
                states.push(state);
                records.push(record);
                while next_snapshot < snapshot_times.len() && t >= snapshot_times[next_snapshot] {
                    snapshots.push(Snapshot {
                        requested_t: snapshot_times[next_snapshot],
                        state_index: states.len() - 1,
                    });
                    next_snapshot += 1;
                }
                // grow only when the initial guess already met the tolerance
                if config.adaptive && iters == 0 {
                    dt = (dt * config.grow_factor).min(config.dt_max);
                }
            }
            NewtonOutcome::Infeasible {
                iters,
                residual_history,
                ..
            }
            | NewtonOutcome::NoConvergence {
                iters,
                residual_history,
            } => {
                let last_state = states.last().unwrap();
                records.push(StepRecord {
                    t,
                    dt,
                    newton_iters: iters,
                    accepted: false,
                    min_n: last_state.min_n(),
                    min_theta: last_state.min_theta(),
                    residual_norm: residual_history.last().copied().unwrap_or(f64::NAN),
                });
                if !config.adaptive {
                    break RunStatus::NewtonFailed { t, dt };
                }
                if dt <= config.dt_min {
                    break RunStatus::DtUnderflow { t };
                }
                dt = (dt * config.shrink_factor).max(config.dt_min);
            }
        }
    };

    Trajectory {
        records,
        states,
        snapshots,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::BoundaryKind;
    use crate::model::Relaxation;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dirichlet_grid(num_points: usize) -> Grid1D {
        Grid1D::new(
            0.0,
            1.0,
            num_points,
            BoundaryKind::Dirichlet { n: 1.0, theta: 1.0 },
            BoundaryKind::Dirichlet { n: 1.0, theta: 1.0 },
        )
        .unwrap()
    }

    fn params(beta: f64) -> ModelParams {
        ModelParams::new(beta, Relaxation::Constant { tau: 1.0 }, 1.0, 1.0).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            dt_init: 1.0,
            dt_max: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            grow_factor: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            shrink_factor: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            newton_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            newton_max_iters: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn thomas_identity_blocks() {
        let m = 6;
        let mut jac = BlockTridiagonal::zeros(m);
        for d in jac.diag.iter_mut() {
            *d = [[1.0, 0.0], [0.0, 1.0]];
        }
        let rhs: Vec<[f64; 2]> = (0..m).map(|i| [i as f64, -(i as f64)]).collect();
        let x = block_thomas_solve(&jac, &rhs).unwrap();
        assert_eq!(x, rhs);
    }

    /// Dense partial-pivot Gaussian elimination; the independent oracle.
    fn dense_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let factor = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let mut s = b[row];
            for k in row + 1..n {
                s -= a[row][k] * x[k];
            }
            x[row] = s / a[row][row];
        }
        x
    }

    fn random_block(rng: &mut impl Rng) -> Block {
        [
            [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        ]
    }

    #[test]
    fn thomas_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = 50;
        let mut jac = BlockTridiagonal::zeros(m);
        for i in 0..m {
            let mut d = random_block(&mut rng);
            d[0][0] += 8.0;
            d[1][1] += 8.0;
            jac.diag[i] = d;
            if i + 1 < m {
                jac.upper[i] = random_block(&mut rng);
                jac.lower[i] = random_block(&mut rng);
            }
        }
        let rhs: Vec<[f64; 2]> = (0..m)
            .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();

        let x = block_thomas_solve(&jac, &rhs).unwrap();

        // assemble the dense 2m×2m system
        let dim = 2 * m;
        let mut dense = vec![vec![0.0; dim]; dim];
        for i in 0..m {
            for r in 0..2 {
                for c in 0..2 {
                    dense[2 * i + r][2 * i + c] = jac.diag[i][r][c];
                    if i + 1 < m {
                        dense[2 * i + r][2 * (i + 1) + c] = jac.upper[i][r][c];
                        dense[2 * (i + 1) + r][2 * i + c] = jac.lower[i][r][c];
                    }
                }
            }
        }
        let mut flat_rhs: Vec<f64> = rhs.iter().flat_map(|p| p.to_vec()).collect();
        let reference = dense_solve(&mut dense, &mut flat_rhs);
        for i in 0..m {
            for c in 0..2 {
                assert_relative_eq!(x[i][c], reference[2 * i + c], max_relative = 1e-10);
            }
        }

        // solution residual is small relative to the problem scale
        let jx = jac.apply(&x);
        let mut resid: f64 = 0.0;
        for i in 0..m {
            for c in 0..2 {
                resid = resid.max((jx[i][c] - rhs[i][c]).abs());
            }
        }
        let scale = jac.norm_inf() * norm_inf(&x) + norm_inf(&rhs);
        assert!(resid <= 1e-10 * scale);
    }

    #[test]
    fn thomas_matches_scalar_thomas_on_decoupled_blocks() {
        // scalar tridiagonal system embedded in the (0,0) entries
        let m = 20;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..m).map(|_| rng.gen_range(3.0..4.0)).collect();
        let lo: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let up: Vec<f64> = (0..m - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rhs_scalar: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut jac = BlockTridiagonal::zeros(m);
        for i in 0..m {
            jac.diag[i] = [[a[i], 0.0], [0.0, 1.0]];
            if i + 1 < m {
                jac.upper[i] = [[up[i], 0.0], [0.0, 0.0]];
                jac.lower[i] = [[lo[i], 0.0], [0.0, 0.0]];
            }
        }
        let rhs: Vec<[f64; 2]> = rhs_scalar.iter().map(|&v| [v, 0.0]).collect();
        let x = block_thomas_solve(&jac, &rhs).unwrap();

        // scalar Thomas sweep
        let mut c = vec![0.0; m - 1];
        let mut y = vec![0.0; m];
        c[0] = up[0] / a[0];
        y[0] = rhs_scalar[0] / a[0];
        for i in 1..m {
            let denom = a[i] - lo[i - 1] * c[i - 1];
            if i + 1 < m {
                c[i] = up[i] / denom;
            }
            y[i] = (rhs_scalar[i] - lo[i - 1] * y[i - 1]) / denom;
        }
        let mut xs = y;
        for i in (0..m - 1).rev() {
            xs[i] -= c[i] * xs[i + 1];
        }
        for i in 0..m {
            assert_relative_eq!(x[i][0], xs[i], max_relative = 1e-12);
            assert_eq!(x[i][1], 0.0);
        }
    }

    #[test]
    fn thomas_breakdown_on_singular_pivot() {
        let mut jac = BlockTridiagonal::zeros(3);
        jac.diag[0] = [[1.0, 0.0], [0.0, 1.0]];
        jac.diag[1] = [[0.0, 0.0], [0.0, 0.0]];
        jac.diag[2] = [[1.0, 0.0], [0.0, 1.0]];
        let rhs = vec![[1.0, 1.0]; 3];
        assert_eq!(
            block_thomas_solve(&jac, &rhs),
            Err(LinearBreakdown { row: 1 })
        );
    }

    #[test]
    fn newton_zero_iterations_at_steady_state() {
        let grid = dirichlet_grid(21);
        let p = params(0.25);
        let steady = State::constant(&grid, 1.0, 1.0);
        match newton_solve(&steady, 1e-3, &p, &grid, &SolverConfig::default()) {
            NewtonOutcome::Converged {
                state,
                iters,
                residual_history,
            } => {
                assert_eq!(iters, 0);
                assert_eq!(residual_history, vec![0.0]);
                assert_eq!(state.n, steady.n);
                assert_eq!(state.w, steady.w);
            }
            other => panic!("expected convergence, got {other:?}"),
        }
    }

    #[test]
    fn newton_contracts_quadratically_near_steady_state() {
        let grid = dirichlet_grid(101);
        let p = params(0.25);
        let mut state = State::constant(&grid, 1.0, 1.0);
        let pi = std::f64::consts::PI;
        for i in 0..grid.num_points {
            let bump = 0.4 * (pi * grid.x(i)).sin();
            state.n[i] += bump;
            state.w[i] += 0.5 * bump;
        }
        let config = SolverConfig {
            newton_tol: 1e-12,
            ..Default::default()
        };
        match newton_solve(&state, 1e-2, &p, &grid, &config) {
            NewtonOutcome::Converged {
                iters,
                residual_history,
                ..
            } => {
                assert!(
                    iters >= 2,
                    "want a visible convergence history, got {iters}"
                );
                let mut quadratic_seen = false;
                for k in 0..residual_history.len() - 1 {
                    let (r0, r1) = (residual_history[k], residual_history[k + 1]);
                    if r0 <= 1e-2 && r1 > 0.0 {
                        assert!(r1 < r0, "residuals must decrease: {residual_history:?}");
                        if r1 <= r0 * r0 {
                            quadratic_seen = true;
                        }
                    }
                }
                assert!(
                    quadratic_seen,
                    "no quadratic contraction in {residual_history:?}"
                );
            }
            other => panic!("expected convergence, got {other:?}"),
        }
    }

    #[test]
    fn newton_fails_cleanly_on_absurd_step() {
        // rough two-well data with h = 10 cannot produce a feasible update;
        // the controller relies on getting a clean failure signal here
        let grid = dirichlet_grid(101);
        let p = params(0.25);
        let mut state = State::constant(&grid, 1.0, 1.0);
        for i in 0..grid.num_points {
            let x = grid.x(i);
            let v = if x <= 0.5 {
                (-48.0 * x * x).exp()
            } else {
                (-48.0 * (x - 1.0) * (x - 1.0)).exp()
            };
            state.n[i] = v;
            state.w[i] = v * v;
        }
        match newton_solve(&state, 10.0, &p, &grid, &SolverConfig::default()) {
            NewtonOutcome::Infeasible { .. } | NewtonOutcome::NoConvergence { .. } => {}
            NewtonOutcome::Converged { iters, .. } => {
                panic!("absurdly large step converged in {iters} iterations")
            }
        }
    }

    #[test]
    fn advance_steady_state_grows_dt_to_max() {
        let grid = dirichlet_grid(31);
        let p = params(0.0);
        let config = SolverConfig {
            dt_init: 1e-4,
            dt_max: 2e-3,
            t_end: 0.5,
            ..Default::default()
        };
        let traj = advance(State::constant(&grid, 1.0, 1.0), &p, &grid, &config);
        assert!(traj.status.is_completed());
        assert!(traj
            .records
            .iter()
            .all(|r| r.accepted && r.newton_iters == 0));
        let last = traj.records.last().unwrap();
        assert_relative_eq!(last.dt, 2e-3, max_relative = 1e-12);
        // the state never moved
        assert!(traj.final_state().n.iter().all(|&v| v == 1.0));
        assert!(traj.final_state().w.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn advance_dt_underflow_on_impossible_tolerance() {
        let grid = dirichlet_grid(11);
        let p = params(0.25);
        let mut state = State::constant(&grid, 1.0, 1.0);
        state.n[5] = 1.5; // keep the residual nonzero
        state.w[5] = 1.4;
        let config = SolverConfig {
            newton_tol: 5e-324, // unattainable
            newton_max_iters: 3,
            dt_init: 1e-3,
            dt_min: 1e-5,
            t_end: 1.0,
            ..Default::default()
        };
        let traj = advance(state, &p, &grid, &config);
        match traj.status {
            RunStatus::DtUnderflow { t } => assert_eq!(t, 0.0),
            other => panic!("expected underflow, got {other:?}"),
        }
        // dt shrank geometrically by the shrink factor down to dt_min
        let dts: Vec<f64> = traj.records.iter().map(|r| r.dt).collect();
        assert!(dts.windows(2).all(|w| w[1] <= w[0]));
        assert!(traj.records.iter().all(|r| !r.accepted));
        assert_relative_eq!(*dts.last().unwrap(), 1e-5, max_relative = 1e-9);
        for w in dts.windows(2) {
            if w[1] > config.dt_min {
                assert_relative_eq!(w[1], w[0] * 0.75, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn advance_snapshots_at_first_state_past_request() {
        let grid = dirichlet_grid(11);
        let p = params(0.0);
        let config = SolverConfig {
            dt_init: 1e-3,
            dt_max: 1e-3,
            t_end: 0.01,
            snapshot_times: vec![0.0, 2.5e-3, 1.0e-2],
            ..Default::default()
        };
        let traj = advance(State::constant(&grid, 1.0, 1.0), &p, &grid, &config);
        assert!(traj.status.is_completed());
        assert_eq!(traj.snapshots.len(), 3);
        assert_eq!(traj.snapshots[0].state_index, 0);
        let s1 = &traj.snapshots[1];
        assert!(traj.states[s1.state_index].t >= 2.5e-3);
        assert!(traj.states[s1.state_index - 1].t < 2.5e-3);
        let s2 = &traj.snapshots[2];
        assert!(traj.states[s2.state_index].t >= 1.0e-2);
    }

    #[test]
    fn advance_fixed_point_invariance() {
        // equilibrium is invariant to well below 1e-12 per unit time
        let grid = dirichlet_grid(51);
        let p = params(-0.25);
        let config = SolverConfig {
            t_end: 1.0,
            ..Default::default()
        };
        let traj = advance(State::constant(&grid, 1.0, 1.0), &p, &grid, &config);
        assert!(traj.status.is_completed());
        let fs = traj.final_state();
        for i in 0..grid.num_points {
            assert!((fs.n[i] - 1.0).abs() <= 1e-12);
            assert!((fs.w[i] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn advance_mass_balance_through_boundary_fluxes() {
        use crate::model::flux_pair;
        let grid = dirichlet_grid(41);
        let p = params(0.25);
        let mut init = State::constant(&grid, 1.0, 1.0);
        let pi = std::f64::consts::PI;
        for i in 0..grid.num_points {
            init.n[i] = 1.0 + 0.5 * (pi * grid.x(i)).sin();
            init.w[i] = init.n[i];
        }
        let config = SolverConfig {
            dt_init: 1e-3,
            dt_max: 1e-3,
            t_end: 5e-3,
            ..Default::default()
        };
        let traj = advance(init, &p, &grid, &config);
        assert!(traj.status.is_completed());
        let m = grid.num_points;
        for (k, rec) in traj.accepted().enumerate() {
            let prev = &traj.states[k];
            let next = &traj.states[k + 1];
            let mass = |s: &State| s.n.iter().sum::<f64>() * grid.dx;
            let g1: Vec<f64> = (0..m)
                .map(|i| flux_pair(next.n[i], next.w[i], p.beta).unwrap().0)
                .collect();
            let boundary = rec.dt / grid.dx * (g1[0] - g1[1] + g1[m - 1] - g1[m - 2]);
            // interior rows satisfy the residual to newton_tol; boundary rows
            // are exact, so the telescoped identity holds to tol·(m·dx)
            assert!(
                (mass(next) - mass(prev) - boundary).abs() <= 1e-10 * (m as f64) * grid.dx + 1e-14,
            );
        }
    }
}
