//! Acceptance suite: one test per criterion, each printing its measured
//! values. The two Gaussian-wells production runs are shared across
//! criteria through a lazily-initialized fixture.

#![allow(clippy::needless_range_loop)]

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use energy_transport::admissible::{
    nbeta_membership, positive_definite_equiv_check, region_scan, RegionScanSpec,
};
use energy_transport::cli::{build, gaussian_wells_preset};
use energy_transport::diagnostics::{
    algebraic_envelope, distance_to_equilibrium, entropy_inequality_report, fit_decay,
    relative_distance,
};
use energy_transport::discretization::{BlockTridiagonal, BoundaryKind, Grid1D, State};
use energy_transport::model::{self, EntropyPair, ModelParams, Relaxation};
use energy_transport::solver::{
    advance, block_thomas_solve, newton_solve, NewtonOutcome, SolverConfig,
};

struct WellsRun {
    beta: f64,
    params: ModelParams,
    grid: Grid1D,
    traj: energy_transport::Trajectory,
    elapsed: Duration,
}

fn wells_run(beta: f64) -> WellsRun {
    let config = gaussian_wells_preset(beta);
    let built = build(&config, false, None).unwrap();
    let start = Instant::now();
    let traj = advance(built.initial, &built.params, &built.grid, &built.solver);
    let elapsed = start.elapsed();
    assert!(
        traj.status.is_completed(),
        "run for beta={beta} did not complete: {:?}",
        traj.status
    );
    WellsRun {
        beta,
        params: built.params,
        grid: built.grid,
        traj,
        elapsed,
    }
}

fn wells_fixture() -> &'static [WellsRun; 2] {
    static RUNS: OnceLock<[WellsRun; 2]> = OnceLock::new();
    RUNS.get_or_init(|| [wells_run(-0.25), wells_run(0.25)])
}

fn preset_grid() -> Grid1D {
    let dirichlet = BoundaryKind::Dirichlet { n: 1.0, theta: 1.0 };
    Grid1D::new(0.0, 1.0, 501, dirichlet, dirichlet).unwrap()
}

fn preset_params(beta: f64) -> ModelParams {
    ModelParams::new(beta, Relaxation::Constant { tau: 1.0 }, 1.0, 1.0).unwrap()
}

#[test]
fn criterion_1_equilibrium_fixed_point() {
    let grid = preset_grid();
    let params = preset_params(0.25);
    let config = SolverConfig {
        t_end: 1.0,
        ..Default::default()
    };
    let start = Instant::now();
    let traj = advance(State::constant(&grid, 1.0, 1.0), &params, &grid, &config);
    let elapsed = start.elapsed();

    assert!(traj.status.is_completed());
    let mut worst: f64 = 0.0;
    for state in &traj.states {
        for i in 0..state.len() {
            worst = worst.max((state.n[i] - 1.0).abs());
            worst = worst.max((state.w[i] - 1.0).abs());
        }
    }
    println!(
        "criterion 1: max deviation {worst:e} over {} states, wall {elapsed:?}",
        traj.states.len()
    );
    assert!(worst <= 1e-12, "equilibrium drifted by {worst:e}");
    assert!(
        elapsed < Duration::from_secs(5),
        "took {elapsed:?}, budget 5 s"
    );
}

#[test]
fn criterion_2_gaussian_wells_reproduction() {
    for run in wells_fixture() {
        // initial minimum matches exp(-12) ≈ 6.1e-6 to two significant figures
        let initial_min_theta = run.traj.states[0].min_theta();
        assert!(
            (initial_min_theta - 6.1e-6).abs() <= 0.05e-6,
            "initial min theta {initial_min_theta:e}"
        );

        // strict positivity at every accepted step
        for rec in run.traj.accepted() {
            assert!(
                rec.min_n > 0.0 && rec.min_theta > 0.0,
                "nonpositive state at t={}",
                rec.t
            );
        }

        // relative distances nonincreasing after t = 0.02, per field
        let series: Vec<(f64, f64, f64)> = run
            .traj
            .states
            .iter()
            .map(|s| {
                let (rn, rw) = relative_distance(s, &run.params, &run.grid);
                (s.t, rn, rw)
            })
            .collect();
        let mut checked = 0;
        for pair in series.windows(2) {
            let (t0, rn0, rw0) = pair[0];
            let (t1, rn1, rw1) = pair[1];
            if t0 >= 0.02 && t1 >= 0.02 {
                assert!(
                    rn1 <= rn0 * (1.0 + 1e-12),
                    "rel_dist_n rose at t={t1}: {rn0} -> {rn1}"
                );
                assert!(
                    rw1 <= rw0 * (1.0 + 1e-12),
                    "rel_dist_w rose at t={t1}: {rw0} -> {rw1}"
                );
                checked += 1;
            }
        }
        assert!(checked > 100, "too few samples after t=0.02");

        // late-window exponential fit
        let times: Vec<f64> = series.iter().map(|r| r.0).collect();
        let rel_n: Vec<f64> = series.iter().map(|r| r.1).collect();
        let rel_w: Vec<f64> = series.iter().map(|r| r.2).collect();
        let combined: Vec<f64> = rel_n
            .iter()
            .zip(&rel_w)
            .map(|(&a, &b)| ((a * a + b * b) / 2.0).sqrt())
            .collect();
        let fit_n = fit_decay(&times, &rel_n, (0.2, 1.0)).unwrap();
        let fit_w = fit_decay(&times, &rel_w, (0.2, 1.0)).unwrap();
        let fit_c = fit_decay(&times, &combined, (0.2, 1.0)).unwrap();
        println!(
            "criterion 2 (beta={}): init min theta {initial_min_theta:.4e}, exp fits r2 = {:.6}/{:.6}/{:.6}, rates = {:.3}/{:.3}/{:.3}, wall {:?}",
            run.beta, fit_n.exp_r2, fit_w.exp_r2, fit_c.exp_r2, fit_n.exp_rate, fit_w.exp_rate, fit_c.exp_rate, run.elapsed
        );
        for (name, fit) in [("n", &fit_n), ("w", &fit_w), ("combined", &fit_c)] {
            assert!(
                fit.exp_r2 >= 0.99,
                "beta={}: {name} fit r2 = {}",
                run.beta,
                fit.exp_r2
            );
            assert!(
                fit.exp_rate > 0.0,
                "beta={}: {name} fit rate nonpositive",
                run.beta
            );
        }
        assert!(
            run.elapsed < Duration::from_secs(120),
            "run for beta={} took {:?}, budget 2 min",
            run.beta,
            run.elapsed
        );
    }
}

#[test]
fn criterion_3_entropy_monotonicity() {
    for run in wells_fixture() {
        let pair = EntropyPair::new(run.beta - 0.5, 5.0).unwrap();
        let report = entropy_inequality_report(&run.traj, pair, &run.params, &run.grid).unwrap();
        println!(
            "criterion 3 (beta={}): worst excess {:e}, min c_ratio {:?}, {} steps",
            run.beta,
            report.worst_excess,
            report.min_c_ratio,
            report.steps.len()
        );
        assert!(
            report.monotone,
            "beta={}: entropy increased beyond tolerance (worst excess {:e})",
            run.beta, report.worst_excess
        );
        let mut ratios = 0;
        for step in &report.steps {
            if step.dissipation > report.dissipation_floor {
                let c = step.c_ratio.unwrap();
                assert!(c > 0.0, "beta={}: c_ratio {c} at t={}", run.beta, step.t);
                ratios += 1;
            }
        }
        assert!(ratios > 0, "no steps with dissipation above the floor");
    }
}

#[test]
fn criterion_4_algebraic_envelope() {
    for run in wells_fixture() {
        let series: Vec<(f64, f64)> = run
            .traj
            .states
            .iter()
            .map(|s| {
                let (dn, dw) = distance_to_equilibrium(s, &run.params, &run.grid);
                (s.t, dn * dn + dw * dw)
            })
            .collect();
        let times: Vec<f64> = series.iter().map(|r| r.0).collect();
        let values: Vec<f64> = series.iter().map(|r| r.1).collect();
        // the algebraic law describes the transient regime; fit it there and
        // let the one-sided C1 adjustment extend the bound to the whole run
        let fit = fit_decay(&times, &values, (0.0, 0.1)).unwrap();
        assert!(
            fit.alg_c2 > 0.0,
            "beta={}: fitted C2 = {}",
            run.beta,
            fit.alg_c2
        );
        let (c1, c2) = algebraic_envelope(&times, &values, fit.alg_c2);
        println!(
            "criterion 4 (beta={}): envelope C1 = {c1:.4}, C2 = {c2:.4}",
            run.beta
        );
        assert!(c1 > 0.0 && c2 > 0.0);
        for (&t, &v) in times.iter().zip(&values) {
            if t <= 1.0 {
                assert!(
                    v <= c1 / (1.0 + c2 * t) * (1.0 + 1e-12),
                    "beta={}: envelope violated at t={t}: {v} > {}",
                    run.beta,
                    c1 / (1.0 + c2 * t)
                );
            }
        }
    }
}

#[test]
fn criterion_5_admissible_set_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20240817);
    let mut boundary = 0usize;
    for _ in 0..10_000 {
        let beta = rng.gen_range(-0.5..0.5);
        let b = rng.gen_range(-10.0..10.0);
        let check = positive_definite_equiv_check(beta, b);
        if check.boundary {
            boundary += 1;
            continue;
        }
        assert!(
            check.agree(),
            "disagreement at beta={beta}, b={b}: {check:?}"
        );
    }

    for k in 0..=4 {
        let beta = 0.1 * k as f64;
        assert!(
            nbeta_membership(beta, beta - 0.5, 5.0),
            "(beta-1/2, 5) failed at beta={beta}"
        );
        assert!(
            nbeta_membership(beta, beta - 0.5, 2.5 - beta),
            "(beta-1/2, 5/2-beta) failed at beta={beta}"
        );
        assert!(
            nbeta_membership(beta, -3.0, 5.0),
            "(-3, 5) failed at beta={beta}"
        );
    }
    let elapsed = start.elapsed();
    println!("criterion 5: 10000 samples, {boundary} boundary-band points, wall {elapsed:?}");
    assert!(
        elapsed < Duration::from_secs(1),
        "took {elapsed:?}, budget 1 s"
    );
}

#[test]
fn criterion_6_region_scan() {
    let scan = region_scan(&RegionScanSpec::default()).unwrap();
    assert!(
        scan.members_avoid_unit_gap(),
        "a member cell lies strictly inside (0, 2)"
    );

    let cell = |beta: f64, b: f64| {
        scan.rows
            .iter()
            .find(|r| (r.beta - beta).abs() < 1e-12 && (r.b - b).abs() < 1e-9)
            .unwrap_or_else(|| panic!("cell ({beta}, {b}) missing"))
    };
    assert!(cell(0.0, 5.0).member);
    assert!(!cell(0.0, 1.0).member);
    assert!(cell(0.0, -0.5).member);
    println!(
        "criterion 6: {} cells, members avoid (0,2); sample margins at (0,5): ({}, {})",
        scan.rows.len(),
        cell(0.0, 5.0).margin_linear,
        cell(0.0, 5.0).margin_cubic
    );
}

/// Dense partial-pivot solve, the independent linear-algebra oracle.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
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

#[test]
fn criterion_7_oracle_suites() {
    // finite-difference oracle for flux Jacobian and entropy derivatives
    let fd = |f: &dyn Fn(f64) -> f64, x: f64| {
        let h = 1e-6 * x.abs().max(1.0);
        (f(x + h) - f(x - h)) / (2.0 * h)
    };
    let mut worst_grad: f64 = 0.0;
    for beta in [-0.4, 0.0, 0.25, 0.45] {
        for &(n, w) in &[(0.5, 0.8), (1.7, 2.3), (2.0, 0.6)] {
            let jac = model::flux_pair_jacobian(n, w, beta).unwrap();
            let fd_jac = [
                [
                    fd(&|x| model::flux_pair(x, w, beta).unwrap().0, n),
                    fd(&|x| model::flux_pair(n, x, beta).unwrap().0, w),
                ],
                [
                    fd(&|x| model::flux_pair(x, w, beta).unwrap().1, n),
                    fd(&|x| model::flux_pair(n, x, beta).unwrap().1, w),
                ],
            ];
            for r in 0..2 {
                for c in 0..2 {
                    let rel = (jac[r][c] - fd_jac[r][c]).abs() / fd_jac[r][c].abs().max(1e-9);
                    worst_grad = worst_grad.max(rel);
                }
            }
        }
    }
    for b in [-3.0, -0.25, 2.5, 5.0] {
        let (n, w) = (1.3, 0.7);
        let (gn, gw) = model::f_b_grad(n, w, b).unwrap();
        let rel_n = (gn - fd(&|x| model::f_b(x, w, b).unwrap(), n)).abs() / gn.abs().max(1e-9);
        let rel_w = (gw - fd(&|x| model::f_b(n, x, b).unwrap(), w)).abs() / gw.abs().max(1e-9);
        worst_grad = worst_grad.max(rel_n).max(rel_w);

        // Hessian invariants against a second-order finite-difference Hessian
        let h = 1e-4;
        let f = |n: f64, w: f64| model::f_b(n, w, b).unwrap();
        let f_nn = (f(n + h, w) - 2.0 * f(n, w) + f(n - h, w)) / (h * h);
        let f_ww = (f(n, w + h) - 2.0 * f(n, w) + f(n, w - h)) / (h * h);
        let f_nw =
            (f(n + h, w + h) - f(n + h, w - h) - f(n - h, w + h) + f(n - h, w - h)) / (4.0 * h * h);
        let (det, tr) = model::f_b_hessian_invariants(w / n, b).unwrap();
        let rel_det = (det - (f_nn * f_ww - f_nw * f_nw)).abs() / det.abs().max(1e-9);
        let rel_tr = (tr - (f_nn + f_ww)).abs() / tr.abs().max(1e-9);
        worst_grad = worst_grad.max(rel_det).max(rel_tr);
    }
    assert!(
        worst_grad <= 1e-5,
        "derivative oracle mismatch {worst_grad:e}"
    );

    // block-Thomas against dense LU on a 50-block diagonally dominant system
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = 50;
    let mut jac = BlockTridiagonal::zeros(m);
    let mut rand_block = |scale: f64, shift: f64| {
        let mut b = [[0.0; 2]; 2];
        for row in &mut b {
            for v in row.iter_mut() {
                *v = rng.gen_range(-scale..scale);
            }
        }
        b[0][0] += shift;
        b[1][1] += shift;
        b
    };
    for i in 0..m {
        jac.diag[i] = rand_block(1.0, 8.0);
        if i + 1 < m {
            jac.upper[i] = rand_block(1.0, 0.0);
            jac.lower[i] = rand_block(1.0, 0.0);
        }
    }
    let rhs: Vec<[f64; 2]> = (0..m)
        .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
        .collect();
    let x = block_thomas_solve(&jac, &rhs).unwrap();
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
    let flat: Vec<f64> = rhs.iter().flat_map(|p| p.to_vec()).collect();
    let oracle = dense_solve(dense, flat);
    let mut worst_thomas: f64 = 0.0;
    for i in 0..m {
        for c in 0..2 {
            let rel = (x[i][c] - oracle[2 * i + c]).abs() / oracle[2 * i + c].abs().max(1e-12);
            worst_thomas = worst_thomas.max(rel);
        }
    }
    assert!(
        worst_thomas <= 1e-10,
        "thomas vs dense mismatch {worst_thomas:e}"
    );

    // decay-fit synthetic recovery
    let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
    let exp_vals: Vec<f64> = times.iter().map(|&t| 3.0 * (-2.0 * t).exp()).collect();
    let fit = fit_decay(&times, &exp_vals, (0.0, 5.0)).unwrap();
    assert!(
        (fit.exp_rate - 2.0).abs() <= 1e-6 * 2.0,
        "exp rate {}",
        fit.exp_rate
    );
    let alg_vals: Vec<f64> = times.iter().map(|&t| 5.0 / (1.0 + 4.0 * t)).collect();
    let fit = fit_decay(&times, &alg_vals, (0.0, 5.0)).unwrap();
    assert!(
        (fit.alg_c1 - 5.0).abs() <= 1e-6 * 5.0,
        "alg c1 {}",
        fit.alg_c1
    );
    assert!(
        (fit.alg_c2 - 4.0).abs() <= 1e-6 * 4.0,
        "alg c2 {}",
        fit.alg_c2
    );

    // transform round trip over a deterministic log sweep
    let mut worst_rt: f64 = 0.0;
    for en in -6..=6 {
        for et in -6..=6 {
            for beta in [-0.5, -0.25, 0.0, 0.25, 0.49] {
                let n = 10f64.powi(en);
                let theta = 10f64.powi(et);
                let (u, v) = model::to_uv(n, theta, beta).unwrap();
                let (n2, t2) = model::from_uv(u, v, beta).unwrap();
                worst_rt = worst_rt.max((n2 - n).abs() / n);
                worst_rt = worst_rt.max((t2 - theta).abs() / theta);
            }
        }
    }
    assert!(worst_rt <= 1e-12, "round-trip error {worst_rt:e}");
    println!(
        "criterion 7: worst derivative rel {worst_grad:e}, thomas rel {worst_thomas:e}, round trip rel {worst_rt:e}"
    );
}

fn wells_initial(grid: &Grid1D) -> State {
    let mut n = Vec::with_capacity(grid.num_points);
    for i in 0..grid.num_points {
        let x = grid.x(i);
        let v = if x <= 0.5 {
            (-48.0 * x * x).exp()
        } else {
            (-48.0 * (x - 1.0) * (x - 1.0)).exp()
        };
        n.push(v);
    }
    let w = n.iter().map(|&v| v * v).collect();
    State { n, w, t: 0.0 }
}

fn fixed_dt_run(grid: &Grid1D, beta: f64, dt: f64, t_end: f64) -> State {
    let params = preset_params(beta);
    let config = SolverConfig {
        dt_init: dt,
        dt_max: dt,
        dt_min: dt * 0.5,
        t_end,
        adaptive: false,
        ..Default::default()
    };
    let traj = advance(wells_initial(grid), &params, grid, &config);
    assert!(
        traj.status.is_completed(),
        "fixed-dt run failed: {:?} (dt={dt}, N={})",
        traj.status,
        grid.num_points
    );
    traj.states.last().unwrap().clone()
}

fn max_err(coarse: &State, fine: &State, stride: usize) -> f64 {
    let mut e: f64 = 0.0;
    for i in 0..coarse.n.len() {
        e = e.max((coarse.n[i] - fine.n[i * stride]).abs());
        e = e.max((coarse.w[i] - fine.w[i * stride]).abs());
    }
    e
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    sxy / sxx
}

#[test]
fn criterion_8_convergence_orders() {
    let start = Instant::now();
    let t_end = 0.05;
    let beta = 0.25;
    let grid = preset_grid();

    // temporal: dt halving on the fixed 501-node grid against a 16x finer
    // reference; the degenerate midpoint makes adjacent-level ratios noisy,
    // so the order is the least-squares slope across four levels
    let reference = fixed_dt_run(&grid, beta, t_end / 16384.0, t_end);
    let mut dts = Vec::new();
    let mut errs = Vec::new();
    for k in [128.0f64, 256.0, 512.0, 1024.0] {
        let state = fixed_dt_run(&grid, beta, t_end / k, t_end);
        dts.push(t_end / k);
        errs.push(max_err(&state, &reference, 1));
    }
    let temporal_order = loglog_slope(&dts, &errs);

    // spatial: dx halving at fixed dt against an 801-node reference
    let dt = t_end / 1024.0;
    let dirichlet = BoundaryKind::Dirichlet { n: 1.0, theta: 1.0 };
    let fine_grid = Grid1D::new(0.0, 1.0, 801, dirichlet, dirichlet).unwrap();
    let fine = fixed_dt_run(&fine_grid, beta, dt, t_end);
    let mut dxs = Vec::new();
    let mut serrs = Vec::new();
    for num_points in [51usize, 101, 201] {
        let g = Grid1D::new(0.0, 1.0, num_points, dirichlet, dirichlet).unwrap();
        let state = fixed_dt_run(&g, beta, dt, t_end);
        dxs.push(g.dx);
        serrs.push(max_err(&state, &fine, 800 / (num_points - 1)));
    }
    let spatial_order = loglog_slope(&dxs, &serrs);

    let elapsed = start.elapsed();
    println!(
        "criterion 8: temporal order {temporal_order:.3} (errs {errs:?}), spatial order {spatial_order:.3} (errs {serrs:?}), wall {elapsed:?}"
    );
    assert!(
        (0.8..=1.2).contains(&temporal_order),
        "temporal order {temporal_order} outside [0.8, 1.2]"
    );
    assert!(
        (1.7..=2.3).contains(&spatial_order),
        "spatial order {spatial_order} outside [1.7, 2.3]"
    );
    assert!(
        elapsed < Duration::from_secs(300),
        "took {elapsed:?}, budget 5 min"
    );
}

#[test]
fn criterion_9_newton_quadratic_regime() {
    let grid = preset_grid();
    let params = preset_params(0.25);
    let mut state = State::constant(&grid, 1.0, 1.0);
    let pi = std::f64::consts::PI;
    for i in 0..grid.num_points {
        let bump = 0.4 * (pi * grid.x(i)).sin();
        state.n[i] += bump;
        state.w[i] += 0.5 * bump;
    }
    let config = SolverConfig::default();
    let history = match newton_solve(&state, 1e-2, &params, &grid, &config) {
        NewtonOutcome::Converged {
            residual_history, ..
        } => residual_history,
        other => panic!("expected convergence, got {other:?}"),
    };

    let mut fitted_c: f64 = 0.0;
    let mut pairs = 0;
    let mut doubled = false;
    for k in 0..history.len() - 1 {
        let (r0, r1) = (history[k], history[k + 1]);
        if r0 <= 1e-2 && r1 > 1e-15 {
            fitted_c = fitted_c.max(r1 / (r0 * r0));
            pairs += 1;
            if r1 <= r0 * r0 {
                doubled = true;
            }
        }
    }
    println!("criterion 9: history {history:?}, fitted C = {fitted_c:.3e} over {pairs} pairs");
    assert!(pairs >= 1, "no residual pairs below 1e-2: {history:?}");
    assert!(fitted_c.is_finite() && fitted_c > 0.0);
    assert!(
        doubled,
        "no iteration doubled the correct digits: {history:?}"
    );
}
