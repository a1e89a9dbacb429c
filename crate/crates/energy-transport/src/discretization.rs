//! Uniform 1-D grid, discrete Laplacian with boundary handling, and assembly
//! of the fully-discrete residual and its block-tridiagonal Jacobian for one
//! implicit Euler step.
//!
//! Unknowns are the nodal fields (n, w = nθ). Dirichlet rows are identity
//! constraints n_i = n_D, w_i = n_D·θ_D; zero-flux ends use second-order
//! ghost-node reflection.

use thiserror::Error;

use crate::model::{
    self, flux_pair, flux_pair_jacobian, relaxation_jacobian, relaxation_term, DomainError,
    ModelParams,
};

/// Boundary condition at one grid endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    /// Prescribed (n, θ) at the endpoint.
    Dirichlet { n: f64, theta: f64 },
    /// Zero normal flux for both conserved fields.
    NeumannZeroFlux,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("grid extent is empty: x_min {x_min} must be below x_max {x_max}")]
    EmptyExtent { x_min: f64, x_max: f64 },
    #[error("at least one endpoint must be Dirichlet")]
    NoDirichletEnd,
    #[error("Dirichlet boundary values must be positive (n={n}, theta={theta})")]
    NonPositiveBoundary { n: f64, theta: f64 },
    #[error("nodal array has length {got}, grid has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
}

/// Uniform grid on [x_min, x_max] whose nodes include both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub num_points: usize,
    pub dx: f64,
    pub bc_left: BoundaryKind,
    pub bc_right: BoundaryKind,
}

impl Grid1D {
    pub fn new(
        x_min: f64,
        x_max: f64,
        num_points: usize,
        bc_left: BoundaryKind,
        bc_right: BoundaryKind,
    ) -> Result<Self, GridError> {
        if num_points < 3 {
            return Err(GridError::TooFewNodes(num_points));
        }
        if !(x_min < x_max) {
            return Err(GridError::EmptyExtent { x_min, x_max });
        }
        for bc in [bc_left, bc_right] {
            if let BoundaryKind::Dirichlet { n, theta } = bc {
                if !(n > 0.0 && theta > 0.0) {
                    return Err(GridError::NonPositiveBoundary { n, theta });
                }
            }
        }
        if !matches!(bc_left, BoundaryKind::Dirichlet { .. })
            && !matches!(bc_right, BoundaryKind::Dirichlet { .. })
        {
            return Err(GridError::NoDirichletEnd);
        }
        Ok(Self {
            x_min,
            x_max,
            num_points,
            dx: (x_max - x_min) / (num_points - 1) as f64,
            bc_left,
            bc_right,
        })
    }

    /// Coordinate of node `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn check_len(&self, len: usize) -> Result<(), GridError> {
        if len != self.num_points {
            return Err(GridError::LengthMismatch {
                got: len,
                expected: self.num_points,
            });
        }
        Ok(())
    }
}

/// Nodal fields (n, w = nθ) at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub n: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(n: Vec<f64>, w: Vec<f64>, t: f64, grid: &Grid1D) -> Result<Self, GridError> {
        grid.check_len(n.len())?;
        grid.check_len(w.len())?;
        Ok(Self { n, w, t })
    }

    /// Spatially constant state (n0, n0·θ0).
    pub fn constant(grid: &Grid1D, n0: f64, theta0: f64) -> Self {
        Self {
            n: vec![n0; grid.num_points],
            w: vec![n0 * theta0; grid.num_points],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// Temperature θ_i = w_i / n_i.
    pub fn theta(&self, i: usize) -> f64 {
        self.w[i] / self.n[i]
    }

    pub fn min_n(&self) -> f64 {
        self.n.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_theta(&self) -> f64 {
        (0..self.len())
            .map(|i| self.theta(i))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn all_positive(&self) -> bool {
        self.n.iter().all(|&v| v > 0.0) && self.w.iter().all(|&v| v > 0.0)
    }
}

/// Three-point Laplacian of a nodal array.
///
/// Interior: (g_{i−1} − 2g_i + g_{i+1})/dx². Dirichlet endpoints produce 0
/// (their residual rows are identity constraints); zero-flux endpoints use
/// ghost-node reflection, e.g. 2(g_1 − g_0)/dx² on the left.
pub fn discrete_laplacian(g: &[f64], grid: &Grid1D) -> Result<Vec<f64>, GridError> {
    grid.check_len(g.len())?;
    let m = g.len();
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);
    let mut out = vec![0.0; m];
    for i in 1..m - 1 {
        out[i] = (g[i - 1] - 2.0 * g[i] + g[i + 1]) * inv_dx2;
    }
    if matches!(grid.bc_left, BoundaryKind::NeumannZeroFlux) {
        out[0] = 2.0 * (g[1] - g[0]) * inv_dx2;
    }
    if matches!(grid.bc_right, BoundaryKind::NeumannZeroFlux) {
        out[m - 1] = 2.0 * (g[m - 2] - g[m - 1]) * inv_dx2;
    }
    Ok(out)
}

/// 2×2 block.
pub type Block = [[f64; 2]; 2];

pub(crate) const ZERO_BLOCK: Block = [[0.0, 0.0], [0.0, 0.0]];
pub(crate) const IDENTITY_BLOCK: Block = [[1.0, 0.0], [0.0, 1.0]];

/// Block-tridiagonal matrix with 2×2 blocks.
///
/// `lower[i]` couples block row i+1 to column i; `upper[i]` couples block row
/// i to column i+1.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    pub diag: Vec<Block>,
    pub lower: Vec<Block>,
    pub upper: Vec<Block>,
}

impl BlockTridiagonal {
    pub fn zeros(num_block_rows: usize) -> Self {
        Self {
            diag: vec![ZERO_BLOCK; num_block_rows],
            lower: vec![ZERO_BLOCK; num_block_rows.saturating_sub(1)],
            upper: vec![ZERO_BLOCK; num_block_rows.saturating_sub(1)],
        }
    }

    pub fn num_block_rows(&self) -> usize {
        self.diag.len()
    }

    /// Matrix-vector product.
    pub fn apply(&self, x: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let m = self.num_block_rows();
        assert_eq!(x.len(), m);
        let mut y = vec![[0.0; 2]; m];
        let mul_add = |acc: &mut [f64; 2], blk: &Block, v: &[f64; 2]| {
            acc[0] += blk[0][0] * v[0] + blk[0][1] * v[1];
            acc[1] += blk[1][0] * v[0] + blk[1][1] * v[1];
        };
        for i in 0..m {
            mul_add(&mut y[i], &self.diag[i], &x[i]);
            if i > 0 {
                mul_add(&mut y[i], &self.lower[i - 1], &x[i - 1]);
            }
            if i + 1 < m {
                mul_add(&mut y[i], &self.upper[i], &x[i + 1]);
            }
        }
        y
    }

    /// Max-norm over all block entries.
    pub fn norm_inf(&self) -> f64 {
        let block_max = |b: &Block| b.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        self.diag
            .iter()
            .chain(self.lower.iter())
            .chain(self.upper.iter())
            .map(block_max)
            .fold(0.0, f64::max)
    }
}

fn dirichlet_values(bc: BoundaryKind) -> Option<(f64, f64)> {
    match bc {
        BoundaryKind::Dirichlet { n, theta } => Some((n, n * theta)),
        BoundaryKind::NeumannZeroFlux => None,
    }
}

/// Residual of one implicit Euler step, two components per node.
///
/// Interior rows:
///   F1_i = n_i − n_i^old − h·L(g1)_i
///   F2_i = w_i − w_i^old − h·κ·L(g2)_i − h·r(n_i, w_i)
/// with g1, g2 and the relaxation r evaluated at `state_new` (fully
/// implicit). Dirichlet rows are F = (n_i − n_D, w_i − n_D·θ_D).
pub fn assemble_residual(
    state_new: &State,
    state_old: &State,
    h: f64,
    params: &ModelParams,
    grid: &Grid1D,
) -> Result<Vec<[f64; 2]>, DomainError> {
    let m = grid.num_points;
    grid.check_len(state_new.len()).map_err(grid_to_domain)?;
    grid.check_len(state_old.len()).map_err(grid_to_domain)?;

    let mut g1 = vec![0.0; m];
    let mut g2 = vec![0.0; m];
    for i in 0..m {
        let (a, b) = flux_pair(state_new.n[i], state_new.w[i], params.beta)?;
        g1[i] = a;
        g2[i] = b;
    }
    let lap1 = discrete_laplacian(&g1, grid).map_err(grid_to_domain)?;
    let lap2 = discrete_laplacian(&g2, grid).map_err(grid_to_domain)?;

    let mut res = vec![[0.0; 2]; m];
    for i in 0..m {
        let boundary = (i == 0 && dirichlet_values(grid.bc_left).is_some())
            || (i == m - 1 && dirichlet_values(grid.bc_right).is_some());
        if boundary {
            let (nd, wd) = if i == 0 {
                dirichlet_values(grid.bc_left).unwrap()
            } else {
                dirichlet_values(grid.bc_right).unwrap()
            };
            res[i] = [state_new.n[i] - nd, state_new.w[i] - wd];
        } else {
            let relax = relaxation_term(state_new.n[i], state_new.w[i], params)?;
            res[i] = [
                state_new.n[i] - state_old.n[i] - h * lap1[i],
                state_new.w[i] - state_old.w[i] - h * params.kappa * lap2[i] - h * relax,
            ];
        }
    }
    Ok(res)
}

fn grid_to_domain(e: GridError) -> DomainError {
    DomainError::InvalidParameter {
        name: "grid",
        reason: e.to_string(),
    }
}

/// Exact linearization of [`assemble_residual`] with respect to `state_new`.
pub fn assemble_jacobian(
    state_new: &State,
    h: f64,
    params: &ModelParams,
    grid: &Grid1D,
) -> Result<BlockTridiagonal, DomainError> {
    let m = grid.num_points;
    grid.check_len(state_new.len()).map_err(grid_to_domain)?;
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);
    let kappa = params.kappa;

    // ∂(g1,g2)/∂(n,w) per node
    let mut flux_jac = Vec::with_capacity(m);
    for i in 0..m {
        flux_jac.push(flux_pair_jacobian(
            state_new.n[i],
            state_new.w[i],
            params.beta,
        )?);
    }

    // coupling of row i to the fluxes at node j, scaled by `weight`·h/dx²
    let flux_block = |j: usize, weight: f64| -> Block {
        let p = &flux_jac[j];
        let c1 = weight * h * inv_dx2;
        let c2 = weight * h * kappa * inv_dx2;
        [[c1 * p[0][0], c1 * p[0][1]], [c2 * p[1][0], c2 * p[1][1]]]
    };

    let mut jac = BlockTridiagonal::zeros(m);
    for i in 0..m {
        let dirichlet = (i == 0 && dirichlet_values(grid.bc_left).is_some())
            || (i == m - 1 && dirichlet_values(grid.bc_right).is_some());
        if dirichlet {
            jac.diag[i] = IDENTITY_BLOCK;
            continue;
        }
        let neumann_edge = i == 0 || i == m - 1;
        // ghost reflection doubles the single neighbor coupling
        let (self_weight, neighbor_weight) = if neumann_edge { (2.0, 2.0) } else { (2.0, 1.0) };

        let mut diag = flux_block(i, self_weight);
        diag[0][0] += 1.0;
        diag[1][1] += 1.0;
        let (rn, rw) = relaxation_jacobian(state_new.n[i], state_new.w[i], params)?;
        diag[1][0] -= h * rn;
        diag[1][1] -= h * rw;
        jac.diag[i] = diag;

        if i > 0 {
            jac.lower[i - 1] = flux_block(i - 1, -neighbor_weight);
        }
        if i + 1 < m {
            jac.upper[i] = flux_block(i + 1, -neighbor_weight);
        }
    }
    Ok(jac)
}

/// Reference model re-export so tests can build params tersely.
pub use model::Relaxation;
