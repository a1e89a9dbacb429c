//! Pointwise functions of the continuous model: variable transforms between
//! (n, θ), (n, w) and (u, v), flux nonlinearities, the relaxation source,
//! entropy densities f_b and their derivatives, and the diffusion matrix.
//!
//! Everything here is a pure function of scalars. The second evolved field is
//! always the energy density w = nθ; the temperature θ = w/n is derived.

use thiserror::Error;

/// Domain errors for the pointwise model functions.
///
/// Powers of negative bases and negative powers of zero are rejected
/// explicitly instead of producing NaN/inf.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("zero cannot be raised to the negative power {exponent}")]
    ZeroToNegativePower { exponent: f64 },
    #[error("negative base {base} for real power {exponent}")]
    NegativeBase { base: f64, exponent: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("Hessian trace vanished at theta={theta}, b={b}")]
    DegenerateTrace { theta: f64, b: f64 },
}

/// `base^exponent` with explicit guards at zero and for negative bases.
pub(crate) fn checked_pow(base: f64, exponent: f64) -> Result<f64, DomainError> {
    if base < 0.0 {
        return Err(DomainError::NegativeBase { base, exponent });
    }
    if base == 0.0 {
        if exponent > 0.0 {
            return Ok(0.0);
        }
        if exponent == 0.0 {
            return Ok(1.0);
        }
        return Err(DomainError::ZeroToNegativePower { exponent });
    }
    Ok(base.powf(exponent))
}

fn require_positive(name: &'static str, value: f64) -> Result<(), DomainError> {
    if !(value > 0.0) {
        return Err(DomainError::NonPositive { name, value });
    }
    Ok(())
}

fn require_nonnegative(name: &'static str, value: f64) -> Result<(), DomainError> {
    if !(value >= 0.0) {
        return Err(DomainError::Negative { name, value });
    }
    Ok(())
}

/// Energy-flux constant κ = (2/3)(2 − β).
pub fn kappa_of(beta: f64) -> f64 {
    (2.0 / 3.0) * (2.0 - beta)
}

/// Relaxation-time model for the temperature source n(1 − θ)/τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation {
    /// Constant relaxation time τ.
    Constant { tau: f64 },
    /// Temperature-dependent relaxation time τ(θ) = τ0 + τ1·θ^(1/2−β).
    TemperatureDependent { tau0: f64, tau1: f64 },
}

/// Physical/model constants shared by the whole pipeline.
///
/// `kappa` is stored but derived; construction recomputes and checks it.
/// The scattering exponent is restricted to −1/2 ≤ β < 1/2 unless the
/// extended-β override is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub kappa: f64,
    pub relaxation: Relaxation,
    /// Dirichlet particle density at contacts.
    pub n_d: f64,
    /// Dirichlet temperature at contacts.
    pub theta_d: f64,
}

impl ModelParams {
    /// Build parameters with β restricted to the admissible range [−1/2, 1/2).
    pub fn new(
        beta: f64,
        relaxation: Relaxation,
        n_d: f64,
        theta_d: f64,
    ) -> Result<Self, DomainError> {
        if !(-0.5..0.5).contains(&beta) {
            return Err(DomainError::InvalidParameter {
                name: "beta",
                reason: format!(
                    "{beta} is outside [-1/2, 1/2); use the extended-beta override to explore it"
                ),
            });
        }
        Self::new_extended(beta, relaxation, n_d, theta_d)
    }

    /// Build parameters accepting any finite β (exploratory runs outside the
    /// admissible range).
    pub fn new_extended(
        beta: f64,
        relaxation: Relaxation,
        n_d: f64,
        theta_d: f64,
    ) -> Result<Self, DomainError> {
        if !beta.is_finite() {
            return Err(DomainError::InvalidParameter {
                name: "beta",
                reason: format!("{beta} is not finite"),
            });
        }
        match relaxation {
            Relaxation::Constant { tau } => require_positive("tau", tau)?,
            Relaxation::TemperatureDependent { tau0, tau1 } => {
                require_positive("tau0", tau0)?;
                require_positive("tau1", tau1)?;
            }
        }
        require_positive("n_D", n_d)?;
        require_positive("theta_D", theta_d)?;
        Ok(Self {
            beta,
            kappa: kappa_of(beta),
            relaxation,
            n_d,
            theta_d,
        })
    }

    /// Dirichlet energy density w_D = n_D·θ_D.
    pub fn w_d(&self) -> f64 {
        self.n_d * self.theta_d
    }

    /// Check the stored κ against its defining formula.
    pub fn kappa_consistent(&self) -> bool {
        self.kappa == kappa_of(self.beta)
    }
}

/// Exponent pair (b1, b2) for the entropy functional S_{b1,b2}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyPair {
    pub b1: f64,
    pub b2: f64,
}

impl EntropyPair {
    /// Requires b1 ≤ b2 and both nonzero (the weights 1/|b| must exist).
    pub fn new(b1: f64, b2: f64) -> Result<Self, DomainError> {
        if !(b1 <= b2) {
            return Err(DomainError::InvalidParameter {
                name: "entropy pair",
                reason: format!("b1={b1} must not exceed b2={b2}"),
            });
        }
        if b1 == 0.0 || b2 == 0.0 {
            return Err(DomainError::InvalidParameter {
                name: "entropy pair",
                reason: "exponents must be nonzero".into(),
            });
        }
        Ok(Self { b1, b2 })
    }
}

/// (u, v) = (nθ^(1/2−β), nθ^(3/2−β)).
pub fn to_uv(n: f64, theta: f64, beta: f64) -> Result<(f64, f64), DomainError> {
    require_nonnegative("n", n)?;
    require_nonnegative("theta", theta)?;
    let u = n * checked_pow(theta, 0.5 - beta)?;
    let v = n * checked_pow(theta, 1.5 - beta)?;
    Ok((u, v))
}

/// Inverse transform: n = u^(3/2−β)·v^(β−1/2), θ = v/u.
///
/// v = 0 is the vacuum state and maps to (n, θ) = (0, 0), the same
/// convention the identification θ := 0 on {n = 0} uses.
pub fn from_uv(u: f64, v: f64, beta: f64) -> Result<(f64, f64), DomainError> {
    require_nonnegative("u", u)?;
    require_nonnegative("v", v)?;
    if v == 0.0 {
        return Ok((0.0, 0.0));
    }
    require_positive("u", u)?;
    let n = checked_pow(u, 1.5 - beta)? * checked_pow(v, beta - 0.5)?;
    let theta = v / u;
    Ok((n, theta))
}

/// The two flux nonlinearities (g1, g2) = (nθ^(1/2−β), nθ^(3/2−β)) as
/// functions of the evolved fields (n, w).
///
/// Identical to [`to_uv`] evaluated at θ = w/n, so g1 = u and g2 = v hold by
/// construction.
pub fn flux_pair(n: f64, w: f64, beta: f64) -> Result<(f64, f64), DomainError> {
    require_positive("n", n)?;
    require_nonnegative("w", w)?;
    to_uv(n, w / n, beta)
}

/// Exact partial derivatives ∂(g1, g2)/∂(n, w); rows index the flux, columns
/// the field. Needs w > 0 (g2 is singular in w at the vacuum for β < 1/2).
pub fn flux_pair_jacobian(n: f64, w: f64, beta: f64) -> Result<[[f64; 2]; 2], DomainError> {
    require_positive("n", n)?;
    require_positive("w", w)?;
    let (g1, g2) = flux_pair(n, w, beta)?;
    // g1 = n^(1/2+β) w^(1/2−β), g2 = n^(β−1/2) w^(3/2−β)
    Ok([
        [(0.5 + beta) * g1 / n, (0.5 - beta) * g1 / w],
        [(beta - 0.5) * g2 / n, (1.5 - beta) * g2 / w],
    ])
}

/// Relaxation source n(1 − θ)/τ = (n − w)/τ(θ).
pub fn relaxation_term(n: f64, w: f64, params: &ModelParams) -> Result<f64, DomainError> {
    require_positive("n", n)?;
    require_nonnegative("w", w)?;
    match params.relaxation {
        Relaxation::Constant { tau } => Ok((n - w) / tau),
        Relaxation::TemperatureDependent { tau0, tau1 } => {
            let theta = w / n;
            let tau = tau0 + tau1 * checked_pow(theta, 0.5 - params.beta)?;
            Ok((n - w) / tau)
        }
    }
}

/// Partial derivatives ∂r/∂(n, w) of [`relaxation_term`].
pub fn relaxation_jacobian(
    n: f64,
    w: f64,
    params: &ModelParams,
) -> Result<(f64, f64), DomainError> {
    require_positive("n", n)?;
    require_positive("w", w)?;
    match params.relaxation {
        Relaxation::Constant { tau } => Ok((1.0 / tau, -1.0 / tau)),
        Relaxation::TemperatureDependent { tau0, tau1 } => {
            let a = 0.5 - params.beta;
            let theta = w / n;
            let pow = tau1 * checked_pow(theta, a)?;
            let tau = tau0 + pow;
            // ∂τ/∂n = −aτ1θ^a/n, ∂τ/∂w = aτ1θ^a/w
            let dtau_dn = -a * pow / n;
            let dtau_dw = a * pow / w;
            let r = (n - w) / tau;
            Ok((
                1.0 / tau - r * dtau_dn / tau,
                -1.0 / tau - r * dtau_dw / tau,
            ))
        }
    }
}

/// Entropy density f_b(n, w) = n^(2−b)·w^b = n²θ^b.
pub fn f_b(n: f64, w: f64, b: f64) -> Result<f64, DomainError> {
    require_nonnegative("n", n)?;
    require_nonnegative("w", w)?;
    Ok(checked_pow(n, 2.0 - b)? * checked_pow(w, b)?)
}

/// Gradient (∂f_b/∂n, ∂f_b/∂w) = ((2−b)nθ^b, b·nθ^(b−1)).
pub fn f_b_grad(n: f64, w: f64, b: f64) -> Result<(f64, f64), DomainError> {
    require_positive("n", n)?;
    require_positive("w", w)?;
    let theta = w / n;
    Ok((
        (2.0 - b) * n * checked_pow(theta, b)?,
        b * n * checked_pow(theta, b - 1.0)?,
    ))
}

/// Hessian of f_b in the (n, w) variables; depends on (n, w) only through
/// θ = w/n.
pub fn f_b_hessian(theta: f64, b: f64) -> Result<[[f64; 2]; 2], DomainError> {
    require_positive("theta", theta)?;
    let f_nn = (b - 1.0) * (b - 2.0) * checked_pow(theta, b)?;
    let f_nw = b * (2.0 - b) * checked_pow(theta, b - 1.0)?;
    let f_ww = b * (b - 1.0) * checked_pow(theta, b - 2.0)?;
    Ok([[f_nn, f_nw], [f_nw, f_ww]])
}

/// Determinant and trace of D²f_b:
/// det = b(b−2)θ^(2b−2), trace = (b−1)((b−2)θ^b + bθ^(b−2)).
///
/// Both are positive for b < 0 or b > 2 (strict convexity) and the
/// determinant vanishes at b ∈ {0, 2}.
pub fn f_b_hessian_invariants(theta: f64, b: f64) -> Result<(f64, f64), DomainError> {
    require_positive("theta", theta)?;
    let det = b * (b - 2.0) * checked_pow(theta, 2.0 * b - 2.0)?;
    let trace = (b - 1.0) * ((b - 2.0) * checked_pow(theta, b)? + b * checked_pow(theta, b - 2.0)?);
    Ok((det, trace))
}

/// Lower bound det/tr(D²f_{b1}) + det/tr(D²f_{b2}) ≤ λ_min(D²f_{b1} + D²f_{b2}).
///
/// Valid for b1, b2 in (−∞, 0) ∪ (2, ∞), where both Hessians are positive
/// definite.
pub fn lambda_min_lower_bound(theta: f64, b1: f64, b2: f64) -> Result<f64, DomainError> {
    let mut sum = 0.0;
    for b in [b1, b2] {
        let (det, trace) = f_b_hessian_invariants(theta, b)?;
        if trace == 0.0 {
            return Err(DomainError::DegenerateTrace { theta, b });
        }
        sum += det / trace;
    }
    Ok(sum)
}

/// Diffusion matrix A(n, θ) of the symmetrized system,
/// nθ^(1/2−β)·((1, (2−β)θ), ((2−β)θ, (3−β)(2−β)θ²)).
///
/// Symmetric positive semi-definite with det = (2−β)n²θ^(3−2β).
pub fn diffusion_matrix(n: f64, theta: f64, beta: f64) -> Result<[[f64; 2]; 2], DomainError> {
    require_nonnegative("n", n)?;
    require_nonnegative("theta", theta)?;
    let scale = n * checked_pow(theta, 0.5 - beta)?;
    let off = (2.0 - beta) * theta;
    Ok([
        [scale, scale * off],
        [
            scale * off,
            scale * (3.0 - beta) * (2.0 - beta) * theta * theta,
        ],
    ])
}

/// Entropy variables (w1, w2) = (log(n/θ^(3/2)), −1/θ).
pub fn entropy_variables(n: f64, theta: f64) -> Result<(f64, f64), DomainError> {
    require_positive("n", n)?;
    require_positive("theta", theta)?;
    Ok(((n / theta.powf(1.5)).ln(), -1.0 / theta))
}

/// Logarithmic entropy density n·log(n/θ^(3/2)).
///
/// Monitoring output only; no monotonicity is asserted anywhere for
/// non-equilibrium boundary data.
pub fn log_entropy_density(n: f64, theta: f64) -> Result<f64, DomainError> {
    require_positive("n", n)?;
    require_positive("theta", theta)?;
    Ok(n * (n / theta.powf(1.5)).ln())
}
