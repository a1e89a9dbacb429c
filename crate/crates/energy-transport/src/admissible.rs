//! Admissible exponent sets for the entropy functionals.
//!
//! N*_β is cut out by a linear and a cubic polynomial inequality in b; pairs
//! (b1, b2) additionally satisfy ordering and side conditions to form N_β.
//! The same set arises as the positivity region of the gradient quadratic
//! form with coefficients (A, B, C); both routes are provided so their
//! equivalence can be checked numerically.

use std::io::{self, Write};

use thiserror::Error;

/// Membership verdict for b ∈ N*_β together with the raw constraint values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Value of (1−2β)b + 6 (must be > 0).
    pub margin_linear: f64,
    /// Value of the cubic polynomial in b (must be > 0).
    pub margin_cubic: f64,
}

/// Strict membership b ∈ N*_β with both constraint margins.
pub fn nstar_membership(beta: f64, b: f64) -> Membership {
    let margin_linear = (1.0 - 2.0 * beta) * b + 6.0;
    let margin_cubic = 4.0 * (2.0 * beta - 1.0) * b.powi(3)
        + 4.0 * (4.0 * beta * beta - 12.0 * beta + 11.0) * b.powi(2)
        + (8.0 * beta.powi(3) - 44.0 * beta * beta + 70.0 * beta - 73.0) * b
        - 6.0 * (2.0 * beta - 1.0) * (2.0 * beta - 1.0);
    Membership {
        member: margin_linear > 0.0 && margin_cubic > 0.0,
        margin_linear,
        margin_cubic,
    }
}

/// Pair membership (b1, b2) ∈ N_β: both in N*_β, b1 ≤ b2, b1 ≤ β − 1/2,
/// b2 ≥ 5/2 − β.
pub fn nbeta_membership(beta: f64, b1: f64, b2: f64) -> bool {
    nstar_membership(beta, b1).member
        && nstar_membership(beta, b2).member
        && b1 <= b2
        && b1 <= beta - 0.5
        && b2 >= 2.5 - beta
}

/// Coefficients (A, B, C) of the gradient quadratic form
/// A·X² + 2B·XY + C·Y².
pub fn quad_form_coeffs(beta: f64, b: f64) -> (f64, f64, f64) {
    let a = (-2.0 * b * beta + b + 6.0) / 3.0;
    let bb = (-2.0 * b * beta + b + 6.0) * (2.0 * b - 2.0 * beta + 1.0) / 12.0;
    let c = b
        * (4.0 * b * beta * beta - 8.0 * b * beta - 4.0 * beta * beta + 9.0 * b + 2.0 * beta - 6.0)
        / 6.0;
    (a, bb, c)
}

/// Width of the band around constraint zeros inside which points are
/// classified "boundary" and excluded from equivalence statistics.
pub const BOUNDARY_BAND: f64 = 1e-9;

/// Agreement report between the quadratic-form positivity route and the
/// polynomial membership route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivCheck {
    /// A > 0 and AC − B² > 0.
    pub positive_definite: bool,
    /// b ∈ N*_β via the two polynomial inequalities.
    pub nstar_member: bool,
    /// Some constraint value lies within [`BOUNDARY_BAND`] of zero.
    pub boundary: bool,
}

impl EquivCheck {
    /// The two routes agree (boundary points are excluded from statistics by
    /// the caller, not here).
    pub fn agree(&self) -> bool {
        self.positive_definite == self.nstar_member
    }
}

/// Evaluate both membership routes at one point.
pub fn positive_definite_equiv_check(beta: f64, b: f64) -> EquivCheck {
    let (a, bb, c) = quad_form_coeffs(beta, b);
    let disc = a * c - bb * bb;
    let m = nstar_membership(beta, b);
    let boundary = a.abs() <= BOUNDARY_BAND
        || disc.abs() <= BOUNDARY_BAND
        || m.margin_linear.abs() <= BOUNDARY_BAND
        || m.margin_cubic.abs() <= BOUNDARY_BAND;
    EquivCheck {
        positive_definite: a > 0.0 && disc > 0.0,
        nstar_member: m.member,
        boundary,
    }
}

/// Raster specification for a (β, b) membership scan.
///
/// β values cover [beta_min, beta_max) half-open (β = 1/2 itself is outside
/// the admissible range); b values cover [b_min, b_max] inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionScanSpec {
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_step: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub b_step: f64,
}

impl Default for RegionScanSpec {
    fn default() -> Self {
        Self {
            beta_min: -0.5,
            beta_max: 0.5,
            beta_step: 0.01,
            b_min: -10.0,
            b_max: 10.0,
            b_step: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("range is empty: min {min} must be below max {max}")]
    EmptyRange { min: f64, max: f64 },
    #[error("step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("step {step} does not divide the range [{min}, {max}]")]
    StepDoesNotDivide { min: f64, max: f64, step: f64 },
}

fn steps_in(min: f64, max: f64, step: f64) -> Result<usize, ScanError> {
    if !(min < max) {
        return Err(ScanError::EmptyRange { min, max });
    }
    if !(step > 0.0) {
        return Err(ScanError::NonPositiveStep(step));
    }
    let raw = (max - min) / step;
    let k = raw.round();
    if (raw - k).abs() > 1e-12 * raw.abs().max(1.0) {
        return Err(ScanError::StepDoesNotDivide { min, max, step });
    }
    Ok(k as usize)
}

impl RegionScanSpec {
    pub fn validate(&self) -> Result<(), ScanError> {
        steps_in(self.beta_min, self.beta_max, self.beta_step)?;
        steps_in(self.b_min, self.b_max, self.b_step)?;
        Ok(())
    }

    /// β grid, half-open at the top.
    pub fn beta_values(&self) -> Result<Vec<f64>, ScanError> {
        let k = steps_in(self.beta_min, self.beta_max, self.beta_step)?;
        Ok((0..k)
            .map(|i| self.beta_min + i as f64 * self.beta_step)
            .collect())
    }

    /// b grid, both ends inclusive.
    pub fn b_values(&self) -> Result<Vec<f64>, ScanError> {
        let k = steps_in(self.b_min, self.b_max, self.b_step)?;
        Ok((0..=k)
            .map(|i| self.b_min + i as f64 * self.b_step)
            .collect())
    }
}

/// One raster cell of a region scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub beta: f64,
    pub b: f64,
    pub member: bool,
    pub margin_linear: f64,
    pub margin_cubic: f64,
}

/// Membership raster over a (β, b) grid, row-major in β then b.
#[derive(Debug, Clone)]
pub struct RegionScan {
    pub spec: RegionScanSpec,
    pub rows: Vec<ScanRow>,
}

/// Evaluate [`nstar_membership`] over the raster defined by `spec`.
pub fn region_scan(spec: &RegionScanSpec) -> Result<RegionScan, ScanError> {
    let betas = spec.beta_values()?;
    let bs = spec.b_values()?;
    let mut rows = Vec::with_capacity(betas.len() * bs.len());
    for &beta in &betas {
        for &b in &bs {
            let m = nstar_membership(beta, b);
            rows.push(ScanRow {
                beta,
                b,
                member: m.member,
                margin_linear: m.margin_linear,
                margin_cubic: m.margin_cubic,
            });
        }
    }
    Ok(RegionScan { spec: *spec, rows })
}

impl RegionScan {
    /// Every member cell with −1/2 < β < 1/2 has b ≤ 0 or b ≥ 2.
    pub fn members_avoid_unit_gap(&self) -> bool {
        self.rows
            .iter()
            .all(|r| !(r.member && r.beta > -0.5 && r.beta < 0.5) || r.b <= 0.0 || r.b >= 2.0)
    }

    /// CSV export: header row, LF line endings, `.` decimal separator,
    /// round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(b"beta,b,member,margin_linear,margin_cubic\n")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.beta, r.b, r.member, r.margin_linear, r.margin_cubic
            )?;
        }
        Ok(())
    }
}
