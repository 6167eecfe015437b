//! Orientation constraints as functions `psi(alpha, beta) = a^T n(alpha, beta) >= lower`
//! of a unit's pointing (or normal) vector, and their safe linearization.
//!
//! Every constraint used by the optimizer is linear in the pointing vector
//! `n = [cos a cos b, -sin b, sin a cos b]`:
//!
//! * eccentric bound: `a = e_x`, `lower = cos(theta_max)`;
//! * panel anti-reflection towards panel `j`: `a = -(0, n_j - n, m_j - m)`, `lower = 0`;
//! * panel facing away from the array center: `a = (0, n, m)`, `lower = 0`,
//!
//! with panel offsets in grid-index units.
//!
//! A linearized row replaces `psi(u + d) >= lower` by
//! `psi(u) + grad . d - m_a |d_a| - m_b |d_b| >= lower`, where the margins
//! `m_a, m_b` bound the second-order Taylor remainder over the trust box
//! `|d_a|, |d_b| <= delta`. Any step satisfying the row is therefore feasible
//! for the exact constraint, and because the row is linear in the step with a
//! nonnegative right-hand side, so is every shorter step in the same direction.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, RotationState};

/// Which physical constraint a row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `cos a cos b >= cos(theta_max)`.
    EccentricLower,
    /// `cos a cos b <= 1`, which holds for every angle pair.
    EccentricUpper,
    Reflection { other: usize },
    CpuBlockage,
}

/// One constraint linearized around the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedRow {
    pub kind: RowKind,
    /// Unit (antenna or panel) index, row-major.
    pub unit: usize,
    /// Indices of the unit's `(alpha, beta)` in the flat variable vector.
    pub variables: (usize, usize),
    /// `psi(u) - lower`; nonnegative at a feasible state.
    pub slack: f64,
    /// `(d psi / d alpha, d psi / d beta)` at `u`.
    pub gradient: (f64, f64),
    /// Remainder bounds per unit step in `|d alpha|` and `|d beta|`.
    pub margin: (f64, f64),
}

impl LinearizedRow {
    /// Whether the step `(da, db)` satisfies the row.
    pub fn admits(&self, da: f64, db: f64) -> bool {
        let lhs = -self.gradient.0 * da - self.gradient.1 * db
            + self.margin.0 * da.abs()
            + self.margin.1 * db.abs();
        lhs <= self.slack.max(0.0) + 1e-15
    }

    /// First-order prediction of the slack after the step `(da, db)`.
    pub fn predicted_slack(&self, da: f64, db: f64) -> f64 {
        self.slack + self.gradient.0 * da + self.gradient.1 * db
    }
}

/// `(psi, d psi / d alpha, d psi / d beta)` for `psi = a^T n(alpha, beta)`.
pub fn linear_form(a: &Vector3<f64>, alpha: f64, beta: f64) -> (f64, f64, f64) {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let psi = a.x * ca * cb - a.y * sb + a.z * sa * cb;
    let d_alpha = -a.x * sa * cb + a.z * ca * cb;
    let d_beta = -a.x * ca * sb - a.y * cb - a.z * sa * sb;
    (psi, d_alpha, d_beta)
}

/// Margins `(m_a, m_b)` with
/// `|psi(u + d) - psi(u) - grad . d| <= m_a |d_a| + m_b |d_b|`
/// for all `|d_a|, |d_b| <= delta`.
///
/// The Hessian entries of `psi` are bounded along the segment `u + t d` using
/// `|sin(x + s)| <= |sin x| + |s|` (and likewise for cosine), the integral
/// form of the remainder is expanded into monomials in `|d_a|, |d_b|`, and
/// each monomial is charged to `|d_a|` when it contains it and to `|d_b|`
/// otherwise. Charging this way keeps the `beta` margin free of terms that
/// only arise when `alpha` moves, which matters for panel rows such as
/// `-sin a cos b >= 0` at `a = 0`, where turning `beta` alone is exactly
/// feasible.
pub fn remainder_margins(a: &Vector3<f64>, alpha: f64, beta: f64, delta: f64) -> (f64, f64) {
    let (p, y, z) = (a.x.abs(), a.y.abs(), a.z.abs());
    let (sa, ca) = (alpha.sin().abs(), alpha.cos().abs());
    let (sb, cb) = (beta.sin().abs(), beta.cos().abs());
    let a0 = p * ca + z * sa;
    let b0 = p * sa + z * ca;
    let a1 = p + z;
    let d = delta;
    let d2 = d * d;
    let d3 = d2 * d;
    // Moments of the remainder kernel: int (1 - t) t^k dt for k = 0, 1, 2.
    let (k0, k1, k2) = (0.5, 1.0 / 6.0, 1.0 / 12.0);

    let alpha_sq = d * cb * a0 * k0 + d2 * (a0 + cb * a1) * k1 + d3 * a1 * k2;
    let cross = 2.0 * (d * sb * b0 * k0 + d2 * (b0 + sb * a1) * k1 + d3 * a1 * k2);
    let beta_sq_with_alpha = d2 * cb * a1 * k1 + d3 * a1 * k2;
    let beta_sq_pure = d * cb * a0 * k0 + d2 * a0 * k1 + y * (d * sb * k0 + d2 * k1);

    (alpha_sq + cross + beta_sq_with_alpha, beta_sq_pure)
}

fn row(
    kind: RowKind,
    unit: usize,
    variables: (usize, usize),
    a: &Vector3<f64>,
    lower: f64,
    angles: (f64, f64),
    delta: f64,
    with_margin: bool,
) -> LinearizedRow {
    let (psi, ga, gb) = linear_form(a, angles.0, angles.1);
    let margin = if with_margin {
        remainder_margins(a, angles.0, angles.1, delta)
    } else {
        (0.0, 0.0)
    };
    LinearizedRow {
        kind,
        unit,
        variables,
        slack: psi - lower,
        gradient: (ga, gb),
        margin,
    }
}

/// Two rows per unit for `cos(theta_max) <= cos a cos b <= 1`.
///
/// The upper row never restricts the exact problem and carries no margin.
pub fn linearized_element_constraints(
    state: &RotationState,
    theta_max: f64,
    delta: f64,
) -> Vec<LinearizedRow> {
    let ex = Vector3::x();
    let mut rows = Vec::with_capacity(2 * state.units());
    for m in 0..state.rows() {
        for n in 0..state.cols() {
            let unit = m * state.cols() + n;
            let vars = state.variables_of(m, n);
            let angles = state.angles(m, n);
            rows.push(row(
                RowKind::EccentricLower,
                unit,
                vars,
                &ex,
                theta_max.cos(),
                angles,
                delta,
                true,
            ));
            rows.push(row(
                RowKind::EccentricUpper,
                unit,
                vars,
                &(-ex),
                -1.0,
                angles,
                delta,
                false,
            ));
        }
    }
    rows
}

/// Anti-reflection rows for every ordered panel pair and one
/// center-facing row per panel.
pub fn linearized_panel_constraints(
    state: &RotationState,
    layout: &ArrayLayout,
    delta: f64,
) -> Result<Vec<LinearizedRow>> {
    if !layout.is_panel() {
        return Err(Error::WrongMode {
            expected: "panel",
            actual: layout.mode().name(),
        });
    }
    state.check_layout(layout)?;
    let (rows, cols) = (layout.rows(), layout.cols());
    let mut out = Vec::with_capacity(rows * cols * rows * cols);
    for m in 0..rows {
        for n in 0..cols {
            let b = m * cols + n;
            let vars = state.variables_of(m, n);
            let angles = state.angles(m, n);
            let (mi, ni) = (layout.row_index(m), layout.col_index(n));
            for mj in 0..rows {
                for nj in 0..cols {
                    let j = mj * cols + nj;
                    if j == b {
                        continue;
                    }
                    let a = -Vector3::new(0.0, layout.col_index(nj) - ni, layout.row_index(mj) - mi);
                    out.push(row(
                        RowKind::Reflection { other: j },
                        b,
                        vars,
                        &a,
                        0.0,
                        angles,
                        delta,
                        true,
                    ));
                }
            }
            out.push(row(
                RowKind::CpuBlockage,
                b,
                vars,
                &Vector3::new(0.0, ni, mi),
                0.0,
                angles,
                delta,
                true,
            ));
        }
    }
    Ok(out)
}
