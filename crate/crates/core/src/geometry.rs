//! Array and panel layouts, the coupled row/column rotation model, and the
//! feasibility predicates on antenna and panel orientations.
//!
//! Antennas (or panels) sit on an `rows x cols` grid in the `y-z` plane with
//! the array normal along `+x`. Row `m` carries the elevation angle `alpha[m]`
//! and column `n` carries the azimuth angle `beta[n]`; the unit at `(m, n)`
//! is oriented by `R = R_alpha * R_beta` and points along `R * e_x`.
//!
//! Grid indices are symmetric around the origin: for a dimension of size `L`
//! the index of slot `i` is `i - (L - 1) / 2`, which is a half-integer when
//! `L` is even. Slot `0` is the bottom row / leftmost (most negative `y`)
//! column.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default slack for every feasibility predicate.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Whether each grid slot holds one antenna or a rigid panel of antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutMode {
    Element,
    Panel { panel_rows: usize, panel_cols: usize },
}

impl LayoutMode {
    pub fn name(&self) -> &'static str {
        match self {
            LayoutMode::Element => "element",
            LayoutMode::Panel { .. } => "panel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    rows: usize,
    cols: usize,
    spacing: f64,
    mode: LayoutMode,
    occupation: f64,
}

/// Symmetric grid coordinate of slot `i` in a dimension of `len` slots.
pub fn symmetric_index(i: usize, len: usize) -> f64 {
    i as f64 - (len as f64 - 1.0) / 2.0
}

impl ArrayLayout {
    /// `rows x cols` individually rotatable antennas spaced `spacing` meters apart.
    pub fn element(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        Self::build(rows, cols, spacing, LayoutMode::Element)
    }

    /// A `grid_rows x grid_cols` grid of panels, each carrying
    /// `panel_rows x panel_cols` antennas at `spacing`.
    pub fn panel(
        grid_rows: usize,
        grid_cols: usize,
        panel_rows: usize,
        panel_cols: usize,
        spacing: f64,
    ) -> Result<Self> {
        if panel_rows == 0 || panel_cols == 0 {
            return Err(Error::InvalidLayout("panel dimensions must be positive".into()));
        }
        Self::build(
            grid_rows,
            grid_cols,
            spacing,
            LayoutMode::Panel {
                panel_rows,
                panel_cols,
            },
        )
    }

    fn build(rows: usize, cols: usize, spacing: f64, mode: LayoutMode) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidLayout("grid dimensions must be positive".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidLayout(format!("spacing {spacing} must be positive")));
        }
        Ok(Self {
            rows,
            cols,
            spacing,
            mode,
            occupation: 1.0,
        })
    }

    /// Sets the occupation ratio that scales the panel pitch.
    pub fn with_occupation(mut self, zeta: f64) -> Result<Self> {
        if !(zeta.is_finite() && zeta > 0.0) {
            return Err(Error::InvalidLayout(format!("occupation ratio {zeta} must be positive")));
        }
        self.occupation = zeta;
        Ok(self)
    }

    /// Number of rotation rows (antenna rows or panel rows).
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn mode(&self) -> LayoutMode {
        self.mode
    }

    pub fn occupation(&self) -> f64 {
        self.occupation
    }

    pub fn is_panel(&self) -> bool {
        matches!(self.mode, LayoutMode::Panel { .. })
    }

    /// Number of independently oriented units (antennas or panels), `M * N`.
    pub fn units(&self) -> usize {
        self.rows * self.cols
    }

    pub fn antennas_per_unit(&self) -> usize {
        match self.mode {
            LayoutMode::Element => 1,
            LayoutMode::Panel {
                panel_rows,
                panel_cols,
            } => panel_rows * panel_cols,
        }
    }

    /// Total antenna count `Q`.
    pub fn antenna_count(&self) -> usize {
        self.units() * self.antennas_per_unit()
    }

    /// Symmetric row coordinate of row `m`.
    pub fn row_index(&self, m: usize) -> f64 {
        symmetric_index(m, self.rows)
    }

    pub fn col_index(&self, n: usize) -> f64 {
        symmetric_index(n, self.cols)
    }

    fn require_element(&self) -> Result<()> {
        match self.mode {
            LayoutMode::Element => Ok(()),
            other => Err(Error::WrongMode {
                expected: "element",
                actual: other.name(),
            }),
        }
    }

    fn require_panel(&self) -> Result<(usize, usize)> {
        match self.mode {
            LayoutMode::Panel {
                panel_rows,
                panel_cols,
            } => Ok((panel_rows, panel_cols)),
            other => Err(Error::WrongMode {
                expected: "panel",
                actual: other.name(),
            }),
        }
    }

    /// Antenna positions `[0, n*spacing, m*spacing]` in row-major `(m, n)` order.
    pub fn element_positions(&self) -> Result<Vec<Vector3<f64>>> {
        self.require_element()?;
        Ok(grid_points(self.rows, self.cols, self.spacing))
    }

    /// Center-to-center distance between adjacent panels.
    pub fn panel_pitch(&self) -> Result<f64> {
        let (pr, pc) = self.require_panel()?;
        Ok(pr.max(pc) as f64 * self.spacing * self.occupation)
    }

    /// Panel centers `q_b` with linear index `b = m * cols + n`.
    pub fn panel_centers(&self) -> Result<Vec<Vector3<f64>>> {
        let pitch = self.panel_pitch()?;
        Ok(grid_points(self.rows, self.cols, pitch))
    }

    /// Antenna offsets inside a panel, in the panel's local frame.
    pub fn panel_local_offsets(&self) -> Result<Vec<Vector3<f64>>> {
        let (pr, pc) = self.require_panel()?;
        Ok(grid_points(pr, pc, self.spacing))
    }

    /// Antenna positions with every unit at its reference orientation.
    pub fn reference_positions(&self) -> Vec<Vector3<f64>> {
        match self.mode {
            LayoutMode::Element => grid_points(self.rows, self.cols, self.spacing),
            LayoutMode::Panel { .. } => {
                let centers = self.panel_centers().expect("panel mode");
                let local = self.panel_local_offsets().expect("panel mode");
                centers
                    .iter()
                    .flat_map(|c| local.iter().map(move |r| c + r))
                    .collect()
            }
        }
    }
}

fn grid_points(rows: usize, cols: usize, pitch: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(rows * cols);
    for m in 0..rows {
        for n in 0..cols {
            out.push(Vector3::new(
                0.0,
                symmetric_index(n, cols) * pitch,
                symmetric_index(m, rows) * pitch,
            ));
        }
    }
    out
}

/// Wraps an angle into `(-pi, pi]`. Values already in range are returned unchanged.
pub fn wrap_angle(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// How rotation variables map onto grid units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Unit `(m, n)` uses `(alpha[m], beta[n])`: `M + N` variables.
    CrossLinked,
    /// Unit `(m, n)` has its own pair: `2 * M * N` variables.
    Independent,
}

/// Rotation angles of every unit, stored wrapped into `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationState {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    coupling: Coupling,
    rows: usize,
    cols: usize,
}

impl RotationState {
    /// Cross-linked state with one angle per row and one per column.
    pub fn cross_linked(alpha: Vec<f64>, beta: Vec<f64>) -> Self {
        let rows = alpha.len();
        let cols = beta.len();
        Self {
            alpha: alpha.into_iter().map(wrap_angle).collect(),
            beta: beta.into_iter().map(wrap_angle).collect(),
            coupling: Coupling::CrossLinked,
            rows,
            cols,
        }
    }

    /// Per-unit angles in row-major order.
    pub fn independent(rows: usize, cols: usize, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != rows * cols || beta.len() != rows * cols {
            return Err(Error::StateMismatch(format!(
                "independent state needs {} angles per axis, got {} and {}",
                rows * cols,
                alpha.len(),
                beta.len()
            )));
        }
        Ok(Self {
            alpha: alpha.into_iter().map(wrap_angle).collect(),
            beta: beta.into_iter().map(wrap_angle).collect(),
            coupling: Coupling::Independent,
            rows,
            cols,
        })
    }

    /// All units at the reference orientation `f = e_x`.
    pub fn zeros(rows: usize, cols: usize, coupling: Coupling) -> Self {
        let (na, nb) = match coupling {
            Coupling::CrossLinked => (rows, cols),
            Coupling::Independent => (rows * cols, rows * cols),
        };
        Self {
            alpha: vec![0.0; na],
            beta: vec![0.0; nb],
            coupling,
            rows,
            cols,
        }
    }

    pub fn zeros_for(layout: &ArrayLayout, coupling: Coupling) -> Self {
        Self::zeros(layout.rows(), layout.cols(), coupling)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn units(&self) -> usize {
        self.rows * self.cols
    }

    /// Indices of `(alpha, beta)` for unit `(m, n)` in the flat variable vector.
    pub fn variables_of(&self, m: usize, n: usize) -> (usize, usize) {
        match self.coupling {
            Coupling::CrossLinked => (m, self.rows + n),
            Coupling::Independent => {
                let u = m * self.cols + n;
                (u, self.units() + u)
            }
        }
    }

    pub fn angles(&self, m: usize, n: usize) -> (f64, f64) {
        match self.coupling {
            Coupling::CrossLinked => (self.alpha[m], self.beta[n]),
            Coupling::Independent => {
                let u = m * self.cols + n;
                (self.alpha[u], self.beta[u])
            }
        }
    }

    pub fn try_angles(&self, m: usize, n: usize) -> Result<(f64, f64)> {
        if m >= self.rows {
            return Err(Error::IndexOutOfRange { index: m, len: self.rows });
        }
        if n >= self.cols {
            return Err(Error::IndexOutOfRange { index: n, len: self.cols });
        }
        Ok(self.angles(m, n))
    }

    /// `(alpha, beta)` of every unit in row-major order.
    pub fn unit_angles(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.units());
        for m in 0..self.rows {
            for n in 0..self.cols {
                out.push(self.angles(m, n));
            }
        }
        out
    }

    pub fn variable_count(&self) -> usize {
        self.alpha.len() + self.beta.len()
    }

    /// The flat vector `u = [alpha..., beta...]`.
    pub fn to_vector(&self) -> Vec<f64> {
        self.alpha.iter().chain(&self.beta).copied().collect()
    }

    /// Same shape and coupling, new variable values (wrapped).
    pub fn with_vector(&self, u: &[f64]) -> Self {
        assert_eq!(u.len(), self.variable_count(), "variable vector length");
        let na = self.alpha.len();
        Self {
            alpha: u[..na].iter().copied().map(wrap_angle).collect(),
            beta: u[na..].iter().copied().map(wrap_angle).collect(),
            coupling: self.coupling,
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn check_layout(&self, layout: &ArrayLayout) -> Result<()> {
        if self.rows != layout.rows() || self.cols != layout.cols() {
            return Err(Error::StateMismatch(format!(
                "state grid {}x{} vs layout {}x{}",
                self.rows,
                self.cols,
                layout.rows(),
                layout.cols()
            )));
        }
        Ok(())
    }

    /// Expands a cross-linked state into the equivalent independent one.
    pub fn to_independent(&self) -> Self {
        let (alpha, beta) = self.unit_angles().into_iter().unzip();
        Self {
            alpha,
            beta,
            coupling: Coupling::Independent,
            rows: self.rows,
            cols: self.cols,
        }
    }
}

/// Rotation matrix and the pointing (or panel normal) vector `R * e_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    pub rotation: Matrix3<f64>,
    pub pointing: Vector3<f64>,
}

/// Elevation rotation about the horizontal axis.
pub fn rotation_alpha(alpha: f64) -> Matrix3<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

/// Azimuth rotation about the vertical axis.
pub fn rotation_beta(beta: f64) -> Matrix3<f64> {
    let (s, c) = beta.sin_cos();
    Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `R_alpha * R_beta`, written out entrywise.
pub fn rotation_matrix(alpha: f64, beta: f64) -> Orientation {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let rotation = Matrix3::new(
        ca * cb,
        ca * sb,
        -sa,
        -sb,
        cb,
        0.0,
        sa * cb,
        sa * sb,
        ca,
    );
    Orientation {
        rotation,
        pointing: pointing_vector(alpha, beta),
    }
}

/// First column of [`rotation_matrix`]: `[cos a cos b, -sin b, sin a cos b]`.
pub fn pointing_vector(alpha: f64, beta: f64) -> Vector3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Vector3::new(ca * cb, -sb, sa * cb)
}

/// `f^T e_x = cos(alpha_m) cos(beta_n)`, the cosine of the eccentric angle.
pub fn eccentric_cosine(state: &RotationState, m: usize, n: usize) -> Result<f64> {
    let (a, b) = state.try_angles(m, n)?;
    Ok(a.cos() * b.cos())
}

/// Per-unit check of `cos(theta_max) - tol <= cos a cos b <= 1 + tol`, row-major.
pub fn element_bound_satisfied(state: &RotationState, theta_max: f64, tol: f64) -> Vec<bool> {
    let lower = theta_max.cos() - tol;
    state
        .unit_angles()
        .into_iter()
        .map(|(a, b)| {
            let c = a.cos() * b.cos();
            c >= lower && c <= 1.0 + tol
        })
        .collect()
}

/// `q_b + R * r_local`.
pub fn antenna_global_position(
    center: &Vector3<f64>,
    rotation: &Matrix3<f64>,
    local: &Vector3<f64>,
) -> Vector3<f64> {
    center + rotation * local
}

/// A violated panel constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PanelViolation {
    /// Panel `panel` faces panel `other`: the normal has a positive component
    /// along `q_other - q_panel`.
    Reflection { panel: usize, other: usize, value: f64 },
    /// Panel `panel` faces the array center.
    CpuBlockage { panel: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelCheck {
    pub satisfied: bool,
    pub violations: Vec<PanelViolation>,
}

/// Evaluates the anti-reflection and CPU-blockage constraints of every panel
/// in grid-index units:
///
/// * `-sin(b)(n_j - n) + sin(a)cos(b)(m_j - m) <= tol` for all `j != b`
/// * `sin(a)cos(b) m >= sin(b) n - tol`
pub fn panel_constraints_satisfied(
    state: &RotationState,
    layout: &ArrayLayout,
    tol: f64,
) -> Result<PanelCheck> {
    layout.require_panel()?;
    state.check_layout(layout)?;
    let (rows, cols) = (layout.rows(), layout.cols());
    let mut violations = Vec::new();
    for m in 0..rows {
        for n in 0..cols {
            let b = m * cols + n;
            let (alpha, beta) = state.angles(m, n);
            let sb = beta.sin();
            let sacb = alpha.sin() * beta.cos();
            let (mi, ni) = (layout.row_index(m), layout.col_index(n));
            for mj in 0..rows {
                for nj in 0..cols {
                    let j = mj * cols + nj;
                    if j == b {
                        continue;
                    }
                    let value =
                        -sb * (layout.col_index(nj) - ni) + sacb * (layout.row_index(mj) - mi);
                    if value > tol {
                        violations.push(PanelViolation::Reflection {
                            panel: b,
                            other: j,
                            value,
                        });
                    }
                }
            }
            let value = sacb * mi - sb * ni;
            if value < -tol {
                violations.push(PanelViolation::CpuBlockage { panel: b, value });
            }
        }
    }
    Ok(PanelCheck {
        satisfied: violations.is_empty(),
        violations,
    })
}

/// Admissible sign of one trigonometric factor of the panel normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignCondition {
    Free,
    NonNegative,
    NonPositive,
    Zero,
}

impl SignCondition {
    pub fn holds(self, value: f64, tol: f64) -> bool {
        match self {
            SignCondition::Free => true,
            SignCondition::NonNegative => value >= -tol,
            SignCondition::NonPositive => value <= tol,
            SignCondition::Zero => value.abs() <= tol,
        }
    }
}

/// Closed-form feasible region of one panel on a full grid, expressed as sign
/// conditions on `sin(beta)` and `sin(alpha) cos(beta)`.
///
/// An end panel of a row can only turn its normal outward in azimuth, a
/// middle panel cannot turn in azimuth at all, and likewise in elevation along
/// a column. An interior panel of a 2-D grid keeps its normal on the `x` axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibleRange {
    pub sin_beta: SignCondition,
    pub sin_alpha_cos_beta: SignCondition,
}

impl FeasibleRange {
    pub fn contains(&self, alpha: f64, beta: f64, tol: f64) -> bool {
        self.sin_beta.holds(beta.sin(), tol)
            && self
                .sin_alpha_cos_beta
                .holds(alpha.sin() * beta.cos(), tol)
    }
}

/// Closed-form admissible `(alpha, beta)` region for panel `panel_index`.
pub fn analytic_feasible_range(layout: &ArrayLayout, panel_index: usize) -> Result<FeasibleRange> {
    layout.require_panel()?;
    let (rows, cols) = (layout.rows(), layout.cols());
    if panel_index >= rows * cols {
        return Err(Error::IndexOutOfRange {
            index: panel_index,
            len: rows * cols,
        });
    }
    let (m, n) = (panel_index / cols, panel_index % cols);
    // Neighbours at larger y only (left end) force the normal away from them.
    let sin_beta = match cols {
        1 => SignCondition::Free,
        _ if n == 0 => SignCondition::NonNegative,
        _ if n == cols - 1 => SignCondition::NonPositive,
        _ => SignCondition::Zero,
    };
    let sin_alpha_cos_beta = match rows {
        1 => SignCondition::Free,
        _ if m == 0 => SignCondition::NonPositive,
        _ if m == rows - 1 => SignCondition::NonNegative,
        _ => SignCondition::Zero,
    };
    Ok(FeasibleRange {
        sin_beta,
        sin_alpha_cos_beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_orientation() {
        let o = rotation_matrix(0.0, 0.0);
        assert_eq!(o.rotation, Matrix3::identity());
        assert_eq!(o.pointing, Vector3::x());
    }

    #[test]
    fn quarter_turn_in_elevation_points_up() {
        let f = rotation_matrix(FRAC_PI_2, 0.0).pointing;
        assert!((f - Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn pointing_matches_entries() {
        let (a, b) = (0.3f64, 0.4f64);
        let o = rotation_matrix(a, b);
        let expected = Vector3::new(a.cos() * b.cos(), -b.sin(), a.sin() * b.cos());
        assert!((o.pointing - expected).norm() < 1e-15);
        assert!((o.rotation * Vector3::x() - expected).norm() < 1e-15);
        assert!(close(o.pointing.norm(), 1.0, 1e-15));
    }

    #[test]
    fn factors_compose() {
        let (a, b) = (-1.1, 2.7);
        let direct = rotation_matrix(a, b).rotation;
        let product = rotation_alpha(a) * rotation_beta(b);
        assert!((direct - product).abs().max() < 1e-15);
    }

    #[test]
    fn eccentric_cosine_examples() {
        let s = RotationState::cross_linked(vec![0.0, FRAC_PI_2, 0.3], vec![0.0, 0.4]);
        assert_eq!(eccentric_cosine(&s, 0, 0).unwrap(), 1.0);
        assert!(close(eccentric_cosine(&s, 1, 1).unwrap(), 0.0, 1e-16));
        assert!(close(eccentric_cosine(&s, 2, 1).unwrap(), 0.3f64.cos() * 0.4f64.cos(), 1e-15));
        assert!(close(eccentric_cosine(&s, 2, 1).unwrap(), 0.879_92, 5e-6));
        assert!(matches!(
            eccentric_cosine(&s, 3, 0),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn element_bound_examples() {
        let s = RotationState::cross_linked(vec![0.0], vec![0.0]);
        assert_eq!(element_bound_satisfied(&s, FRAC_PI_6, DEFAULT_TOL), vec![true]);
        let s = RotationState::cross_linked(vec![0.01], vec![0.0]);
        assert_eq!(element_bound_satisfied(&s, 0.0, DEFAULT_TOL), vec![false]);
        let s = RotationState::cross_linked(vec![FRAC_PI_6], vec![0.0]);
        assert_eq!(element_bound_satisfied(&s, FRAC_PI_6, DEFAULT_TOL), vec![true]);
    }

    #[test]
    fn element_positions_are_centered() {
        let l = ArrayLayout::element(3, 2, 0.5).unwrap();
        let p = l.element_positions().unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], Vector3::new(0.0, -0.25, -0.5));
        assert_eq!(p[5], Vector3::new(0.0, 0.25, 0.5));
        let sum: Vector3<f64> = p.iter().sum();
        assert!(sum.norm() < 1e-15);
    }

    #[test]
    fn panel_center_examples() {
        let single = ArrayLayout::panel(1, 1, 4, 4, 0.5).unwrap();
        assert_eq!(single.panel_centers().unwrap(), vec![Vector3::zeros()]);

        let two = ArrayLayout::panel(2, 1, 2, 2, 0.5).unwrap();
        let d = two.panel_pitch().unwrap();
        assert_eq!(d, 1.0);
        let c = two.panel_centers().unwrap();
        assert_eq!(c, vec![Vector3::new(0.0, 0.0, -d / 2.0), Vector3::new(0.0, 0.0, d / 2.0)]);

        let four = ArrayLayout::panel(2, 2, 3, 3, 0.5).unwrap();
        let d = four.panel_pitch().unwrap();
        let c = four.panel_centers().unwrap();
        for (b, q) in c.iter().enumerate() {
            let (m, n) = (b / 2, b % 2);
            assert_eq!(q.y, if n == 0 { -d / 2.0 } else { d / 2.0 });
            assert_eq!(q.z, if m == 0 { -d / 2.0 } else { d / 2.0 });
        }
        assert!(ArrayLayout::element(2, 2, 0.5).unwrap().panel_centers().is_err());
    }

    #[test]
    fn tiled_panels_reproduce_element_grid() {
        let panels = ArrayLayout::panel(2, 2, 4, 4, 0.5).unwrap();
        let elements = ArrayLayout::element(8, 8, 0.5).unwrap();
        let mut a: Vec<_> = panels.reference_positions().iter().map(|p| (p.y, p.z)).collect();
        let mut b: Vec<_> = elements.reference_positions().iter().map(|p| (p.y, p.z)).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (p, q) in a.iter().zip(&b) {
            assert!(close(p.0, q.0, 1e-15) && close(p.1, q.1, 1e-15));
        }
    }

    #[test]
    fn global_position_examples() {
        let q = Vector3::new(0.0, 1.0, -2.0);
        let eye = Matrix3::identity();
        assert_eq!(antenna_global_position(&q, &eye, &Vector3::zeros()), q);
        assert_eq!(
            antenna_global_position(&q, &eye, &Vector3::new(0.0, 0.5, 0.0)),
            q + Vector3::new(0.0, 0.5, 0.0)
        );
        let r = rotation_matrix(FRAC_PI_2, 0.0).rotation;
        let p = antenna_global_position(&q, &r, &Vector3::new(0.0, 0.0, 0.5));
        assert!((p - (q + Vector3::new(-0.5, 0.0, 0.0))).norm() < 1e-15);
    }

    #[test]
    fn panel_constraints_at_rest_and_single_panel() {
        let l = ArrayLayout::panel(3, 3, 2, 2, 0.5).unwrap();
        let zero = RotationState::zeros_for(&l, Coupling::CrossLinked);
        assert!(panel_constraints_satisfied(&zero, &l, DEFAULT_TOL).unwrap().satisfied);

        let one = ArrayLayout::panel(1, 1, 4, 4, 0.5).unwrap();
        let any = RotationState::cross_linked(vec![2.0], vec![-1.0]);
        assert!(panel_constraints_satisfied(&any, &one, DEFAULT_TOL).unwrap().satisfied);
    }

    #[test]
    fn leftmost_panel_cannot_turn_inward() {
        let l = ArrayLayout::panel(1, 3, 2, 2, 0.5).unwrap();
        let s = RotationState::cross_linked(vec![0.0], vec![-0.2, 0.0, 0.0]);
        let check = panel_constraints_satisfied(&s, &l, DEFAULT_TOL).unwrap();
        assert!(!check.satisfied);
        assert!(check
            .violations
            .iter()
            .all(|v| matches!(v, PanelViolation::Reflection { panel: 0, .. }
                | PanelViolation::CpuBlockage { panel: 0, .. })));
        let s = RotationState::cross_linked(vec![0.0], vec![0.2, 0.0, 0.0]);
        assert!(panel_constraints_satisfied(&s, &l, DEFAULT_TOL).unwrap().satisfied);
        assert!(panel_constraints_satisfied(&s, &ArrayLayout::element(1, 3, 0.5).unwrap(), 1e-9)
            .is_err());
    }

    #[test]
    fn closed_form_ranges() {
        let grid = ArrayLayout::panel(3, 3, 2, 2, 0.5).unwrap();
        let interior = analytic_feasible_range(&grid, 4).unwrap();
        assert_eq!(interior.sin_beta, SignCondition::Zero);
        assert_eq!(interior.sin_alpha_cos_beta, SignCondition::Zero);
        assert!(interior.contains(0.0, 0.0, 1e-12));
        assert!(!interior.contains(0.1, 0.0, 1e-12));

        let row = ArrayLayout::panel(1, 3, 2, 2, 0.5).unwrap();
        let middle = analytic_feasible_range(&row, 1).unwrap();
        assert_eq!(middle.sin_beta, SignCondition::Zero);
        assert_eq!(middle.sin_alpha_cos_beta, SignCondition::Free);
        assert!(middle.contains(1.3, 0.0, 1e-12));

        // bottom-right corner of a 3x3 grid: m = 0, n = 2
        let corner = analytic_feasible_range(&grid, 2).unwrap();
        assert_eq!(corner.sin_beta, SignCondition::NonPositive);
        assert_eq!(corner.sin_alpha_cos_beta, SignCondition::NonPositive);

        assert!(analytic_feasible_range(&grid, 9).is_err());
        assert!(analytic_feasible_range(&ArrayLayout::element(2, 2, 0.5).unwrap(), 0).is_err());
    }

    #[test]
    fn wrapping() {
        assert_eq!(wrap_angle(0.3), 0.3);
        assert_eq!(wrap_angle(PI), PI);
        assert!(close(wrap_angle(-PI), PI, 1e-15));
        assert!(close(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, 1e-15));
        assert!(close(wrap_angle(7.0), 7.0 - 2.0 * PI, 1e-15));
    }

    #[test]
    fn state_variable_mapping() {
        let s = RotationState::cross_linked(vec![0.1, 0.2], vec![0.3, 0.4, 0.5]);
        assert_eq!(s.variables_of(1, 2), (1, 4));
        assert_eq!(s.angles(1, 2), (0.2, 0.5));
        let ind = s.to_independent();
        assert_eq!(ind.variable_count(), 12);
        assert_eq!(ind.variables_of(1, 2), (5, 11));
        assert_eq!(ind.unit_angles(), s.unit_angles());
        let u = s.to_vector();
        assert_eq!(s.with_vector(&u), s);
    }
}
