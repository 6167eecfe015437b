//! Rotation-angle optimization for a fixed scenario.
//!
//! The inner solver is a feasible-direction (Frank-Wolfe style) ascent on the
//! sum rate with the combiners held fixed: a central-difference gradient, a
//! linear program over the step inside a trust box, and an Armijo line search
//! that only accepts exactly feasible points. The outer loop alternates that
//! ascent with MMSE combiner updates until the sum rate stops improving.

mod constraints;
mod oracle;

use rayon::prelude::*;

use crate::beamforming::{self, BeamformerSet, RateReport};
use crate::channel::{ChannelMatrix, ChannelModel, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{self, ArrayLayout, Coupling, RotationState, DEFAULT_TOL};
use crate::linprog::{solve_lp, LinearProgram, LpStatus};

pub use constraints::{
    linear_form, linearized_element_constraints, linearized_panel_constraints,
    remainder_margins, LinearizedRow, RowKind,
};
pub use oracle::{single_user_oracle, SingleUserOptimum};

/// Which orientation constraints apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet {
    /// Bound on the angle between each unit's pointing vector and `+x`.
    pub theta_max: Option<f64>,
    /// Panel anti-reflection and center-facing constraints.
    pub panel_geometry: bool,
}

impl ConstraintSet {
    /// The eccentric bound alone, as used for individually rotated antennas.
    pub fn eccentric(theta_max: f64) -> Self {
        Self {
            theta_max: Some(theta_max),
            panel_geometry: false,
        }
    }

    /// Panel geometry constraints together with the eccentric bound.
    pub fn panel(theta_max: f64) -> Self {
        Self {
            theta_max: Some(theta_max),
            panel_geometry: true,
        }
    }

    pub fn satisfied(&self, state: &RotationState, layout: &ArrayLayout, tol: f64) -> Result<bool> {
        state.check_layout(layout)?;
        if let Some(t) = self.theta_max {
            if !geometry::element_bound_satisfied(state, t, tol).iter().all(|&b| b) {
                return Ok(false);
            }
        }
        if self.panel_geometry {
            return Ok(geometry::panel_constraints_satisfied(state, layout, tol)?.satisfied);
        }
        Ok(true)
    }

    /// All linearized rows at `state` for trust radius `delta`.
    pub fn linearize(
        &self,
        state: &RotationState,
        layout: &ArrayLayout,
        delta: f64,
    ) -> Result<Vec<LinearizedRow>> {
        let mut rows = match self.theta_max {
            Some(t) => linearized_element_constraints(state, t, delta),
            None => Vec::new(),
        };
        if self.panel_geometry {
            rows.extend(linearized_panel_constraints(state, layout, delta)?);
        }
        Ok(rows)
    }
}

/// A scenario, an array and its constraints, with channel evaluation cached.
#[derive(Debug, Clone)]
pub struct RotationProblem<'a> {
    scenario: &'a Scenario,
    layout: &'a ArrayLayout,
    model: ChannelModel<'a>,
    powers: Vec<f64>,
    coupling: Coupling,
    constraints: ConstraintSet,
}

impl<'a> RotationProblem<'a> {
    pub fn new(
        scenario: &'a Scenario,
        layout: &'a ArrayLayout,
        coupling: Coupling,
        constraints: ConstraintSet,
    ) -> Result<Self> {
        if constraints.panel_geometry && !layout.is_panel() {
            return Err(Error::WrongMode {
                expected: "panel",
                actual: layout.mode().name(),
            });
        }
        Ok(Self {
            scenario,
            layout,
            model: ChannelModel::new(scenario, layout)?,
            powers: scenario.normalized_powers(),
            coupling,
            constraints,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn layout(&self) -> &ArrayLayout {
        self.layout
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn constraints(&self) -> ConstraintSet {
        self.constraints
    }

    /// All units at the reference orientation.
    pub fn initial_state(&self) -> RotationState {
        RotationState::zeros_for(self.layout, self.coupling)
    }

    pub fn channel(&self, state: &RotationState) -> Result<ChannelMatrix> {
        self.model.channel(state)
    }

    /// Sum rate at `state` with the combiners `w` held fixed.
    pub fn objective(&self, state: &RotationState, w: &BeamformerSet) -> Result<f64> {
        let h = self.channel(state)?;
        Ok(beamforming::sum_rate(&h, w, &self.powers).sum)
    }

    /// MMSE combiners at `state` and the resulting rates.
    pub fn mmse(&self, state: &RotationState) -> Result<(BeamformerSet, RateReport)> {
        beamforming::mmse_sum_rate(&self.channel(state)?, &self.powers)
    }

    pub fn is_feasible(&self, state: &RotationState, tol: f64) -> Result<bool> {
        self.constraints.satisfied(state, self.layout, tol)
    }

    /// Central-difference gradient of the fixed-combiner sum rate.
    ///
    /// Component `j` perturbs the `j`-th entry of `[alpha..., beta...]`.
    pub fn gradient(&self, state: &RotationState, w: &BeamformerSet, step: f64) -> Result<Vec<f64>> {
        let u = state.to_vector();
        (0..u.len())
            .into_par_iter()
            .map(|j| {
                let mut plus = u.clone();
                let mut minus = u.clone();
                plus[j] += step;
                minus[j] -= step;
                let up = self.objective(&state.with_vector(&plus), w)?;
                let down = self.objective(&state.with_vector(&minus), w)?;
                Ok((up - down) / (2.0 * step))
            })
            .collect()
    }
}

/// Central-difference gradient of the sum rate at `state` with `w` fixed,
/// for an unconstrained cross-linked or independent state on `layout`.
pub fn objective_gradient(
    scenario: &Scenario,
    layout: &ArrayLayout,
    state: &RotationState,
    w: &BeamformerSet,
    step: f64,
) -> Result<Vec<f64>> {
    let none = ConstraintSet {
        theta_max: None,
        panel_geometry: false,
    };
    RotationProblem::new(scenario, layout, state.coupling(), none)?.gradient(state, w, step)
}

/// Parameters of the feasible-direction ascent.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FeasDirParams {
    /// Step shrink factor of the line search.
    pub rho: f64,
    /// Fraction of the predicted gain a step must achieve.
    pub upsilon: f64,
    /// First step size tried, in `(0, 1]`.
    pub iota0: f64,
    /// Trust radius on each angle change per iteration, radians.
    pub delta: f64,
    /// Finite-difference step, radians.
    pub fd_step: f64,
    /// Stop when the predicted gain drops below this.
    pub tol: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
}

impl Default for FeasDirParams {
    fn default() -> Self {
        Self {
            rho: 0.5,
            upsilon: 0.1,
            iota0: 1.0,
            delta: 0.05,
            fd_step: 1e-5,
            tol: 1e-4,
            max_iters: 100,
            max_backtracks: 40,
        }
    }
}

impl FeasDirParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0
            && self.rho < 1.0
            && self.upsilon > 0.0
            && self.upsilon < 1.0
            && self.iota0 > 0.0
            && self.iota0 <= 1.0
            && self.delta >= 0.0
            && self.fd_step > 0.0
            && self.tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("feasible-direction parameters {self:?}")))
        }
    }
}

/// Why an optimizer loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Predicted gain of the best direction is below tolerance.
    Stationary,
    /// No step size passed the feasibility and sufficient-increase tests.
    LineSearchFailed,
    IterationLimit,
    /// Outer objective change below tolerance.
    Converged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub objective: f64,
    /// Accepted step size; zero for records without a step.
    pub step: f64,
    pub lp_status: Option<LpStatus>,
    /// Exact feasibility of the recorded iterate.
    pub feasible: bool,
    pub gradient_norm: f64,
    /// Predicted gain `grad . d` of the chosen direction.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerTrace {
    pub records: Vec<TraceRecord>,
    pub stop: StopReason,
}

impl OptimizerTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Whether the objective never drops by more than `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].objective >= w[0].objective - tol)
    }

    /// Number of accepted steps.
    pub fn steps(&self) -> usize {
        self.records.iter().filter(|r| r.step > 0.0).count()
    }
}

/// Direction-finding program: maximize `g . d` over `d = d_plus - d_minus`,
/// `0 <= d_plus, d_minus <= delta`, subject to the linearized rows.
fn direction_program(g: &[f64], rows: &[LinearizedRow], delta: f64) -> Result<LinearProgram> {
    let n = g.len();
    let objective: Vec<f64> = g.iter().copied().chain(g.iter().map(|x| -x)).collect();
    let mut lp = LinearProgram::new(objective, vec![0.0; 2 * n], vec![delta; 2 * n])?;
    for r in rows {
        if r.kind == RowKind::EccentricUpper {
            continue;
        }
        let mut coeffs = vec![0.0; 2 * n];
        let (ia, ib) = r.variables;
        coeffs[ia] += -r.gradient.0 + r.margin.0;
        coeffs[n + ia] += r.gradient.0 + r.margin.0;
        coeffs[ib] += -r.gradient.1 + r.margin.1;
        coeffs[n + ib] += r.gradient.1 + r.margin.1;
        lp.add_row(coeffs, r.slack.max(0.0))?;
    }
    Ok(lp)
}

/// Feasible-direction ascent on the sum rate with `w` fixed.
///
/// Every accepted iterate satisfies the exact constraints; the returned trace
/// starts with the objective at `start` and has one record per iteration.
pub fn feasible_direction(
    problem: &RotationProblem<'_>,
    start: &RotationState,
    w: &BeamformerSet,
    params: &FeasDirParams,
) -> Result<(RotationState, OptimizerTrace)> {
    params.validate()?;
    if !problem.is_feasible(start, DEFAULT_TOL)? {
        return Err(Error::InfeasibleStart);
    }
    let mut state = start.clone();
    let mut value = problem.objective(&state, w)?;
    let mut records = vec![TraceRecord {
        objective: value,
        step: 0.0,
        lp_status: None,
        feasible: true,
        gradient_norm: 0.0,
        gap: 0.0,
    }];
    let mut stop = StopReason::IterationLimit;
    for _ in 0..params.max_iters {
        let g = problem.gradient(&state, w, params.fd_step)?;
        let grad_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rows = problem
            .constraints()
            .linearize(&state, problem.layout(), params.delta)?;
        let lp = direction_program(&g, &rows, params.delta)?;
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(Error::DirectionLp("infeasible")),
            LpStatus::Unbounded => return Err(Error::DirectionLp("unbounded")),
        }
        let n = g.len();
        let d: Vec<f64> = (0..n).map(|j| sol.x[j] - sol.x[n + j]).collect();
        let gap: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if gap <= params.tol {
            records.push(TraceRecord {
                objective: value,
                step: 0.0,
                lp_status: Some(sol.status),
                feasible: true,
                gradient_norm: grad_norm,
                gap,
            });
            stop = StopReason::Stationary;
            break;
        }

        let u = state.to_vector();
        let mut iota = params.iota0;
        let mut accepted = None;
        for _ in 0..=params.max_backtracks {
            let moved: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + iota * b).collect();
            let candidate = state.with_vector(&moved);
            if problem.is_feasible(&candidate, DEFAULT_TOL)? {
                let v = problem.objective(&candidate, w)?;
                if v - value >= params.upsilon * iota * gap {
                    accepted = Some((candidate, v));
                    break;
                }
            }
            iota *= params.rho;
        }
        match accepted {
            Some((candidate, v)) => {
                state = candidate;
                value = v;
                records.push(TraceRecord {
                    objective: value,
                    step: iota,
                    lp_status: Some(sol.status),
                    feasible: true,
                    gradient_norm: grad_norm,
                    gap,
                });
            }
            None => {
                records.push(TraceRecord {
                    objective: value,
                    step: 0.0,
                    lp_status: Some(sol.status),
                    feasible: true,
                    gradient_norm: grad_norm,
                    gap,
                });
                stop = StopReason::LineSearchFailed;
                break;
            }
        }
    }
    Ok((state, OptimizerTrace { records, stop }))
}

/// Parameters of the alternating optimization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AoParams {
    pub inner: FeasDirParams,
    /// Stop when the sum rate changes by at most this between outer iterations.
    pub tol: f64,
    pub max_outer: usize,
}

impl Default for AoParams {
    fn default() -> Self {
        Self {
            inner: FeasDirParams::default(),
            tol: 1e-3,
            max_outer: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub beamformers: BeamformerSet,
    pub state: RotationState,
    pub report: RateReport,
    /// Sum rate after every MMSE update, starting at the initial state.
    pub trace: OptimizerTrace,
    /// One inner trace per outer iteration.
    pub inner: Vec<OptimizerTrace>,
}

impl AoOutcome {
    pub fn outer_iterations(&self) -> usize {
        self.inner.len()
    }

    pub fn inner_iterations(&self) -> usize {
        self.inner.iter().map(|t| t.records.len() - 1).sum()
    }
}

/// Alternates MMSE combining and feasible-direction rotation updates from
/// the reference orientation.
pub fn alternating_optimize(problem: &RotationProblem<'_>, params: &AoParams) -> Result<AoOutcome> {
    alternating_optimize_from(problem, &problem.initial_state(), params)
}

pub fn alternating_optimize_from(
    problem: &RotationProblem<'_>,
    start: &RotationState,
    params: &AoParams,
) -> Result<AoOutcome> {
    if !problem.is_feasible(start, DEFAULT_TOL)? {
        return Err(Error::InfeasibleStart);
    }
    let mut state = start.clone();
    let (mut w, mut report) = problem.mmse(&state)?;
    let mut records = vec![TraceRecord {
        objective: report.sum,
        step: 0.0,
        lp_status: None,
        feasible: true,
        gradient_norm: 0.0,
        gap: 0.0,
    }];
    let mut inner = Vec::new();
    let mut stop = StopReason::IterationLimit;
    for _ in 0..params.max_outer {
        let (next, trace) = feasible_direction(problem, &state, &w, &params.inner)?;
        let (next_w, next_report) = problem.mmse(&next)?;
        let last = trace.records.last().expect("trace has a start record");
        records.push(TraceRecord {
            objective: next_report.sum,
            step: trace.records.iter().map(|r| r.step).sum(),
            lp_status: last.lp_status,
            feasible: problem.is_feasible(&next, DEFAULT_TOL)?,
            gradient_norm: last.gradient_norm,
            gap: last.gap,
        });
        inner.push(trace);
        let change = (next_report.sum - report.sum).abs();
        state = next;
        w = next_w;
        report = next_report;
        if change <= params.tol {
            stop = StopReason::Converged;
            break;
        }
    }
    Ok(AoOutcome {
        beamformers: w,
        state,
        report,
        trace: OptimizerTrace { records, stop },
        inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Cluster, GainPattern, User};
    use nalgebra::Vector3;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn scenario(users: &[[f64; 3]], clusters: Vec<Cluster>) -> Scenario {
        Scenario::new(
            users.iter().map(|v| User::new(Vector3::from(*v), 0.01)).collect(),
            clusters,
            1e-11,
            0.0857,
            GainPattern::new(2.0).unwrap(),
            0,
        )
        .unwrap()
    }

    fn small_multiuser() -> Scenario {
        scenario(
            &[[50.0, 20.0, -10.0], [60.0, -25.0, -10.0], [55.0, 5.0, -10.0]],
            vec![
                Cluster::new(Vector3::new(30.0, 10.0, 3.0), 1.0, 0.7),
                Cluster::new(Vector3::new(25.0, -20.0, -5.0), 1.0, 2.1),
            ],
        )
    }

    #[test]
    fn gradient_vanishes_on_boresight() {
        let s = scenario(&[[20.0, 0.0, 0.0]], vec![]);
        let layout = ArrayLayout::element(1, 1, 0.04).unwrap();
        let state = RotationState::zeros_for(&layout, Coupling::CrossLinked);
        let h = element_h(&s, &layout, &state);
        let w = beamforming::mrc_all(&h);
        let g = objective_gradient(&s, &layout, &state, &w, 1e-5).unwrap();
        assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-4);
    }

    fn element_h(s: &Scenario, l: &ArrayLayout, st: &RotationState) -> ChannelMatrix {
        crate::channel::element_channel_matrix(s, l, st).unwrap()
    }

    #[test]
    fn symmetric_plane_zeroes_azimuth_component() {
        // user in the x-z plane in front of a single antenna
        let s = scenario(&[[30.0, 0.0, -8.0]], vec![]);
        let layout = ArrayLayout::element(1, 1, 0.04).unwrap();
        let state = RotationState::zeros_for(&layout, Coupling::CrossLinked);
        let w = beamforming::mrc_all(&element_h(&s, &layout, &state));
        let g = objective_gradient(&s, &layout, &state, &w, 1e-5).unwrap();
        assert!(g[1].abs() < 1e-9 * g[0].abs().max(1.0));
        assert!(g[0] < 0.0, "tilting down towards the user helps");
    }

    #[test]
    fn central_and_one_sided_differences_agree() {
        let s = small_multiuser();
        let layout = ArrayLayout::element(2, 3, 0.04).unwrap();
        let state = RotationState::cross_linked(vec![0.1, -0.05], vec![0.2, 0.0, -0.1]);
        let problem =
            RotationProblem::new(&s, &layout, Coupling::CrossLinked, ConstraintSet::eccentric(1.0))
                .unwrap();
        let (w, _) = problem.mmse(&problem.initial_state()).unwrap();
        let g = problem.gradient(&state, &w, 1e-5).unwrap();
        let scale = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let base = problem.objective(&state, &w).unwrap();
        let u = state.to_vector();
        for j in 0..u.len() {
            let mut v = u.clone();
            v[j] += 1e-7;
            let one = (problem.objective(&state.with_vector(&v), &w).unwrap() - base) / 1e-7;
            assert!((one - g[j]).abs() <= 1e-3 * scale, "{j}: {one} vs {}", g[j]);
        }
    }

    #[test]
    fn inner_loop_is_monotone_and_feasible() {
        let s = small_multiuser();
        let layout = ArrayLayout::element(3, 3, 0.04).unwrap();
        let problem = RotationProblem::new(
            &s,
            &layout,
            Coupling::CrossLinked,
            ConstraintSet::eccentric(FRAC_PI_6),
        )
        .unwrap();
        let start = problem.initial_state();
        let (w, _) = problem.mmse(&start).unwrap();
        let (end, trace) = feasible_direction(&problem, &start, &w, &FeasDirParams::default()).unwrap();
        assert!(trace.is_monotone(1e-9));
        assert!(trace.steps() > 0);
        assert!(problem.is_feasible(&end, DEFAULT_TOL).unwrap());
        assert!(trace.objectives().last().unwrap() > &trace.objectives()[0]);
    }

    #[test]
    fn zero_bound_or_zero_radius_keeps_reference_orientation() {
        let s = small_multiuser();
        let layout = ArrayLayout::element(2, 2, 0.04).unwrap();
        let fixed = RotationProblem::new(
            &s,
            &layout,
            Coupling::CrossLinked,
            ConstraintSet::eccentric(0.0),
        )
        .unwrap();
        let out = alternating_optimize(&fixed, &AoParams::default()).unwrap();
        assert!(out.state.to_vector().iter().all(|&x| x == 0.0));
        let reference = fixed.mmse(&fixed.initial_state()).unwrap().1.sum;
        assert_eq!(out.report.sum, reference);

        let open = RotationProblem::new(
            &s,
            &layout,
            Coupling::CrossLinked,
            ConstraintSet::eccentric(FRAC_PI_6),
        )
        .unwrap();
        let mut params = AoParams::default();
        params.inner.delta = 0.0;
        let out = alternating_optimize(&open, &params).unwrap();
        assert_eq!(out.report.sum, reference);
    }

    #[test]
    fn ao_trace_is_monotone_and_converges() {
        let s = small_multiuser();
        let layout = ArrayLayout::element(2, 4, 0.04).unwrap();
        let problem = RotationProblem::new(
            &s,
            &layout,
            Coupling::CrossLinked,
            ConstraintSet::eccentric(FRAC_PI_6),
        )
        .unwrap();
        let out = alternating_optimize(&problem, &AoParams::default()).unwrap();
        assert!(out.trace.is_monotone(1e-9));
        assert_eq!(out.trace.stop, StopReason::Converged);
        assert!(out.report.sum >= out.trace.records[0].objective);
        assert!(problem.is_feasible(&out.state, DEFAULT_TOL).unwrap());
        for t in &out.inner {
            assert!(t.is_monotone(1e-9));
        }
    }

    #[test]
    fn panel_problem_stays_feasible() {
        let s = small_multiuser();
        let layout = ArrayLayout::panel(2, 2, 2, 2, 0.04).unwrap();
        let problem =
            RotationProblem::new(&s, &layout, Coupling::CrossLinked, ConstraintSet::panel(FRAC_PI_6))
                .unwrap();
        let out = alternating_optimize(&problem, &AoParams::default()).unwrap();
        assert!(out.trace.is_monotone(1e-9));
        assert!(problem.is_feasible(&out.state, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let s = small_multiuser();
        let layout = ArrayLayout::element(1, 1, 0.04).unwrap();
        let problem =
            RotationProblem::new(&s, &layout, Coupling::CrossLinked, ConstraintSet::eccentric(0.1))
                .unwrap();
        let bad = RotationState::cross_linked(vec![0.5], vec![0.0]);
        let (w, _) = problem.mmse(&bad).unwrap();
        assert!(matches!(
            feasible_direction(&problem, &bad, &w, &FeasDirParams::default()),
            Err(Error::InfeasibleStart)
        ));
        let el = ArrayLayout::element(2, 2, 0.04).unwrap();
        assert!(RotationProblem::new(&s, &el, Coupling::CrossLinked, ConstraintSet::panel(0.1)).is_err());
    }

    #[test]
    fn direction_program_respects_tight_bound() {
        // at theta_max = pi/2 the lower rows are inactive at rest
        let state = RotationState::zeros(1, 2, Coupling::CrossLinked);
        let rows = linearized_element_constraints(&state, FRAC_PI_2, 0.05);
        let lp = direction_program(&[1.0, -1.0, 1.0], &rows, 0.05).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 0.15).abs() < 1e-12);
    }
}
