//! Monte Carlo experiments: scenario generation, the comparison schemes,
//! parameter sweeps and their CSV output.

mod config;
mod report;

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{dbm_to_watts, generate_clusters, GainPattern, Scenario, User};
use crate::discrete_ga::{nearest_projection, run_ga, AngleGrid};
use crate::error::{Error, Result};
use crate::geometry::{self, ArrayLayout, Coupling, RotationState, SignCondition, DEFAULT_TOL};
use crate::rng::{self, tag, StreamRng};
use crate::rotation_opt::{alternating_optimize, ConstraintSet, RotationProblem};

pub use config::{ArraySpec, ExperimentConfig, Mode, Scheme, Sweep, SweepVar};
pub use report::{format_summary, summarize, write_csv, write_csv_to, SummaryRow, CSV_HEADER};

/// Seed of trial `trial` under `master`; every draw of the trial derives from it.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    rng::substream_seed(master, &[tag::TRIAL, trial as u64])
}

/// Users and scatterers for one trial.
///
/// Users are spread uniformly by area over the horizontal annulus
/// `user_annulus_m` within the azimuth sector, at `user_height_m`. Users and
/// clusters come from separate streams, so changing `K` keeps the scatterers
/// and the first users of a trial unchanged.
pub fn generate_scenario(config: &ExperimentConfig, trial: usize) -> Result<Scenario> {
    let seed = trial_seed(config.seed, trial);
    let mut ur = rng::substream(seed, &[tag::USERS]);
    let [r1, r2] = config.user_annulus_m;
    let power = dbm_to_watts(config.power_dbm);
    let users = (0..config.users)
        .map(|_| {
            let rho = (r1 * r1 + (r2 * r2 - r1 * r1) * ur.random::<f64>()).sqrt();
            let phi = config.user_sector_rad * (2.0 * ur.random::<f64>() - 1.0);
            User::new(
                Vector3::new(rho * phi.cos(), rho * phi.sin(), config.user_height_m),
                power,
            )
        })
        .collect();
    let mut cr = rng::substream(seed, &[tag::CLUSTERS]);
    let clusters = generate_clusters(
        &mut cr,
        config.clusters,
        config.cluster_annulus_m,
        config.cluster_height_m,
        config.rcs_m2,
    );
    Scenario::new(
        users,
        clusters,
        dbm_to_watts(config.noise_dbm),
        config.wavelength_m,
        GainPattern::new(config.directivity)?,
        seed,
    )
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, cond: SignCondition, half_width: f64) -> f64 {
    let u: f64 = rng.random();
    match cond {
        SignCondition::Free => half_width * (2.0 * u - 1.0),
        SignCondition::NonNegative => half_width * u,
        SignCondition::NonPositive => -half_width * u,
        SignCondition::Zero => 0.0,
    }
}

const MAX_REJECTIONS: usize = 10_000;

/// Independent random orientation of every unit satisfying `constraints`.
///
/// Each angle is uniform on `[-theta_max, theta_max]`, restricted for panels
/// to the sign pattern their position allows, and draws are rejected until
/// the unit is feasible. Units that never become feasible stay at the
/// reference orientation.
pub fn random_orientation<R: Rng + ?Sized>(
    layout: &ArrayLayout,
    constraints: ConstraintSet,
    rng: &mut R,
) -> Result<RotationState> {
    let theta = constraints.theta_max.unwrap_or(PI);
    let units = layout.units();
    let mut alpha = vec![0.0; units];
    let mut beta = vec![0.0; units];
    let single = |a: f64, b: f64| RotationState::cross_linked(vec![a], vec![b]);
    for u in 0..units {
        let range = if constraints.panel_geometry {
            Some(geometry::analytic_feasible_range(layout, u)?)
        } else {
            None
        };
        for _ in 0..MAX_REJECTIONS {
            let (a, b) = match range {
                Some(r) if theta < PI / 2.0 => (
                    uniform_in(rng, r.sin_alpha_cos_beta, theta),
                    uniform_in(rng, r.sin_beta, theta),
                ),
                _ => (
                    uniform_in(rng, SignCondition::Free, theta),
                    uniform_in(rng, SignCondition::Free, theta),
                ),
            };
            let eccentric_ok = constraints
                .theta_max
                .is_none_or(|t| geometry::element_bound_satisfied(&single(a, b), t, DEFAULT_TOL)[0]);
            let panel_ok = range.is_none_or(|r| r.contains(a, b, DEFAULT_TOL));
            if eccentric_ok && panel_ok {
                alpha[u] = a;
                beta[u] = b;
                break;
            }
        }
    }
    RotationState::independent(layout.rows(), layout.cols(), alpha, beta)
}

/// Sum rate of one scheme on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub sum_rate: f64,
    pub user_rates: Vec<f64>,
    /// Outer iterations for the optimizing schemes, generations for the
    /// genetic algorithm, zero otherwise.
    pub iterations: usize,
    pub state: RotationState,
}

/// Runs `scheme` on `scenario` with the array and parameters of `config`.
///
/// `seed` keys the random draws of the randomized schemes.
pub fn run_scheme(
    scheme: Scheme,
    scenario: &Scenario,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<SchemeResult> {
    let panels = scheme.uses_panels(config.mode);
    let layout = match scheme {
        Scheme::ArrayWise => config.array_wise_layout()?,
        _ if panels => config.panel_layout()?,
        _ => config.element_layout()?,
    };
    let constraints = config.constraints(panels || scheme == Scheme::ArrayWise);
    let theta = config.theta_max_rad;

    let optimize = |coupling: Coupling| -> Result<SchemeResult> {
        let problem = RotationProblem::new(scenario, &layout, coupling, constraints)?;
        let out = alternating_optimize(&problem, &config.ao)?;
        Ok(SchemeResult {
            sum_rate: out.report.sum,
            user_rates: out.report.rates.clone(),
            iterations: out.outer_iterations(),
            state: out.state,
        })
    };
    let evaluate = |scenario: &Scenario, state: RotationState, iterations: usize| -> Result<SchemeResult> {
        let problem = RotationProblem::new(scenario, &layout, state.coupling(), constraints)?;
        let report = problem.mmse(&state)?.1;
        Ok(SchemeResult {
            sum_rate: report.sum,
            user_rates: report.rates,
            iterations,
            state,
        })
    };

    match scheme {
        Scheme::ClElement | Scheme::ClPanel | Scheme::ArrayWise => optimize(Coupling::CrossLinked),
        Scheme::FlexibleElement | Scheme::FlexiblePanel => optimize(Coupling::Independent),
        Scheme::Fixed => evaluate(scenario, RotationState::zeros_for(&layout, Coupling::CrossLinked), 0),
        Scheme::Isotropic => evaluate(
            &scenario.with_pattern(GainPattern::isotropic()),
            RotationState::zeros_for(&layout, Coupling::CrossLinked),
            0,
        ),
        Scheme::RandomOrientation => {
            let mut r: StreamRng = rng::substream(seed, &[tag::RANDOM_ORIENTATION]);
            evaluate(scenario, random_orientation(&layout, constraints, &mut r)?, 0)
        }
        Scheme::GaElement | Scheme::GaPanel => {
            let grid = AngleGrid::uniform(theta, config.grid_points)?;
            let problem = RotationProblem::new(scenario, &layout, Coupling::CrossLinked, constraints)?;
            let out = run_ga(&problem, &grid, &config.ga, rng::substream_seed(seed, &[tag::GA]))?;
            Ok(SchemeResult {
                sum_rate: out.report.sum,
                user_rates: out.report.rates,
                iterations: config.ga.generations,
                state: out.state,
            })
        }
        Scheme::NearestProjection => {
            let continuous = optimize(Coupling::CrossLinked)?;
            let grid = AngleGrid::uniform(theta, config.grid_points)?;
            let projected = nearest_projection(&continuous.state, &grid, &layout, constraints)?;
            evaluate(scenario, projected.state, continuous.iterations)
        }
    }
}

/// One line of experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub sum_rate: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub user_rates: Vec<f64>,
}

/// Runs every scheme at every sweep point for every trial.
///
/// Rows come back ordered by scheme, then sweep value, then trial, however
/// the work was scheduled. All schemes see the same scenario for a given
/// trial and sweep point.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let points: Vec<(SweepVar, f64, ExperimentConfig)> = config
        .points()
        .into_iter()
        .map(|(var, value)| Ok((var, value, config.at(var, value)?)))
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for &scheme in &config.schemes {
        for point in &points {
            for trial in 0..config.trials {
                jobs.push((scheme, point, trial));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(scheme, (var, value, point), trial)| {
            let seed = trial_seed(point.seed, trial);
            let scenario = generate_scenario(point, trial)?;
            let start = Instant::now();
            let result = run_scheme(scheme, &scenario, point, seed).map_err(|e| match e {
                Error::InvalidParameter(msg) => {
                    Error::InvalidParameter(format!("{scheme} at {var} = {value}: {msg}"))
                }
                other => other,
            })?;
            let wall_ms = if config.record_wall_time {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            Ok(ResultRow {
                scheme,
                sweep_var: *var,
                sweep_value: *value,
                trial,
                seed,
                sum_rate: result.sum_rate,
                iterations: result.iterations,
                wall_ms,
                user_rates: result.user_rates,
            })
        })
        .collect()
}
