//! Self-checks of the model and solvers against closed forms and brute force.
//!
//! Each check draws its own random instances from the given seed and reports
//! the worst deviation it saw. The `validate` command of the CLI prints them.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DVector, Matrix3, Vector3};
use rand::Rng;

use crate::beamforming;
use crate::channel::{directional_gain, ChannelMatrix, C64, GainPattern, Scenario, User};
use crate::error::Result;
use crate::geometry::{self, ArrayLayout, Coupling, RotationState};
use crate::rng;
use crate::rotation_opt::{alternating_optimize, single_user_oracle, AoParams, ConstraintSet, RotationProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Instance counts for [`run_all`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub seed: u64,
    pub rotations: usize,
    pub woodbury_instances: usize,
    pub sinr_scenarios: usize,
    pub random_beamformers: usize,
    pub single_user_instances: usize,
    pub region_samples: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            rotations: 100_000,
            woodbury_instances: 100,
            sinr_scenarios: 20,
            random_beamformers: 1000,
            single_user_instances: 5,
            region_samples: 100_000,
        }
    }
}

/// Integral of the gain pattern over the front hemisphere, which equals
/// `4 pi` for every directivity.
pub fn hemisphere_gain_integral(pattern: &GainPattern, tol: f64) -> f64 {
    let f = |eps: f64| directional_gain(pattern, eps.cos()) * 2.0 * PI * eps.sin();
    quadrature::integrate(f, 0.0, FRAC_PI_2, tol).integral
}

/// Largest orthogonality, determinant and pointing-norm error over random angles.
pub fn rotation_errors<R: Rng + ?Sized>(rng: &mut R, samples: usize) -> (f64, f64, f64) {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let a = PI * (2.0 * rng.random::<f64>() - 1.0);
        let b = PI * (2.0 * rng.random::<f64>() - 1.0);
        let o = geometry::rotation_matrix(a, b);
        let ortho = (o.rotation.transpose() * o.rotation - Matrix3::identity()).abs().max();
        worst.0 = worst.0.max(ortho);
        worst.1 = worst.1.max((o.rotation.determinant() - 1.0).abs());
        worst.2 = worst.2.max((o.pointing.norm() - 1.0).abs());
    }
    worst
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    // Box-Muller
    let u: f64 = 1.0 - rng.random::<f64>();
    let v: f64 = rng.random();
    let r = (-u.ln()).sqrt();
    C64::from_polar(r, 2.0 * PI * v)
}

/// `q x k` matrix of independent unit-variance complex Gaussian entries.
pub fn random_channel<R: Rng + ?Sized>(rng: &mut R, q: usize, k: usize) -> ChannelMatrix {
    ChannelMatrix::new(nalgebra::DMatrix::from_fn(q, k, |_, _| complex_gaussian(rng)))
}

/// Uniformly distributed unit vector in `C^q`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, q: usize) -> DVector<C64> {
    let v = DVector::from_fn(q, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v / C64::from(n)
}

/// Worst relative difference between the low-rank and direct MMSE combiners.
pub fn woodbury_error<R: Rng + ?Sized>(rng: &mut R, instances: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let q = rng.random_range(1..=64);
        let k = rng.random_range(1..=8);
        let h = random_channel(rng, q, k);
        let powers: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-1.0..3.0))).collect();
        for user in 0..k {
            let fast = beamforming::mmse(&h, &powers, user)?;
            let direct = beamforming::mmse_direct(&h, &powers, user)?;
            worst = worst.max((fast - &direct).norm() / direct.norm());
        }
    }
    Ok(worst)
}

/// Smallest `sinr(mmse) - sinr(random)` over random channels and combiners;
/// nonnegative when the MMSE combiner is SINR-optimal.
pub fn mmse_sinr_margin<R: Rng + ?Sized>(rng: &mut R, scenarios: usize, beams: usize) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for _ in 0..scenarios {
        let q = rng.random_range(2..=16);
        let k = rng.random_range(1..=6);
        let h = random_channel(rng, q, k);
        let powers: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect();
        let user = rng.random_range(0..k);
        let best = beamforming::sinr_with(&h, &beamforming::mmse(&h, &powers, user)?, &powers, user);
        for _ in 0..beams {
            let w = random_unit_vector(rng, q);
            worst = worst.min(best - beamforming::sinr_with(&h, &w, &powers, user));
        }
    }
    Ok(worst)
}

/// A single user in front of a `1 x cols` array with no scatterers.
pub fn single_user_scenario<R: Rng + ?Sized>(rng: &mut R) -> Result<Scenario> {
    let r: f64 = rng.random_range(5.0..40.0);
    let azimuth: f64 = rng.random_range(-1.2..1.2);
    let elevation: f64 = rng.random_range(-1.0..1.0);
    let v = Vector3::new(
        r * elevation.cos() * azimuth.cos(),
        r * elevation.cos() * azimuth.sin(),
        r * elevation.sin(),
    );
    Scenario::new(vec![User::new(v, 1e-2)], vec![], 1e-11, 0.0857, GainPattern::new(2.0)?, 0)
}

/// Worst relative SNR shortfall of alternating optimization against the
/// closed-form single-user optimum on a `1 x 8` array with no angle bound.
pub fn single_user_gap<R: Rng + ?Sized>(rng: &mut R, instances: usize) -> Result<f64> {
    let layout = ArrayLayout::element(1, 8, 0.0857 / 2.0)?;
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let s = single_user_scenario(rng)?;
        let oracle = single_user_oracle(&s, &layout, FRAC_PI_2)?;
        let problem = RotationProblem::new(&s, &layout, Coupling::CrossLinked, ConstraintSet::eccentric(FRAC_PI_2))?;
        let out = alternating_optimize(&problem, &AoParams::default())?;
        worst = worst.max((oracle.snr - out.report.sinr[0]) / oracle.snr);
    }
    Ok(worst)
}

/// Disagreements between the closed-form panel regions and direct
/// constraint evaluation, over random angles on every panel of several grids.
pub fn panel_region_mismatches<R: Rng + ?Sized>(rng: &mut R, samples: usize) -> Result<usize> {
    let mut mismatches = 0;
    for (rows, cols) in [(1, 2), (1, 3), (2, 1), (3, 1), (2, 2), (3, 3)] {
        let layout = ArrayLayout::panel(rows, cols, 2, 2, 0.05)?;
        let ranges: Vec<_> = (0..layout.units())
            .map(|b| geometry::analytic_feasible_range(&layout, b))
            .collect::<Result<_>>()?;
        for _ in 0..samples / 6 {
            let b = rng.random_range(0..layout.units());
            // one angle in eight is exactly zero so the zero-sign cases get hit
            let mut draw = || match rng.random_range(0..8) {
                0 => 0.0,
                _ => PI * (2.0 * rng.random::<f64>() - 1.0),
            };
            let (a, be) = (draw(), draw());
            let mut alpha = vec![0.0; layout.units()];
            let mut beta = vec![0.0; layout.units()];
            alpha[b] = a;
            beta[b] = be;
            let state = RotationState::independent(rows, cols, alpha, beta)?;
            let check = geometry::panel_constraints_satisfied(&state, &layout, 1e-12)?;
            let direct = !check.violations.iter().any(|v| match v {
                geometry::PanelViolation::Reflection { panel, .. } => *panel == b,
                geometry::PanelViolation::CpuBlockage { panel, .. } => *panel == b,
            });
            if direct != ranges[b].contains(a, be, 1e-12) {
                mismatches += 1;
            }
        }
    }
    Ok(mismatches)
}

/// Runs every check.
pub fn run_all(opts: &ValidationOptions) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let stream = |k: u64| rng::substream(opts.seed, &[0x7661_6c69_6400, k]);

    let (ortho, det, norm) = rotation_errors(&mut stream(1), opts.rotations);
    checks.push(Check {
        name: "rotation matrices",
        passed: ortho.max(det).max(norm) <= 1e-12,
        detail: format!(
            "{} samples: |R^T R - I| {ortho:.2e}, |det R - 1| {det:.2e}, | |f| - 1 | {norm:.2e}",
            opts.rotations
        ),
    });

    let mut worst = 0.0f64;
    for p in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let value = hemisphere_gain_integral(&GainPattern::new(p)?, 1e-10);
        worst = worst.max((value - 4.0 * PI).abs());
    }
    checks.push(Check {
        name: "gain normalization",
        passed: worst <= 1e-3,
        detail: format!("hemisphere integral within {worst:.2e} of 4 pi for p in {{0, 0.5, 1, 2, 4}}"),
    });

    let err = woodbury_error(&mut stream(2), opts.woodbury_instances)?;
    checks.push(Check {
        name: "low-rank MMSE",
        passed: err <= 1e-10,
        detail: format!("{} instances, worst relative error {err:.2e}", opts.woodbury_instances),
    });

    let margin = mmse_sinr_margin(&mut stream(3), opts.sinr_scenarios, opts.random_beamformers)?;
    checks.push(Check {
        name: "MMSE optimality",
        passed: margin >= -1e-9,
        detail: format!("smallest SINR advantage over random combiners {margin:.3e}"),
    });

    let gap = single_user_gap(&mut stream(4), opts.single_user_instances)?;
    checks.push(Check {
        name: "single-user optimum",
        passed: gap <= 5e-3,
        detail: format!(
            "{} instances, worst SNR shortfall {:.4}%",
            opts.single_user_instances,
            100.0 * gap
        ),
    });

    let mismatches = panel_region_mismatches(&mut stream(5), opts.region_samples)?;
    checks.push(Check {
        name: "panel feasible regions",
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatches in {} samples", opts.region_samples / 6 * 6),
    });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_integral_is_four_pi() {
        for p in [0.0, 0.5, 1.0, 2.0, 4.0, 7.5] {
            let v = hemisphere_gain_integral(&GainPattern::new(p).unwrap(), 1e-10);
            assert!((v - 4.0 * PI).abs() < 1e-8, "p = {p}: {v}");
        }
    }

    #[test]
    fn quick_run_passes() {
        let opts = ValidationOptions {
            seed: 3,
            rotations: 1000,
            woodbury_instances: 5,
            sinr_scenarios: 3,
            random_beamformers: 50,
            single_user_instances: 1,
            region_samples: 600,
        };
        let checks = run_all(&opts).unwrap();
        assert_eq!(checks.len(), 6);
        for c in checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
