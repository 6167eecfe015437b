//! Closed-form single-user optimum for a one-row array without scatterers.

use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, RotationState};

#[derive(Debug, Clone, PartialEq)]
pub struct SingleUserOptimum {
    /// Angles pointing every antenna at the user.
    pub state: RotationState,
    /// Angle between each antenna's line of sight to the user and `+x`.
    pub eccentric: Vec<f64>,
    /// `cos([theta_n - theta_max]^+)`, the best alignment under the bound.
    pub cos_offset: Vec<f64>,
    /// Receive SNR with maximum ratio combining at the best alignment.
    pub snr: f64,
    /// Whether `state` satisfies the bound, i.e. every `theta_n <= theta_max`.
    pub achievable: bool,
}

/// Best orientation of a `1 x N` array serving one user over the direct path.
///
/// Every antenna can point exactly at the user: the shared elevation is
/// `atan2(z0, x0)` and antenna `n` turns by `atan2(y_n - y0, sqrt(x0^2 + z0^2))`.
/// When the direction to the user is beyond `theta_max`, the antenna can
/// get no closer than `theta_n - theta_max`. The SNR is
/// `P beta0 G0 sum_n cos^(2p)(eps_n) / r_n^2`.
pub fn single_user_oracle(
    scenario: &Scenario,
    layout: &ArrayLayout,
    theta_max: f64,
) -> Result<SingleUserOptimum> {
    if scenario.users.len() != 1 || !scenario.clusters.is_empty() {
        return Err(Error::InvalidScenario(
            "closed form needs exactly one user and no scatterers".into(),
        ));
    }
    if layout.rows() != 1 {
        return Err(Error::InvalidLayout(format!(
            "closed form covers one-row arrays, got {} rows",
            layout.rows()
        )));
    }
    let positions = layout.element_positions()?;
    let v = scenario.users[0].position;
    if !(v.x > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "user at x = {} is not in front of the array",
            v.x
        )));
    }
    let mut beta = Vec::with_capacity(positions.len());
    let mut eccentric = Vec::with_capacity(positions.len());
    let mut cos_offset = Vec::with_capacity(positions.len());
    let mut sum = 0.0;
    let p = scenario.pattern.directivity();
    let mut alpha = 0.0;
    for t in &positions {
        let d = v - t;
        let r = d.norm();
        let transverse = (d.x * d.x + d.z * d.z).sqrt();
        alpha = d.z.atan2(d.x);
        beta.push((-d.y).atan2(transverse));
        let theta = (d.y * d.y + d.z * d.z).sqrt().atan2(d.x);
        let c = (theta - theta_max).max(0.0).cos();
        eccentric.push(theta);
        cos_offset.push(c);
        sum += c.powf(2.0 * p) / (r * r);
    }
    let snr = scenario.normalized_powers()[0] * scenario.beta0() * scenario.pattern.peak_gain() * sum;
    Ok(SingleUserOptimum {
        state: RotationState::cross_linked(vec![alpha], beta),
        achievable: eccentric.iter().all(|&t| t <= theta_max),
        eccentric,
        cos_offset,
        snr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{GainPattern, User};
    use crate::geometry;
    use nalgebra::Vector3;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    fn one_user(v: [f64; 3]) -> Scenario {
        Scenario::new(
            vec![User::new(Vector3::from(v), 1e-3)],
            vec![],
            1e-11,
            0.0857,
            GainPattern::new(2.0).unwrap(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn on_axis_user() {
        let layout = ArrayLayout::element(1, 1, 0.5).unwrap();
        let o = single_user_oracle(&one_user([7.0, 0.0, 0.0]), &layout, FRAC_PI_6).unwrap();
        assert_eq!(o.state.alpha(), &[0.0]);
        assert_eq!(o.state.beta(), &[0.0]);
        assert_eq!(o.cos_offset, vec![1.0]);
        assert!(o.achievable);
    }

    #[test]
    fn offset_antenna_turns_towards_user() {
        // two antennas at y = -0.5 and y = 0.5 (spacing 1), user at (1, 0, 0)
        let layout = ArrayLayout::element(1, 2, 1.0).unwrap();
        let o = single_user_oracle(&one_user([1.0, 0.0, 0.0]), &layout, FRAC_PI_2).unwrap();
        let b = o.state.beta()[1];
        assert!((b - (1.0 / 1.25f64.sqrt()).acos()).abs() < 1e-12);
        assert!((b - 0.4636).abs() < 1e-4);
        assert!((b.sin() - 0.4472).abs() < 1e-4);
        assert!((o.state.beta()[0] + b).abs() < 1e-15);
    }

    #[test]
    fn pointing_vectors_hit_the_user() {
        let layout = ArrayLayout::element(1, 5, 0.3).unwrap();
        let v = Vector3::new(4.0, -1.0, 2.0);
        let o = single_user_oracle(&one_user(v.into()), &layout, FRAC_PI_2).unwrap();
        for (n, t) in layout.element_positions().unwrap().iter().enumerate() {
            let (a, b) = o.state.angles(0, n);
            let f = geometry::pointing_vector(a, b);
            assert!((f - (v - t).normalize()).norm() < 1e-12);
        }
    }

    #[test]
    fn clipped_offset() {
        // user 45 degrees off axis, bound 30 degrees
        let layout = ArrayLayout::element(1, 1, 0.5).unwrap();
        let o = single_user_oracle(&one_user([1.0, 1.0, 0.0]), &layout, FRAC_PI_6).unwrap();
        assert!((o.eccentric[0] - FRAC_PI_4).abs() < 1e-15);
        assert!((o.cos_offset[0] - 0.96593).abs() < 1e-5);
        assert!(!o.achievable);
    }

    #[test]
    fn unsupported_inputs() {
        let layout = ArrayLayout::element(1, 2, 0.5).unwrap();
        assert!(single_user_oracle(&one_user([-1.0, 0.0, 0.0]), &layout, 0.5).is_err());
        let tall = ArrayLayout::element(2, 2, 0.5).unwrap();
        assert!(single_user_oracle(&one_user([1.0, 0.0, 0.0]), &tall, 0.5).is_err());
    }
}
