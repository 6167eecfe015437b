//! Cross-linked rotatable antenna arrays for multi-user uplink reception.
//!
//! Antennas on an `M x N` grid share rotation tracks: every antenna in row `m`
//! has elevation `alpha[m]` and every antenna in column `n` has azimuth
//! `beta[n]`, so `M + N` motors orient `M * N` antennas. The crate models the
//! resulting channels, computes MMSE receivers, optimizes the rotation angles
//! (continuous feasible-direction ascent and a discrete genetic search) and
//! runs seeded Monte-Carlo comparisons against baseline orientations.

pub mod beamforming;
pub mod channel;
pub mod discrete_ga;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linprog;
pub mod rng;
pub mod rotation_opt;
pub mod validate;

pub use beamforming::{BeamformerSet, RateReport};
pub use channel::{ChannelMatrix, Cluster, GainPattern, Scenario, User};
pub use error::{Error, Result};
pub use geometry::{ArrayLayout, Coupling, LayoutMode, Orientation, RotationState};
