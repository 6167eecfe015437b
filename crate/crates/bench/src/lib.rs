//! Shared fixtures for the criterion benches.

use clra::harness::{generate_scenario, ExperimentConfig};
use clra::rotation_opt::ConstraintSet;
use clra::{ArrayLayout, Scenario};

/// Scenario, element layout and constraints of the first trial of the
/// default experiment with `users` users on a `side x side` array.
pub fn fixture(users: usize, side: usize) -> (Scenario, ArrayLayout, ConstraintSet) {
    let mut config = ExperimentConfig::default();
    config.users = users;
    config.array.rows = side;
    config.array.cols = side;
    let scenario = generate_scenario(&config, 0).expect("default scenario");
    let layout = config.element_layout().expect("default layout");
    (scenario, layout, config.constraints(false))
}
