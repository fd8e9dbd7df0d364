#![allow(dead_code)]

use std::path::Path;

use groundcal::simgen::{write_simulated_log, ScenarioFile};
use groundcal_core::sim::Scenario;

/// Twelve seconds: a left arc, a right arc, stops at both ends.
pub fn short_scenario() -> Scenario {
    ScenarioFile {
        keyframes: Some(vec![
            [0.0, 0.0, 0.0],
            [1.5, 0.0, 0.0],
            [3.0, 0.4, 0.6],
            [6.0, 0.4, 0.6],
            [7.5, 0.4, -0.6],
            [10.5, 0.4, -0.6],
            [12.0, 0.0, 0.0],
        ]),
        ..Default::default()
    }
    .scenario()
}

/// Drives straight across the room without turning.
pub fn straight_scenario() -> Scenario {
    ScenarioFile {
        start_pose: Some([-4.5, -2.0, 0.0]),
        keyframes: Some(vec![[0.0, 0.0, 0.0], [2.0, 0.3, 0.0], [20.0, 0.3, 0.0], [22.0, 0.0, 0.0]]),
        ..Default::default()
    }
    .scenario()
}

pub fn write(sc: &Scenario, dir: &Path) {
    write_simulated_log(sc, dir).expect("simulated log");
}
