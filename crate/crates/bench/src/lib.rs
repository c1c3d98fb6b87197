//! Shared fixtures for the criterion benches.

use ptsoliton_core::{
    solve_amplitudes, AmplitudeMode, FieldState, GridSpec, ModelParams, SolitonSolution,
};

/// Focusing case with `A1 = 0.5`, `V = 1`, `W = 0.25`.
pub fn focusing_soliton() -> SolitonSolution {
    solve_amplitudes(
        &ModelParams::symmetric(1.0, 1.0, 0.25),
        AmplitudeMode::FixedFirst(0.5),
    )
    .expect("focusing soliton exists")
}

pub fn grid(n_points: usize) -> GridSpec {
    GridSpec::new(20.0, n_points).expect("valid grid")
}

pub fn initial_state(n_points: usize) -> FieldState {
    FieldState::new(0.0, focusing_soliton().sample(&grid(n_points))).expect("matching lengths")
}
