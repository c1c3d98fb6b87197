//! Exact bright solitons of the coupled Gross-Pitaevskii equations with
//! PT-symmetric Scarf-II potentials, their Fourier-collocation linear
//! stability spectra, and RK4 propagation including adiabatic switch-on of
//! parameters.

pub mod error;
pub mod evolution;
pub mod grid;
pub mod model;
pub mod stability;

pub use error::{Error, Result};
pub use evolution::{
    evolve, perturb, rhs, rk4_step, schedule_value, Drive, EvolutionTrace, EvolveOptions, Evolver,
    FieldState, NoiseKind, ParamKey, ScheduledParam,
};
pub use grid::{diff_matrix_2, make_grid, spectral_derivative, GridSpec, SpectralOps};
pub use model::{
    power, poynting, sample_soliton, scarf_potential, solve_amplitudes,
    solve_amplitudes_with_tolerance, stationary_residual, AmplitudeMode, Component, ModelParams,
    SolitonSolution,
};
pub use num_complex::Complex64;
pub use stability::{
    analyze, assemble_stability_matrix, classify, eigenspectrum, scan_map, Axis, CellStatus,
    Classification, MapCell, StabilityMap, StabilityMatrix, StabilityReport,
};
