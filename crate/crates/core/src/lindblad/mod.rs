//! Master-equation dynamics of the driven, collectively damped ensemble.
//!
//! Two backends share one [`Generator`] type: the full product space of
//! `N ≤ 12` spins (any detunings, optionally restricted to one excitation
//! parity sector) and the `N + 1` symmetric Dicke states reached when all
//! detunings vanish.

mod basis;
mod blocks;
mod density;
mod evolve;
mod generator;
mod sparse;
mod states;
mod wigner;

pub use basis::{Basis, Sector};
pub use blocks::{BlockGenerator, Parity};
pub use density::{
    amplitude_expectation, fidelity_to, parity_expectation, DensityMatrix, PureState, HERMITICITY_TOL,
    POSITIVITY_TOL, TRACE_TOL,
};
pub use evolve::{
    integrate_master, integrate_master_with, record_trajectory, relax_to_steady_state, steady_amplitude,
    steady_amplitude_sweep, steady_state, SnapshotRow, SteadyAmplitude, SteadyStateOptions, Trajectory,
};
pub use generator::{
    build_collective_generator, build_full_generator, build_full_generator_in_sector, CollectiveOperators,
    Generator, Workspace, FULL_SPACE_CAP,
};
pub use sparse::SparseMatrix;
pub use states::{prepare_state, PreparedState, StateKind};
pub use wigner::{wigner, WignerGrid, WignerWindow};
