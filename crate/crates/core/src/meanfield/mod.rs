//! Product-state mean-field dynamics of the ensemble, its symmetric and
//! two-group reductions, synchronization classification and the fit of the
//! synchronization boundary.

mod ellipse;
mod full;
mod reduced;
mod sync;

pub use ellipse::{boundary_points, fit_ellipse, fit_ellipse_xy, EllipseFit};
pub use full::{integrate_full, mf_rhs_full, MeanFieldState};
pub use reduced::{
    integrate_reduced, mf_rhs_symmetric, mf_rhs_two_ensemble, project_two_group, symmetric_fixed_point,
    symmetric_full_state, symmetric_steady_state, two_ensemble_steady_state_small_delta, two_group_full_state,
    ReducedModel, ReducedState,
};
pub use sync::{
    boundary_brackets, classify_sync, refine_boundary, sync_phase_sweep, SyncOptions, SyncPhasePoint, SyncStart,
    SyncStatus,
};
