//! Model core: parameters, excitation state, branching matrix.

mod branching;
mod expm;
mod params;
mod state;

pub use branching::{branching_matrix, spectral_radius, stationary_mean_intensity, BranchingMatrix};
pub use expm::{decay_matrix, matrix_exponential};
pub use params::{Bounds, Coord, KernelForm, KernelSpec, Layout, ModelParams, MAX_MATRIX_ORDER};
pub use state::{Excitation, ExcitationState};
