//! Solver descriptors, registry and the simulation object.
//!
//! A solver is described by a [`SolverInfo`] and plugged into the registry
//! as a [`SolverEntry`], which knows how to create the solver's default
//! parameters and its [`Equation`]. [`build_simulation`] assembles
//! everything in a fixed order: params, info, operators, output, state,
//! time stepping, initial fields, forcing and preprocessing.

mod forcing;
mod info;
mod init;
mod load;
mod preprocess;
mod registry;
mod simulation;
mod state;

use crate::error::Result;
use crate::operators::{SpectField, SpectralGrid};
use crate::params::ParamTree;
use crate::timers::KernelTimers;

pub use forcing::{compute_forcing, Forcing, ForcingConfig, ForcingTerm, DEGENERATE_RATE};
pub use info::SolverInfo;
pub use init::{init_fields, InitKind};
pub use load::{load_sim_for_plot, load_state_phys_file, load_state_phys_file_with};
pub use preprocess::{preprocess_adjust, viscosity_from_resolution, PreprocessConfig};
pub use registry::{
    create_default_params, register_solver, registered_solvers, resolve, SolverEntry,
};
pub use simulation::{build_simulation, Simulation, TimeStepping};
pub use state::StateSet;

/// The equation-specific part of a solver.
///
/// The prognostic state is a list of spectral fields (one per entry of
/// `keys_state_spect`). The linear term `σ û` is integrated exactly by the
/// time stepper; [`Equation::tendency`] returns only the remaining terms.
pub trait Equation: Send {
    /// `σ` over the spectral modes, shared by every state variable.
    fn linear_coef(&self) -> Option<&[f64]>;

    /// Rebuilds `σ` for a new viscosity.
    fn set_viscosity(&mut self, grid: &SpectralGrid, nu: f64);

    fn tendency(
        &mut self,
        grid: &SpectralGrid,
        state: &[SpectField],
        out: &mut [SpectField],
        timers: &mut KernelTimers,
    ) -> Result<()>;

    /// Linear map from state-shaped spectral fields to velocity components.
    /// Applied to a tendency it gives the velocity tendency.
    fn velocity(&self, grid: &SpectralGrid, state: &[SpectField]) -> Result<Vec<SpectField>>;

    /// Scalar vorticity whose half mean square is the enstrophy, if defined.
    fn vorticity(&self, grid: &SpectralGrid, state: &[SpectField]) -> Result<Option<SpectField>>;

    /// Largest absolute velocity per component, for CFL step selection.
    fn max_velocity(&self, grid: &SpectralGrid, state: &[SpectField]) -> Result<Vec<f64>> {
        self.velocity(grid, state)?
            .iter()
            .map(|c| Ok(grid.inverse(c)?.iter().fold(0.0f64, |m, v| m.max(v.abs()))))
            .collect()
    }

    /// Random state supported on a wavenumber band, satisfying the
    /// equation's constraints (mean-free, divergence-free...).
    fn random_state(&self, grid: &SpectralGrid, seed: u64, band: [f64; 2]) -> Result<Vec<SpectField>>;

    /// Restores the state invariants after initialization or loading.
    fn constrain(&self, grid: &SpectralGrid, state: &mut [SpectField]) -> Result<()>;

    /// Physical fields derived from the state, by name.
    fn computable(&self, grid: &SpectralGrid, state: &[SpectField], name: &str) -> Result<Option<Vec<f64>>>;
}

/// Builds an equation from the simulation parameters and grid.
pub type EquationBuilder = dyn Fn(&ParamTree, &SpectralGrid) -> Result<Box<dyn Equation>> + Send + Sync;
