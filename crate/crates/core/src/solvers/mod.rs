//! Built-in solvers.
//!
//! | solver | state | equation |
//! |---|---|---|
//! | `trivial` | `u_fft` | `∂t u = 0` |
//! | `ad1d` | `u_fft` | `∂t u = −c ∂x u`, second-order central differences |
//! | `ns2d` | `rot_fft` | 2D Navier–Stokes, vorticity form |
//! | `ns3d` | `vx_fft`, `vy_fft`, `vz_fft` | 3D Navier–Stokes, rotational form |

mod ad1d;
mod ns2d;
mod ns3d;
mod trivial;

pub use ad1d::{ad1d_tendency, Ad1d};
pub use ns2d::{ns2d_tendency, Ns2d};
pub use ns3d::{ns3d_tendency, Ns3d};
pub use trivial::Trivial;

use crate::error::{Error, Result};
use crate::operators::{SpectField, SpectralGrid};
use crate::solver_core::SolverEntry;

pub(crate) fn builtin_entries() -> Vec<SolverEntry> {
    vec![trivial::entry(), ad1d::entry(), ns2d::entry(), ns3d::entry()]
}

pub(crate) fn check_vars(state: &[SpectField], n: usize, grid: &SpectralGrid) -> Result<()> {
    if state.len() != n {
        return Err(Error::Shape(format!("expected {n} state variables, got {}", state.len())));
    }
    if let Some(f) = state.iter().find(|f| f.len() != grid.spect_len()) {
        return Err(Error::Shape(format!(
            "state field has {} values, grid expects {}",
            f.len(),
            grid.spect_len()
        )));
    }
    Ok(())
}

pub(crate) fn viscous_coef(grid: &SpectralGrid, nu: f64) -> Vec<f64> {
    grid.k_sq().iter().map(|k2| -nu * k2).collect()
}
