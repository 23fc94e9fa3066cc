use std::time::Instant;

use super::check_vars;
use crate::error::{Error, Result};
use crate::operators::{SpectField, SpectralGrid};
use crate::solver_core::{Equation, SolverEntry, SolverInfo};
use crate::timers::KernelTimers;

/// `−c (u_{j+1} − u_{j−1}) / (2 Δx)` on a periodic grid.
pub fn ad1d_tendency(u: &[f64], c: f64, dx: f64) -> Vec<f64> {
    let n = u.len();
    let coef = -c / (2.0 * dx);
    (0..n)
        .map(|j| coef * (u[(j + 1) % n] - u[(j + n - 1) % n]))
        .collect()
}

/// 1D advection at constant speed `c`, discretized with second-order
/// central differences in physical space.
#[derive(Debug, Clone)]
pub struct Ad1d {
    pub c: f64,
}

impl Equation for Ad1d {
    fn linear_coef(&self) -> Option<&[f64]> {
        None
    }

    fn set_viscosity(&mut self, _grid: &SpectralGrid, _nu: f64) {}

    fn tendency(
        &mut self,
        grid: &SpectralGrid,
        state: &[SpectField],
        out: &mut [SpectField],
        timers: &mut KernelTimers,
    ) -> Result<()> {
        check_vars(state, 1, grid)?;
        let u = timers.time("fft", || grid.inverse(&state[0]))?;
        let du = timers.time("nonlin", || ad1d_tendency(&u, self.c, grid.dx(0)));
        let start = Instant::now();
        grid.plan().forward(&du, &mut out[0])?;
        timers.add("fft", start.elapsed().as_secs_f64());
        Ok(())
    }

    fn velocity(&self, grid: &SpectralGrid, state: &[SpectField]) -> Result<Vec<SpectField>> {
        check_vars(state, 1, grid)?;
        Ok(state.to_vec())
    }

    fn vorticity(&self, _grid: &SpectralGrid, _state: &[SpectField]) -> Result<Option<SpectField>> {
        Ok(None)
    }

    /// The advection speed, not the advected field, limits the step.
    fn max_velocity(&self, _grid: &SpectralGrid, _state: &[SpectField]) -> Result<Vec<f64>> {
        Ok(vec![self.c.abs()])
    }

    fn random_state(&self, grid: &SpectralGrid, seed: u64, band: [f64; 2]) -> Result<Vec<SpectField>> {
        Ok(vec![grid.random_field(seed, band)?])
    }

    fn constrain(&self, _grid: &SpectralGrid, _state: &mut [SpectField]) -> Result<()> {
        Ok(())
    }

    fn computable(&self, _grid: &SpectralGrid, _state: &[SpectField], _name: &str) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }
}

pub(super) fn entry() -> SolverEntry {
    let info = SolverInfo::new("ad1d", 1, &["u_fft"], &["u"], &[]).with_class("State", "StateAD1D");
    SolverEntry::new(
        info,
        |p| {
            p.add_leaf("c", 1.0)?;
            Ok(())
        },
        |p, _| {
            let c = p.get_f64("c")?;
            if !c.is_finite() {
                return Err(Error::Config(format!("advection speed must be finite, got {c}")));
            }
            Ok(Box::new(Ad1d { c }))
        },
    )
}
