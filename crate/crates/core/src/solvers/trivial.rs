use num_complex::Complex64;

use super::check_vars;
use crate::error::Result;
use crate::operators::{SpectField, SpectralGrid};
use crate::solver_core::{Equation, SolverEntry, SolverInfo};
use crate::timers::KernelTimers;

/// `∂t u = 0`: exercises the framework without any physics.
#[derive(Debug, Clone, Default)]
pub struct Trivial;

impl Equation for Trivial {
    fn linear_coef(&self) -> Option<&[f64]> {
        None
    }

    fn set_viscosity(&mut self, _grid: &SpectralGrid, _nu: f64) {}

    fn tendency(
        &mut self,
        grid: &SpectralGrid,
        state: &[SpectField],
        out: &mut [SpectField],
        _timers: &mut KernelTimers,
    ) -> Result<()> {
        check_vars(state, 1, grid)?;
        out[0].fill(Complex64::new(0.0, 0.0));
        Ok(())
    }

    fn velocity(&self, grid: &SpectralGrid, state: &[SpectField]) -> Result<Vec<SpectField>> {
        check_vars(state, 1, grid)?;
        Ok(state.to_vec())
    }

    fn vorticity(&self, _grid: &SpectralGrid, _state: &[SpectField]) -> Result<Option<SpectField>> {
        Ok(None)
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
    let info = SolverInfo::new("trivial", 1, &["u_fft"], &["u"], &[]).with_class("State", "StateTrivial");
    SolverEntry::new(info, |_| Ok(()), |_, _| Ok(Box::new(Trivial)))
}

#[cfg(test)]
mod tests {
    use crate::solver_core::{build_simulation, create_default_params};

    #[test]
    fn state_is_bit_identical_after_many_steps() {
        for scheme in ["RK2", "RK4"] {
            let mut p = create_default_params("trivial").unwrap();
            p.set("time_stepping.scheme", scheme).unwrap();
            p.set("time_stepping.use_t_end", false).unwrap();
            p.set("time_stepping.it_end", 50i64).unwrap();
            p.set("output.period_print", 5i64).unwrap();
            let mut sim = build_simulation(&p).unwrap();
            let before = sim.checksum();
            sim.run().unwrap();
            assert_eq!(sim.checksum(), before);
            assert_eq!(sim.it(), 50);
            let e0 = sim.output.printed[0].energy;
            assert!(sim.output.printed.len() >= 10);
            assert!(sim.output.printed.iter().all(|l| l.energy == e0));
        }
    }
}
