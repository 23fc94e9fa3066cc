use super::{check_vars, viscous_coef};
use crate::error::Result;
use crate::operators::{SpectField, SpectralGrid};
use crate::solver_core::{Equation, SolverEntry, SolverInfo};
use crate::timers::KernelTimers;

/// `N̂ = P(u × ω)`, projected on divergence-free fields and dealiased.
///
/// Uses six inverse transforms (velocity and vorticity) and three forward.
pub fn ns3d_tendency(grid: &SpectralGrid, v: &[SpectField], timers: &mut KernelTimers) -> Result<Vec<SpectField>> {
    let w = timers.time("curl", || grid.curl3d(v))?;
    let phys = timers.time("fft", || -> Result<Vec<Vec<f64>>> {
        v.iter().chain(&w).map(|f| grid.inverse(f)).collect()
    })?;
    let cross: Vec<Vec<f64>> = timers.time("vector_product", || {
        let (u, w) = (&phys[..3], &phys[3..]);
        let n = grid.phys_len();
        let mut out = vec![vec![0.0; n]; 3];
        for i in 0..n {
            out[0][i] = u[1][i] * w[2][i] - u[2][i] * w[1][i];
            out[1][i] = u[2][i] * w[0][i] - u[0][i] * w[2][i];
            out[2][i] = u[0][i] * w[1][i] - u[1][i] * w[0][i];
        }
        out
    });
    let mut n = timers.time("fft", || -> Result<Vec<SpectField>> {
        cross.iter().map(|f| grid.forward(f)).collect()
    })?;
    timers.time("projection", || grid.project_divfree(&mut n))?;
    timers.time("dealias", || n.iter_mut().try_for_each(|f| grid.dealias(f)))?;
    Ok(n)
}

/// 3D incompressible Navier–Stokes in rotational form.
#[derive(Debug, Clone)]
pub struct Ns3d {
    sigma: Vec<f64>,
}

impl Ns3d {
    pub fn new(grid: &SpectralGrid, nu: f64) -> Self {
        Ns3d {
            sigma: viscous_coef(grid, nu),
        }
    }
}

impl Equation for Ns3d {
    fn linear_coef(&self) -> Option<&[f64]> {
        Some(&self.sigma)
    }

    fn set_viscosity(&mut self, grid: &SpectralGrid, nu: f64) {
        self.sigma = viscous_coef(grid, nu);
    }

    fn tendency(
        &mut self,
        grid: &SpectralGrid,
        state: &[SpectField],
        out: &mut [SpectField],
        timers: &mut KernelTimers,
    ) -> Result<()> {
        check_vars(state, 3, grid)?;
        for (o, n) in out.iter_mut().zip(ns3d_tendency(grid, state, timers)?) {
            *o = n;
        }
        Ok(())
    }

    fn velocity(&self, grid: &SpectralGrid, state: &[SpectField]) -> Result<Vec<SpectField>> {
        check_vars(state, 3, grid)?;
        Ok(state.to_vec())
    }

    fn vorticity(&self, _grid: &SpectralGrid, _state: &[SpectField]) -> Result<Option<SpectField>> {
        Ok(None)
    }

    fn random_state(&self, grid: &SpectralGrid, seed: u64, band: [f64; 2]) -> Result<Vec<SpectField>> {
        let mut v = (0..3u64)
            .map(|c| grid.random_field(seed.wrapping_mul(3).wrapping_add(c), band))
            .collect::<Result<Vec<_>>>()?;
        grid.project_divfree(&mut v)?;
        Ok(v)
    }

    fn constrain(&self, grid: &SpectralGrid, state: &mut [SpectField]) -> Result<()> {
        grid.project_divfree(state)
    }

    fn computable(&self, grid: &SpectralGrid, state: &[SpectField], name: &str) -> Result<Option<Vec<f64>>> {
        if name != "rotz" {
            return Ok(None);
        }
        let w = grid.curl3d(state)?;
        Ok(Some(grid.inverse(&w[2])?))
    }
}

pub(super) fn entry() -> SolverEntry {
    let info = SolverInfo::new("ns3d", 3, &["vx_fft", "vy_fft", "vz_fft"], &["vx", "vy", "vz"], &["rotz"]);
    SolverEntry::new(
        info,
        |p| p.set("nu_2", 1e-3),
        |p, grid| Ok(Box::new(Ns3d::new(grid, p.get_f64("nu_2")?))),
    )
}
