use super::{check_vars, viscous_coef};
use crate::error::Result;
use crate::operators::{SpectField, SpectralGrid};
use crate::solver_core::{Equation, SolverEntry, SolverInfo};
use crate::timers::KernelTimers;

/// `N̂ = −P(u·∇ω)` with `u` from the stream function, dealiased.
///
/// Uses four inverse transforms (`ux`, `uy`, `∂xω`, `∂yω`) and one forward.
pub fn ns2d_tendency(grid: &SpectralGrid, rot: &[num_complex::Complex64], timers: &mut KernelTimers) -> Result<SpectField> {
    let (ux, uy) = timers.time("operators", || grid.velocity_from_vorticity2d(rot))?;
    let grad = timers.time("operators", || grid.gradient(rot))?;
    let phys = timers.time("fft", || -> Result<Vec<Vec<f64>>> {
        [&ux, &uy, &grad[0], &grad[1]]
            .iter()
            .map(|f| grid.inverse(f))
            .collect()
    })?;
    let advection: Vec<f64> = timers.time("nonlin", || {
        (0..grid.phys_len())
            .map(|i| -(phys[0][i] * phys[2][i] + phys[1][i] * phys[3][i]))
            .collect()
    });
    let mut n = timers.time("fft", || grid.forward(&advection))?;
    timers.time("dealias", || grid.dealias(&mut n))?;
    Ok(n)
}

/// 2D incompressible Navier–Stokes in vorticity form.
#[derive(Debug, Clone)]
pub struct Ns2d {
    sigma: Vec<f64>,
}

impl Ns2d {
    pub fn new(grid: &SpectralGrid, nu: f64) -> Self {
        Ns2d {
            sigma: viscous_coef(grid, nu),
        }
    }
}

impl Equation for Ns2d {
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
        check_vars(state, 1, grid)?;
        out[0] = ns2d_tendency(grid, &state[0], timers)?;
        Ok(())
    }

    fn velocity(&self, grid: &SpectralGrid, state: &[SpectField]) -> Result<Vec<SpectField>> {
        check_vars(state, 1, grid)?;
        let (ux, uy) = grid.velocity_from_vorticity2d(&state[0])?;
        Ok(vec![ux, uy])
    }

    fn vorticity(&self, grid: &SpectralGrid, state: &[SpectField]) -> Result<Option<SpectField>> {
        check_vars(state, 1, grid)?;
        Ok(Some(state[0].clone()))
    }

    fn random_state(&self, grid: &SpectralGrid, seed: u64, band: [f64; 2]) -> Result<Vec<SpectField>> {
        Ok(vec![grid.random_field(seed, band)?])
    }

    fn constrain(&self, grid: &SpectralGrid, state: &mut [SpectField]) -> Result<()> {
        check_vars(state, 1, grid)?;
        state[0][0] = Default::default();
        Ok(())
    }

    fn computable(&self, grid: &SpectralGrid, state: &[SpectField], name: &str) -> Result<Option<Vec<f64>>> {
        let c = match name {
            "ux" => 0,
            "uy" => 1,
            _ => return Ok(None),
        };
        Ok(Some(grid.inverse(&self.velocity(grid, state)?[c])?))
    }
}

pub(super) fn entry() -> SolverEntry {
    let info = SolverInfo::new("ns2d", 2, &["rot_fft"], &["rot"], &["ux", "uy"]);
    SolverEntry::new(
        info,
        |p| p.set("nu_2", 1e-3),
        |p, grid| Ok(Box::new(Ns2d::new(grid, p.get_f64("nu_2")?))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::make_grid;
    use std::f64::consts::PI;

    fn grid(n: usize) -> SpectralGrid {
        make_grid(&[n, n], &[2.0 * PI, 2.0 * PI], 2.0 / 3.0).unwrap()
    }

    #[test]
    fn taylor_green_has_no_nonlinearity() {
        let g = grid(32);
        let (x, y) = (g.coords(0), g.coords(1));
        let rot: Vec<f64> = x.iter().zip(&y).map(|(x, y)| 2.0 * x.sin() * y.sin()).collect();
        let n = ns2d_tendency(&g, &g.forward(&rot).unwrap(), &mut KernelTimers::new()).unwrap();
        assert!(n.iter().all(|c| c.norm() < 1e-13));
    }

    #[test]
    fn zero_vorticity_zero_tendency() {
        let g = grid(16);
        let n = ns2d_tendency(&g, &vec![Default::default(); g.spect_len()], &mut KernelTimers::new()).unwrap();
        assert!(n.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn nonlinearity_conserves_energy_and_enstrophy() {
        let g = grid(32);
        for seed in 0..5 {
            let mut rot = g.random_field(seed, [1.0, 10.0]).unwrap();
            g.dealias(&mut rot).unwrap();
            let n = ns2d_tendency(&g, &rot, &mut KernelTimers::new()).unwrap();
            let scale: f64 = g.weights().iter().zip(rot.iter().zip(&n)).map(|(w, (a, b))| w * a.norm() * b.norm()).sum();
            assert!(g.inner(&rot, &n).abs() <= 1e-10 * scale);
            let eq = Ns2d::new(&g, 0.0);
            let u = eq.velocity(&g, &[rot.clone()]).unwrap();
            let du = eq.velocity(&g, &[n]).unwrap();
            let de: f64 = u.iter().zip(&du).map(|(a, b)| g.inner(a, b)).sum();
            assert!(de.abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn timers_cover_transforms() {
        let g = grid(16);
        let mut t = KernelTimers::new();
        ns2d_tendency(&g, &g.random_field(1, [1.0, 4.0]).unwrap(), &mut t).unwrap();
        for k in ["fft", "nonlin", "dealias", "operators"] {
            assert!(t.get(k).is_some(), "{k}");
        }
    }
}
