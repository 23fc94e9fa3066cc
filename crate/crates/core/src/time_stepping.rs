//! Runge–Kutta time stepping with an exact integrating factor for the
//! diagonal linear term, and CFL step selection.
//!
//! The equations have the form `∂t û = N(û) + σ û` where `σ` is a real
//! array over the spectral modes (for instance `−ν|k|²`). With
//! `v̂ = e^{−σt} û` the linear part drops out and a classical RK scheme is
//! applied to `v̂`. A problem with `N ≡ 0` is therefore integrated exactly.

use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::SpectField;
use crate::solver_core::Simulation;
use crate::timers::KernelTimers;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk2,
    Rk4,
}

impl Scheme {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "RK2" => Ok(Scheme::Rk2),
            "RK4" => Ok(Scheme::Rk4),
            other => Err(Error::Config(format!("unknown time scheme `{other}` (use RK2 or RK4)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    TimeEnd(f64),
    Iterations(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub cfl_coef: f64,
    pub dt_max: f64,
    /// Constant time step; CFL selection when `None`.
    pub fixed_dt: Option<f64>,
    pub stop: StopRule,
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_coef > 0.0 && self.cfl_coef <= 1.0) {
            return Err(Error::Config(format!("cfl_coef must lie in (0, 1], got {}", self.cfl_coef)));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::Config(format!("deltat_max must be positive, got {}", self.dt_max)));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("deltat0 must be positive, got {dt}")));
            }
        }
        if let StopRule::TimeEnd(t) = self.stop {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Config(format!("t_end must be finite and non-negative, got {t}")));
            }
        }
        Ok(())
    }
}

/// Velocity floor used when a field is at rest.
pub const CFL_VELOCITY_FLOOR: f64 = 1e-300;

/// `min(dt_max, cfl · min_d dx_d / max|u_d|)`.
pub fn compute_cfl_dt(max_velocity: &[f64], dx: &[f64], cfl_coef: f64, dt_max: f64) -> f64 {
    let limit = max_velocity
        .iter()
        .zip(dx)
        .map(|(u, dx)| dx / u.abs().max(CFL_VELOCITY_FLOOR))
        .fold(f64::INFINITY, f64::min);
    dt_max.min(cfl_coef * limit)
}

/// Tendency callback: writes `N(state)` into `out`.
pub trait Tendency {
    fn eval(&mut self, state: &[SpectField], out: &mut [SpectField], timers: &mut KernelTimers) -> Result<()>;
}

impl<F> Tendency for F
where
    F: FnMut(&[SpectField], &mut [SpectField], &mut KernelTimers) -> Result<()>,
{
    fn eval(&mut self, state: &[SpectField], out: &mut [SpectField], timers: &mut KernelTimers) -> Result<()> {
        self(state, out, timers)
    }
}

/// Runge–Kutta stepper owning its stage buffers and the cached exponential
/// factors `e^{σ dt/2}` and `e^{σ dt}`.
#[derive(Debug, Clone)]
pub struct RkStepper {
    scheme: Scheme,
    stages: Vec<Vec<SpectField>>,
    probe: Vec<SpectField>,
    exp_dt: Option<f64>,
    exp_half: Vec<f64>,
    exp_full: Vec<f64>,
}

fn zeros_like(state: &[SpectField]) -> Vec<SpectField> {
    state
        .iter()
        .map(|f| vec![Complex64::new(0.0, 0.0); f.len()])
        .collect()
}

impl RkStepper {
    pub fn new(scheme: Scheme) -> Self {
        RkStepper {
            scheme,
            stages: Vec::new(),
            probe: Vec::new(),
            exp_dt: None,
            exp_half: Vec::new(),
            exp_full: Vec::new(),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    fn prepare(&mut self, state: &[SpectField], sigma: Option<&[f64]>, dt: f64) -> Result<()> {
        let n_stages = match self.scheme {
            Scheme::Rk2 => 2,
            Scheme::Rk4 => 4,
        };
        let layout_ok = self.probe.len() == state.len()
            && self.probe.iter().zip(state).all(|(a, b)| a.len() == b.len());
        if !layout_ok || self.stages.len() != n_stages {
            self.stages = (0..n_stages).map(|_| zeros_like(state)).collect();
            self.probe = zeros_like(state);
        }
        if let Some(sigma) = sigma {
            if let Some(f) = state.iter().find(|f| f.len() != sigma.len()) {
                return Err(Error::Shape(format!(
                    "linear coefficient has {} values, state field has {}",
                    sigma.len(),
                    f.len()
                )));
            }
            let stale = self.exp_dt != Some(dt) || self.exp_full.len() != sigma.len();
            if stale {
                self.exp_half = sigma.iter().map(|s| (s * dt / 2.0).exp()).collect();
                self.exp_full = sigma.iter().map(|s| (s * dt).exp()).collect();
                self.exp_dt = Some(dt);
            }
        }
        Ok(())
    }

    /// Advances `state` by one step of size `dt`.
    pub fn step(
        &mut self,
        state: &mut [SpectField],
        sigma: Option<&[f64]>,
        dt: f64,
        tendency: &mut dyn Tendency,
        timers: &mut KernelTimers,
    ) -> Result<()> {
        self.prepare(state, sigma, dt)?;
        match self.scheme {
            Scheme::Rk2 => self.step_rk2(state, sigma.is_some(), dt, tendency, timers),
            Scheme::Rk4 => self.step_rk4(state, sigma.is_some(), dt, tendency, timers),
        }
    }

    fn eval(
        &mut self,
        stage: usize,
        from_probe: bool,
        state: &[SpectField],
        tendency: &mut dyn Tendency,
        timers: &mut KernelTimers,
    ) -> Result<()> {
        let input: &[SpectField] = if from_probe { &self.probe } else { state };
        let out = &mut self.stages[stage];
        tendency.eval(input, out, timers)?;
        if let Some(f) = out.iter().zip(state).find(|(o, s)| o.len() != s.len()) {
            return Err(Error::Shape(format!(
                "tendency has {} values, state field has {}",
                f.0.len(),
                f.1.len()
            )));
        }
        Ok(())
    }

    fn step_rk2(
        &mut self,
        state: &mut [SpectField],
        linear: bool,
        dt: f64,
        tendency: &mut dyn Tendency,
        timers: &mut KernelTimers,
    ) -> Result<()> {
        self.eval(0, false, state, tendency, timers)?;
        let t0 = Instant::now();
        for v in 0..state.len() {
            for m in 0..state[v].len() {
                let e = if linear { self.exp_half[m] } else { 1.0 };
                self.probe[v][m] = (state[v][m] + self.stages[0][v][m] * (dt / 2.0)) * e;
            }
        }
        timers.add("rk", t0.elapsed().as_secs_f64());

        self.eval(1, true, state, tendency, timers)?;
        let t0 = Instant::now();
        for (u, k2) in state.iter_mut().zip(&self.stages[1]) {
            for m in 0..u.len() {
                if linear {
                    u[m] = u[m] * self.exp_full[m] + k2[m] * (dt * self.exp_half[m]);
                } else {
                    add_nonzero(&mut u[m], k2[m] * dt);
                }
            }
        }
        timers.add("rk", t0.elapsed().as_secs_f64());
        Ok(())
    }

    fn step_rk4(
        &mut self,
        state: &mut [SpectField],
        linear: bool,
        dt: f64,
        tendency: &mut dyn Tendency,
        timers: &mut KernelTimers,
    ) -> Result<()> {
        let h = dt;
        let eh = |s: &Self, m: usize| if linear { s.exp_half[m] } else { 1.0 };
        let ef = |s: &Self, m: usize| if linear { s.exp_full[m] } else { 1.0 };

        self.eval(0, false, state, tendency, timers)?;
        let t0 = Instant::now();
        for v in 0..state.len() {
            for m in 0..state[v].len() {
                self.probe[v][m] = (state[v][m] + self.stages[0][v][m] * (h / 2.0)) * eh(self, m);
            }
        }
        timers.add("rk", t0.elapsed().as_secs_f64());

        self.eval(1, true, state, tendency, timers)?;
        let t0 = Instant::now();
        for v in 0..state.len() {
            for m in 0..state[v].len() {
                self.probe[v][m] = state[v][m] * eh(self, m) + self.stages[1][v][m] * (h / 2.0);
            }
        }
        timers.add("rk", t0.elapsed().as_secs_f64());

        self.eval(2, true, state, tendency, timers)?;
        let t0 = Instant::now();
        for v in 0..state.len() {
            for m in 0..state[v].len() {
                self.probe[v][m] = state[v][m] * ef(self, m) + self.stages[2][v][m] * (h * eh(self, m));
            }
        }
        timers.add("rk", t0.elapsed().as_secs_f64());

        self.eval(3, true, state, tendency, timers)?;
        let t0 = Instant::now();
        for v in 0..state.len() {
            let [k1, k2, k3, k4] = [0, 1, 2, 3].map(|s| &self.stages[s][v]);
            let u = &mut state[v];
            for m in 0..u.len() {
                if linear {
                    let (e, e2) = (self.exp_full[m], self.exp_half[m]);
                    u[m] = u[m] * e + (k1[m] * e + (k2[m] + k3[m]) * (2.0 * e2) + k4[m]) * (h / 6.0);
                } else {
                    add_nonzero(&mut u[m], (k1[m] + (k2[m] + k3[m]) * 2.0 + k4[m]) * (h / 6.0));
                }
            }
        }
        timers.add("rk", t0.elapsed().as_secs_f64());
        Ok(())
    }
}

// Adding an exact zero must leave the value bit-identical (-0.0 + 0.0 = +0.0).
#[inline]
fn add_nonzero(u: &mut Complex64, inc: Complex64) {
    if inc.re != 0.0 {
        u.re += inc.re;
    }
    if inc.im != 0.0 {
        u.im += inc.im;
    }
}

/// One RK4 step of `∂t û = N(û) + σ û` with the integrating factor.
pub fn step_rk4_exactlin(
    state: &mut [SpectField],
    tendency: &mut dyn Tendency,
    sigma: Option<&[f64]>,
    dt: f64,
) -> Result<()> {
    RkStepper::new(Scheme::Rk4).step(state, sigma, dt, tendency, &mut KernelTimers::new())
}

/// One midpoint RK2 step of `∂t û = N(û) + σ û` with the integrating factor.
pub fn step_rk2_exactlin(
    state: &mut [SpectField],
    tendency: &mut dyn Tendency,
    sigma: Option<&[f64]>,
    dt: f64,
) -> Result<()> {
    RkStepper::new(Scheme::Rk2).step(state, sigma, dt, tendency, &mut KernelTimers::new())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub iterations: usize,
    pub simulated_time: f64,
    pub walltime: f64,
    pub timers: KernelTimers,
}

/// Advances the simulation until its stopping rule is met.
///
/// Each iteration selects the time step (unless fixed), evaluates the
/// forcing when enabled, advances the state and runs the output hooks.
pub fn run(sim: &mut Simulation) -> Result<RunSummary> {
    sim.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Vec<SpectField> {
        vec![vec![Complex64::new(v, 0.0)]]
    }

    fn decay(state: &[SpectField], out: &mut [SpectField], _: &mut KernelTimers) -> Result<()> {
        out[0][0] = -state[0][0];
        Ok(())
    }

    fn zero(_: &[SpectField], out: &mut [SpectField], _: &mut KernelTimers) -> Result<()> {
        out[0][0] = Complex64::new(0.0, 0.0);
        Ok(())
    }

    #[test]
    fn cfl_examples() {
        assert!((compute_cfl_dt(&[2.0], &[0.1], 0.5, 1.0) - 0.025).abs() < 1e-16);
        assert_eq!(compute_cfl_dt(&[0.0], &[0.1], 0.5, 0.01), 0.01);
        assert!((compute_cfl_dt(&[1.0, 4.0], &[0.1, 0.1], 0.5, 1.0) - 0.0125).abs() < 1e-16);
    }

    #[test]
    fn pure_linear_problems_are_exact() {
        for step in [step_rk4_exactlin, step_rk2_exactlin] {
            let mut u = scalar(1.0);
            step(&mut u, &mut zero, Some(&[-1.0]), 0.1).unwrap();
            let exact = (-0.1f64).exp();
            assert!((u[0][0].re - exact).abs() <= 1e-14 * exact);
        }
    }

    #[test]
    fn rk4_growth_factor() {
        let mut u = scalar(1.0);
        step_rk4_exactlin(&mut u, &mut decay, None, 0.1).unwrap();
        let h: f64 = 0.1;
        let poly = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((u[0][0].re - poly).abs() < 1e-15);
        assert!((u[0][0].re - 0.90483750).abs() < 5e-9);
        let err = (u[0][0].re - (-h).exp()).abs();
        assert!((err - 8.2e-8).abs() < 0.1e-8, "{err}");

        let mut half = scalar(1.0);
        step_rk4_exactlin(&mut half, &mut decay, None, 0.05).unwrap();
        let ratio = err / (half[0][0].re - (-0.05f64).exp()).abs();
        assert!((ratio.log2() - 5.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn rk2_growth_factor() {
        let mut u = scalar(1.0);
        step_rk2_exactlin(&mut u, &mut decay, None, 0.1).unwrap();
        assert!((u[0][0].re - 0.905).abs() < 1e-15);
        let err = (u[0][0].re - (-0.1f64).exp()).abs();
        assert!((err - 1.6e-4).abs() < 0.05e-4, "{err}");
    }

    #[test]
    fn mismatched_tendency_is_a_shape_error() {
        let mut bad = |_: &[SpectField], out: &mut [SpectField], _: &mut KernelTimers| -> Result<()> {
            out[0].push(Complex64::new(0.0, 0.0));
            Ok(())
        };
        let mut u = scalar(1.0);
        assert!(matches!(
            step_rk4_exactlin(&mut u, &mut bad, None, 0.1),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            step_rk4_exactlin(&mut u, &mut zero, Some(&[1.0, 2.0]), 0.1),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_tendency_without_linear_term_keeps_bits() {
        let mut u = vec![vec![Complex64::new(-0.0, 1.5), Complex64::new(2.0, -0.0)]];
        let before = u.clone();
        let mut z = |_: &[SpectField], out: &mut [SpectField], _: &mut KernelTimers| -> Result<()> {
            out[0].iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            Ok(())
        };
        step_rk4_exactlin(&mut u, &mut z, None, 0.1).unwrap();
        for (a, b) in u[0].iter().zip(&before[0]) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = StepperConfig {
            scheme: Scheme::Rk4,
            cfl_coef: 0.5,
            dt_max: 0.1,
            fixed_dt: None,
            stop: StopRule::Iterations(10),
        };
        assert!(cfg.validate().is_ok());
        cfg.cfl_coef = 1.5;
        assert!(cfg.validate().is_err());
        assert_eq!(Scheme::parse("rk2").unwrap(), Scheme::Rk2);
        assert!(Scheme::parse("euler").is_err());
    }
}
