use std::time::Instant;

use sha2::{Digest, Sha256};

use super::forcing::{Forcing, ForcingConfig};
use super::init::{init_fields, InitKind};
use super::preprocess::{preprocess_adjust, PreprocessConfig};
use super::registry;
use super::{Equation, SolverInfo, StateSet};
use crate::error::{Error, Result};
use crate::operators::{make_grid, SpectField, SpectralGrid};
use crate::output::{
    self, compute_increments, compute_spectral_energy_budget, compute_spectrum, params_digest,
    record_spatial_means, BudgetRecord, IncrementsRecord, MeansInput, Output, OutputConfig, Snapshot,
    SnapshotHeader, SpatialMeansRecord, SpectrumRecord, StdoutLine,
};
use crate::params::{self, ParamTree};
use crate::time_stepping::{compute_cfl_dt, RkStepper, RunSummary, Scheme, StepperConfig, StopRule};
use crate::timers::KernelTimers;

const AXES: [&str; 3] = ["x", "y", "z"];

/// Time-stepping state: configuration, clock and the RK stepper.
#[derive(Debug, Clone)]
pub struct TimeStepping {
    pub config: StepperConfig,
    pub t: f64,
    pub it: usize,
    /// Last time step used, or the initial one before the first step.
    pub dt: f64,
    stepper: RkStepper,
}

impl TimeStepping {
    pub fn config_from_params(params: &ParamTree) -> Result<StepperConfig> {
        let it_end = params.get_int("time_stepping.it_end")?;
        let cfg = StepperConfig {
            scheme: Scheme::parse(params.get_str("time_stepping.scheme")?)?,
            cfl_coef: params.get_f64("time_stepping.cfl_coef")?,
            dt_max: params.get_f64("time_stepping.deltat_max")?,
            fixed_dt: if params.get_bool("time_stepping.use_cfl")? {
                None
            } else {
                Some(params.get_f64("time_stepping.deltat0")?)
            },
            stop: if params.get_bool("time_stepping.use_t_end")? {
                StopRule::TimeEnd(params.get_f64("time_stepping.t_end")?)
            } else {
                StopRule::Iterations(
                    usize::try_from(it_end)
                        .map_err(|_| Error::Config(format!("it_end must be >= 0, got {it_end}")))?,
                )
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn new(config: StepperConfig, dt0: f64) -> Self {
        TimeStepping {
            stepper: RkStepper::new(config.scheme),
            dt: config.fixed_dt.unwrap_or(dt0),
            config,
            t: 0.0,
            it: 0,
        }
    }

    /// Whether the stopping rule is met.
    pub fn is_finished(&self) -> bool {
        match self.config.stop {
            StopRule::TimeEnd(te) => te - self.t <= 1e-12 * te.abs().max(1.0),
            StopRule::Iterations(n) => self.it >= n,
        }
    }
}

/// A configured solver instance: parameters, grid, state, time stepping,
/// forcing and outputs.
pub struct Simulation {
    /// Parameters the simulation was built from, after preprocessing.
    pub params: ParamTree,
    pub info: SolverInfo,
    pub oper: SpectralGrid,
    pub output: Output,
    pub state: StateSet,
    pub time_stepping: TimeStepping,
    pub init: InitKind,
    pub forcing: Option<Forcing>,
    pub preprocess: PreprocessConfig,
    /// Cumulative kernel timers over every step taken.
    pub timers: KernelTimers,
    pub(crate) equation: Box<dyn Equation>,
    sigma: Option<Vec<f64>>,
    nu: f64,
    pub(crate) read_only: bool,
}

fn grid_from_params(params: &ParamTree, dims: usize) -> Result<SpectralGrid> {
    let mut shape = Vec::with_capacity(dims);
    let mut lengths = Vec::with_capacity(dims);
    for axis in AXES[..dims].iter().rev() {
        let n = params.get_int(&format!("oper.n{axis}"))?;
        let n = usize::try_from(n)
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("oper.n{axis} must be positive, got {n}")))?;
        shape.push(n);
        lengths.push(params.get_f64(&format!("oper.L{axis}"))?);
    }
    make_grid(&shape, &lengths, params.get_f64("oper.coef_dealiasing")?)
}

fn dir_name(solver: &str, grid: &SpectralGrid) -> String {
    let extents: Vec<String> = grid.shape().iter().rev().map(|n| n.to_string()).collect();
    let stamp = chrono::Local::now().format("%Y-%m-%d-%H-%M-%S");
    format!("{solver}_{}_{stamp}", extents.join("x"))
}

/// Builds a simulation from parameters created by
/// [`create_default_params`](super::create_default_params).
///
/// Every section of the parameters is validated before any field is
/// allocated. Sub-objects are then built in order: operators, output,
/// state, time stepping, initial fields, forcing, preprocessing.
pub fn build_simulation(params: &ParamTree) -> Result<Simulation> {
    let mut params = params.clone();
    params.freeze();
    let entry = registry::entry(params.get_str("solver")?)?;
    let info = entry.info.clone();

    let nu = params.get_f64("nu_2")?;
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::Config(format!("nu_2 must be finite and >= 0, got {nu}")));
    }
    let stepper_config = TimeStepping::config_from_params(&params)?;
    let dt0 = params.get_f64("time_stepping.deltat0")?;
    if !(dt0 > 0.0 && dt0.is_finite()) {
        return Err(Error::Config(format!("deltat0 must be positive, got {dt0}")));
    }
    let init = InitKind::from_params(&params)?;
    init.check_dims(&info)?;
    let forcing_config = if params.get_bool("forcing.enable")? {
        Some(ForcingConfig::from_params(&params)?)
    } else {
        None
    };
    let output_config = OutputConfig::from_params(&params)?;
    let preprocess = PreprocessConfig::from_params(&params)?;

    let oper = grid_from_params(&params, info.dims)?;
    if let Some(f) = &forcing_config {
        f.check_resolved(&oper)?;
    }
    let mut output = Output::new(output_config);
    if output.config.has_to_save {
        output.create_sim_dir(&dir_name(&info.short_name, &oper))?;
    }
    let state = StateSet::new(&info, &oper);
    let time_stepping = TimeStepping::new(stepper_config, dt0);
    let mut equation = (entry.build)(&params, &oper)?;
    equation.set_viscosity(&oper, nu);
    let sigma = equation.linear_coef().map(<[f64]>::to_vec);

    let mut sim = Simulation {
        params,
        info,
        oper,
        output,
        state,
        time_stepping,
        init: init.clone(),
        forcing: None,
        preprocess,
        timers: KernelTimers::new(),
        equation,
        sigma,
        nu,
        read_only: false,
    };
    init_fields(&mut sim, &init)?;
    sim.output.next_save = sim.time_stepping.t;
    sim.forcing = forcing_config.map(Forcing::new);
    preprocess_adjust(&mut sim)?;

    let params_text = params::serialize(&sim.params);
    let info_text = sim.info.to_string();
    sim.output.write_text(output::PARAMS_FILE, &params_text)?;
    sim.output.write_text(output::INFO_FILE, &info_text)?;
    Ok(sim)
}

impl Simulation {
    pub fn equation(&self) -> &dyn Equation {
        self.equation.as_ref()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Linear coefficient `σ` used by the time stepper.
    pub fn linear_coef(&self) -> Option<&[f64]> {
        self.sigma.as_deref()
    }

    /// Changes the viscosity; the stored parameters follow.
    pub fn set_viscosity(&mut self, nu: f64) -> Result<()> {
        self.equation.set_viscosity(&self.oper, nu);
        self.sigma = self.equation.linear_coef().map(<[f64]>::to_vec);
        self.nu = nu;
        self.params.set("nu_2", nu)
    }

    pub fn t(&self) -> f64 {
        self.time_stepping.t
    }

    pub fn it(&self) -> usize {
        self.time_stepping.it
    }

    pub fn is_read_only(&self) -> bool {
        self.read_only
    }

    fn ensure_writable(&self) -> Result<()> {
        if self.read_only {
            return Err(Error::Config("a simulation loaded for plotting cannot be advanced".into()));
        }
        Ok(())
    }

    /// Velocity components of the current state, spectral.
    pub fn velocity(&self) -> Result<Vec<SpectField>> {
        self.equation.velocity(&self.oper, self.state.spect())
    }

    pub fn energy(&self) -> Result<f64> {
        Ok(output::energy(&self.oper, &self.velocity()?))
    }

    /// Energy injection rate of the current forcing term at the current
    /// state; zero when forcing is disabled or not yet evaluated.
    pub fn forcing_power(&self) -> Result<f64> {
        let Some(f) = self.forcing.as_ref().and_then(Forcing::fields) else {
            return Ok(0.0);
        };
        let u = self.velocity()?;
        let vf = self.equation.velocity(&self.oper, f)?;
        Ok(u.iter().zip(&vf).map(|(a, b)| self.oper.inner(a, b)).sum())
    }

    pub fn spatial_means(&self) -> Result<SpatialMeansRecord> {
        let velocity = self.velocity()?;
        let vorticity = self.equation.vorticity(&self.oper, self.state.spect())?;
        Ok(record_spatial_means(
            &self.oper,
            MeansInput {
                velocity: &velocity,
                vorticity: vorticity.as_deref(),
                sigma: self.linear_coef(),
                p_forcing: self.forcing_power()?,
                t: self.t(),
                it: self.it(),
                dt: self.time_stepping.dt,
            },
        ))
    }

    pub fn spectrum(&self) -> Result<SpectrumRecord> {
        Ok(compute_spectrum(&self.oper, &self.velocity()?, self.t()))
    }

    /// Nonlinear tendency of the current state, without forcing.
    pub fn nonlinear_tendency(&mut self) -> Result<Vec<SpectField>> {
        let mut out: Vec<SpectField> = self.state.spect().iter().map(|f| vec![Default::default(); f.len()]).collect();
        self.equation
            .tendency(&self.oper, self.state.spect(), &mut out, &mut KernelTimers::new())?;
        Ok(out)
    }

    pub fn energy_budget(&mut self) -> Result<BudgetRecord> {
        let n = self.nonlinear_tendency()?;
        let vn = self.equation.velocity(&self.oper, &n)?;
        Ok(compute_spectral_energy_budget(
            &self.oper,
            &self.velocity()?,
            &vn,
            self.linear_coef(),
            self.t(),
        ))
    }

    /// Velocity components in physical space.
    pub fn velocity_phys(&self) -> Result<Vec<Vec<f64>>> {
        self.velocity()?.iter().map(|c| self.oper.inverse(c)).collect()
    }

    pub fn increments(&self) -> Result<Vec<IncrementsRecord>> {
        let u = self.velocity_phys()?;
        let cfg = &self.output.config;
        (0..self.oper.dims())
            .map(|d| compute_increments(&self.oper, &u, d, &cfg.increment_orders, cfg.n_separations, self.t()))
            .collect()
    }

    pub fn snapshot(&mut self) -> Result<Snapshot> {
        let fields = self.state.phys(&self.oper)?.to_vec();
        Ok(Snapshot {
            header: SnapshotHeader {
                time: self.t(),
                it: self.it(),
                shape: self.oper.shape().to_vec(),
                vars: self.info.keys_state_phys.clone(),
                solver: self.info.short_name.clone(),
                digest: params_digest(&self.params)?,
            },
            fields,
        })
    }

    /// SHA-256 of the spectral state, as hex.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for field in self.state.spect() {
            for c in field {
                hasher.update(c.re.to_le_bytes());
                hasher.update(c.im.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    fn select_dt(&mut self) -> Result<f64> {
        let cfg = &self.time_stepping.config;
        let mut dt = match cfg.fixed_dt {
            Some(dt) => dt,
            None => {
                let start = Instant::now();
                let vmax = self.equation.max_velocity(&self.oper, self.state.spect())?;
                let dx: Vec<f64> = (0..self.oper.dims()).map(|c| self.oper.dx(c)).collect();
                let dt = compute_cfl_dt(&vmax, &dx, cfg.cfl_coef, cfg.dt_max);
                self.timers.add("cfl", start.elapsed().as_secs_f64());
                dt
            }
        };
        if let StopRule::TimeEnd(te) = cfg.stop {
            let remaining = te - self.time_stepping.t;
            if remaining > 0.0 && remaining < dt {
                dt = remaining;
            }
        }
        Ok(dt)
    }

    /// Advances the state by one time step, ignoring the stopping rule.
    pub fn step(&mut self) -> Result<()> {
        self.ensure_writable()?;
        let dt = self.select_dt()?;
        let Simulation {
            oper,
            state,
            equation,
            forcing,
            time_stepping,
            timers,
            sigma,
            output,
            ..
        } = self;

        let forcing_fields = match forcing.as_mut() {
            Some(f) => {
                let start = Instant::now();
                let fallback = f.update(oper, equation.as_ref(), state.spect(), time_stepping.it)?;
                timers.add("forcing", start.elapsed().as_secs_f64());
                if fallback {
                    output.log(format!(
                        "it={}: forcing inner product is degenerate, using unit-norm forcing",
                        time_stepping.it
                    ))?;
                }
                f.fields()
            }
            None => None,
        };
        let mut tendency = |s: &[SpectField], out: &mut [SpectField], timers: &mut KernelTimers| -> Result<()> {
            equation.tendency(oper, s, out, timers)?;
            if let Some(f) = forcing_fields {
                let start = Instant::now();
                for (o, fc) in out.iter_mut().zip(f) {
                    for (a, b) in o.iter_mut().zip(fc) {
                        *a += b;
                    }
                }
                timers.add("forcing", start.elapsed().as_secs_f64());
            }
            Ok(())
        };
        time_stepping
            .stepper
            .step(state.spect_mut(), sigma.as_deref(), dt, &mut tendency, timers)?;
        time_stepping.t += dt;
        time_stepping.it += 1;
        time_stepping.dt = dt;

        let start = Instant::now();
        let bad = state.first_non_finite().map(str::to_string);
        timers.add("check", start.elapsed().as_secs_f64());
        if let Some(field) = bad {
            let err = Error::Divergence {
                iteration: time_stepping.it,
                field,
            };
            output.log(err.to_string())?;
            return Err(err);
        }
        Ok(())
    }

    /// Writes the records due at the current iteration.
    fn output_hook(&mut self, is_final: bool, start: Instant) -> Result<()> {
        let hook_start = Instant::now();
        let (it, t) = (self.it(), self.t());
        let cfg = &self.output.config;
        let print_due = cfg.period_print > 0
            && (is_final || it % cfg.period_print == 0)
            && self.output.last_print_it != Some(it);
        let save_due = self.output.writable_dir().is_some()
            && self.output.last_save_it != Some(it)
            && (is_final || t >= self.output.next_save - 1e-9 * cfg.period_save);
        if print_due || save_due {
            let rec = self.spatial_means()?;
            self.output.append(output::MEANS_FILE, &rec)?;
            if print_due {
                self.output.print_line(StdoutLine {
                    it,
                    t,
                    dt: rec.dt,
                    energy: rec.energy,
                    enstrophy: rec.enstrophy,
                    walltime: start.elapsed().as_secs_f64(),
                })?;
                self.output.last_print_it = Some(it);
            }
            self.output.means.push(rec);
        }
        if save_due {
            self.save_records()?;
            self.output.last_save_it = Some(it);
            let period = self.output.config.period_save;
            while self.output.next_save <= t + 1e-9 * period {
                self.output.next_save += period;
            }
        }
        self.timers.add("output", hook_start.elapsed().as_secs_f64());
        Ok(())
    }

    /// Saves a snapshot, the spectrum, the energy budget and the increments.
    pub fn save_records(&mut self) -> Result<()> {
        let snap = self.snapshot()?;
        self.output.save_snapshot(&snap)?;
        let spectrum = self.spectrum()?;
        self.output.append(output::SPECTRA_FILE, &spectrum)?;
        let budget = self.energy_budget()?;
        self.output.append(output::BUDGET_FILE, &budget)?;
        for rec in self.increments()? {
            self.output.append(output::INCREMENTS_FILE, &rec)?;
        }
        Ok(())
    }

    fn run_loop(&mut self, start: Instant) -> Result<()> {
        self.output_hook(false, start)?;
        while !self.time_stepping.is_finished() {
            self.step()?;
            self.output_hook(false, start)?;
        }
        self.output_hook(true, start)
    }

    /// Advances until the stopping rule is met, writing outputs on the way.
    ///
    /// The returned timers cover this call only; the part of the wall time
    /// not attributed to a kernel is reported as `overhead`.
    pub fn run(&mut self) -> Result<RunSummary> {
        self.ensure_writable()?;
        let start = Instant::now();
        let (it0, t0) = (self.it(), self.t());
        let outer = std::mem::take(&mut self.timers);
        let result = self.run_loop(start);
        let walltime = start.elapsed().as_secs_f64();
        let mut timers = std::mem::replace(&mut self.timers, outer);
        timers.add("overhead", (walltime - timers.total()).max(0.0));
        self.timers.merge(&timers);
        result?;
        Ok(RunSummary {
            iterations: self.it() - it0,
            simulated_time: self.t() - t0,
            walltime,
            timers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver_core::create_default_params;

    fn ns2d(n: i64) -> ParamTree {
        let mut p = create_default_params("ns2d").unwrap();
        p.set("oper.nx", n).unwrap();
        p.set("oper.ny", n).unwrap();
        p
    }

    #[test]
    fn builds_noise_ns2d() {
        let sim = build_simulation(&ns2d(64)).unwrap();
        assert!(sim.state.spect().iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite()));
        assert!(sim.forcing.is_none());
        assert!((sim.energy().unwrap() - 0.5).abs() < 1e-12);
        assert!(sim.output.sim_dir.is_none());
    }

    #[test]
    fn odd_extent_is_a_config_error() {
        assert!(matches!(build_simulation(&ns2d(7)), Err(Error::Config(_))));
        let mut p = ns2d(16);
        p.set("oper.coef_dealiasing", 0.0).unwrap();
        assert!(matches!(build_simulation(&p), Err(Error::Config(_))));
        let mut p = ns2d(16);
        p.set("time_stepping.scheme", "RK3").unwrap();
        assert!(matches!(build_simulation(&p), Err(Error::Config(_))));
    }

    #[test]
    fn forcing_built_only_when_enabled() {
        let mut p = ns2d(32);
        p.set("forcing.enable", true).unwrap();
        assert!(build_simulation(&p).unwrap().forcing.is_some());
    }

    #[test]
    fn fixed_dt_run_reaches_t_end() {
        let mut p = ns2d(32);
        p.set("time_stepping.use_cfl", false).unwrap();
        p.set("time_stepping.deltat0", 0.01).unwrap();
        p.set("time_stepping.t_end", 0.1).unwrap();
        let mut sim = build_simulation(&p).unwrap();
        let summary = sim.run().unwrap();
        assert_eq!(summary.iterations, 10);
        assert!((sim.t() - 0.1).abs() < 1e-15);
        assert!(summary.timers.get("fft").unwrap() > 0.0);
    }

    #[test]
    fn cfl_steps_never_exceed_dt_max() {
        let mut p = ns2d(32);
        p.set("time_stepping.t_end", 0.3).unwrap();
        p.set("time_stepping.deltat_max", 0.05).unwrap();
        let mut sim = build_simulation(&p).unwrap();
        while !sim.time_stepping.is_finished() {
            sim.step().unwrap();
            assert!(sim.time_stepping.dt <= 0.05);
        }
        assert!((sim.t() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_reported() {
        let mut p = ns2d(32);
        p.set("time_stepping.use_cfl", false).unwrap();
        p.set("time_stepping.deltat0", 10.0).unwrap();
        p.set("time_stepping.use_t_end", false).unwrap();
        p.set("time_stepping.it_end", 200i64).unwrap();
        p.set("init_fields.noise.energy", 1e3).unwrap();
        let mut sim = build_simulation(&p).unwrap();
        match sim.run() {
            Err(Error::Divergence { field, .. }) => assert_eq!(field, "rot_fft"),
            other => panic!("{:?}", other.map(|s| s.iterations)),
        }
    }

    #[test]
    fn state_stays_consistent_after_steps() {
        let mut p = ns2d(32);
        p.set("time_stepping.use_t_end", false).unwrap();
        p.set("time_stepping.it_end", 3i64).unwrap();
        let mut sim = build_simulation(&p).unwrap();
        sim.run().unwrap();
        let spect = sim.state.spect().to_vec();
        let phys = sim.state.phys(&sim.oper).unwrap().to_vec();
        let back = sim.oper.forward(&phys[0]).unwrap();
        let scale = spect[0].iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in back.iter().zip(&spect[0]) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }
}
