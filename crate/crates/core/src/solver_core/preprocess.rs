use super::{InitKind, Simulation};
use crate::error::{Error, Result};
use crate::params::ParamTree;

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub enable: bool,
    pub rescale_energy: bool,
    pub target_energy: f64,
    pub viscosity_from_resolution: bool,
    /// Constant `C` of `ν = C Δx^{4/3} P^{1/3}`.
    pub viscosity_const: f64,
}

impl PreprocessConfig {
    pub fn from_params(params: &ParamTree) -> Result<Self> {
        let cfg = PreprocessConfig {
            enable: params.get_bool("preprocess.enable")?,
            rescale_energy: params.get_bool("preprocess.rescale_energy")?,
            target_energy: params.get_f64("preprocess.target_energy")?,
            viscosity_from_resolution: params.get_bool("preprocess.viscosity_from_resolution")?,
            viscosity_const: params.get_f64("preprocess.viscosity_const")?,
        };
        if cfg.enable && cfg.rescale_energy && !(cfg.target_energy > 0.0 && cfg.target_energy.is_finite()) {
            return Err(Error::Config(format!(
                "preprocess.target_energy must be positive, got {}",
                cfg.target_energy
            )));
        }
        if cfg.enable && cfg.viscosity_from_resolution && !(cfg.viscosity_const >= 0.0 && cfg.viscosity_const.is_finite()) {
            return Err(Error::Config(format!(
                "preprocess.viscosity_const must be >= 0, got {}",
                cfg.viscosity_const
            )));
        }
        Ok(cfg)
    }
}

/// Kolmogorov-type viscosity `C Δx^{4/3} P^{1/3}`.
pub fn viscosity_from_resolution(c: f64, dx: f64, injection_rate: f64) -> f64 {
    c * dx.powf(4.0 / 3.0) * injection_rate.cbrt()
}

/// Rescales the initial state to the target energy and sets the viscosity
/// from the resolution, as configured. Each change is written to the log.
pub fn preprocess_adjust(sim: &mut Simulation) -> Result<()> {
    let cfg = sim.preprocess.clone();
    if !cfg.enable {
        return Ok(());
    }
    if cfg.rescale_energy && !matches!(sim.init, InitKind::FromFile(_)) {
        let e = sim.energy()?;
        if e > 0.0 {
            let scale = (cfg.target_energy / e).sqrt();
            sim.state.spect_mut().iter_mut().flatten().for_each(|c| *c *= scale);
            sim.output.log(format!(
                "preprocess: initial energy rescaled from {e:e} to {:e} (factor {scale:e})",
                cfg.target_energy
            ))?;
        } else {
            sim.output.log("preprocess: initial state has no energy, not rescaled")?;
        }
    }
    if cfg.viscosity_from_resolution {
        let dx = (0..sim.oper.dims()).map(|c| sim.oper.dx(c)).fold(0.0, f64::max);
        let p = sim.params.get_f64("forcing.injection_rate")?.abs();
        let nu = viscosity_from_resolution(cfg.viscosity_const, dx, p);
        let old = sim.nu();
        sim.set_viscosity(nu)?;
        sim.output.log(format!("preprocess: nu_2 changed from {old:e} to {nu:e}"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver_core::{build_simulation, create_default_params};
    use std::f64::consts::PI;

    fn params() -> ParamTree {
        let mut p = create_default_params("ns2d").unwrap();
        p.set("oper.nx", 32i64).unwrap();
        p.set("oper.ny", 32i64).unwrap();
        p.set("init_fields.noise.energy", 4.0).unwrap();
        p
    }

    #[test]
    fn energy_rescaled_to_target() {
        let mut p = params();
        p.set("preprocess.enable", true).unwrap();
        p.set("preprocess.rescale_energy", true).unwrap();
        p.set("preprocess.target_energy", 1.0).unwrap();
        let sim = build_simulation(&p).unwrap();
        assert!((sim.energy().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(sim.output.log_lines().len(), 1);
        let plain = build_simulation(&params()).unwrap();
        let ratio = sim.state.spect()[0][40] / plain.state.spect()[0][40];
        assert!((ratio.re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disabled_is_a_no_op() {
        let mut p = params();
        p.set("preprocess.rescale_energy", true).unwrap();
        let a = build_simulation(&p).unwrap();
        let b = build_simulation(&params()).unwrap();
        assert_eq!(a.checksum(), b.checksum());
        assert!(a.output.log_lines().is_empty());
    }

    #[test]
    fn kolmogorov_viscosity() {
        let dx = 2.0 * PI / 64.0;
        assert!((viscosity_from_resolution(1.0, dx, 1.0) - dx.powf(4.0 / 3.0)).abs() < 1e-18);
        let mut p = create_default_params("ns2d").unwrap();
        p.set("preprocess.enable", true).unwrap();
        p.set("preprocess.viscosity_from_resolution", true).unwrap();
        let sim = build_simulation(&p).unwrap();
        assert!((sim.nu() - dx.powf(4.0 / 3.0)).abs() < 1e-15);
        assert_eq!(sim.params.get_f64("nu_2").unwrap(), sim.nu());
    }
}
