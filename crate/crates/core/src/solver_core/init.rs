use std::f64::consts::PI;
use std::path::PathBuf;

use super::{Simulation, SolverInfo};
use crate::error::{Error, Result};
use crate::output::{energy, params_digest, Snapshot};
use crate::params::ParamTree;

/// How the initial state is built.
#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    /// Every physical state variable set to a constant.
    Constant(f64),
    /// Random state on the band `[k_min, k_max]` with the given energy.
    Noise { seed: u64, k_min: f64, k_max: f64, energy: f64 },
    /// Two Gaussian vortices of circulation `±Γ` (2D vorticity solvers).
    Dipole { circulation: f64, radius: f64 },
    /// Physical fields read from a snapshot file.
    FromFile(PathBuf),
}

impl InitKind {
    pub fn from_params(params: &ParamTree) -> Result<Self> {
        let kind = params.get_str("init_fields.type")?;
        let positive = |path: &str| -> Result<f64> {
            let v = params.get_f64(path)?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{path} must be positive, got {v}")))
            }
        };
        match kind {
            "constant" => Ok(InitKind::Constant(params.get_f64("init_fields.constant.value")?)),
            "noise" => {
                let seed = params.get_int("init_fields.noise.seed")?;
                let k_min = params.get_f64("init_fields.noise.k_min")?;
                let k_max = params.get_f64("init_fields.noise.k_max")?;
                if !(k_min >= 0.0 && k_min < k_max) {
                    return Err(Error::Config(format!("empty noise band [{k_min}, {k_max}]")));
                }
                Ok(InitKind::Noise {
                    seed: u64::try_from(seed)
                        .map_err(|_| Error::Config(format!("noise seed must be >= 0, got {seed}")))?,
                    k_min,
                    k_max,
                    energy: positive("init_fields.noise.energy")?,
                })
            }
            "dipole" => Ok(InitKind::Dipole {
                circulation: params.get_f64("init_fields.dipole.circulation")?,
                radius: positive("init_fields.dipole.radius")?,
            }),
            "from_file" => {
                let path = params.get_str("init_fields.from_file.path")?;
                if path.is_empty() {
                    return Err(Error::Config("init_fields.from_file.path is empty".into()));
                }
                Ok(InitKind::FromFile(PathBuf::from(path)))
            }
            other => Err(Error::Config(format!(
                "unknown init_fields.type `{other}` (use constant, noise, dipole or from_file)"
            ))),
        }
    }

    pub fn check_dims(&self, info: &SolverInfo) -> Result<()> {
        if matches!(self, InitKind::Dipole { .. }) && (info.dims != 2 || info.keys_state_spect.len() != 1) {
            return Err(Error::Config(format!(
                "dipole initialization needs a 2D vorticity solver, `{}` is {}D",
                info.short_name, info.dims
            )));
        }
        Ok(())
    }
}

/// Periodic distance between `a` and `b` on a domain of length `l`.
fn periodic_delta(a: f64, b: f64, l: f64) -> f64 {
    let d = (a - b).rem_euclid(l);
    if d > l / 2.0 {
        d - l
    } else {
        d
    }
}

/// Sets the initial state of `sim`.
pub fn init_fields(sim: &mut Simulation, kind: &InitKind) -> Result<()> {
    kind.check_dims(&sim.info)?;
    let grid = &sim.oper;
    let eq = sim.equation.as_ref();
    match kind {
        InitKind::Constant(value) => {
            let phys = vec![vec![*value; grid.phys_len()]; sim.info.keys_state_phys.len()];
            sim.state.set_phys(grid, phys)?;
            let mut spect = sim.state.spect().to_vec();
            eq.constrain(grid, &mut spect)?;
            if spect.iter().any(|f| f[0].re != *value) {
                return Err(Error::Config(format!(
                    "a constant initial state is incompatible with the constraints of `{}`",
                    sim.info.short_name
                )));
            }
        }
        InitKind::Noise { seed, k_min, k_max, energy: target } => {
            let mut spect = eq.random_state(grid, *seed, [*k_min, *k_max])?;
            for f in spect.iter_mut() {
                grid.dealias(f)?;
            }
            eq.constrain(grid, &mut spect)?;
            let e = energy(grid, &eq.velocity(grid, &spect)?);
            if !(e > 0.0) {
                return Err(Error::Config(format!("noise band [{k_min}, {k_max}] has no resolved modes")));
            }
            let scale = (target / e).sqrt();
            spect.iter_mut().flatten().for_each(|c| *c *= scale);
            sim.state.set_spect(spect)?;
        }
        InitKind::Dipole { circulation, radius } => {
            let x = grid.coords(0);
            let y = grid.coords(1);
            let (lx, ly) = (grid.lengths()[1], grid.lengths()[0]);
            let centers = [(lx / 2.0 - lx / 8.0, ly / 2.0, 1.0), (lx / 2.0 + lx / 8.0, ly / 2.0, -1.0)];
            let amp = circulation / (PI * radius * radius);
            let rot: Vec<f64> = x
                .iter()
                .zip(&y)
                .map(|(&x, &y)| {
                    centers
                        .iter()
                        .map(|&(cx, cy, sign)| {
                            let r2 = periodic_delta(x, cx, lx).powi(2) + periodic_delta(y, cy, ly).powi(2);
                            sign * amp * (-r2 / (radius * radius)).exp()
                        })
                        .sum()
                })
                .collect();
            let mut spect = vec![grid.forward(&rot)?];
            grid.dealias(&mut spect[0])?;
            eq.constrain(grid, &mut spect)?;
            sim.state.set_spect(spect)?;
        }
        InitKind::FromFile(path) => {
            let snap = Snapshot::load(path)?;
            let h = &snap.header;
            if h.solver != sim.info.short_name || h.shape != grid.shape() || h.vars != sim.info.keys_state_phys {
                return Err(Error::format(
                    path,
                    format!(
                        "snapshot holds {} {:?} on {:?}, simulation expects {} {:?} on {:?}",
                        h.solver,
                        h.vars,
                        h.shape,
                        sim.info.short_name,
                        sim.info.keys_state_phys,
                        grid.shape()
                    ),
                ));
            }
            let expected = params_digest(&sim.params)?;
            if h.digest != expected {
                return Err(Error::Digest {
                    expected,
                    found: h.digest.clone(),
                });
            }
            sim.time_stepping.t = h.time;
            sim.time_stepping.it = h.it;
            sim.state.set_phys(grid, snap.fields)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver_core::{build_simulation, create_default_params};

    #[test]
    fn constant_ad1d() {
        let mut p = create_default_params("ad1d").unwrap();
        p.set("init_fields.type", "constant").unwrap();
        p.set("init_fields.constant.value", 2.0).unwrap();
        let mut sim = build_simulation(&p).unwrap();
        assert_eq!(sim.state.spect()[0][0].re, 2.0);
        assert!(sim.state.phys(&sim.oper.clone()).unwrap()[0].iter().all(|v| *v == 2.0));
    }

    #[test]
    fn constant_vorticity_is_rejected() {
        let mut p = create_default_params("ns2d").unwrap();
        p.set("init_fields.type", "constant").unwrap();
        assert!(matches!(build_simulation(&p), Err(Error::Config(_))));
    }

    #[test]
    fn noise_is_deterministic() {
        let mut p = create_default_params("ns3d").unwrap();
        p.set("oper.nx", 16i64).unwrap();
        p.set("oper.ny", 16i64).unwrap();
        p.set("oper.nz", 16i64).unwrap();
        p.set("init_fields.noise.seed", 7i64).unwrap();
        p.set("init_fields.noise.k_max", 4.0).unwrap();
        let a = build_simulation(&p).unwrap();
        let b = build_simulation(&p).unwrap();
        assert_eq!(a.checksum(), b.checksum());
    }

    #[test]
    fn dipole_only_in_2d() {
        let mut p = create_default_params("ns2d").unwrap();
        p.set("init_fields.type", "dipole").unwrap();
        let sim = build_simulation(&p).unwrap();
        assert_eq!(sim.state.spect()[0][0].norm(), 0.0);
        assert!(sim.energy().unwrap() > 0.0);
        for solver in ["ad1d", "ns3d"] {
            let mut p = create_default_params(solver).unwrap();
            p.set("init_fields.type", "dipole").unwrap();
            assert!(matches!(build_simulation(&p), Err(Error::Config(_))), "{solver}");
        }
    }

    #[test]
    fn missing_file_fails() {
        let mut p = create_default_params("ad1d").unwrap();
        p.set("init_fields.type", "from_file").unwrap();
        p.set("init_fields.from_file.path", "/nonexistent/state.fld").unwrap();
        assert!(matches!(build_simulation(&p), Err(Error::Io(_))));
    }

    #[test]
    fn from_file_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = create_default_params("ns2d").unwrap();
        p.set("oper.nx", 32i64).unwrap();
        p.set("oper.ny", 32i64).unwrap();
        let mut sim = build_simulation(&p).unwrap();
        let snap = sim.snapshot().unwrap();
        let path = dir.path().join("s.fld");
        snap.save(&path).unwrap();
        p.set("init_fields.type", "from_file").unwrap();
        p.set("init_fields.from_file.path", path.to_str().unwrap()).unwrap();
        let mut back = build_simulation(&p).unwrap();
        let oper = back.oper.clone();
        let phys = back.state.phys(&oper).unwrap();
        for (a, b) in phys.iter().flatten().zip(snap.fields.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        p.set("oper.Lx", 3.0).unwrap();
        assert!(matches!(build_simulation(&p), Err(Error::Digest { .. })));
    }
}
