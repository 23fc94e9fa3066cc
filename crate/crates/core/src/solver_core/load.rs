use std::path::Path;

use super::{build_simulation, Simulation};
use crate::error::{Error, Result};
use crate::output::{self, list_snapshots};
use crate::params::{self, ParamTree};

fn read_params(dir: &Path) -> Result<ParamTree> {
    if !dir.is_dir() {
        return Err(Error::MissingRecords(format!("{} is not a directory", dir.display())));
    }
    let path = dir.join(output::PARAMS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingRecords(format!("no {} in {}", output::PARAMS_FILE, dir.display())),
        _ => Error::Io(e),
    })?;
    params::deserialize(&text).map_err(|e| Error::format(&path, e.to_string()))
}

/// Opens a simulation directory for reading its outputs. The state is the
/// last snapshot if any, and the simulation cannot be advanced.
pub fn load_sim_for_plot(dir: &Path) -> Result<Simulation> {
    let mut p = read_params(dir)?;
    let snapshots = list_snapshots(dir)?;
    match snapshots.last() {
        Some((_, path)) => {
            p.set("init_fields.type", "from_file")?;
            p.set("init_fields.from_file.path", path.to_string_lossy().as_ref())?;
        }
        None => {
            p.set("init_fields.type", "constant")?;
            p.set("init_fields.constant.value", 0.0)?;
        }
    }
    p.set("output.has_to_save", false)?;
    p.set("output.verbose", false)?;
    p.set("preprocess.enable", false)?;
    let mut sim = build_simulation(&p)?;
    sim.output.sim_dir = Some(dir.to_path_buf());
    sim.read_only = true;
    Ok(sim)
}

/// Restarts from the snapshot of `dir` nearest to `time` (the last one when
/// `time` is `None`). The match must lie within `1e-9 |t|`.
pub fn load_state_phys_file(dir: &Path, time: Option<f64>) -> Result<Simulation> {
    load_state_phys_file_with(dir, time, |_| Ok(()))
}

/// Like [`load_state_phys_file`], with a hook to modify the parameters
/// (stopping rule, output...) before the simulation is built.
///
/// By default the restarted simulation does not save and skips
/// preprocessing.
pub fn load_state_phys_file_with(
    dir: &Path,
    time: Option<f64>,
    modify: impl FnOnce(&mut ParamTree) -> Result<()>,
) -> Result<Simulation> {
    let mut p = read_params(dir)?;
    let snapshots = list_snapshots(dir)?;
    let (header, path) = match time {
        None => snapshots.last(),
        Some(t) => snapshots
            .iter()
            .min_by(|a, b| (a.0.time - t).abs().total_cmp(&(b.0.time - t).abs()))
            .filter(|(h, _)| (h.time - t).abs() <= (1e-9 * t.abs()).max(1e-12)),
    }
    .ok_or_else(|| Error::NoSnapshot {
        time: time.unwrap_or(f64::NAN),
        dir: dir.to_path_buf(),
    })?;
    p.set("init_fields.type", "from_file")?;
    p.set("init_fields.from_file.path", path.to_string_lossy().as_ref())?;
    p.set("output.has_to_save", false)?;
    p.set("preprocess.enable", false)?;
    modify(&mut p)?;
    let sim = build_simulation(&p)?;
    debug_assert_eq!(sim.t(), header.time);
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver_core::create_default_params;

    #[test]
    fn empty_dir_has_no_records() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_sim_for_plot(dir.path()), Err(Error::MissingRecords(_))));
        assert!(matches!(load_state_phys_file(dir.path(), None), Err(Error::MissingRecords(_))));
        assert!(matches!(
            load_sim_for_plot(&dir.path().join("missing")),
            Err(Error::MissingRecords(_))
        ));
    }

    #[test]
    fn reload_restores_params_and_state() {
        let root = tempfile::tempdir().unwrap();
        let mut p = create_default_params("ns2d").unwrap();
        p.set("oper.nx", 32i64).unwrap();
        p.set("oper.ny", 32i64).unwrap();
        p.set("output.has_to_save", true).unwrap();
        p.set("output.sim_dir_root", root.path().to_str().unwrap()).unwrap();
        p.set("time_stepping.use_t_end", false).unwrap();
        p.set("time_stepping.it_end", 10i64).unwrap();
        let mut sim = build_simulation(&p).unwrap();
        sim.run().unwrap();
        let dir = sim.output.sim_dir.clone().unwrap();
        let mut plot = load_sim_for_plot(&dir).unwrap();
        assert!(plot.params.get_bool("output.has_to_save").is_ok());
        assert!(plot.run().is_err());
        assert_eq!(plot.t(), sim.t());
        assert_eq!(plot.checksum(), {
            let mut s = load_state_phys_file(&dir, Some(sim.t())).unwrap();
            s.snapshot().unwrap();
            s.checksum()
        });
        assert!(matches!(
            load_state_phys_file(&dir, Some(123.0)),
            Err(Error::NoSnapshot { .. })
        ));
        let stored = read_params(&dir).unwrap();
        assert!(stored.bit_eq(&sim.params));
    }
}
