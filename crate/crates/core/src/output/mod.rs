//! Simulation outputs: spatial means, shell spectra, spectral energy
//! budget, structure functions, field snapshots and progress lines.
//!
//! A simulation directory contains:
//!
//! | file | content |
//! |---|---|
//! | `params.txt`, `info_solver.txt` | parameters and solver descriptor |
//! | `spatial_means.ndrec` | [`SpatialMeansRecord`] per print or save event |
//! | `spectra.ndrec` | [`SpectrumRecord`] per save event |
//! | `spect_energy_budg.ndrec` | [`BudgetRecord`] per save event |
//! | `increments.ndrec` | [`IncrementsRecord`] per save event |
//! | `snapshots/state_phys_t{time}.fld` | [`Snapshot`] per save event |
//! | `run.log` | progress lines and notes |

mod ndrec;
mod records;
mod snapshot;
mod stdout;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use ndrec::{append_record, encode_record, parse_record, read_records};
pub use records::{
    compute_increments, compute_spectral_energy_budget, compute_spectrum, energy, record_spatial_means,
    separations, BudgetRecord, IncrementsRecord, MeansInput, SpatialMeansRecord, SpectrumRecord,
};
pub use snapshot::{params_digest, Snapshot, SnapshotHeader, MAGIC as SNAPSHOT_MAGIC};
pub use stdout::{StdoutLine, STDOUT_LINE_PATTERN};

use crate::error::{Error, Result};
use crate::params::ParamTree;

pub const PARAMS_FILE: &str = "params.txt";
pub const INFO_FILE: &str = "info_solver.txt";
pub const MEANS_FILE: &str = "spatial_means.ndrec";
pub const SPECTRA_FILE: &str = "spectra.ndrec";
pub const BUDGET_FILE: &str = "spect_energy_budg.ndrec";
pub const INCREMENTS_FILE: &str = "increments.ndrec";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const LOG_FILE: &str = "run.log";

pub fn snapshot_name(time: f64) -> String {
    format!("state_phys_t{time:.6}.fld")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub has_to_save: bool,
    pub sim_dir_root: PathBuf,
    pub period_save: f64,
    pub period_print: usize,
    pub verbose: bool,
    pub increment_orders: Vec<f64>,
    pub n_separations: usize,
}

impl OutputConfig {
    pub fn from_params(params: &ParamTree) -> Result<Self> {
        let period_print = params.get_int("output.period_print")?;
        let n_separations = params.get_int("output.increments.n_separations")?;
        let cfg = OutputConfig {
            has_to_save: params.get_bool("output.has_to_save")?,
            sim_dir_root: PathBuf::from(params.get_str("output.sim_dir_root")?),
            period_save: params.get_f64("output.period_save")?,
            period_print: usize::try_from(period_print)
                .map_err(|_| Error::Config(format!("output.period_print must be >= 0, got {period_print}")))?,
            verbose: params.get_bool("output.verbose")?,
            increment_orders: params.get_list("output.increments.orders")?.to_vec(),
            n_separations: usize::try_from(n_separations)
                .ok()
                .filter(|n| *n >= 1)
                .ok_or_else(|| Error::Config("output.increments.n_separations must be >= 1".into()))?,
        };
        if cfg.has_to_save && !(cfg.period_save > 0.0 && cfg.period_save.is_finite()) {
            return Err(Error::Config(format!(
                "output.period_save must be positive, got {}",
                cfg.period_save
            )));
        }
        if let Some(p) = cfg.increment_orders.iter().find(|p| !(**p >= 1.0 && p.fract() == 0.0)) {
            return Err(Error::Config(format!("structure function orders must be integers >= 1, got {p}")));
        }
        Ok(cfg)
    }
}

/// Output state owned by a simulation: where to write, when, and what has
/// been recorded so far.
#[derive(Debug, Clone)]
pub struct Output {
    pub config: OutputConfig,
    pub sim_dir: Option<PathBuf>,
    pub next_save: f64,
    /// Spatial means recorded during this session.
    pub means: Vec<SpatialMeansRecord>,
    /// Progress lines emitted during this session.
    pub printed: Vec<StdoutLine>,
    /// Echo progress lines on standard output.
    pub echo: bool,
    pub(crate) last_print_it: Option<usize>,
    pub(crate) last_save_it: Option<usize>,
    log: Vec<String>,
    io_writes: usize,
}

impl Output {
    pub fn new(config: OutputConfig) -> Self {
        let echo = config.verbose;
        Output {
            config,
            sim_dir: None,
            next_save: 0.0,
            means: Vec::new(),
            printed: Vec::new(),
            echo,
            last_print_it: None,
            last_save_it: None,
            log: Vec::new(),
            io_writes: 0,
        }
    }

    /// Creates `{root}/{name}`, adding a numeric suffix if it exists.
    pub fn create_sim_dir(&mut self, name: &str) -> Result<&Path> {
        let root = &self.config.sim_dir_root;
        std::fs::create_dir_all(root)?;
        let mut dir = root.join(name);
        let mut suffix = 1;
        loop {
            match std::fs::create_dir(&dir) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    dir = root.join(format!("{name}_{suffix}"));
                    suffix += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        std::fs::create_dir(dir.join(SNAPSHOT_DIR))?;
        self.sim_dir = Some(dir);
        Ok(self.sim_dir.as_deref().expect("just set"))
    }

    /// Directory for file output, when saving is enabled.
    pub fn writable_dir(&self) -> Option<&Path> {
        if self.config.has_to_save {
            self.sim_dir.as_deref()
        } else {
            None
        }
    }

    /// Number of files written or appended to.
    pub fn io_writes(&self) -> usize {
        self.io_writes
    }

    pub fn log_lines(&self) -> &[String] {
        &self.log
    }

    pub fn log(&mut self, message: impl Into<String>) -> Result<()> {
        let message = message.into();
        if let Some(dir) = self.writable_dir() {
            let mut f = OpenOptions::new().create(true).append(true).open(dir.join(LOG_FILE))?;
            writeln!(f, "{message}")?;
            self.io_writes += 1;
        }
        self.log.push(message);
        Ok(())
    }

    pub fn write_text(&mut self, file: &str, text: &str) -> Result<()> {
        if let Some(dir) = self.writable_dir() {
            std::fs::write(dir.join(file), text)?;
            self.io_writes += 1;
        }
        Ok(())
    }

    pub fn append<T: serde::Serialize>(&mut self, file: &str, record: &T) -> Result<()> {
        if let Some(dir) = self.writable_dir() {
            append_record(&dir.join(file), record)?;
            self.io_writes += 1;
        }
        Ok(())
    }

    pub fn save_snapshot(&mut self, snap: &Snapshot) -> Result<Option<PathBuf>> {
        let Some(dir) = self.writable_dir() else {
            return Ok(None);
        };
        let path = dir.join(SNAPSHOT_DIR).join(snapshot_name(snap.header.time));
        snap.save(&path)?;
        self.io_writes += 1;
        Ok(Some(path))
    }

    pub fn print_line(&mut self, line: StdoutLine) -> Result<()> {
        let text = line.to_string();
        if self.echo {
            println!("{text}");
        }
        self.printed.push(line);
        self.log(text)
    }
}

/// Snapshots in `dir/snapshots`, sorted by time.
pub fn list_snapshots(dir: &Path) -> Result<Vec<(SnapshotHeader, PathBuf)>> {
    let snap_dir = dir.join(SNAPSHOT_DIR);
    if !snap_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&snap_dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("fld") {
            out.push((Snapshot::read_header(&path)?, path));
        }
    }
    out.sort_by(|a, b| a.0.time.total_cmp(&b.0.time));
    Ok(out)
}
