//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! divergence, 4 I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bench::{compute_speedup, run_bench, Baseline, BenchConfig, BenchReport, ProfileTable, SpeedupTable};
use crate::error::{Error, Result};
use crate::output::{self, read_records, BudgetRecord, IncrementsRecord, SpatialMeansRecord, SpectrumRecord};
use crate::params::{self, ParamTree, ParamValue};
use crate::solver_core::{build_simulation, create_default_params, load_sim_for_plot};
use crate::time_stepping::RunSummary;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::Io(_) | Error::Format { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "spectralkit", version, about = "Pseudo-spectral simulations, benchmarks and profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation described by a params file.
    Run {
        config: PathBuf,
        /// Parameter overrides, `path=value`.
        overrides: Vec<String>,
        /// Do not echo progress lines.
        #[arg(short, long)]
        quiet: bool,
    },
    /// Time RK4 iterations from a random initial field.
    Bench {
        solver: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value = "default")]
        label: String,
        /// Report file (one record).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Strong-scaling speedups from benchmark reports.
    Speedup {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// `auto` or a configuration label.
        #[arg(long, default_value = "auto")]
        baseline: String,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Per-kernel time breakdown.
    Profile {
        solver: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Export a record stream of a simulation directory.
    Export {
        simdir: PathBuf,
        stream: Stream,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stream {
    Means,
    Spectra,
    Budget,
    Increments,
}

impl Stream {
    pub fn file(self) -> &'static str {
        match self {
            Stream::Means => output::MEANS_FILE,
            Stream::Spectra => output::SPECTRA_FILE,
            Stream::Budget => output::BUDGET_FILE,
            Stream::Increments => output::INCREMENTS_FILE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

/// Copies the leaves of `config` onto `defaults`; integers are accepted
/// for float parameters.
pub fn merge_params(defaults: &mut ParamTree, config: &ParamTree) -> Result<()> {
    for path in config.leaf_paths() {
        let value = config.get(&path)?.clone();
        let value = match (defaults.get(&path), value) {
            (Ok(ParamValue::Float(_)), ParamValue::Int(i)) => ParamValue::Float(i as f64),
            (_, v) => v,
        };
        defaults.set(&path, value)?;
    }
    Ok(())
}

/// Reads a params file, which may list only the leaves that differ from
/// the defaults of its solver, and applies `path=value` overrides.
pub fn load_config(config: &Path, overrides: &[String]) -> Result<ParamTree> {
    let text = std::fs::read_to_string(config)?;
    let parsed = params::deserialize(&text)?;
    let solver = parsed.get_str("solver")?.to_string();
    let mut p = create_default_params(&solver)?;
    merge_params(&mut p, &parsed)?;
    for o in overrides {
        let (path, value) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` is not of the form path=value")))?;
        if path.trim() == "solver" {
            return Err(Error::Config("the solver cannot be overridden".into()));
        }
        p.set_from_str(path.trim(), value.trim())?;
    }
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub sim_dir: PathBuf,
    pub summary: RunSummary,
}

/// Builds and runs a simulation, always saving to a new directory.
pub fn cmd_run(config: &Path, overrides: &[String], echo: bool) -> Result<RunOutcome> {
    let mut p = load_config(config, overrides)?;
    p.set("output.has_to_save", true)?;
    let mut sim = build_simulation(&p)?;
    sim.output.echo = echo;
    let summary = sim.run()?;
    Ok(RunOutcome {
        sim_dir: sim.output.sim_dir.clone().expect("saving simulations have a directory"),
        summary,
    })
}

pub fn cmd_bench(cfg: &BenchConfig, out: Option<&Path>) -> Result<BenchReport> {
    let report = run_bench(cfg)?;
    if let Some(path) = out {
        let mut line = report.to_record()?;
        line.push('\n');
        std::fs::write(path, line)?;
    }
    Ok(report)
}

pub fn cmd_speedup(reports: &[PathBuf], baseline: &str, csv: Option<&Path>) -> Result<SpeedupTable> {
    let reports = reports.iter().map(|p| BenchReport::load(p)).collect::<Result<Vec<_>>>()?;
    let table = compute_speedup(&reports, &Baseline::parse(baseline))?;
    if let Some(path) = csv {
        std::fs::write(path, table.to_csv()?)?;
    }
    Ok(table)
}

pub fn cmd_profile(solver: &str, n: usize, iters: usize, workers: Option<usize>) -> Result<(BenchReport, ProfileTable)> {
    let mut cfg = BenchConfig::new(solver, n);
    cfg.iterations = iters;
    cfg.workers = workers;
    let report = run_bench(&cfg)?;
    let table = crate::bench::group_profile(
        report.kernel_timers.iter().map(|(k, v)| (k.as_str(), *v)),
        crate::bench::PROFILE_THRESHOLD_PERCENT,
    );
    Ok((report, table))
}

fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `stream` of `simdir` as CSV; returns the number of data rows.
pub fn export_csv(simdir: &Path, stream: Stream, out: impl Write) -> Result<usize> {
    let path = simdir.join(stream.file());
    if !path.is_file() {
        return Err(Error::MissingRecords(format!(
            "stream `{}` does not exist in {}",
            stream.file(),
            simdir.display()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut rows = 0;
    let mut put = |w: &mut csv::Writer<_>, rec: Vec<String>| -> Result<()> {
        rows += 1;
        w.write_record(rec).map_err(|e| Error::Io(std::io::Error::other(e)))
    };
    let header = |w: &mut csv::Writer<_>, h: &[&str]| w.write_record(h).map_err(|e| Error::Io(std::io::Error::other(e)));
    match stream {
        Stream::Means => {
            header(&mut w, &["t", "it", "dt", "E", "Z", "eps_visc", "P_forcing"])?;
            for r in read_records::<SpatialMeansRecord>(&path)? {
                put(
                    &mut w,
                    vec![
                        f17(r.t),
                        r.it.to_string(),
                        f17(r.dt),
                        f17(r.energy),
                        r.enstrophy.map(f17).unwrap_or_default(),
                        f17(r.eps_visc),
                        f17(r.p_forcing),
                    ],
                )?;
            }
        }
        Stream::Spectra => {
            header(&mut w, &["t", "k", "E"])?;
            for r in read_records::<SpectrumRecord>(&path)? {
                for (k, e) in r.k.iter().zip(&r.energy) {
                    put(&mut w, vec![f17(r.t), f17(*k), f17(*e)])?;
                }
            }
        }
        Stream::Budget => {
            header(&mut w, &["t", "k", "T", "D"])?;
            for r in read_records::<BudgetRecord>(&path)? {
                for i in 0..r.k.len() {
                    put(&mut w, vec![f17(r.t), f17(r.k[i]), f17(r.transfer[i]), f17(r.dissipation[i])])?;
                }
            }
        }
        Stream::Increments => {
            header(&mut w, &["t", "direction", "order", "r", "S"])?;
            for r in read_records::<IncrementsRecord>(&path)? {
                for (p, row) in r.orders.iter().zip(&r.s) {
                    for (sep, s) in r.r.iter().zip(row) {
                        put(&mut w, vec![f17(r.t), r.direction.to_string(), p.to_string(), f17(*sep), f17(*s)])?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(rows)
}

/// Exports to `out`, or to `{simdir}/{stream}.csv` by default.
pub fn cmd_export(simdir: &Path, stream: Stream, out: Option<&Path>) -> Result<PathBuf> {
    load_sim_for_plot(simdir)?;
    let default = simdir.join(format!("{}.csv", stream.file().trim_end_matches(".ndrec")));
    let path = out.map(Path::to_path_buf).unwrap_or(default);
    let file = std::fs::File::create(&path)?;
    export_csv(simdir, stream, std::io::BufWriter::new(file))?;
    Ok(path)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides, quiet } => {
            let outcome = cmd_run(&config, &overrides, !quiet)?;
            println!(
                "{} iterations, t = {}, wall = {:.3} s, directory {}",
                outcome.summary.iterations,
                outcome.summary.simulated_time,
                outcome.summary.walltime,
                outcome.sim_dir.display()
            );
        }
        Command::Bench { solver, n, iters, workers, seed, dt, label, out } => {
            let cfg = BenchConfig {
                solver,
                n,
                iterations: iters,
                workers,
                seed,
                dt,
                label,
            };
            println!("{}", cmd_bench(&cfg, out.as_deref())?.to_record()?);
        }
        Command::Speedup { reports, baseline, csv } => {
            print!("{}", cmd_speedup(&reports, &baseline, csv.as_deref())?.to_text());
        }
        Command::Profile { solver, n, iters, workers } => {
            let (report, table) = cmd_profile(&solver, n, iters, workers)?;
            println!(
                "{} {:?}, {} iterations, {} workers, {:.6e} s/iter",
                report.solver, report.n, report.iterations, report.workers, report.elapsed_per_iter
            );
            print!("{}", table.to_text());
        }
        Command::Export { simdir, stream, format: Format::Csv, out } => {
            println!("{}", cmd_export(&simdir, stream, out.as_deref())?.display());
        }
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command; returns the
/// exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Divergence { iteration: 1, field: "u".into() }), 3);
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), 4);
        assert_eq!(main_with_args(["spectralkit", "frobnicate"]), 2);
    }

    #[test]
    fn partial_config_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "solver = \"ns2d\"\nnu_2 = 0\noper {\n    nx = 32\n}\n").unwrap();
        let p = load_config(&path, &["nu_2=0.1".into(), "time_stepping.t_end=2".into()]).unwrap();
        assert_eq!(p.get_f64("nu_2").unwrap(), 0.1);
        assert_eq!(p.get_int("oper.nx").unwrap(), 32);
        assert_eq!(p.get_f64("time_stepping.t_end").unwrap(), 2.0);
        assert!(matches!(
            load_config(&path, &["nu_3=1".into()]),
            Err(Error::UnknownParameter { .. })
        ));
    }
}
