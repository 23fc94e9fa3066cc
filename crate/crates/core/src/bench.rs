//! Benchmark reports, strong-scaling speedup and profile tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{encode_record, parse_record};
use crate::solver_core::{build_simulation, create_default_params, resolve};
use crate::timers::KernelTimers;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SPECTRALKIT_NUM_THREADS";

/// Timers below this share of the total are grouped in the `other` row.
pub const PROFILE_THRESHOLD_PERCENT: f64 = 2.0;

/// Result of one benchmark run, stored as a single `.ndrec` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub solver: String,
    /// Extents along x, y, z.
    pub n: Vec<usize>,
    pub workers: usize,
    pub iterations: usize,
    pub elapsed_total: f64,
    pub elapsed_per_iter: f64,
    pub kernel_timers: BTreeMap<String, f64>,
    pub host: String,
    pub label: String,
    pub seed: u64,
    /// SHA-256 of the final spectral state.
    pub checksum: String,
    pub forcing_enabled: bool,
    /// Files written during the timed region.
    pub io_writes: usize,
}

impl BenchReport {
    pub fn to_record(&self) -> Result<String> {
        encode_record(self)
    }

    pub fn parse(line: &str) -> Result<Self> {
        parse_record(line.trim())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let line = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| Error::format(path, "empty report"))?;
        Self::parse(line).map_err(|e| Error::format(path, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub solver: String,
    /// Extent along every axis.
    pub n: usize,
    pub iterations: usize,
    /// Requested worker threads; the environment cap applies.
    pub workers: Option<usize>,
    pub seed: u64,
    pub dt: f64,
    pub label: String,
}

impl BenchConfig {
    pub fn new(solver: &str, n: usize) -> Self {
        BenchConfig {
            solver: solver.to_string(),
            n,
            iterations: 20,
            workers: None,
            seed: 0,
            dt: 1e-3,
            label: "default".to_string(),
        }
    }
}

/// Worker count after applying the environment cap.
pub fn effective_workers(requested: Option<usize>) -> usize {
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|n| *n > 0);
    let default = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let n = requested.unwrap_or(default).max(1);
    cap.map_or(n, |c| n.min(c))
}

pub fn host_fingerprint() -> String {
    let host = std::fs::read_to_string("/proc/sys/kernel/hostname")
        .ok()
        .or_else(|| std::env::var("HOSTNAME").ok())
        .unwrap_or_else(|| "unknown".into());
    let cpus = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!(
        "{}-{}-{}cpu-{}",
        std::env::consts::OS,
        std::env::consts::ARCH,
        cpus,
        host.trim()
    )
}

/// Runs `f` on a pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Times `iterations` RK4 steps at constant `dt` from a random initial
/// field, after one untimed warm-up step. Forcing and file output are
/// disabled; only the stepping loop is timed.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.iterations == 0 {
        return Err(Error::Config("a benchmark needs at least one iteration".into()));
    }
    let info = resolve(&cfg.solver)?;
    let mut p = create_default_params(&cfg.solver)?;
    let n = i64::try_from(cfg.n).map_err(|_| Error::Config(format!("extent {} is too large", cfg.n)))?;
    for axis in ["x", "y", "z"].iter().take(info.dims) {
        p.set(&format!("oper.n{axis}"), n)?;
    }
    p.set("time_stepping.scheme", "RK4")?;
    p.set("time_stepping.use_cfl", false)?;
    p.set("time_stepping.deltat0", cfg.dt)?;
    p.set("time_stepping.use_t_end", false)?;
    p.set("time_stepping.it_end", n_as_i64(cfg.iterations + 1)?)?;
    p.set("init_fields.type", "noise")?;
    p.set("init_fields.noise.seed", n_as_i64(cfg.seed as usize)?)?;
    p.set("forcing.enable", false)?;
    p.set("output.has_to_save", false)?;
    p.set("output.period_print", 0i64)?;
    p.set("preprocess.enable", false)?;

    let workers = effective_workers(cfg.workers);
    with_workers(workers, || -> Result<BenchReport> {
        let mut sim = build_simulation(&p)?;
        sim.step()?;
        sim.timers.clear();
        let io_before = sim.output.io_writes();
        let start = Instant::now();
        let summary = sim.run()?;
        let elapsed_total = start.elapsed().as_secs_f64();
        if summary.iterations != cfg.iterations {
            return Err(Error::Config(format!(
                "benchmark ran {} iterations instead of {}",
                summary.iterations, cfg.iterations
            )));
        }
        Ok(BenchReport {
            solver: cfg.solver.clone(),
            n: vec![cfg.n; info.dims],
            workers,
            iterations: cfg.iterations,
            elapsed_total,
            elapsed_per_iter: elapsed_total / cfg.iterations as f64,
            kernel_timers: summary.timers.iter().map(|(k, v)| (k.to_string(), v)).collect(),
            host: host_fingerprint(),
            label: cfg.label.clone(),
            seed: cfg.seed,
            checksum: sim.checksum(),
            forcing_enabled: sim.forcing.is_some(),
            io_writes: sim.output.io_writes() - io_before,
        })
    })?
}

fn n_as_i64(n: usize) -> Result<i64> {
    i64::try_from(n).map_err(|_| Error::Config(format!("{n} does not fit a parameter")))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    /// The fastest configuration at the smallest worker count.
    Auto,
    Label(String),
}

impl Baseline {
    pub fn parse(text: &str) -> Self {
        if text == "auto" {
            Baseline::Auto
        } else {
            Baseline::Label(text.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub label: String,
    pub workers: usize,
    pub time_per_iter: f64,
    pub speedup: f64,
}

/// Strong-scaling speedups
/// `S_α(n_p) = T_fastest(n_p,min) · n_p,min / T_α(n_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupTable {
    pub solver: String,
    pub n: Vec<usize>,
    pub np_min: usize,
    pub baseline: String,
    pub rows: Vec<SpeedupRow>,
}

/// Aggregates reports of one case. Repeated measurements of a
/// configuration keep their minimum time per iteration.
pub fn compute_speedup(reports: &[BenchReport], baseline: &Baseline) -> Result<SpeedupTable> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Aggregation("no benchmark reports".into()))?;
    if let Some(r) = reports.iter().find(|r| r.solver != first.solver || r.n != first.n) {
        return Err(Error::Aggregation(format!(
            "reports mix cases: {} {:?} and {} {:?}",
            first.solver, first.n, r.solver, r.n
        )));
    }
    let mut best: BTreeMap<(String, usize), f64> = BTreeMap::new();
    for r in reports {
        if !(r.elapsed_per_iter > 0.0 && r.elapsed_per_iter.is_finite()) {
            return Err(Error::Aggregation(format!(
                "report `{}` at {} workers has time {}",
                r.label, r.workers, r.elapsed_per_iter
            )));
        }
        let t = best.entry((r.label.clone(), r.workers)).or_insert(f64::INFINITY);
        *t = t.min(r.elapsed_per_iter);
    }
    let np_min = best.keys().map(|k| k.1).min().expect("at least one report");
    let at_min = best.iter().filter(|(k, _)| k.1 == np_min);
    let (baseline_label, t_base) = match baseline {
        Baseline::Auto => at_min
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, t)| (k.0.clone(), *t))
            .expect("np_min has a report"),
        Baseline::Label(label) => {
            let t = best.get(&(label.clone(), np_min)).ok_or_else(|| {
                Error::Aggregation(format!("baseline `{label}` has no report at {np_min} workers"))
            })?;
            (label.clone(), *t)
        }
    };
    let rows = best
        .iter()
        .map(|((label, workers), t)| SpeedupRow {
            label: label.clone(),
            workers: *workers,
            time_per_iter: *t,
            speedup: t_base * np_min as f64 / t,
        })
        .collect();
    Ok(SpeedupTable {
        solver: first.solver.clone(),
        n: first.n.clone(),
        np_min,
        baseline: baseline_label,
        rows,
    })
}

impl SpeedupTable {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "speedup for {} {:?}, baseline `{}` at n_p,min = {}\n{:<16} {:>8} {:>16} {:>10}\n",
            self.solver, self.n, self.baseline, self.np_min, "label", "workers", "s/iter", "speedup"
        );
        for r in &self.rows {
            let _ = writeln!(out, "{:<16} {:>8} {:>16.6e} {:>10.4}", r.label, r.workers, r.time_per_iter, r.speedup);
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["label", "workers", "time_per_iter", "speedup"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.label.clone(),
                r.workers.to_string(),
                format!("{:.16e}", r.time_per_iter),
                format!("{:.16e}", r.speedup),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub name: String,
    pub seconds: f64,
    pub percent: f64,
}

/// Kernels sorted by cumulative time, with those under the threshold
/// merged into a final `other` row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub total: f64,
    pub rows: Vec<ProfileRow>,
}

pub fn group_profile<'a>(timers: impl IntoIterator<Item = (&'a str, f64)>, threshold_percent: f64) -> ProfileTable {
    let mut entries: Vec<(String, f64)> = timers.into_iter().map(|(k, v)| (k.to_string(), v.max(0.0))).collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let total: f64 = entries.iter().map(|e| e.1).sum();
    let pct = |s: f64| if total > 0.0 { 100.0 * s / total } else { 0.0 };
    let mut rows = Vec::new();
    let mut other = 0.0;
    let mut grouped = 0;
    for (name, s) in entries {
        if pct(s) >= threshold_percent {
            rows.push(ProfileRow { percent: pct(s), name, seconds: s });
        } else {
            other += s;
            grouped += 1;
        }
    }
    if grouped > 0 {
        rows.push(ProfileRow {
            name: "other".into(),
            seconds: other,
            percent: pct(other),
        });
    }
    ProfileTable { total, rows }
}

impl ProfileTable {
    pub fn from_timers(timers: &KernelTimers) -> Self {
        group_profile(timers.iter(), PROFILE_THRESHOLD_PERCENT)
    }

    pub fn largest(&self) -> Option<&ProfileRow> {
        self.rows.iter().filter(|r| r.name != "other").max_by(|a, b| a.seconds.total_cmp(&b.seconds))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<16} {:>14} {:>8}\n", "kernel", "seconds", "%");
        for r in &self.rows {
            let _ = writeln!(out, "{:<16} {:>14.6e} {:>8.2}", r.name, r.seconds, r.percent);
        }
        let _ = writeln!(out, "{:<16} {:>14.6e} {:>8.2}", "total", self.total, 100.0);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(label: &str, workers: usize, t: f64) -> BenchReport {
        BenchReport {
            solver: "ns2d".into(),
            n: vec![64, 64],
            workers,
            iterations: 20,
            elapsed_total: 20.0 * t,
            elapsed_per_iter: t,
            kernel_timers: BTreeMap::new(),
            host: "h".into(),
            label: label.into(),
            seed: 0,
            checksum: String::new(),
            forcing_enabled: false,
            io_writes: 0,
        }
    }

    #[test]
    fn speedup_substitution() {
        let t = compute_speedup(&[report("fast", 2, 10.0), report("alpha", 8, 3.0)], &Baseline::Auto).unwrap();
        assert_eq!(t.np_min, 2);
        assert_eq!(t.baseline, "fast");
        let s8 = t.rows.iter().find(|r| r.workers == 8).unwrap().speedup;
        assert!((s8 - 20.0 / 3.0).abs() < 1e-12);
        assert!(t.to_text().contains("6.6667"));
        let s2 = t.rows.iter().find(|r| r.workers == 2).unwrap().speedup;
        assert_eq!(s2, 2.0);
    }

    #[test]
    fn single_report_and_scale_invariance() {
        let t = compute_speedup(&[report("a", 3, 1.7)], &Baseline::Auto).unwrap();
        assert_eq!(t.rows[0].speedup, 3.0);
        let base = [report("a", 1, 4.0), report("b", 1, 5.0), report("a", 4, 1.1), report("b", 4, 1.5)];
        let scaled: Vec<_> = base.iter().map(|r| report(&r.label, r.workers, r.elapsed_per_iter * 7.5)).collect();
        let s1 = compute_speedup(&base, &Baseline::Auto).unwrap();
        let s2 = compute_speedup(&scaled, &Baseline::Auto).unwrap();
        for (a, b) in s1.rows.iter().zip(&s2.rows) {
            assert!((a.speedup - b.speedup).abs() <= 1e-12 * a.speedup);
        }
        let by_label = compute_speedup(&base, &Baseline::Label("b".into())).unwrap();
        assert_eq!(by_label.rows.iter().find(|r| r.label == "b" && r.workers == 1).unwrap().speedup, 1.0);
    }

    #[test]
    fn mixed_grids_fail() {
        let mut other = report("a", 2, 1.0);
        other.n = vec![128, 128];
        assert!(matches!(
            compute_speedup(&[report("a", 1, 1.0), other], &Baseline::Auto),
            Err(Error::Aggregation(_))
        ));
        assert!(compute_speedup(&[], &Baseline::Auto).is_err());
        assert!(compute_speedup(&[report("a", 1, 1.0)], &Baseline::Label("zz".into())).is_err());
    }

    #[test]
    fn two_percent_grouping() {
        let timers = [("a", 50.0), ("b", 30.0), ("c", 15.0), ("d", 3.0), ("e", 1.5), ("f", 0.5)];
        let t = group_profile(timers, PROFILE_THRESHOLD_PERCENT);
        let names: Vec<_> = t.rows.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c", "d", "other"]);
        assert!((t.rows[4].percent - 2.0).abs() < 1e-12);
        let sum: f64 = t.rows.iter().map(|r| r.percent).sum();
        assert!((sum - 100.0).abs() < 0.1);
        assert_eq!(t.largest().unwrap().name, "a");
    }

    #[test]
    fn report_record_round_trip() {
        let mut r = report("x", 4, 0.1 + 0.2);
        r.kernel_timers.insert("fft".into(), 1.0 / 3.0);
        let line = r.to_record().unwrap();
        assert!(!line.contains('\n'));
        assert_eq!(BenchReport::parse(&line).unwrap(), r);
    }
}
