//! Benchmark kernels, the weak-scaling harness, and cost models.
//!
//! A kernel is a named, fixed simulation setup whose problem size grows
//! with the rank count so that every rank owns the same amount of data.
//! Only the evolution loop is timed; building the simulation and tearing
//! it down are excluded.

mod cost;

pub use cost::{estimate_cost, ghost_overhead, CostEstimate, CostModelInput};

use crate::driver::unigrid::decompose::decompose;
use crate::driver::{Driver, DriverError, Execution, ReduceOp};
use crate::flesh::{FleshError, Simulation, VariableGroup};
use crate::grid::{Boundary, DomainSpec};
use crate::io::{self, IoError};
use crate::registry::{Registry, RegistryError};
use crate::thorns::flesh_for_parameters;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("kernel {kernel} cannot run on {ranks} ranks: {reason}")]
    Infeasible { kernel: String, ranks: usize, reason: String },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Flesh(#[from] FleshError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{path}: {source}")]
    Fs {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Desk-scale per-rank memory target for the evolution kernels.
pub const DEFAULT_BYTES_PER_RANK: u64 = 8 << 20;
/// Desk-scale per-rank payload of the checkpoint kernel.
pub const DEFAULT_IO_BYTES_PER_RANK: u64 = 16 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Memory per rank the evolved data should occupy, all time levels included.
    pub bytes_per_rank: u64,
    /// Coarse steps to time.
    pub steps: usize,
    pub execution: Execution,
    /// Scratch directory for kernels that write files (a temporary one if unset).
    pub scratch: Option<std::path::PathBuf>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            bytes_per_rank: DEFAULT_BYTES_PER_RANK,
            steps: 10,
            execution: Execution::Parallel,
            scratch: None,
        }
    }
}

/// What one timed run measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRun {
    pub seconds: f64,
    /// Point updates (integrator steps times points, summed over levels), or
    /// values written for I/O kernels.
    pub updates: u64,
    /// Largest number of points any rank owns (summed over levels).
    pub owned_points_per_rank: u64,
    /// Norms of the final data, for cross-kernel comparison.
    pub norms: BTreeMap<String, f64>,
    /// Kernel-specific figures, e.g. write bandwidth per output strategy.
    pub extra: BTreeMap<String, f64>,
}

pub trait Kernel: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, ranks: usize, config: &KernelConfig) -> Result<KernelRun, BenchError>;
}

/// The process grid the unigrid decomposition picks for `ranks`, and the
/// global point counts giving each rank an `n^3` block.
fn weak_shape(ranks: usize, n: usize) -> Result<[usize; 3], BenchError> {
    let probe = DomainSpec::cube(n * ranks, 0.0, 1.0, Boundary::Periodic, 0);
    let (topo, _) = decompose(&probe, ranks)?;
    Ok([n * topo.dims[0], n * topo.dims[1], n * topo.dims[2]])
}

fn edge_for(bytes: u64, bytes_per_point: u64, min: usize) -> usize {
    (((bytes / bytes_per_point) as f64).cbrt().floor() as usize).max(min)
}

fn owned_per_rank(d: &dyn Driver) -> u64 {
    let mut per = vec![0u64; d.nranks()];
    for p in d.patches() {
        per[p.rank] += p.owned.volume() as u64;
    }
    per.into_iter().max().unwrap_or(0)
}

fn timed_evolution(kernel: &str, ranks: usize, text: &str, steps: usize, norm_vars: &[&str]) -> Result<KernelRun, BenchError> {
    let flesh = flesh_for_parameters(text)?;
    let mut sim = Simulation::from_text(flesh, text)?;
    let infeasible = |reason: String| BenchError::Infeasible {
        kernel: kernel.into(),
        ranks,
        reason,
    };
    if sim.driver().nranks() != ranks {
        return Err(infeasible("driver did not take the requested rank count".into()));
    }
    let before = sim.driver().level_steps();
    let start = Instant::now();
    for _ in 0..steps {
        sim.step()?;
    }
    let seconds = start.elapsed().as_secs_f64();
    let d = sim.driver();
    let after = d.level_steps();
    let mut points_per_level = vec![0u64; d.nlevels()];
    for p in d.patches() {
        points_per_level[p.level] += p.owned.volume() as u64;
    }
    let updates = (0..d.nlevels()).map(|l| (after[l] - before[l]) * points_per_level[l]).sum();
    let norms = norm_vars
        .iter()
        .map(|v| Ok((v.to_string(), d.reduce(v, ReduceOp::L2)?)))
        .collect::<Result<_, BenchError>>()?;
    let run = KernelRun {
        seconds,
        updates,
        owned_points_per_rank: owned_per_rank(d),
        norms,
        extra: BTreeMap::new(),
    };
    sim.finish()?;
    Ok(run)
}

fn execution_name(e: Execution) -> &'static str {
    match e {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

/// Periodic wave problem, identical for both unigrid-style kernels except
/// for the driver.
fn unigrid_wave_text(driver: &str, ranks: usize, config: &KernelConfig) -> Result<String, BenchError> {
    // phi and pi, three stored time levels
    let n = edge_for(config.bytes_per_rank, 2 * 3 * 8, 8);
    let [x, y, z] = weak_shape(ranks, n)?;
    let upper = |p: usize| p as f64 / n as f64;
    // every block is the unit cube, so the spacing is the same on all axes
    Ok(format!(
        "grid::points = {x},{y},{z}\n\
         grid::upper = {},{},{}\n\
         driver::name = {driver}\n\
         driver::nranks = {ranks}\n\
         driver::execution = {}\n\
         amr::nlevels = 1\n\
         wave::initial_data = plane\n\
         wave::wavenumber = 1,1,1\n\
         mol::scheme = rk4\n\
         flesh::max_iterations = {}\n",
        upper(x),
        upper(y),
        upper(z),
        execution_name(config.execution),
        config.steps
    ))
}

struct UnigridWavePugh;
struct UnigridWaveAmr1;
struct Amr8Wave;
struct AmrHydro;
struct IoCheckpoint;

impl Kernel for UnigridWavePugh {
    fn name(&self) -> &'static str {
        "unigrid-wave-pugh"
    }
    fn run(&self, ranks: usize, config: &KernelConfig) -> Result<KernelRun, BenchError> {
        let text = unigrid_wave_text("unigrid", ranks, config)?;
        timed_evolution(self.name(), ranks, &text, config.steps, &["wave::phi", "wave::pi"])
    }
}

impl Kernel for UnigridWaveAmr1 {
    fn name(&self) -> &'static str {
        "unigrid-wave-amr1lev"
    }
    fn run(&self, ranks: usize, config: &KernelConfig) -> Result<KernelRun, BenchError> {
        let text = unigrid_wave_text("amr", ranks, config)?;
        timed_evolution(self.name(), ranks, &text, config.steps, &["wave::phi", "wave::pi"])
    }
}

const AMR8_LEVELS: usize = 8;

impl Kernel for Amr8Wave {
    fn name(&self) -> &'static str {
        "amr8lev-wave"
    }
    /// Eight nested levels of `(2w+1)^3` points each around the domain
    /// centre; `w` grows with the rank count.
    fn run(&self, ranks: usize, config: &KernelConfig) -> Result<KernelRun, BenchError> {
        let per_level = (config.bytes_per_rank * ranks as u64) / AMR8_LEVELS as u64;
        let half = (edge_for(per_level, 2 * 3 * 8, 25) / 2).max(12);
        let n = 2 * half + 1;
        let widths: Vec<String> = (1..AMR8_LEVELS).map(|l| format!("{}", half as f64 / (1u64 << l) as f64)).collect();
        let text = format!(
            "grid::points = {n}\n\
             grid::boundary = outer-copy\n\
             grid::lower = -1\n\
             grid::upper = 1\n\
             driver::name = amr\n\
             driver::nranks = {ranks}\n\
             driver::execution = {}\n\
             amr::nlevels = {AMR8_LEVELS}\n\
             amr::buffer_factor = 0\n\
             amr::centres = \"0,0,0:{}\"\n\
             wave::initial_data = gaussian\n\
             wave::centre = 0,0,0\n\
             wave::sigma = 0.05\n\
             flesh::max_iterations = {}\n",
            execution_name(config.execution),
            widths.join(","),
            config.steps
        );
        timed_evolution(self.name(), ranks, &text, config.steps, &["wave::phi", "wave::pi"])
    }
}

impl Kernel for AmrHydro {
    fn name(&self) -> &'static str {
        "amr-hydro"
    }
    /// A periodic density wave with one refined level over the central
    /// quarter of the domain.
    fn run(&self, ranks: usize, config: &KernelConfig) -> Result<KernelRun, BenchError> {
        // five conserved variables, three stored time levels under AMR
        let n = edge_for(config.bytes_per_rank, 5 * 3 * 8, 16);
        let [x, y, z] = weak_shape(ranks, n)?;
        let m = x.min(y).min(z);
        let text = format!(
            "grid::points = {x},{y},{z}\n\
             grid::upper = {},{},{}\n\
             driver::name = amr\n\
             driver::nranks = {ranks}\n\
             driver::execution = {}\n\
             amr::nlevels = 2\n\
             amr::buffer_factor = 0\n\
             amr::centres = \"{},{},{}:{}\"\n\
             hydro::initial_data = density-wave\n\
             hydro::reconstruction = plm-minmod\n\
             flesh::max_iterations = {}\n",
            x as f64 / n as f64,
            y as f64 / n as f64,
            z as f64 / n as f64,
            execution_name(config.execution),
            x as f64 / (2 * n) as f64,
            y as f64 / (2 * n) as f64,
            z as f64 / (2 * n) as f64,
            (m / 8).max(2),
            config.steps
        );
        timed_evolution(self.name(), ranks, &text, config.steps, &["hydro::dens", "hydro::tau"])
    }
}

pub const IO_STRATEGIES: [&str; 3] = ["per-rank", "every-nth(4)", "single-collector"];

impl Kernel for IoCheckpoint {
    fn name(&self) -> &'static str {
        "io-checkpoint"
    }
    /// Fill one variable with `bytes_per_rank` per rank, then time a
    /// checkpoint and one variable output per strategy. `seconds` is the
    /// checkpoint time; bandwidths go into `extra` as `mb_per_s/<name>`.
    fn run(&self, ranks: usize, config: &KernelConfig) -> Result<KernelRun, BenchError> {
        let n = edge_for(config.bytes_per_rank, 8, 4);
        let [x, y, z] = weak_shape(ranks, n)?;
        let domain = DomainSpec {
            points: [x, y, z],
            origin: [0.0; 3],
            spacing: [1.0 / n as f64; 3],
            boundary: Boundary::Periodic,
            ghost: 0,
        };
        let mut driver = crate::driver::build_driver("unigrid", &{
            let mut c = crate::driver::DriverConfig::unigrid(domain, ranks, "neighbors");
            c.execution = config.execution;
            c
        })?;
        driver.allocate(&[VariableGroup::new("bench::payload", &["data"], 0, 1)])?;
        driver.for_each_block(&|view| {
            let geom = view.geom;
            let data = view.var_mut("bench::data")?;
            for q in geom.ext.points() {
                data[geom.ext.offset(q)] = (q[0] + 3 * q[1] + 7 * q[2]) as f64;
            }
            Ok(())
        })?;
        let tmp;
        let root: &Path = match &config.scratch {
            Some(p) => p,
            None => {
                tmp = tempfile::tempdir().map_err(|source| BenchError::Fs {
                    path: std::env::temp_dir().display().to_string(),
                    source,
                })?;
                tmp.path()
            }
        };
        let params = crate::flesh::ParamTable::default();
        let bytes = 8.0 * (x * y * z) as f64;
        let start = Instant::now();
        io::checkpoint_write(driver.as_ref(), &params, 0, &root.join("checkpoint"))?;
        let seconds = start.elapsed().as_secs_f64();
        let mut extra = BTreeMap::from([("mb_per_s/checkpoint".to_string(), bytes / 1e6 / seconds.max(1e-9))]);
        for s in IO_STRATEGIES {
            let dir = root.join(s.replace(['(', ')'], "_"));
            let t = Instant::now();
            let files = io::write_vars(driver.as_ref(), &[], s, &dir, 0)?;
            let secs = t.elapsed().as_secs_f64();
            extra.insert(format!("mb_per_s/{s}"), bytes / 1e6 / secs.max(1e-9));
            extra.insert(format!("files/{s}"), files.len() as f64);
        }
        Ok(KernelRun {
            seconds,
            updates: (x * y * z) as u64,
            owned_points_per_rank: owned_per_rank(driver.as_ref()),
            norms: BTreeMap::from([("bench::data".to_string(), driver.reduce("bench::data", ReduceOp::L2)?)]),
            extra,
        })
    }
}

pub fn kernels() -> Registry<dyn Kernel> {
    let mut r: Registry<dyn Kernel> = Registry::new("benchmark kernel");
    r.register_simple("unigrid-wave-pugh", || Box::new(UnigridWavePugh));
    r.register_simple("unigrid-wave-amr1lev", || Box::new(UnigridWaveAmr1));
    r.register_simple("amr8lev-wave", || Box::new(Amr8Wave));
    r.register_simple("amr-hydro", || Box::new(AmrHydro));
    r.register_simple("io-checkpoint", || Box::new(IoCheckpoint));
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakScalingResult {
    pub kernel: String,
    pub ranks: usize,
    pub seconds: f64,
    pub updates_per_second: f64,
    /// Per-rank throughput relative to the smallest rank count of the series.
    pub efficiency: f64,
    pub owned_points_per_rank: u64,
    pub norms: BTreeMap<String, f64>,
    pub extra: BTreeMap<String, f64>,
}

pub fn run_weak_scaling(kernel: &str, ranks: &[usize], config: &KernelConfig) -> Result<Vec<WeakScalingResult>, BenchError> {
    if ranks.is_empty() || ranks.contains(&0) {
        return Err(BenchError::Input("rank counts must be a non-empty list of positive integers".into()));
    }
    let k = kernels().create(kernel)?;
    let mut runs = Vec::with_capacity(ranks.len());
    for &r in ranks {
        log::info!("{kernel}: {r} ranks");
        runs.push((r, k.run(r, config)?));
    }
    let per_rank_rate = |r: usize, run: &KernelRun| run.updates as f64 / run.seconds.max(1e-12) / r as f64;
    let base = runs.iter().min_by_key(|(r, _)| *r).map(|(r, run)| per_rank_rate(*r, run)).expect("non-empty");
    Ok(runs
        .into_iter()
        .map(|(r, run)| WeakScalingResult {
            kernel: kernel.to_string(),
            ranks: r,
            seconds: run.seconds,
            updates_per_second: run.updates as f64 / run.seconds.max(1e-12),
            efficiency: per_rank_rate(r, &run) / base,
            owned_points_per_rank: run.owned_points_per_rank,
            norms: run.norms,
            extra: run.extra,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(BenchError::Input(format!("unknown report format {other:?} (csv or json)"))),
        }
    }
}

impl ReportFormat {
    /// `.json` selects JSON; anything else CSV.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

pub const CSV_COLUMNS: [&str; 5] = ["kernel", "ranks", "seconds", "updates_per_second", "efficiency"];

pub fn render_report(results: &[WeakScalingResult], format: ReportFormat) -> Result<String, BenchError> {
    Ok(match format {
        ReportFormat::Json => serde_json::to_string_pretty(results)?,
        ReportFormat::Csv => {
            let mut out = CSV_COLUMNS.join(",");
            out.push('\n');
            for r in results {
                out.push_str(&format!("{},{},{:?},{:?},{:?}\n", r.kernel, r.ranks, r.seconds, r.updates_per_second, r.efficiency));
            }
            out
        }
    })
}

pub fn emit_report(results: &[WeakScalingResult], format: ReportFormat, path: &Path) -> Result<(), BenchError> {
    let text = render_report(results, format)?;
    std::fs::write(path, text).map_err(|source| BenchError::Fs {
        path: path.display().to_string(),
        source,
    })
}
