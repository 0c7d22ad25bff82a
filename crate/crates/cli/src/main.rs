use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::PathBuf;
use tapestry_core::bench::{
    emit_report, estimate_cost, kernels, render_report, run_weak_scaling, CostEstimate, CostModelInput, KernelConfig, ReportFormat,
    DEFAULT_BYTES_PER_RANK,
};
use tapestry_core::driver::Execution;
use tapestry_core::flesh::Simulation;
use tapestry_core::thorns::flesh_for_parameters;
use tapestry_monitor::{default_checkpoint_dir, run_monitored, serve, Monitor, RunEnd};

#[derive(Parser)]
#[command(name = "tapestry", version, about = "Component-based PDE simulations, benchmarks and cost estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a simulation described by a parameter file.
    Run(RunArgs),
    /// Run a weak-scaling benchmark over several simulated rank counts.
    Bench(BenchArgs),
    /// Estimate memory, work and run time of a nested-grid run.
    Estimate(EstimateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Parameter file (`name = value` per line, `#` comments).
    #[arg(long)]
    params: PathBuf,
    /// Keep the monitor serving after the last iteration until a terminate request.
    #[arg(long)]
    linger: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Kernel to run; see `--list`.
    #[arg(long, required_unless_present = "list")]
    kernel: Option<String>,
    /// Simulated rank counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    ranks: Vec<usize>,
    /// Write the results here; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Bytes of evolved data per rank.
    #[arg(long, default_value_t = DEFAULT_BYTES_PER_RANK)]
    bytes_per_rank: u64,
    #[arg(long, default_value = "parallel")]
    execution: Execution,
    /// Directory for kernels that write files.
    #[arg(long)]
    scratch: Option<PathBuf>,
    /// List the available kernels and exit.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    levels: u32,
    /// Points per side on every level.
    #[arg(long)]
    base: u64,
    /// Grid functions stored per point.
    #[arg(long)]
    gridfns: u64,
    #[arg(long, default_value_t = 8)]
    bytes_per_value: u64,
    /// Flops per point and step.
    #[arg(long)]
    flops: u64,
    #[arg(long, default_value_t = 0)]
    extra_flops: u64,
    /// Steps on the coarsest level.
    #[arg(long)]
    steps: u64,
    /// Sustained rate in flop/s.
    #[arg(long)]
    rate: f64,
    #[arg(long)]
    json: bool,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
        Command::Estimate(a) => estimate(a),
    }
}

fn run(a: RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.params).with_context(|| format!("reading {}", a.params.display()))?;
    let flesh = flesh_for_parameters(&text)?;
    let mut sim = Simulation::from_text(flesh, &text)?;
    sim.resume()?;
    if sim.params().boolean("http::enabled")? {
        let monitor = Monitor::new(&sim, default_checkpoint_dir(&sim));
        let port = u16::try_from(sim.params().int("http::port")?).context("http::port")?;
        let server = serve(monitor.clone(), sim.params().str("http::bind")?, port)?;
        println!("monitor: {}", server.url());
        if run_monitored(&mut sim, &monitor, a.linger)? == RunEnd::Terminated {
            println!("terminated on request");
        }
    } else {
        sim.run()?;
        sim.finish()?;
    }
    println!("iteration {} time {}", sim.iteration(), sim.time());
    for t in sim.timer_report() {
        println!("  {:<32} {:>10.6} s {:>8} calls", t.name, t.seconds, t.calls);
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    if a.list {
        for k in kernels().names() {
            println!("{k}");
        }
        return Ok(());
    }
    let Some(kernel) = a.kernel else { bail!("--kernel is required") };
    let cfg = KernelConfig {
        bytes_per_rank: a.bytes_per_rank,
        steps: a.steps,
        execution: a.execution,
        scratch: a.scratch,
    };
    let results = run_weak_scaling(&kernel, &a.ranks, &cfg)?;
    print!("{}", render_report(&results, ReportFormat::Csv)?);
    if let Some(path) = a.report {
        emit_report(&results, ReportFormat::for_path(&path), &path)?;
    }
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let input = CostModelInput {
        levels: a.levels,
        base_points: a.base,
        grid_functions: a.gridfns,
        bytes_per_value: a.bytes_per_value,
        flops_per_point: a.flops,
        extra_flops: a.extra_flops,
        base_steps: a.steps,
        rate: a.rate,
    };
    let e = estimate_cost(&input)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&estimate_json(&e))?);
    } else {
        println!("memory:        {} bytes ({} TiB)", e.memory_bytes, e.memory_tib());
        println!("total work:    {} flops ({:.4e} petaflops)", e.total_flops, e.total_petaflops());
        println!("runtime:       {:.1} s ({:.2} days)", e.runtime_seconds, e.runtime_days());
        println!("finest steps:  {}", e.finest_steps());
    }
    Ok(())
}

/// u128 counts are written as strings: JSON readers commonly parse numbers
/// as doubles, which would silently round them.
fn estimate_json(e: &CostEstimate) -> serde_json::Value {
    json!({
        "memory_bytes": e.memory_bytes.to_string(),
        "memory_tib": e.memory_tib(),
        "total_flops": e.total_flops.to_string(),
        "total_petaflops": e.total_petaflops(),
        "runtime_seconds": e.runtime_seconds,
        "runtime_days": e.runtime_days(),
        "finest_steps": e.finest_steps().to_string(),
        "level_steps": e.level_steps.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
    })
}
