use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use partloop_cli::{commands, KernelChoice, Mode, RunConfig};
use partloop_core::Backend;

#[derive(Parser)]
#[command(
    name = "partloop",
    version,
    about = "Particle-loop molecular dynamics and structure analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lennard-Jones NVE run from a lattice start.
    Simulate(Common),
    /// Steinhardt bond-order parameters per particle.
    AnalyzeBoa(Common),
    /// Common-neighbour analysis per particle.
    AnalyzeCna(Common),
    /// Step timings per backend and worker count.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads per loop.
    #[arg(long)]
    workers: Option<usize>,
    /// Pair-loop backend: all-pairs, cell-list or neighbour-list.
    #[arg(long)]
    backend: Option<Backend>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common, mode: Mode) -> Result<RunConfig> {
    let text =
        fs::read_to_string(&common.config).with_context(|| format!("cannot read {}", common.config.display()))?;
    let mut cfg = RunConfig::parse_for(&text, mode).with_context(|| format!("in {}", common.config.display()))?;
    if let Some(w) = common.workers {
        anyhow::ensure!(w >= 1, "--workers must be at least 1");
        cfg.workers = vec![w];
    }
    if let Some(b) = common.backend {
        cfg.backends = vec![b];
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
        cfg.seed_was_random = false;
    }
    // Paths in the file are relative to the file; `--out` to the caller.
    let base = common.config.parent().unwrap_or(Path::new("."));
    if let KernelChoice::File(p) = &cfg.kernel {
        cfg.kernel = KernelChoice::File(base.join(p));
    }
    cfg.input = cfg.input.as_ref().map(|p| base.join(p));
    cfg.out_dir = match &common.out {
        Some(o) => o.clone(),
        None => base.join(&cfg.out_dir),
    };
    if cfg.seed_was_random {
        println!("seed = {}", cfg.seed);
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(c) => {
            let cfg = load(c, Mode::Simulate)?;
            let r = commands::simulate(&cfg)?;
            let drift = (r.last.total - r.first.total) / r.first.total.abs();
            println!(
                "{} steps, {} list builds, E0 = {:.10}, E = {:.10}, relative drift {:.3e}, T = {:.6}",
                r.summary.steps, r.summary.rebuilds, r.first.total, r.last.total, drift, r.last.temperature
            );
            println!("energies: {}", r.energies.display());
            println!("final snapshot: {}", r.final_snapshot.display());
        }
        Command::AnalyzeBoa(c) => {
            let cfg = load(c, Mode::AnalyzeBoa)?;
            let r = commands::analyze_boa(&cfg)?;
            println!("{} particles, r_c = {:.6}", r.npart, r.r_c);
            for (l, q) in &r.means {
                println!("mean Q_{l} = {q:.6}");
            }
            println!("per-particle values: {}", r.output.display());
        }
        Command::AnalyzeCna(c) => {
            let cfg = load(c, Mode::AnalyzeCna)?;
            let r = commands::analyze_cna(&cfg)?;
            let k = r.counts;
            println!("{} particles, r_c = {:.6}", r.npart, r.r_c);
            println!("fcc {}  hcp {}  bcc {}  other {}", k.fcc, k.hcp, k.bcc, k.other);
            println!("per-particle triplets: {}", r.output.display());
        }
        Command::Bench(c) => {
            let cfg = load(c, Mode::Bench)?;
            let (rows, path) = commands::bench(&cfg)?;
            for r in &rows {
                println!(
                    "{:<15} workers {:>2}  N {:>8}  {:.4e} s/step  {} pair visits",
                    r.backend.name(),
                    r.workers,
                    r.n,
                    r.seconds_per_step(),
                    r.pair_visits
                );
            }
            println!("table: {}", path.display());
        }
    }
    Ok(())
}
