//! Wall-clock timing of full integration steps per backend and worker
//! count.

use std::io::Write;
use std::time::Instant;

use anyhow::Result;
use partloop_core::lattice::Structure;
use partloop_core::sim::{init_lattice_and_velocities, run_nve, IntegratorRange, LjForce, LjParams, RunOptions};
use partloop_core::{Backend, Engine};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub backend: Backend,
    pub workers: usize,
    pub n: usize,
    pub steps: usize,
    pub seconds: f64,
    pub pair_visits: u64,
}

impl BenchRow {
    pub fn seconds_per_step(&self) -> f64 {
        self.seconds / self.steps as f64
    }
}

/// One timed case: a lattice start with `cells^3` unit cells, `steps`
/// velocity-Verlet steps. Setup (lattice, velocities) is not timed; the
/// first force evaluation and list build are.
#[derive(Clone, Copy, Debug)]
pub struct BenchCase {
    pub structure: Structure,
    pub cells: usize,
    pub density: f64,
    pub temperature: f64,
    pub lj: LjParams,
    pub delta: f64,
    pub dt: f64,
    pub reuse: usize,
    pub steps: usize,
    pub seed: u64,
}

impl BenchCase {
    pub fn lj_benchmark(structure: Structure, cells: usize, steps: usize) -> Self {
        Self {
            structure,
            cells,
            density: 0.8442,
            temperature: 1.44,
            lj: LjParams::default(),
            delta: 0.25,
            dt: 0.005,
            reuse: 20,
            steps,
            seed: 1,
        }
    }

    pub fn run(&self, backend: Backend, workers: usize) -> Result<BenchRow> {
        let mut state =
            init_lattice_and_velocities(self.structure, self.cells, self.density, self.temperature, self.seed)?;
        let n = state.npart();
        let force = LjForce::native(self.lj)?;
        let ir = IntegratorRange {
            n_max: self.steps,
            dt: self.dt,
            delta: self.delta,
            reuse_limit: self.reuse,
        };
        let opts = RunOptions {
            backend,
            sample_every: self.steps.max(1),
            ..RunOptions::default()
        };
        let engine = Engine::with_workers(workers);
        let start = Instant::now();
        let summary = run_nve(&engine, &mut state, &force, &ir, &opts, |_, _| {})?;
        let seconds = start.elapsed().as_secs_f64();
        Ok(BenchRow {
            backend,
            workers,
            n,
            steps: self.steps,
            seconds,
            pair_visits: summary.pair_visits,
        })
    }
}

/// Every (N, backend, workers) combination of a `bench` configuration.
pub fn run_config(cfg: &RunConfig, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in &cfg.particles {
        let case = BenchCase {
            structure: cfg.lattice,
            cells: cfg.cells_for(n)?,
            density: cfg.density,
            temperature: cfg.temperature,
            lj: cfg.lj,
            delta: cfg.delta,
            dt: cfg.dt,
            reuse: cfg.reuse,
            steps: cfg.bench_steps,
            seed: cfg.seed,
        };
        for &backend in &cfg.backends {
            for &workers in &cfg.workers {
                let row = case.run(backend, workers)?;
                progress(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[BenchRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["backend", "workers", "N", "steps", "seconds", "pair-visits"])?;
    for r in rows {
        out.write_record([
            r.backend.name().to_string(),
            r.workers.to_string(),
            r.n.to_string(),
            r.steps.to_string(),
            format!("{:.6e}", r.seconds),
            r.pair_visits.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
