//! The four commands. Each reads a [`RunConfig`] and writes its files into
//! `cfg.out_dir`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use partloop_core::analysis::{
    bond_order, classify, common_neighbour_analysis, mean_q, structure_counts, BoaConfig, CnaConfig, CnaStructure,
    StructureCounts,
};
use partloop_core::lattice::Lattice;
use partloop_core::sim::{
    init_lattice_and_velocities, run_nve, IntegratorRange, LjForce, RunOptions, RunSummary, Sample,
};
use partloop_core::{Engine, State};

use crate::bench::{self, BenchRow};
use crate::config::{KernelChoice, RunConfig};
use crate::snapshot::Snapshot;

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("cannot create {}", cfg.out_dir.display()))?;
    Ok(cfg.out_dir.clone())
}

fn force_for(cfg: &RunConfig) -> Result<LjForce> {
    Ok(match &cfg.kernel {
        KernelChoice::Native => LjForce::native(cfg.lj)?,
        KernelChoice::Dsl => LjForce::dsl(cfg.lj)?,
        KernelChoice::File(path) => {
            let code = fs::read_to_string(path).with_context(|| format!("cannot read kernel {}", path.display()))?;
            LjForce::dsl_source(cfg.lj, &code, &cfg.constants)?
        }
    })
}

#[derive(Clone, Debug)]
pub struct SimulateReport {
    pub summary: RunSummary,
    pub first: Sample,
    pub last: Sample,
    pub energies: PathBuf,
    pub final_snapshot: PathBuf,
}

/// NVE (optionally thermostatted) run from a lattice start. Writes
/// `energies.csv` with one row per sample, snapshots every
/// `snapshot_every` sampled steps and a final snapshot.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateReport> {
    let dir = out_dir(cfg)?;
    let cells = cfg.cells_for(cfg.npart())?;
    let mut state = init_lattice_and_velocities(cfg.lattice, cells, cfg.density, cfg.temperature, cfg.seed)?;
    let force = force_for(cfg)?;
    let ir = IntegratorRange {
        n_max: cfg.n_max,
        dt: cfg.dt,
        delta: cfg.delta,
        reuse_limit: cfg.reuse,
    };
    let opts = RunOptions {
        backend: cfg.backend(),
        sample_every: cfg.sample_every,
        thermostat: cfg.thermostat,
        boa: if cfg.boa {
            Some(BoaConfig::new(cfg.boa_l.clone(), cfg.analysis_cutoff())?)
        } else {
            None
        },
    };
    let engine = Engine::with_workers(cfg.worker_count());
    log::info!(
        "simulate: N = {}, L = {:.6}, backend {}, {} worker(s), seed {}",
        state.npart(),
        state.domain().extents()[0],
        cfg.backend().name(),
        engine.workers(),
        cfg.seed
    );

    let energies = dir.join("energies.csv");
    let mut out = csv::Writer::from_writer(BufWriter::new(File::create(&energies)?));
    let mut header: Vec<String> = [
        "step",
        "time",
        "kinetic",
        "potential",
        "total",
        "temperature",
        "px",
        "py",
        "pz",
    ]
    .map(String::from)
    .to_vec();
    header.extend(cfg.boa_l.iter().filter(|_| cfg.boa).map(|l| format!("Q_{l}")));
    out.write_record(&header)?;

    let mut first = None;
    let mut last = None;
    let mut failure: Option<anyhow::Error> = None;
    let ext = cfg.format.extension();
    let summary = run_nve(&engine, &mut state, &force, &ir, &opts, |s, st| {
        if failure.is_some() {
            return;
        }
        let mut row = vec![s.step.to_string()];
        row.extend(
            [
                s.time,
                s.kinetic,
                s.potential,
                s.total,
                s.temperature,
                s.momentum[0],
                s.momentum[1],
                s.momentum[2],
            ]
            .map(|x| format!("{x:.16e}")),
        );
        row.extend(s.q_means.iter().map(|(_, q)| format!("{q:.16e}")));
        let mut result = out.write_record(&row).map_err(anyhow::Error::from);
        if result.is_ok() && cfg.snapshot_every > 0 && s.step % cfg.snapshot_every == 0 {
            result = Snapshot::from_state(st, s.step, s.time)
                .and_then(|snap| snap.write_file(&dir.join(format!("snapshot_{:08}.{ext}", s.step)), cfg.format));
        }
        if let Err(e) = result {
            failure = Some(e);
        }
        first.get_or_insert_with(|| s.clone());
        last = Some(s.clone());
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    out.flush()?;
    let final_snapshot = dir.join(format!("final.{ext}"));
    Snapshot::from_state(&state, summary.steps, summary.steps as f64 * cfg.dt)?
        .write_file(&final_snapshot, cfg.format)?;
    Ok(SimulateReport {
        summary,
        first: first.expect("step 0 is always sampled"),
        last: last.expect("step 0 is always sampled"),
        energies,
        final_snapshot,
    })
}

/// The configuration's input snapshot, or its generated perfect lattice.
pub fn analysis_state(cfg: &RunConfig) -> Result<State> {
    match &cfg.input {
        Some(path) => Snapshot::read_xyz_file(path)?.to_state(),
        None => {
            let a = cfg.lattice.lattice_constant_for(cfg.spacing);
            Ok(Lattice::new(cfg.lattice, [cfg.cells; 3], a)?.into_state()?)
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoaReport {
    pub npart: usize,
    pub r_c: f64,
    /// `(l, mean Q_l)` over particles with neighbours.
    pub means: Vec<(u32, f64)>,
    pub output: PathBuf,
}

/// Bond-order parameters per particle, written as CSV with one `Q_l`
/// column per degree.
pub fn analyze_boa(cfg: &RunConfig) -> Result<BoaReport> {
    let dir = out_dir(cfg)?;
    let mut state = analysis_state(cfg)?;
    let boa = BoaConfig::new(cfg.boa_l.clone(), cfg.analysis_cutoff())?;
    let engine = Engine::with_workers(cfg.worker_count());
    let q = bond_order(&engine, &mut state, &boa, cfg.backend())?;
    let mut snap = Snapshot::from_state(&state, 0, 0.0)?;
    let n = state.npart();
    for (k, l) in cfg.boa_l.iter().enumerate() {
        let col = (0..n).map(|i| q.row_f64(i)[k]).collect();
        snap = snap.with_column(format!("Q_{l}"), col)?;
    }
    let output = dir.join("boa.csv");
    snap.write_file(&output, crate::config::Format::Csv)?;
    Ok(BoaReport {
        npart: n,
        r_c: boa.r_c,
        means: cfg.boa_l.iter().copied().zip(mean_q(&q)).collect(),
        output,
    })
}

#[derive(Clone, Debug)]
pub struct CnaReport {
    pub npart: usize,
    pub r_c: f64,
    pub counts: StructureCounts,
    pub output: PathBuf,
}

fn structure_code(s: CnaStructure) -> f64 {
    match s {
        CnaStructure::Other => 0.0,
        CnaStructure::Fcc => 1.0,
        CnaStructure::Hcp => 2.0,
        CnaStructure::Bcc => 3.0,
    }
}

/// Common-neighbour analysis. The CSV holds per-particle counts of the
/// (4,2,1), (4,2,2), (4,4,4) and (6,6,6) triplets and a structure code
/// (0 other, 1 fcc, 2 hcp, 3 bcc).
pub fn analyze_cna(cfg: &RunConfig) -> Result<CnaReport> {
    let dir = out_dir(cfg)?;
    let mut state = analysis_state(cfg)?;
    let cna = CnaConfig::new(cfg.analysis_cutoff())?;
    let engine = Engine::with_workers(cfg.worker_count());
    let t = common_neighbour_analysis(&engine, &mut state, &cna, cfg.backend())?;
    let n = state.npart();
    let per: Vec<Vec<[i64; 3]>> = (0..n).map(|i| t.of(i)).collect();
    let count = |sig: [i64; 3]| {
        per.iter()
            .map(|ts| ts.iter().filter(|&&x| x == sig).count() as f64)
            .collect()
    };
    let snap = Snapshot::from_state(&state, 0, 0.0)?
        .with_column("n421", count([4, 2, 1]))?
        .with_column("n422", count([4, 2, 2]))?
        .with_column("n444", count([4, 4, 4]))?
        .with_column("n666", count([6, 6, 6]))?
        .with_column("structure", per.iter().map(|ts| structure_code(classify(ts))).collect())?;
    let output = dir.join("cna.csv");
    snap.write_file(&output, crate::config::Format::Csv)?;
    Ok(CnaReport {
        npart: n,
        r_c: cna.r_c,
        counts: structure_counts(&t),
        output,
    })
}

/// Runs every benchmark case and writes `bench.csv`.
pub fn bench(cfg: &RunConfig) -> Result<(Vec<BenchRow>, PathBuf)> {
    let dir = out_dir(cfg)?;
    let rows = bench::run_config(cfg, |r| {
        log::info!(
            "{} N={} workers={}: {:.4e} s/step",
            r.backend.name(),
            r.n,
            r.workers,
            r.seconds_per_step()
        )
    })?;
    let path = dir.join("bench.csv");
    bench::write_csv(&rows, BufWriter::new(File::create(&path)?))?;
    Ok((rows, path))
}
