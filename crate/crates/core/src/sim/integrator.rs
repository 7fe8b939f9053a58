use alloc::string::ToString;
use alloc::vec::Vec;

use super::{ensure_dynamics_dats, Andersen, LjForce, ThermostatParams, FORCE, MASS, VELOCITY};
use crate::analysis::{bond_order, mean_q, BoaConfig};
use crate::data::{ScalarArray, State};
use crate::engine::{native, AccessBinding, AccessMode, Backend, Ctx, Engine, NeighbourStructure};
use crate::error::{Error, Result};
use crate::math;

fn positions_binding(state: &State, mode: AccessMode) -> Result<AccessBinding<'static>> {
    Ok(AccessBinding::dat_as("r", state.positions()?.name().to_string(), mode))
}

/// `v += dt/(2m) F; r += dt v`, then wraps positions into the box. Returns
/// the largest speed used in the position update.
pub fn vv_first_half(engine: &Engine, state: &mut State, dt: f64) -> Result<f64> {
    let half = 0.5 * dt;
    let k = native(move |ctx: &mut Ctx<'_, '_>| {
        let scale = half / ctx.read_i(3, 0)?;
        for d in 0..3 {
            ctx.inc_i(0, d, scale * ctx.read_i(2, d)?)?;
            ctx.inc_i(1, d, dt * ctx.read_i(0, d)?)?;
        }
        Ok(())
    });
    let mut b = [
        AccessBinding::dat(VELOCITY, AccessMode::ReadWrite),
        positions_binding(state, AccessMode::Inc)?,
        AccessBinding::dat(FORCE, AccessMode::Read),
        AccessBinding::dat(MASS, AccessMode::Read),
    ];
    engine.particle_loop(state, &k, &mut b)?;
    state.wrap_positions()?;
    max_speed(state)
}

/// `v += dt/(2m) F`.
pub fn vv_second_half(engine: &Engine, state: &mut State, dt: f64) -> Result<()> {
    let half = 0.5 * dt;
    let k = native(move |ctx: &mut Ctx<'_, '_>| {
        let scale = half / ctx.read_i(2, 0)?;
        for d in 0..3 {
            ctx.inc_i(0, d, scale * ctx.read_i(1, d)?)?;
        }
        Ok(())
    });
    let mut b = [
        AccessBinding::dat(VELOCITY, AccessMode::Inc),
        AccessBinding::dat(FORCE, AccessMode::Read),
        AccessBinding::dat(MASS, AccessMode::Read),
    ];
    engine.particle_loop(state, &k, &mut b)?;
    Ok(())
}

/// `sum_i m |v|^2 / 2`, reduced through a global `INC_ZERO` binding.
pub fn kinetic_energy(engine: &Engine, state: &mut State) -> Result<f64> {
    let mut ke = ScalarArray::float("KE", 1);
    let k = native(|ctx: &mut Ctx<'_, '_>| {
        let m = ctx.read_i(1, 0)?;
        let (v0, v1, v2) = (ctx.read_i(0, 0)?, ctx.read_i(0, 1)?, ctx.read_i(0, 2)?);
        ctx.inc_global(2, 0, 0.5 * m * (v0 * v0 + v1 * v1 + v2 * v2))
    });
    let mut b = [
        AccessBinding::dat(VELOCITY, AccessMode::Read),
        AccessBinding::dat(MASS, AccessMode::Read),
        AccessBinding::global("KE", &mut ke, AccessMode::IncZero),
    ];
    engine.particle_loop(state, &k, &mut b)?;
    Ok(ke.value(0))
}

/// `sum_i m v`, summed serially in particle order.
pub fn total_momentum(state: &State) -> Result<[f64; 3]> {
    let v = state.dat(VELOCITY)?.as_f64().expect("float velocities");
    let m = state.dat(MASS)?.as_f64().expect("float masses");
    let mut p = [0.0; 3];
    for (vi, mi) in v.chunks_exact(3).zip(m) {
        for d in 0..3 {
            p[d] += mi * vi[d];
        }
    }
    Ok(p)
}

fn max_speed(state: &State) -> Result<f64> {
    let v = state.dat(VELOCITY)?.as_f64().expect("float velocities");
    let max2 = v
        .chunks_exact(3)
        .map(|c| c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
        .fold(0.0, f64::max);
    Ok(math::sqrt(max2))
}

/// Time stepping and neighbour-list reuse settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorRange {
    pub n_max: usize,
    pub dt: f64,
    /// Shell thickness of the neighbour list.
    pub delta: f64,
    /// Maximum number of steps a neighbour list is reused.
    pub reuse_limit: usize,
}

impl Default for IntegratorRange {
    fn default() -> Self {
        Self {
            n_max: 1000,
            dt: 0.005,
            delta: 0.25,
            reuse_limit: crate::engine::DEFAULT_REUSE_LIMIT,
        }
    }
}

impl IntegratorRange {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: alloc::format!("must be positive, got {}", self.dt),
            });
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: alloc::format!("must be non-negative, got {}", self.delta),
            });
        }
        if self.reuse_limit == 0 {
            return Err(Error::InvalidParameter {
                name: "reuse_limit",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub backend: Backend,
    /// Observables are computed every this many steps (and at step 0).
    pub sample_every: usize,
    pub thermostat: Option<ThermostatParams>,
    /// On-the-fly bond-order analysis at every sample.
    pub boa: Option<BoaConfig>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            backend: Backend::NeighbourList,
            sample_every: 10,
            thermostat: None,
            boa: None,
        }
    }
}

/// Observables at one sampled step.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub time: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    /// `2 KE / (3 N)` with `k_B = 1`.
    pub temperature: f64,
    pub momentum: [f64; 3],
    /// `(l, mean Q_l)` over particles with at least one neighbour.
    pub q_means: Vec<(u32, f64)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub steps: usize,
    pub rebuilds: usize,
    pub samples: usize,
    pub thermostat_collisions: usize,
    /// Kernel invocations of all force evaluations.
    pub pair_visits: u64,
}

fn rebuild(state: &mut State, r_c: f64, ir: &IntegratorRange) -> Result<()> {
    let ns = NeighbourStructure::build(state, r_c, ir.delta)?.with_reuse_limit(ir.reuse_limit);
    state.set_neighbours(ns);
    Ok(())
}

/// Velocity-Verlet NVE integration (optionally Andersen-thermostatted) for
/// `ir.n_max` steps. `observer` sees each sample together with the state.
///
/// With the neighbour-list backend the list is rebuilt whenever the
/// displacement bound `2 n dt v_max >= delta` or the reuse limit triggers,
/// checked before every force evaluation.
pub fn run_nve<O>(
    engine: &Engine,
    state: &mut State,
    force: &LjForce,
    ir: &IntegratorRange,
    opts: &RunOptions,
    mut observer: O,
) -> Result<RunSummary>
where
    O: FnMut(&Sample, &State),
{
    ir.validate()?;
    ensure_dynamics_dats(state)?;
    state.wrap_positions()?;
    let r_c = force.params().r_c;
    let every = opts.sample_every.max(1);
    let mut thermostat = match &opts.thermostat {
        Some(p) => Some(Andersen::new(*p, ir.dt)?),
        None => None,
    };
    let mut summary = RunSummary::default();
    let use_list = opts.backend == Backend::NeighbourList;
    if use_list {
        rebuild(state, r_c, ir)?;
        summary.rebuilds += 1;
    }

    let (pe, stats) = force.compute_with_stats(engine, state, opts.backend, true)?;
    let pe = pe.unwrap_or(0.0);
    summary.pair_visits += stats.kernel_calls;
    let s = sample(engine, state, 0, 0.0, pe, opts)?;
    observer(&s, state);
    summary.samples += 1;

    for step in 1..=ir.n_max {
        let v_max = vv_first_half(engine, state, ir.dt)?;
        if use_list {
            let ns = state.neighbours_mut().expect("list built above");
            ns.record_step(v_max);
            if ns.needs_rebuild(ir.dt, ns.max_speed()) {
                rebuild(state, r_c, ir)?;
                summary.rebuilds += 1;
            }
        }
        let sampled = step % every == 0;
        let (pe, stats) = force.compute_with_stats(engine, state, opts.backend, sampled)?;
        summary.pair_visits += stats.kernel_calls;
        vv_second_half(engine, state, ir.dt)?;
        if let Some(pe) = pe {
            let s = sample(engine, state, step, step as f64 * ir.dt, pe, opts)?;
            observer(&s, state);
            summary.samples += 1;
        }
        if let Some(t) = thermostat.as_mut() {
            summary.thermostat_collisions += t.apply(state)?;
        }
        summary.steps = step;
    }
    Ok(summary)
}

fn sample(
    engine: &Engine,
    state: &mut State,
    step: usize,
    time: f64,
    potential: f64,
    opts: &RunOptions,
) -> Result<Sample> {
    let kinetic = kinetic_energy(engine, state)?;
    let n = state.npart().max(1) as f64;
    let q_means = match &opts.boa {
        Some(cfg) => {
            let q = bond_order(engine, state, cfg, opts.backend)?;
            cfg.l_values.iter().copied().zip(mean_q(&q)).collect()
        }
        None => Vec::new(),
    };
    Ok(Sample {
        step,
        time,
        kinetic,
        potential,
        total: kinetic + potential,
        temperature: 2.0 * kinetic / (3.0 * n),
        momentum: total_momentum(state)?,
        q_means,
    })
}
