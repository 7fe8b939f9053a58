//! Lennard-Jones NVE dynamics: forces, velocity Verlet, the Andersen
//! thermostat and initial conditions.
//!
//! Dynamics use the dats `"v"` (velocity), `"F"` (force) and `"m"` (mass,
//! one component) next to the state's positions; [`ensure_dynamics_dats`]
//! attaches whichever are missing.

use alloc::string::ToString;
use alloc::vec;

use crate::data::{Constant, Dtype, ParticleDat, ScalarArray, State};
use crate::dsl::{kernels, DslKernel};
use crate::engine::{native, AccessBinding, AccessMode, Backend, Ctx, Engine, LoopStats};
use crate::error::{Error, Result};

mod init;
mod integrator;
mod thermostat;

pub use init::init_lattice_and_velocities;
pub use integrator::{
    kinetic_energy, run_nve, total_momentum, vv_first_half, vv_second_half, IntegratorRange, RunOptions, RunSummary,
    Sample,
};
pub use thermostat::{Andersen, ThermostatParams};

pub const VELOCITY: &str = "v";
pub const FORCE: &str = "F";
pub const MASS: &str = "m";

/// Attaches zeroed `v` and `F` and unit `m` where missing.
pub fn ensure_dynamics_dats(state: &mut State) -> Result<()> {
    let n = state.npart();
    for (name, ncomp, init) in [(VELOCITY, 3, 0.0), (FORCE, 3, 0.0), (MASS, 1, 1.0)] {
        if !state.has(name) {
            state.attach(name, ParticleDat::new(name, n, ncomp, Dtype::Float64, init)?)?;
        }
    }
    Ok(())
}

/// Lennard-Jones parameters in reduced units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LjParams {
    pub epsilon: f64,
    pub sigma: f64,
    pub r_c: f64,
}

impl Default for LjParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            sigma: 1.0,
            r_c: 2.5,
        }
    }
}

impl LjParams {
    pub fn new(epsilon: f64, sigma: f64, r_c: f64) -> Result<Self> {
        let p = Self { epsilon, sigma, r_c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("epsilon", self.epsilon), ("sigma", self.sigma), ("r_c", self.r_c)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: alloc::format!("must be positive, got {x}"),
                });
            }
        }
        if self.r_c <= self.sigma {
            return Err(Error::InvalidParameter {
                name: "r_c",
                reason: "must exceed sigma".to_string(),
            });
        }
        Ok(())
    }

    /// Energy prefactor `4 eps`.
    pub fn cv(&self) -> f64 {
        4.0 * self.epsilon
    }

    /// Force prefactor `48 eps / sigma^2`, for `dr = r_i - r_j`.
    pub fn cf(&self) -> f64 {
        48.0 * self.epsilon / (self.sigma * self.sigma)
    }

    /// Shifted pair potential `4 eps ((s/r)^12 - (s/r)^6 + 1/4)` below the
    /// cutoff, zero beyond.
    pub fn potential(&self, r: f64) -> f64 {
        if r >= self.r_c {
            return 0.0;
        }
        let s6 = {
            let s2 = (self.sigma / r) * (self.sigma / r);
            s2 * s2 * s2
        };
        self.cv() * ((s6 - 1.0) * s6 + 0.25)
    }

    /// Constants of the text kernel: `sigma2`, `rc_sq`, `CV`, `CF`.
    pub fn constants(&self) -> [Constant; 4] {
        [
            Constant::new("sigma2", self.sigma * self.sigma),
            Constant::new("rc_sq", self.r_c * self.r_c),
            Constant::new("CV", self.cv()),
            Constant::new("CF", self.cf()),
        ]
    }
}

/// Which implementation of the force kernel to run.
#[derive(Clone, Debug)]
pub enum ForceKernel {
    Native,
    Dsl(DslKernel),
}

/// Lennard-Jones force (and optionally energy) evaluator.
#[derive(Clone, Debug)]
pub struct LjForce {
    params: LjParams,
    kernel: ForceKernel,
}

impl LjForce {
    pub fn native(params: LjParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            kernel: ForceKernel::Native,
        })
    }

    /// Uses the text kernel with this parameter set bound as constants.
    pub fn dsl(params: LjParams) -> Result<Self> {
        params.validate()?;
        let k = DslKernel::from_code(kernels::LJ_KERNEL, &params.constants()).map_err(Error::Kernel)?;
        Ok(Self {
            params,
            kernel: ForceKernel::Dsl(k),
        })
    }

    /// Uses caller-supplied kernel text with the same bindings as the
    /// built-in one (`r`, `F`, `u`). `extra` constants are bound alongside
    /// `sigma2`, `rc_sq`, `CV` and `CF`.
    pub fn dsl_source(params: LjParams, code: &str, extra: &[Constant]) -> Result<Self> {
        params.validate()?;
        let mut constants = params.constants().to_vec();
        constants.extend_from_slice(extra);
        let k = DslKernel::from_code(code, &constants).map_err(Error::Kernel)?;
        Ok(Self {
            params,
            kernel: ForceKernel::Dsl(k),
        })
    }

    pub fn params(&self) -> &LjParams {
        &self.params
    }

    pub fn kernel(&self) -> &ForceKernel {
        &self.kernel
    }

    /// Overwrites `F` (attached if missing) with the forces for the current
    /// positions and returns the potential energy if `compute_energy` is
    /// set. The neighbour-list backend uses the state's list when it covers
    /// `r_c`.
    pub fn compute(
        &self,
        engine: &Engine,
        state: &mut State,
        backend: Backend,
        compute_energy: bool,
    ) -> Result<Option<f64>> {
        self.compute_with_stats(engine, state, backend, compute_energy)
            .map(|(pe, _)| pe)
    }

    /// [`compute`](Self::compute), also returning the pair loop's counters.
    pub fn compute_with_stats(
        &self,
        engine: &Engine,
        state: &mut State,
        backend: Backend,
        compute_energy: bool,
    ) -> Result<(Option<f64>, LoopStats)> {
        let p = self.params;
        if !state.has(FORCE) {
            state.attach(FORCE, ParticleDat::zeros(FORCE, state.npart(), 3, Dtype::Float64)?)?;
        }
        let mut u = ScalarArray::float("u", 1);
        let pos_name = state.positions()?.name().to_string();
        let mut bindings = vec![
            AccessBinding::dat_as("r", pos_name, AccessMode::Read),
            AccessBinding::dat(FORCE, AccessMode::IncZero),
        ];
        // The text kernel always addresses `u`; bind a scratch array.
        if compute_energy || matches!(self.kernel, ForceKernel::Dsl(_)) {
            bindings.push(AccessBinding::global("u", &mut u, AccessMode::IncZero));
        }
        let stats = match &self.kernel {
            ForceKernel::Native => {
                let (sigma2, rc_sq, cv, cf) = (p.sigma * p.sigma, p.r_c * p.r_c, p.cv(), p.cf());
                let k = native(move |ctx: &mut Ctx<'_, '_>| lj_native(ctx, sigma2, rc_sq, cv, cf));
                engine.pair_loop(state, &k, &mut bindings, p.r_c, backend)?
            }
            ForceKernel::Dsl(k) => engine.pair_loop(state, k, &mut bindings, p.r_c, backend)?,
        };
        drop(bindings);
        check_finite_forces(state)?;
        Ok((compute_energy.then(|| 0.5 * u.value(0)), stats))
    }
}

/// Native transcription of the text kernel. Slots: 0 `r`, 1 `F`, 2 `u`
/// (optional).
#[inline]
fn lj_native(ctx: &mut Ctx<'_, '_>, sigma2: f64, rc_sq: f64, cv: f64, cf: f64) -> Result<()> {
    let dr0 = ctx.read_i(0, 0)? - ctx.read_j(0, 0)?;
    let dr1 = ctx.read_i(0, 1)? - ctx.read_j(0, 1)?;
    let dr2 = ctx.read_i(0, 2)? - ctx.read_j(0, 2)?;
    let dr_sq = dr0 * dr0 + dr1 * dr1 + dr2 * dr2;
    if dr_sq >= rc_sq {
        return Ok(());
    }
    let r_m2 = sigma2 / dr_sq;
    let r_m4 = r_m2 * r_m2;
    let r_m6 = r_m4 * r_m2;
    let r_m8 = r_m4 * r_m4;
    if ctx.slots() > 2 {
        ctx.inc_global(2, 0, cv * ((r_m6 - 1.0) * r_m6 + 0.25))?;
    }
    let f_tmp = cf * (r_m6 - 0.5) * r_m8;
    ctx.inc_i(1, 0, f_tmp * dr0)?;
    ctx.inc_i(1, 1, f_tmp * dr1)?;
    ctx.inc_i(1, 2, f_tmp * dr2)
}

/// Forces and, if requested, potential energy with the native kernel.
pub fn lj_force_energy(
    engine: &Engine,
    state: &mut State,
    params: &LjParams,
    backend: Backend,
    compute_energy: bool,
) -> Result<Option<f64>> {
    LjForce::native(*params)?.compute(engine, state, backend, compute_energy)
}

/// Turns a non-finite force into an error naming the closest pair.
fn check_finite_forces(state: &State) -> Result<()> {
    let f = state.dat(FORCE)?.as_f64().expect("float forces");
    let Some(i) = f.chunks_exact(3).position(|c| c.iter().any(|x| !x.is_finite())) else {
        return Ok(());
    };
    let pos = state.positions()?.points();
    let dom = state.domain();
    let mut best = (f64::INFINITY, i);
    for j in (0..state.npart()).filter(|&j| j != i) {
        let d2: f64 = (0..3)
            .map(|d| {
                let x = pos[3 * i + d] - pos[3 * j + d] - dom.image_shift(d, pos[3 * i + d], pos[3 * j + d]);
                x * x
            })
            .sum();
        if d2 < best.0 {
            best = (d2, j);
        }
    }
    Err(Error::CoincidentParticles { i, j: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Domain;

    fn pair(sep: [f64; 3]) -> State {
        let mut s = State::with_positions(
            Domain::cubic(10.0).unwrap(),
            &[[1.0, 1.0, 1.0], [1.0 + sep[0], 1.0 + sep[1], 1.0 + sep[2]]],
        )
        .unwrap();
        ensure_dynamics_dats(&mut s).unwrap();
        s
    }

    fn force_and_energy(force: &LjForce, sep: [f64; 3]) -> ([f64; 3], f64) {
        let mut s = pair(sep);
        let pe = force
            .compute(&Engine::serial(), &mut s, Backend::AllPairs, true)
            .unwrap()
            .unwrap();
        let f = s.dat(FORCE).unwrap().row_f64(0);
        ([f[0], f[1], f[2]], pe)
    }

    #[test]
    fn minimum_of_the_potential_has_zero_force_and_energy() {
        let r = 2f64.powf(1.0 / 6.0);
        for force in [
            LjForce::native(LjParams::default()).unwrap(),
            LjForce::dsl(LjParams::default()).unwrap(),
        ] {
            let (f, pe) = force_and_energy(&force, [r, 0.0, 0.0]);
            assert!(f.iter().all(|x| x.abs() < 1e-12), "{f:?}");
            assert!(pe.abs() < 1e-12);
        }
    }

    #[test]
    fn beyond_cutoff_contributes_exactly_zero() {
        let force = LjForce::native(LjParams::default()).unwrap();
        let (f, pe) = force_and_energy(&force, [2.6, 0.0, 0.0]);
        assert_eq!(f, [0.0; 3]);
        assert_eq!(pe, 0.0);
    }

    #[test]
    fn force_matches_hand_value_at_two_sigma() {
        // Particle 1 sits at +2x from particle 0; particle 0 is pulled towards it.
        let force = LjForce::native(LjParams::default()).unwrap();
        let (f, _) = force_and_energy(&force, [2.0, 0.0, 0.0]);
        let along_minus_x = (48.0 / 2f64.powi(14) - 24.0 / 2f64.powi(8)) * 2.0;
        assert!((f[0] + along_minus_x).abs() < 1e-14, "{} vs {}", f[0], -along_minus_x);
        assert!(f[0] > 0.0 && f[1] == 0.0 && f[2] == 0.0);
    }

    #[test]
    fn coincident_particles_are_reported() {
        let mut s = pair([0.0; 3]);
        let err = lj_force_energy(
            &Engine::serial(),
            &mut s,
            &LjParams::default(),
            Backend::AllPairs,
            false,
        )
        .unwrap_err();
        assert_eq!(err, Error::CoincidentParticles { i: 0, j: 1 });
    }

    #[test]
    fn parameters_are_validated() {
        assert!(LjParams::new(1.0, 1.0, -1.0).is_err());
        assert!(LjParams::new(1.0, 1.0, 0.9).is_err());
        assert!(LjParams::new(0.0, 1.0, 2.5).is_err());
    }
}
