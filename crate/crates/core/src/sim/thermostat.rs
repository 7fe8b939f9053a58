use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{MASS, VELOCITY};
use crate::data::State;
use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermostatParams {
    pub target_temperature: f64,
    /// Collision frequency per unit time.
    pub collision_frequency: f64,
    pub seed: u64,
}

impl ThermostatParams {
    pub fn new(target_temperature: f64, collision_frequency: f64, seed: u64) -> Self {
        Self {
            target_temperature,
            collision_frequency,
            seed,
        }
    }
}

/// Andersen thermostat: each particle has its velocity redrawn from the
/// Maxwell-Boltzmann distribution with probability `nu dt` per step.
///
/// Every particle consumes one uniform and three normal draws per step, in
/// index order, whether or not it collides, so the stream depends only on
/// the seed and the step count.
#[derive(Clone, Debug)]
pub struct Andersen {
    params: ThermostatParams,
    probability: f64,
    rng: ChaCha8Rng,
}

impl Andersen {
    pub fn new(params: ThermostatParams, dt: f64) -> Result<Self> {
        let t = params.target_temperature;
        let nu = params.collision_frequency;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "temperature",
                reason: alloc::format!("must be non-negative, got {t}"),
            });
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "collision frequency",
                reason: alloc::format!("must be non-negative, got {nu}"),
            });
        }
        let probability = nu * dt;
        if probability > 1.0 {
            return Err(Error::InvalidParameter {
                name: "collision frequency",
                reason: alloc::format!("nu * dt = {probability} exceeds 1"),
            });
        }
        Ok(Self {
            params,
            probability,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        })
    }

    pub fn params(&self) -> &ThermostatParams {
        &self.params
    }

    /// Applies one step's collisions; returns how many particles collided.
    pub fn apply(&mut self, state: &mut State) -> Result<usize> {
        let masses = state.dat(MASS)?.as_f64().expect("float masses").to_vec();
        let v = state.dat_mut(VELOCITY)?.as_f64_mut().expect("float velocities");
        let t = self.params.target_temperature;
        let mut hits = 0;
        for (vi, m) in v.chunks_exact_mut(3).zip(masses) {
            let u: f64 = self.rng.random();
            let n: [f64; 3] = [0; 3].map(|_| self.rng.sample(StandardNormal));
            if u < self.probability {
                let scale = math::sqrt(t / m);
                for d in 0..3 {
                    vi[d] = scale * n[d];
                }
                hits += 1;
            }
        }
        Ok(hits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Domain;
    use crate::sim::ensure_dynamics_dats;

    fn moving(n: usize) -> State {
        let pts: alloc::vec::Vec<_> = (0..n).map(|i| [i as f64 * 0.01, 0.0, 0.0]).collect();
        let mut s = State::with_positions(Domain::cubic(100.0).unwrap(), &pts).unwrap();
        ensure_dynamics_dats(&mut s).unwrap();
        s.dat_mut(VELOCITY).unwrap().as_f64_mut().unwrap().fill(0.5);
        s
    }

    #[test]
    fn zero_temperature_zeroes_velocities() {
        let mut s = moving(10);
        let mut a = Andersen::new(ThermostatParams::new(0.0, 200.0, 1), 0.005).unwrap();
        assert_eq!(a.apply(&mut s).unwrap(), 10);
        assert!(s.dat(VELOCITY).unwrap().as_f64().unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_frequency_changes_nothing() {
        let mut s = moving(10);
        let mut a = Andersen::new(ThermostatParams::new(1.0, 0.0, 1), 0.005).unwrap();
        assert_eq!(a.apply(&mut s).unwrap(), 0);
        assert!(s.dat(VELOCITY).unwrap().as_f64().unwrap().iter().all(|&x| x == 0.5));
    }

    #[test]
    fn probability_above_one_is_rejected() {
        assert!(Andersen::new(ThermostatParams::new(1.0, 300.0, 1), 0.005).is_err());
        assert!(Andersen::new(ThermostatParams::new(-1.0, 1.0, 1), 0.005).is_err());
    }

    #[test]
    fn same_seed_same_velocities() {
        let run = || {
            let mut s = moving(50);
            let mut a = Andersen::new(ThermostatParams::new(1.5, 100.0, 9), 0.005).unwrap();
            for _ in 0..3 {
                a.apply(&mut s).unwrap();
            }
            s.dat(VELOCITY).unwrap().as_f64().unwrap().to_vec()
        };
        assert_eq!(run(), run());
    }
}
