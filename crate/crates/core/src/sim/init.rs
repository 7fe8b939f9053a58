use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ensure_dynamics_dats, VELOCITY};
use crate::data::State;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Structure};
use crate::math;

/// Particles on a periodic lattice of `n_per_side` unit cells per axis, box
/// length `(N / rho)^(1/3)`, unit masses and Gaussian velocities of
/// variance `temperature` shifted to zero total momentum.
pub fn init_lattice_and_velocities(
    structure: Structure,
    n_per_side: usize,
    density: f64,
    temperature: f64,
    seed: u64,
) -> Result<State> {
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::InvalidParameter {
            name: "density",
            reason: alloc::format!("must be positive, got {density}"),
        });
    }
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "temperature",
            reason: alloc::format!("must be non-negative, got {temperature}"),
        });
    }
    if structure == Structure::Hcp {
        return Err(Error::InvalidParameter {
            name: "lattice",
            reason: "dynamics start from cubic lattices (sc, fcc or bcc)".into(),
        });
    }
    let npart = n_per_side.pow(3) * structure.atoms_per_cell();
    let len = math::cbrt(npart as f64 / density);
    let lattice = Lattice::new(structure, [n_per_side; 3], len / n_per_side.max(1) as f64)?;
    let mut state = lattice.into_state()?;
    ensure_dynamics_dats(&mut state)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = math::sqrt(temperature);
    let v = state.dat_mut(VELOCITY)?.as_f64_mut().expect("float velocities");
    for x in v.iter_mut() {
        *x = sd * rng.sample::<f64, _>(StandardNormal);
    }
    // Unit masses: zero momentum means zero mean velocity.
    let n = npart.max(1) as f64;
    for d in 0..3 {
        let mean = v.iter().skip(d).step_by(3).sum::<f64>() / n;
        v.iter_mut().skip(d).step_by(3).for_each(|x| *x -= mean);
    }
    Ok(state)
}
