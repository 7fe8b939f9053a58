//! Crystal-structure analysis as particle and pair loops: Steinhardt
//! bond-order parameters, common-neighbour analysis and a same-label
//! neighbour count.

mod boa;
mod cna;
mod harmonics;

pub use boa::{boa_finalize, boa_moments, bond_order, mean_q, BoaConfig, Moments};
pub use cna::{
    classify, cna_classify, cna_direct_bonds, cna_environment_bonds, common_neighbour_analysis, max_cluster_size,
    structure_counts, CnaConfig, CnaEnvironment, CnaStructure, StructureCounts, Triplets,
};
pub use harmonics::{spherical_harmonic, spherical_harmonics};
pub use num_complex::Complex64;

use alloc::string::ToString;

use crate::data::{Dtype, ParticleDat, State};
use crate::engine::{native, AccessBinding, AccessMode, Backend, Ctx, Engine};
use crate::error::Result;

const SAME_STATE: &str = "same_state_count";

/// For each particle, the number of neighbours within `r_c` whose integer
/// dat `label` has the same value.
pub fn same_state_neighbour_count(
    engine: &Engine,
    state: &mut State,
    label: &str,
    r_c: f64,
    backend: Backend,
) -> Result<ParticleDat> {
    state.attach(
        SAME_STATE,
        ParticleDat::zeros(SAME_STATE, state.npart(), 1, Dtype::Int64)?,
    )?;
    let k = native(|ctx: &mut Ctx<'_, '_>| {
        if ctx.read_i(0, 0)? == ctx.read_j(0, 0)? {
            ctx.inc_i(1, 0, 1.0)?;
        }
        Ok(())
    });
    let mut b = [
        AccessBinding::dat_as("label", label.to_string(), AccessMode::Read),
        AccessBinding::dat(SAME_STATE, AccessMode::IncZero),
    ];
    let result = engine.pair_loop(state, &k, &mut b, r_c, backend);
    let counts = state.detach(SAME_STATE)?;
    result?;
    Ok(counts)
}
