use alloc::collections::VecDeque;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::data::{Dtype, ParticleDat, State, GLOBAL_IDS};
use crate::engine::{native, AccessBinding, AccessMode, Backend, Ctx, Engine};
use crate::error::{Error, Result};

const BONDS: &str = "cna.bond";
const N_NB: &str = "cna.n_nb";
const N_BOND: &str = "cna.n_bond";
const TRIPLETS: &str = "cna.T";
const N_TRIPLETS: &str = "cna.t";

/// Common-neighbour analysis settings. Bond lists and triplet lists have
/// fixed capacities; exceeding them is an error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CnaConfig {
    pub r_c: f64,
    pub max_neighbours: usize,
    pub max_bonds: usize,
}

impl CnaConfig {
    pub fn new(r_c: f64) -> Result<Self> {
        if !(r_c.is_finite() && r_c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r_c",
                reason: alloc::format!("must be positive, got {r_c}"),
            });
        }
        Ok(Self {
            r_c,
            max_neighbours: 32,
            max_bonds: 512,
        })
    }
}

/// Per-particle bond lists `E`: `n_nb` direct bonds `(G(i), G(j))`
/// followed by the environment bonds, `n_bond` pairs in total.
#[derive(Clone, Debug, PartialEq)]
pub struct CnaEnvironment {
    pub bonds: ParticleDat,
    pub n_nb: ParticleDat,
    pub n_bond: ParticleDat,
}

impl CnaEnvironment {
    /// Stored bonds of particle `i` in order.
    pub fn bonds_of(&self, i: usize) -> Vec<(i64, i64)> {
        let n = self.n_bond.as_i64().expect("int counts")[i] as usize;
        let row = &self.bonds.as_i64().expect("int bonds")[i * self.bonds.ncomp()..];
        (0..n).map(|k| (row[2 * k], row[2 * k + 1])).collect()
    }

    pub fn direct_count(&self, i: usize) -> usize {
        self.n_nb.as_i64().expect("int counts")[i] as usize
    }
}

/// Per-particle triplets `(n_nb, n_b, n_lcb)`, one per bonded neighbour.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplets {
    pub t: ParticleDat,
    pub count: ParticleDat,
}

impl Triplets {
    pub fn of(&self, i: usize) -> Vec<[i64; 3]> {
        let n = self.count.as_i64().expect("int counts")[i] as usize;
        let row = &self.t.as_i64().expect("int triplets")[i * self.t.ncomp()..];
        (0..n).map(|k| [row[3 * k], row[3 * k + 1], row[3 * k + 2]]).collect()
    }

    pub fn npart(&self) -> usize {
        self.count.npart()
    }
}

fn int_dat(name: &str, n: usize, ncomp: usize) -> Result<ParticleDat> {
    ParticleDat::zeros(name, n, ncomp, Dtype::Int64)
}

fn capacity(what: &'static str, particle: usize, capacity: usize) -> Error {
    Error::CapacityExceeded {
        what,
        particle,
        capacity,
    }
}

/// Runs `f` with `dats` attached to `state`, detaching them afterwards
/// whether or not `f` succeeds.
fn with_dats<T>(
    state: &mut State,
    dats: Vec<ParticleDat>,
    f: impl FnOnce(&mut State) -> Result<T>,
) -> Result<(T, Vec<ParticleDat>)> {
    let names: Vec<_> = dats.iter().map(|d| d.name().to_string()).collect();
    let mut attached = Vec::new();
    let mut result = Ok(());
    for d in dats {
        let name = d.name().to_string();
        match state.attach(name.as_str(), d) {
            Ok(()) => attached.push(name),
            Err(e) => {
                result = Err(e);
                break;
            }
        }
    }
    let out = result.and_then(|()| f(state));
    let mut back = Vec::with_capacity(names.len());
    for name in &attached {
        back.push(state.detach(name)?);
    }
    Ok((out?, back))
}

/// Direct bonds: for every ordered pair closer than `r_c`, appends
/// `(G(i), G(j))` to `i`'s list.
pub fn cna_direct_bonds(
    engine: &Engine,
    state: &mut State,
    cfg: &CnaConfig,
    backend: Backend,
) -> Result<CnaEnvironment> {
    state.check_global_ids()?;
    let n = state.npart();
    let dats = alloc::vec![
        int_dat(BONDS, n, 2 * cfg.max_bonds)?,
        int_dat(N_NB, n, 1)?,
        int_dat(N_BOND, n, 1)?,
    ];
    let rc_sq = cfg.r_c * cfg.r_c;
    let (max_nb, max_b) = (cfg.max_neighbours, cfg.max_bonds);
    let k = native(move |ctx: &mut Ctx<'_, '_>| {
        let mut dr_sq = 0.0;
        for d in 0..3 {
            let x = ctx.read_i(0, d)? - ctx.read_j(0, d)?;
            dr_sq += x * x;
        }
        if dr_sq < rc_sq {
            let nb = ctx.read_i(4, 0)? as usize;
            if nb >= max_b {
                return Err(capacity("bond list", ctx.i(), max_b));
            }
            if nb >= max_nb {
                return Err(capacity("neighbour list", ctx.i(), max_nb));
            }
            ctx.write_i(2, 2 * nb, ctx.read_i(1, 0)?)?;
            ctx.write_i(2, 2 * nb + 1, ctx.read_j(1, 0)?)?;
            ctx.inc_i(3, 0, 1.0)?;
            ctx.write_i(4, 0, (nb + 1) as f64)?;
        }
        Ok(())
    });
    let pos = state.positions()?.name().to_string();
    let ((), mut back) = with_dats(state, dats, |state| {
        let mut b = [
            AccessBinding::dat_as("r", pos, AccessMode::Read),
            AccessBinding::dat(GLOBAL_IDS, AccessMode::Read),
            AccessBinding::dat(BONDS, AccessMode::Write),
            AccessBinding::dat(N_NB, AccessMode::IncZero),
            AccessBinding::dat(N_BOND, AccessMode::ReadWrite),
        ];
        engine.pair_loop(state, &k, &mut b, cfg.r_c, backend)?;
        Ok(())
    })?;
    let n_bond = back.pop().expect("three dats");
    let n_nb = back.pop().expect("three dats");
    let bonds = back.pop().expect("three dats");
    Ok(CnaEnvironment { bonds, n_nb, n_bond })
}

/// Environment bonds: for every ordered pair closer than `r_c`, copies
/// `j`'s direct bonds that do not point back at `i` into `i`'s list.
pub fn cna_environment_bonds(
    engine: &Engine,
    state: &mut State,
    env: CnaEnvironment,
    cfg: &CnaConfig,
    backend: Backend,
) -> Result<CnaEnvironment> {
    let rc_sq = cfg.r_c * cfg.r_c;
    let max_b = env.bonds.ncomp() / 2;
    let k = native(move |ctx: &mut Ctx<'_, '_>| {
        let mut dr_sq = 0.0;
        for d in 0..3 {
            let x = ctx.read_i(0, d)? - ctx.read_j(0, d)?;
            dr_sq += x * x;
        }
        if dr_sq < rc_sq {
            let gi = ctx.read_i(1, 0)?;
            let nb_j = ctx.read_j(2, 0)? as usize;
            let mut nb = ctx.read_i(4, 0)? as usize;
            for k in 0..nb_j {
                let second = ctx.read_j(3, 2 * k + 1)?;
                if second != gi {
                    if nb >= max_b {
                        return Err(capacity("bond list", ctx.i(), max_b));
                    }
                    let first = ctx.read_j(3, 2 * k)?;
                    ctx.write_i(3, 2 * nb, first)?;
                    ctx.write_i(3, 2 * nb + 1, second)?;
                    nb += 1;
                }
            }
            ctx.write_i(4, 0, nb as f64)?;
        }
        Ok(())
    });
    let pos = state.positions()?.name().to_string();
    let dats = alloc::vec![env.bonds, env.n_nb, env.n_bond];
    let ((), mut back) = with_dats(state, dats, |state| {
        let mut b = [
            AccessBinding::dat_as("r", pos, AccessMode::Read),
            AccessBinding::dat(GLOBAL_IDS, AccessMode::Read),
            AccessBinding::dat(N_NB, AccessMode::Read),
            AccessBinding::dat(BONDS, AccessMode::ReadWrite),
            AccessBinding::dat(N_BOND, AccessMode::ReadWrite),
        ];
        engine.pair_loop(state, &k, &mut b, cfg.r_c, backend)?;
        Ok(())
    })?;
    let n_bond = back.pop().expect("three dats");
    let n_nb = back.pop().expect("three dats");
    let bonds = back.pop().expect("three dats");
    Ok(CnaEnvironment { bonds, n_nb, n_bond })
}

/// Triplets for every bonded ordered pair: common neighbours `C` (shared
/// second entries of the direct bonds), distinct bonds `E` among `C` from
/// `i`'s environment, and the largest cluster of `E`.
pub fn cna_classify(
    engine: &Engine,
    state: &mut State,
    env: &CnaEnvironment,
    cfg: &CnaConfig,
    backend: Backend,
) -> Result<Triplets> {
    let n = state.npart();
    let rc_sq = cfg.r_c * cfg.r_c;
    let max_nb = cfg.max_neighbours;
    let k = native(move |ctx: &mut Ctx<'_, '_>| {
        let mut dr_sq = 0.0;
        for d in 0..3 {
            let x = ctx.read_i(0, d)? - ctx.read_j(0, d)?;
            dr_sq += x * x;
        }
        if dr_sq >= rc_sq {
            return Ok(());
        }
        let nb_i = ctx.read_i(1, 0)? as usize;
        let nb_j = ctx.read_j(1, 0)? as usize;
        let nbond_i = ctx.read_i(2, 0)? as usize;
        let mut common: Vec<i64> = Vec::with_capacity(nb_i);
        for k in 0..nb_i {
            let v = ctx.read_i(3, 2 * k + 1)?;
            for l in 0..nb_j {
                if ctx.read_j(3, 2 * l + 1)? == v {
                    if !common.contains(&(v as i64)) {
                        common.push(v as i64);
                    }
                    break;
                }
            }
        }
        let mut edges: Vec<(i64, i64)> = Vec::new();
        for k in nb_i..nbond_i {
            let a = ctx.read_i(3, 2 * k)? as i64;
            let b = ctx.read_i(3, 2 * k + 1)? as i64;
            if common.contains(&a) && common.contains(&b) {
                let e = (a.min(b), a.max(b));
                if !edges.contains(&e) {
                    edges.push(e);
                }
            }
        }
        let t = ctx.read_i(5, 0)? as usize;
        if t >= max_nb {
            return Err(capacity("triplet list", ctx.i(), max_nb));
        }
        ctx.write_i(4, 3 * t, common.len() as f64)?;
        ctx.write_i(4, 3 * t + 1, edges.len() as f64)?;
        ctx.write_i(4, 3 * t + 2, max_cluster_size(&edges) as f64)?;
        ctx.write_i(5, 0, (t + 1) as f64)
    });
    let pos = state.positions()?.name().to_string();
    let dats = alloc::vec![
        env.n_nb.clone(),
        env.n_bond.clone(),
        env.bonds.clone(),
        int_dat(TRIPLETS, n, 3 * max_nb)?,
        int_dat(N_TRIPLETS, n, 1)?,
    ];
    let ((), mut back) = with_dats(state, dats, |state| {
        let mut b = [
            AccessBinding::dat_as("r", pos, AccessMode::Read),
            AccessBinding::dat(N_NB, AccessMode::Read),
            AccessBinding::dat(N_BOND, AccessMode::Read),
            AccessBinding::dat(BONDS, AccessMode::Read),
            AccessBinding::dat(TRIPLETS, AccessMode::Write),
            AccessBinding::dat(N_TRIPLETS, AccessMode::ReadWrite),
        ];
        engine.pair_loop(state, &k, &mut b, cfg.r_c, backend)?;
        Ok(())
    })?;
    let count = back.pop().expect("five dats");
    let t = back.pop().expect("five dats");
    Ok(Triplets { t, count })
}

/// All three passes.
pub fn common_neighbour_analysis(
    engine: &Engine,
    state: &mut State,
    cfg: &CnaConfig,
    backend: Backend,
) -> Result<Triplets> {
    let env = cna_direct_bonds(engine, state, cfg, backend)?;
    let env = cna_environment_bonds(engine, state, env, cfg, backend)?;
    cna_classify(engine, state, &env, cfg, backend)
}

/// Number of edges in the largest connected component, by breadth-first
/// traversal that removes each visited edge.
pub fn max_cluster_size(edges: &[(i64, i64)]) -> usize {
    let mut remaining: Vec<(i64, i64)> = edges.to_vec();
    let mut best = 0;
    while let Some(&(start, _)) = remaining.first() {
        let mut size = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let before = remaining.len();
            remaining.retain(|&(a, b)| {
                if a == v || b == v {
                    queue.push_back(if a == v { b } else { a });
                    false
                } else {
                    true
                }
            });
            size += before - remaining.len();
        }
        best = best.max(size);
    }
    best
}

/// Local structure from a particle's triplets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CnaStructure {
    Fcc,
    Hcp,
    Bcc,
    Other,
}

/// Matches fcc (12 x 421), hcp (6 x 421 + 6 x 422) and bcc (8 x 666 +
/// 6 x 444).
pub fn classify(triplets: &[[i64; 3]]) -> CnaStructure {
    let count = |t: [i64; 3]| triplets.iter().filter(|&&x| x == t).count();
    let (t421, t422, t666, t444) = (count([4, 2, 1]), count([4, 2, 2]), count([6, 6, 6]), count([4, 4, 4]));
    match triplets.len() {
        12 if t421 == 12 => CnaStructure::Fcc,
        12 if t421 == 6 && t422 == 6 => CnaStructure::Hcp,
        14 if t666 == 8 && t444 == 6 => CnaStructure::Bcc,
        _ => CnaStructure::Other,
    }
}

/// Particle counts per structure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StructureCounts {
    pub fcc: usize,
    pub hcp: usize,
    pub bcc: usize,
    pub other: usize,
}

pub fn structure_counts(t: &Triplets) -> StructureCounts {
    let mut c = StructureCounts::default();
    for i in 0..t.npart() {
        match classify(&t.of(i)) {
            CnaStructure::Fcc => c.fcc += 1,
            CnaStructure::Hcp => c.hcp += 1,
            CnaStructure::Bcc => c.bcc += 1,
            CnaStructure::Other => c.other += 1,
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Domain;

    fn state(points: &[[f64; 3]]) -> State {
        State::with_positions(Domain::cubic(20.0).unwrap(), points).unwrap()
    }

    fn analyse(points: &[[f64; 3]], rc: f64) -> (CnaEnvironment, CnaEnvironment) {
        let mut s = state(points);
        let cfg = CnaConfig::new(rc).unwrap();
        let e = Engine::serial();
        let direct = cna_direct_bonds(&e, &mut s, &cfg, Backend::AllPairs).unwrap();
        let full = cna_environment_bonds(&e, &mut s, direct.clone(), &cfg, Backend::AllPairs).unwrap();
        (direct, full)
    }

    #[test]
    fn isolated_particle_has_no_bonds() {
        let (d, _) = analyse(&[[1.0; 3], [10.0; 3]], 1.5);
        assert_eq!(d.direct_count(0), 0);
    }

    #[test]
    fn pair_bonds_each_other_without_environment() {
        let (d, f) = analyse(&[[1.0; 3], [2.0, 1.0, 1.0]], 1.5);
        assert_eq!(d.bonds_of(0), [(0, 1)]);
        assert_eq!(d.bonds_of(1), [(1, 0)]);
        assert_eq!(f.bonds_of(0), [(0, 1)]);
    }

    #[test]
    fn triangle_environment() {
        let h = 3f64.sqrt() / 2.0;
        let (_, f) = analyse(&[[1.0, 1.0, 1.0], [2.0, 1.0, 1.0], [1.5, 1.0 + h, 1.0]], 1.5);
        let b = f.bonds_of(0);
        assert_eq!(&b[..2], [(0, 1), (0, 2)]);
        let mut env = b[2..].to_vec();
        env.sort();
        assert_eq!(env, [(1, 2), (2, 1)]);
    }

    #[test]
    fn cluster_sizes() {
        assert_eq!(max_cluster_size(&[]), 0);
        assert_eq!(max_cluster_size(&[(1, 2)]), 1);
        assert_eq!(max_cluster_size(&[(1, 2), (1, 3), (2, 3), (7, 8)]), 3);
        assert_eq!(max_cluster_size(&[(1, 2), (3, 4), (4, 5)]), 2);
    }

    #[test]
    fn bond_capacity_overflow_is_an_error() {
        let mut s = state(&[[1.0; 3], [1.5, 1.0, 1.0], [1.0, 1.5, 1.0]]);
        let cfg = CnaConfig {
            max_bonds: 1,
            ..CnaConfig::new(1.0).unwrap()
        };
        let err = cna_direct_bonds(&Engine::serial(), &mut s, &cfg, Backend::AllPairs).unwrap_err();
        assert!(matches!(err, Error::CapacityExceeded { capacity: 1, .. }));
        assert!(!s.has(BONDS));
    }

    #[test]
    fn signatures() {
        let fcc = [[4, 2, 1]; 12];
        assert_eq!(classify(&fcc), CnaStructure::Fcc);
        let mut hcp = [[4, 2, 1]; 12];
        hcp[6..].fill([4, 2, 2]);
        assert_eq!(classify(&hcp), CnaStructure::Hcp);
        let mut bcc = [[6, 6, 6]; 14];
        bcc[8..].fill([4, 4, 4]);
        assert_eq!(classify(&bcc), CnaStructure::Bcc);
        assert_eq!(classify(&fcc[..11]), CnaStructure::Other);
    }
}
