use alloc::vec::Vec;

use super::cells::CellList;
use crate::data::State;
use crate::error::{Error, Result};

/// Default number of steps a neighbour list may be reused.
pub const DEFAULT_REUSE_LIMIT: usize = 20;

/// Verlet neighbour list with an extended cutoff `r_c + delta`.
///
/// Each particle's neighbours are stored sorted by index, so the order in
/// which a pair loop visits them does not depend on when the list was built.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighbourStructure {
    r_c: f64,
    delta: f64,
    reuse_limit: usize,
    extents: [f64; 3],
    offsets: Vec<usize>,
    list: Vec<usize>,
    build_positions: Vec<f64>,
    steps_since_build: usize,
    max_speed: f64,
}

impl NeighbourStructure {
    /// Lists every `j != i` within minimum-image distance `r_c + delta` of
    /// each `i`. Needs at least three cells of that width per axis.
    pub fn build(state: &State, r_c: f64, delta: f64) -> Result<Self> {
        if !(r_c.is_finite() && r_c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r_c",
                reason: alloc::format!("{r_c} is not a positive length"),
            });
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: alloc::format!("{delta} is negative or not finite"),
            });
        }
        let cutoff = r_c + delta;
        let cl = CellList::from_state(state, cutoff)?;
        cl.require_stencil()?;
        let pos = state.positions()?.points();
        let n = state.npart();
        let cut2 = cutoff * cutoff;
        let mut offsets = Vec::with_capacity(n + 1);
        let mut list = Vec::new();
        offsets.push(0);
        for i in 0..n {
            let first = list.len();
            let ri = &pos[3 * i..3 * i + 3];
            cl.for_each_candidate(i, |j, s| {
                let dx = ri[0] - (pos[3 * j] + s[0]);
                let dy = ri[1] - (pos[3 * j + 1] + s[1]);
                let dz = ri[2] - (pos[3 * j + 2] + s[2]);
                if dx * dx + dy * dy + dz * dz <= cut2 {
                    list.push(j);
                }
                Ok(())
            })?;
            list[first..].sort_unstable();
            offsets.push(list.len());
        }
        Ok(Self {
            r_c,
            delta,
            reuse_limit: DEFAULT_REUSE_LIMIT,
            extents: state.domain().extents(),
            offsets,
            list,
            build_positions: pos.to_vec(),
            steps_since_build: 0,
            max_speed: 0.0,
        })
    }

    pub fn with_reuse_limit(mut self, n: usize) -> Self {
        self.reuse_limit = n;
        self
    }

    pub fn r_c(&self) -> f64 {
        self.r_c
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Extended cutoff `r_c + delta`.
    pub fn cutoff(&self) -> f64 {
        self.r_c + self.delta
    }

    pub fn reuse_limit(&self) -> usize {
        self.reuse_limit
    }

    pub fn npart(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.list[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Total number of stored (ordered) pairs.
    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn build_positions(&self) -> &[f64] {
        &self.build_positions
    }

    pub fn steps_since_build(&self) -> usize {
        self.steps_since_build
    }

    /// Largest particle speed recorded since the build.
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    /// Notes one position update in which no particle moved faster than
    /// `speed`.
    pub fn record_step(&mut self, speed: f64) {
        self.steps_since_build += 1;
        self.max_speed = self.max_speed.max(speed);
    }

    /// Test hook: pretend `steps` updates happened since the build.
    pub fn set_steps_since_build(&mut self, steps: usize) {
        self.steps_since_build = steps;
    }

    /// True once particles may have closed the shell, i.e.
    /// `2 * steps * dt * v_max >= delta`, or the reuse limit is reached.
    /// Never true directly after a build.
    pub fn needs_rebuild(&self, dt: f64, v_max: f64) -> bool {
        let steps = self.steps_since_build;
        steps > 0 && (2.0 * steps as f64 * dt * v_max >= self.delta || steps >= self.reuse_limit)
    }

    /// Whether this list can serve a pair loop with cutoff `r_c` on `state`.
    pub(crate) fn serves(&self, state: &State, r_c: f64) -> bool {
        r_c <= self.r_c && self.npart() == state.npart() && self.extents == state.domain().extents()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Domain;

    fn pair(sep: f64) -> State {
        State::with_positions(Domain::cubic(10.0).unwrap(), &[[1.0, 5.0, 5.0], [1.0 + sep, 5.0, 5.0]]).unwrap()
    }

    #[test]
    fn containment_and_exclusion() {
        let ns = NeighbourStructure::build(&pair(2.6), 2.5, 0.25).unwrap();
        assert_eq!(ns.neighbours(0), &[1]);
        assert_eq!(ns.neighbours(1), &[0]);
        let ns = NeighbourStructure::build(&pair(2.8), 2.5, 0.25).unwrap();
        assert!(ns.neighbours(0).is_empty() && ns.neighbours(1).is_empty());
    }

    #[test]
    fn pair_across_the_boundary_is_found() {
        let st = State::with_positions(Domain::cubic(10.0).unwrap(), &[[0.2, 5.0, 5.0], [9.5, 5.0, 5.0]]).unwrap();
        let ns = NeighbourStructure::build(&st, 1.0, 0.0).unwrap();
        assert_eq!(ns.neighbours(0), &[1]);
    }

    #[test]
    fn infeasible_decomposition_is_an_error() {
        let st = pair(1.0);
        assert!(matches!(
            NeighbourStructure::build(&st, 3.4, 0.0),
            Err(Error::CellDecomposition { .. })
        ));
    }

    #[test]
    fn rebuild_rule() {
        let mut ns = NeighbourStructure::build(&pair(1.0), 2.5, 0.25).unwrap();
        assert!(!ns.needs_rebuild(0.005, 1e9));
        ns.set_steps_since_build(20);
        assert!(ns.needs_rebuild(0.005, 1.0));
        ns.set_steps_since_build(9);
        assert!(ns.needs_rebuild(0.005, 3.0));
        assert!(!ns.needs_rebuild(0.005, 1.0));
    }

    #[test]
    fn zero_steps_never_rebuilds_even_without_a_shell() {
        let ns = NeighbourStructure::build(&pair(1.0), 2.5, 0.0).unwrap();
        assert!(!ns.needs_rebuild(0.005, 10.0));
    }
}
