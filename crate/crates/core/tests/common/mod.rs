#![allow(dead_code)]

use partloop_core::lattice::Structure;
use partloop_core::sim::init_lattice_and_velocities;
use partloop_core::{Domain, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(n: usize, len: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            [
                r.random::<f64>() * len,
                r.random::<f64>() * len,
                r.random::<f64>() * len,
            ]
        })
        .collect()
}

pub fn random_state(n: usize, len: f64, seed: u64) -> State {
    State::with_positions(Domain::cubic(len).unwrap(), &random_points(n, len, seed)).unwrap()
}

/// Minimum-image separation `a - b` in a cubic or orthorhombic box.
pub fn min_image(a: [f64; 3], b: [f64; 3], ext: [f64; 3]) -> [f64; 3] {
    let mut d = [0.0; 3];
    for k in 0..3 {
        let x = a[k] - b[k];
        d[k] = x - ext[k] * (x / ext[k]).round();
    }
    d
}

pub fn norm2(d: [f64; 3]) -> f64 {
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

pub fn points_of(state: &State) -> Vec<[f64; 3]> {
    state
        .positions()
        .unwrap()
        .points()
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect()
}

/// Sorted neighbour lists from an O(N^2) scan: `j != i` with distance
/// at most `rc`.
pub fn brute_neighbours(state: &State, rc: f64) -> Vec<Vec<usize>> {
    let p = points_of(state);
    let ext = state.domain().extents();
    (0..p.len())
        .map(|i| {
            (0..p.len())
                .filter(|&j| j != i && norm2(min_image(p[i], p[j], ext)) <= rc * rc)
                .collect()
        })
        .collect()
}

/// LJ liquid-like start: fcc at density `rho` with `cells^3` cells, each
/// site displaced by up to `jitter` per axis, Maxwell velocities at `t`.
pub fn lj_state(cells: usize, rho: f64, t: f64, jitter: f64, seed: u64) -> State {
    let mut s = init_lattice_and_velocities(Structure::Fcc, cells, rho, t, seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    for x in s.positions_mut().unwrap().as_f64_mut().unwrap() {
        *x += jitter * (2.0 * r.random::<f64>() - 1.0);
    }
    s.wrap_positions().unwrap();
    s
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
