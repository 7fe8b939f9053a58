//! Particle loops and particle-pair loops for short-range molecular dynamics.
//!
//! Kernels (native closures or text in a small C-like language) are executed
//! over all particles or all ordered particle pairs within a cutoff. Every
//! argument carries an access mode, which the engine enforces at runtime and
//! uses to decide zeroing, snapshots and reductions. Pair iteration can use an
//! all-pairs scan, a cell list or a Verlet neighbour list; all three give the
//! same per-particle results.
//!
//! On top of the engine sit a velocity-Verlet NVE integrator for
//! Lennard-Jones particles and two crystal-structure analyses (bond-order
//! parameters and common-neighbour analysis).
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature; `std` only adds threaded loop execution.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod data;
pub mod dsl;
pub mod engine;
mod error;
pub mod lattice;
mod math;
pub mod sim;

pub use data::{Boundary, Constant, Domain, Dtype, ParticleDat, PositionDat, Scalar, ScalarArray, State};
pub use engine::{
    native, AccessBinding, AccessMode, Backend, CellList, Ctx, Engine, Kernel, LoopStats, NeighbourStructure,
};
pub use error::{AccessAction, Error, Result};
