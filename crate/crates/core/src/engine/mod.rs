//! Particle loops and particle-pair loops.
//!
//! A loop runs a [`Kernel`] over every particle, or over every ordered pair
//! `(i, j)`, `i != j`, whose minimum-image separation is at most the loop
//! cutoff. Arguments are declared with [`AccessBinding`]s; the engine enforces
//! each binding's [`AccessMode`] through the [`Ctx`] handed to the kernel.

mod cells;
mod exec;
mod neighbours;
mod view;

use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

pub use cells::CellList;
pub use exec::LoopStats;
pub use neighbours::{NeighbourStructure, DEFAULT_REUSE_LIMIT};
pub use view::{Ctx, Env};

use crate::data::{Dtype, ScalarArray};
use crate::error::{Error, Result};

/// How a kernel may use a bound argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AccessMode {
    Read,
    Write,
    ReadWrite,
    Inc,
    IncZero,
}

impl AccessMode {
    pub fn can_read(self) -> bool {
        matches!(self, AccessMode::Read | AccessMode::ReadWrite)
    }

    pub fn can_write(self) -> bool {
        matches!(self, AccessMode::Write | AccessMode::ReadWrite)
    }

    pub fn can_increment(self) -> bool {
        matches!(self, AccessMode::Inc | AccessMode::IncZero | AccessMode::ReadWrite)
    }

    pub fn is_read_only(self) -> bool {
        self == AccessMode::Read
    }
}

impl fmt::Display for AccessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessMode::Read => "READ",
            AccessMode::Write => "WRITE",
            AccessMode::ReadWrite => "RW",
            AccessMode::Inc => "INC",
            AccessMode::IncZero => "INC_ZERO",
        })
    }
}

/// What a binding points at.
#[derive(Debug)]
pub enum Target<'a> {
    /// A dat attached to the state, by name (positions and `gid` included).
    Dat(String),
    Global(&'a mut ScalarArray),
}

/// A kernel label bound to a dat or global with an access mode.
#[derive(Debug)]
pub struct AccessBinding<'a> {
    pub label: String,
    pub target: Target<'a>,
    pub mode: AccessMode,
}

impl<'a> AccessBinding<'a> {
    /// Binds the state dat called `label` under the same label.
    pub fn dat(label: impl Into<String>, mode: AccessMode) -> Self {
        let label = label.into();
        Self {
            target: Target::Dat(label.clone()),
            label,
            mode,
        }
    }

    /// Binds the state dat `name` under a different kernel label.
    pub fn dat_as(label: impl Into<String>, name: impl Into<String>, mode: AccessMode) -> Self {
        Self {
            label: label.into(),
            target: Target::Dat(name.into()),
            mode,
        }
    }

    pub fn global(label: impl Into<String>, array: &'a mut ScalarArray, mode: AccessMode) -> Self {
        Self {
            label: label.into(),
            target: Target::Global(array),
            mode,
        }
    }
}

/// Pair-iteration strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Backend {
    AllPairs,
    #[default]
    CellList,
    NeighbourList,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::AllPairs, Backend::CellList, Backend::NeighbourList];

    pub fn name(self) -> &'static str {
        match self {
            Backend::AllPairs => "all-pairs",
            Backend::CellList => "cell-list",
            Backend::NeighbourList => "neighbour-list",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        match norm.as_str() {
            "allpairs" | "brute" => Ok(Backend::AllPairs),
            "celllist" | "cells" => Ok(Backend::CellList),
            "neighbourlist" | "neighborlist" | "verlet" => Ok(Backend::NeighbourList),
            _ => Err(Error::InvalidParameter {
                name: "backend",
                reason: alloc::format!("unknown backend `{s}`"),
            }),
        }
    }
}

/// Shape of a bound argument, as seen by a kernel at link time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    Particle,
    Global,
}

/// Description of one binding handed to [`Kernel::link`]. The slot index is
/// the binding's position in the list passed to the loop.
#[derive(Clone, Copy, Debug)]
pub struct SlotInfo<'a> {
    pub label: &'a str,
    pub kind: SlotKind,
    pub mode: AccessMode,
    pub ncomp: usize,
    pub dtype: Dtype,
}

/// Whether a loop visits particles or ordered pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopKind {
    Particle,
    Pair,
}

/// Executable kernel, ready for one loop.
pub trait Invoke: Sync {
    fn invoke(&self, ctx: &mut Ctx<'_, '_>) -> Result<()>;
}

impl<F> Invoke for F
where
    F: Fn(&mut Ctx<'_, '_>) -> Result<()> + Sync,
{
    fn invoke(&self, ctx: &mut Ctx<'_, '_>) -> Result<()> {
        self(ctx)
    }
}

/// Something a loop can run. Linking happens once per loop execution, after
/// the bindings are resolved.
pub trait Kernel: Sync {
    fn link<'k>(&'k self, slots: &[SlotInfo<'_>], kind: LoopKind) -> Result<Box<dyn Invoke + 'k>>;
}

/// Kernel written in Rust. Arguments are addressed by slot index.
#[derive(Clone, Copy, Debug)]
pub struct Native<F>(pub F);

/// Wraps a closure as a [`Kernel`].
pub fn native<F>(f: F) -> Native<F>
where
    F: Fn(&mut Ctx<'_, '_>) -> Result<()> + Sync,
{
    Native(f)
}

impl<F> Kernel for Native<F>
where
    F: Fn(&mut Ctx<'_, '_>) -> Result<()> + Sync,
{
    fn link<'k>(&'k self, _slots: &[SlotInfo<'_>], _kind: LoopKind) -> Result<Box<dyn Invoke + 'k>> {
        Ok(Box::new(&self.0))
    }
}

/// Loop executor. `workers` contiguous blocks of particles are processed
/// independently; with the `std` feature each block gets its own thread.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Engine {
    workers: usize,
}

impl Default for Engine {
    fn default() -> Self {
        Self::serial()
    }
}

impl Engine {
    pub fn serial() -> Self {
        Self { workers: 1 }
    }

    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: workers.max(1),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}
