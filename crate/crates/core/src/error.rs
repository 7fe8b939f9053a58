use alloc::string::String;

use crate::engine::AccessMode;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// What a kernel tried to do with a bound argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AccessAction {
    ReadI,
    ReadJ,
    ReadGlobal,
    Write,
    Increment,
    WriteGlobal,
    IncrementGlobal,
    WriteJ,
}

impl core::fmt::Display for AccessAction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            AccessAction::ReadI => "read of particle i",
            AccessAction::ReadJ => "read of particle j",
            AccessAction::ReadGlobal => "global read",
            AccessAction::Write => "write to particle i",
            AccessAction::Increment => "increment of particle i",
            AccessAction::WriteGlobal => "global write",
            AccessAction::IncrementGlobal => "global increment",
            AccessAction::WriteJ => "write to particle j",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dat `{name}`: {reason}")]
    InvalidDat { name: String, reason: String },

    #[error("`{label}`: index ({particle}, {component}) out of range for {npart}x{ncomp}")]
    OutOfBounds {
        label: String,
        particle: usize,
        component: usize,
        npart: usize,
        ncomp: usize,
    },

    #[error("`{label}`: component index {index} is not a non-negative integer")]
    ComponentIndex { label: String, index: f64 },

    #[error("`{name}` has {got} rows but the state holds {expected} particles")]
    RowMismatch { name: String, got: usize, expected: usize },

    #[error("a property named `{0}` is already attached")]
    DuplicateName(String),

    #[error("state already has a position dat")]
    DuplicatePositions,

    #[error("no property named `{0}`")]
    UnknownProperty(String),

    #[error("state has no position dat")]
    MissingPositions,

    #[error("particle {particle} has a non-finite position")]
    NonFinitePosition { particle: usize },

    #[error("particle {particle} lies outside the box; wrap positions first")]
    UnwrappedPosition { particle: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("access violation: `{label}` is bound {mode}, which forbids {action}")]
    AccessViolation {
        label: String,
        mode: AccessMode,
        action: AccessAction,
    },

    #[error("kernel uses label `{0}`, which is not bound")]
    UnboundLabel(String),

    #[error("`{0}` is used as the wrong kind of argument (particle dat vs global)")]
    SlotKind(String),

    #[error("kernel addressed slot {0}, which is not bound")]
    NoSuchSlot(usize),

    #[error("`{0}.j` used outside a pair loop")]
    NotPairLoop(String),

    #[error("label `{0}` is bound more than once")]
    DuplicateLabel(String),

    #[error("dat `{0}` appears in more than one binding")]
    AliasedBinding(String),

    #[error("the position dat may only be bound READ in a pair loop")]
    PositionsWrittenInPairLoop,

    #[error(
        "cell width {width} gives {cells} cell(s) along axis {axis}; cell-based pair loops need at least 3 (use the all-pairs backend)"
    )]
    CellDecomposition { width: f64, axis: usize, cells: usize },

    #[error("kernel error: {0}")]
    Kernel(#[from] crate::dsl::KernelError),

    #[error("{what} capacity {capacity} exceeded at particle {particle}")]
    CapacityExceeded {
        what: &'static str,
        particle: usize,
        capacity: usize,
    },

    #[error("particles {i} and {j} coincide; force is not finite")]
    CoincidentParticles { i: usize, j: usize },

    #[error("spherical harmonic needs |m| <= l, got l = {l}, m = {m}")]
    InvalidHarmonic { l: u32, m: i32 },

    #[error("global ids are not a permutation of 0..N (duplicate or out of range: {0})")]
    GlobalIds(i64),
}
