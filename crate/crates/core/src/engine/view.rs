//! Capability views handed to kernels.

use alloc::string::ToString;

use super::AccessMode;
use crate::data::Values;
use crate::error::{AccessAction, Error, Result};

#[derive(Clone, Copy)]
pub(crate) enum Arr<'d> {
    F(&'d [f64]),
    I(&'d [i64]),
}

impl<'d> Arr<'d> {
    pub(crate) fn of(v: &'d Values) -> Self {
        match v {
            Values::Float(v) => Arr::F(v),
            Values::Int(v) => Arr::I(v),
        }
    }

    #[inline]
    fn get(&self, k: usize) -> f64 {
        match self {
            Arr::F(v) => v[k],
            Arr::I(v) => v[k] as f64,
        }
    }
}

pub(crate) enum ArrMut<'d> {
    F(&'d mut [f64]),
    I(&'d mut [i64]),
}

impl ArrMut<'_> {
    #[inline]
    fn get(&self, k: usize) -> f64 {
        match self {
            ArrMut::F(v) => v[k],
            ArrMut::I(v) => v[k] as f64,
        }
    }

    #[inline]
    fn set(&mut self, k: usize, x: f64) {
        match self {
            ArrMut::F(v) => v[k] = x,
            ArrMut::I(v) => v[k] = x as i64,
        }
    }

    #[inline]
    fn add(&mut self, k: usize, x: f64) {
        match self {
            ArrMut::F(v) => v[k] += x,
            ArrMut::I(v) => v[k] = (v[k] as f64 + x) as i64,
        }
    }
}

/// The i-side storage of a particle slot.
pub(crate) enum Own<'d> {
    /// Whole array, read-only.
    Shared(Arr<'d>),
    /// This worker's block of rows.
    Block { rows: ArrMut<'d>, first_row: usize },
}

pub(crate) enum GlobalData<'d> {
    Shared(Arr<'d>),
    /// Private per-worker accumulator, merged after the loop.
    Partial(Values),
    Direct(ArrMut<'d>),
}

pub(crate) enum ViewKind<'d> {
    Particle {
        own: Own<'d>,
        /// Whole-array data for j-side reads (live for READ, snapshot for RW).
        j_side: Option<Arr<'d>>,
        npart: usize,
        is_positions: bool,
    },
    Global(GlobalData<'d>),
}

pub(crate) struct View<'d> {
    pub(crate) label: &'d str,
    pub(crate) mode: AccessMode,
    pub(crate) ncomp: usize,
    pub(crate) kind: ViewKind<'d>,
}

/// Per-invocation kernel context: the current `i` (and `j` in pair loops)
/// plus mode-checked access to every bound argument by slot index.
pub struct Ctx<'c, 'd> {
    pub(crate) i: usize,
    pub(crate) j: Option<usize>,
    pub(crate) shift: [f64; 3],
    pub(crate) views: &'c mut [View<'d>],
}

/// Access surface shared by [`Ctx`] and anything else a kernel can be
/// evaluated against.
pub trait Env {
    fn read_i(&mut self, slot: usize, r: usize) -> Result<f64>;
    fn read_j(&mut self, slot: usize, r: usize) -> Result<f64>;
    fn write_i(&mut self, slot: usize, r: usize, x: f64) -> Result<()>;
    fn inc_i(&mut self, slot: usize, r: usize, x: f64) -> Result<()>;
    fn read_global(&mut self, slot: usize, r: usize) -> Result<f64>;
    fn write_global(&mut self, slot: usize, r: usize, x: f64) -> Result<()>;
    fn inc_global(&mut self, slot: usize, r: usize, x: f64) -> Result<()>;
}

fn violation(v: &View<'_>, action: AccessAction) -> Error {
    Error::AccessViolation {
        label: v.label.to_string(),
        mode: v.mode,
        action,
    }
}

fn oob(v: &View<'_>, particle: usize, r: usize, npart: usize) -> Error {
    Error::OutOfBounds {
        label: v.label.to_string(),
        particle,
        component: r,
        npart,
        ncomp: v.ncomp,
    }
}

fn wrong_kind(v: &View<'_>) -> Error {
    Error::SlotKind(v.label.to_string())
}

impl<'d> Ctx<'_, 'd> {
    /// Index of the first particle.
    #[inline]
    pub fn i(&self) -> usize {
        self.i
    }

    /// Index of the second particle; `None` in a particle loop.
    #[inline]
    pub fn j(&self) -> Option<usize> {
        self.j
    }

    /// Number of bound slots.
    pub fn slots(&self) -> usize {
        self.views.len()
    }

    /// Slot index of `label`, if bound.
    pub fn slot(&self, label: &str) -> Option<usize> {
        self.views.iter().position(|v| v.label == label)
    }

    #[inline]
    fn view(&self, slot: usize) -> Result<&View<'d>> {
        self.views.get(slot).ok_or(Error::NoSuchSlot(slot))
    }

    #[inline]
    fn view_mut(&mut self, slot: usize) -> Result<&mut View<'d>> {
        self.views.get_mut(slot).ok_or(Error::NoSuchSlot(slot))
    }

    #[inline]
    pub fn read_i(&self, slot: usize, r: usize) -> Result<f64> {
        let i = self.i;
        let v = self.view(slot)?;
        let ViewKind::Particle { own, npart, .. } = &v.kind else {
            return Err(wrong_kind(v));
        };
        if !v.mode.can_read() {
            return Err(violation(v, AccessAction::ReadI));
        }
        if r >= v.ncomp {
            return Err(oob(v, i, r, *npart));
        }
        Ok(match own {
            Own::Shared(a) => a.get(i * v.ncomp + r),
            Own::Block { rows, first_row } => rows.get((i - first_row) * v.ncomp + r),
        })
    }

    /// Reads particle `j`. Position slots return the periodic image nearest
    /// to particle `i`.
    #[inline]
    pub fn read_j(&self, slot: usize, r: usize) -> Result<f64> {
        let v = self.view(slot)?;
        let ViewKind::Particle {
            j_side,
            npart,
            is_positions,
            ..
        } = &v.kind
        else {
            return Err(wrong_kind(v));
        };
        let Some(j) = self.j else {
            return Err(Error::NotPairLoop(v.label.to_string()));
        };
        if !v.mode.can_read() {
            return Err(violation(v, AccessAction::ReadJ));
        }
        if r >= v.ncomp {
            return Err(oob(v, j, r, *npart));
        }
        let a = j_side.ok_or_else(|| violation(v, AccessAction::ReadJ))?;
        let x = a.get(j * v.ncomp + r);
        Ok(if *is_positions { x + self.shift[r] } else { x })
    }

    #[inline]
    pub fn write_i(&mut self, slot: usize, r: usize, x: f64) -> Result<()> {
        let i = self.i;
        let v = self.view_mut(slot)?;
        if !v.mode.can_write() {
            return Err(match v.kind {
                ViewKind::Particle { .. } => violation(v, AccessAction::Write),
                ViewKind::Global(_) => wrong_kind(v),
            });
        }
        let ncomp = v.ncomp;
        match &mut v.kind {
            ViewKind::Particle {
                own: Own::Block { rows, first_row },
                ..
            } if r < ncomp => {
                rows.set((i - *first_row) * ncomp + r, x);
                Ok(())
            }
            ViewKind::Particle { npart, .. } => {
                let n = *npart;
                Err(oob(v, i, r, n))
            }
            ViewKind::Global(_) => Err(wrong_kind(v)),
        }
    }

    #[inline]
    pub fn inc_i(&mut self, slot: usize, r: usize, x: f64) -> Result<()> {
        let i = self.i;
        let v = self.view_mut(slot)?;
        if !matches!(v.kind, ViewKind::Particle { .. }) {
            return Err(wrong_kind(v));
        }
        if !v.mode.can_increment() {
            return Err(violation(v, AccessAction::Increment));
        }
        let ncomp = v.ncomp;
        match &mut v.kind {
            ViewKind::Particle {
                own: Own::Block { rows, first_row },
                ..
            } if r < ncomp => {
                rows.add((i - *first_row) * ncomp + r, x);
                Ok(())
            }
            ViewKind::Particle { npart, .. } => {
                let n = *npart;
                Err(oob(v, i, r, n))
            }
            ViewKind::Global(_) => Err(wrong_kind(v)),
        }
    }

    #[inline]
    pub fn read_global(&self, slot: usize, r: usize) -> Result<f64> {
        let v = self.view(slot)?;
        let ViewKind::Global(g) = &v.kind else {
            return Err(wrong_kind(v));
        };
        if !v.mode.can_read() {
            return Err(violation(v, AccessAction::ReadGlobal));
        }
        if r >= v.ncomp {
            return Err(oob(v, 0, r, 1));
        }
        Ok(match g {
            GlobalData::Shared(a) => a.get(r),
            GlobalData::Direct(a) => a.get(r),
            GlobalData::Partial(_) => return Err(violation(v, AccessAction::ReadGlobal)),
        })
    }

    #[inline]
    pub fn write_global(&mut self, slot: usize, r: usize, x: f64) -> Result<()> {
        let v = self.view_mut(slot)?;
        if !matches!(v.kind, ViewKind::Global(_)) {
            return Err(wrong_kind(v));
        }
        if !v.mode.can_write() {
            return Err(violation(v, AccessAction::WriteGlobal));
        }
        if r >= v.ncomp {
            return Err(oob(v, 0, r, 1));
        }
        match &mut v.kind {
            ViewKind::Global(GlobalData::Direct(a)) => {
                a.set(r, x);
                Ok(())
            }
            _ => Err(violation(v, AccessAction::WriteGlobal)),
        }
    }

    #[inline]
    pub fn inc_global(&mut self, slot: usize, r: usize, x: f64) -> Result<()> {
        let v = self.view_mut(slot)?;
        if !matches!(v.kind, ViewKind::Global(_)) {
            return Err(wrong_kind(v));
        }
        if !v.mode.can_increment() {
            return Err(violation(v, AccessAction::IncrementGlobal));
        }
        if r >= v.ncomp {
            return Err(oob(v, 0, r, 1));
        }
        match &mut v.kind {
            ViewKind::Global(GlobalData::Direct(a)) => a.add(r, x),
            ViewKind::Global(GlobalData::Partial(p)) => match p {
                Values::Float(p) => p[r] += x,
                Values::Int(p) => p[r] = (p[r] as f64 + x) as i64,
            },
            _ => return Err(violation(v, AccessAction::IncrementGlobal)),
        }
        Ok(())
    }
}

impl Env for Ctx<'_, '_> {
    #[inline]
    fn read_i(&mut self, slot: usize, r: usize) -> Result<f64> {
        Ctx::read_i(self, slot, r)
    }
    #[inline]
    fn read_j(&mut self, slot: usize, r: usize) -> Result<f64> {
        Ctx::read_j(self, slot, r)
    }
    #[inline]
    fn write_i(&mut self, slot: usize, r: usize, x: f64) -> Result<()> {
        Ctx::write_i(self, slot, r, x)
    }
    #[inline]
    fn inc_i(&mut self, slot: usize, r: usize, x: f64) -> Result<()> {
        Ctx::inc_i(self, slot, r, x)
    }
    #[inline]
    fn read_global(&mut self, slot: usize, r: usize) -> Result<f64> {
        Ctx::read_global(self, slot, r)
    }
    #[inline]
    fn write_global(&mut self, slot: usize, r: usize, x: f64) -> Result<()> {
        Ctx::write_global(self, slot, r, x)
    }
    #[inline]
    fn inc_global(&mut self, slot: usize, r: usize, x: f64) -> Result<()> {
        Ctx::inc_global(self, slot, r, x)
    }
}
