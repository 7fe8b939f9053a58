//! Loop execution: binding resolution, worker partitioning, pair search and
//! deterministic reduction of global increments.

use alloc::borrow::Cow;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::mem;

use super::cells::CellList;
use super::neighbours::NeighbourStructure;
use super::view::{Arr, ArrMut, Ctx, GlobalData, Own, View, ViewKind};
use super::{AccessBinding, AccessMode, Backend, Engine, Invoke, Kernel, LoopKind, SlotInfo, SlotKind, Target};
use crate::data::{Domain, ParticleDat, PositionDat, State, Values, GLOBAL_IDS};
use crate::error::{Error, Result};

/// Counters reported by a loop execution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoopStats {
    /// Kernel invocations (particles, or ordered pairs within the cutoff).
    pub kernel_calls: u64,
    /// Worker blocks the loop was split into.
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Source {
    Positions,
    Ids,
    Prop(String),
}

fn source_of(state: &State, name: &str) -> Result<Source> {
    if state.positions.as_ref().is_some_and(|p| p.name() == name) {
        Ok(Source::Positions)
    } else if name == GLOBAL_IDS {
        Ok(Source::Ids)
    } else if state.properties.contains_key(name) {
        Ok(Source::Prop(name.to_string()))
    } else {
        Err(Error::UnknownProperty(name.to_string()))
    }
}

fn dat_ref<'s>(state: &'s State, src: &Source) -> &'s ParticleDat {
    match src {
        Source::Positions => state.positions.as_ref().expect("resolved positions"),
        Source::Ids => &state.global_ids,
        Source::Prop(name) => &state.properties[name.as_str()],
    }
}

fn take(state: &mut State, src: &Source) -> ParticleDat {
    match src {
        Source::Positions => state.positions.take().expect("resolved positions").into_inner(),
        Source::Ids => {
            let empty = ParticleDat::from_i64(GLOBAL_IDS, 1, Vec::new()).expect("empty ids");
            mem::replace(&mut state.global_ids, empty)
        }
        Source::Prop(name) => state.properties.remove(name.as_str()).expect("resolved property"),
    }
}

fn put_back(state: &mut State, src: &Source, dat: ParticleDat) {
    match src {
        Source::Positions => state.positions = Some(PositionDat::from_dat(dat)),
        Source::Ids => state.global_ids = dat,
        Source::Prop(name) => {
            state.properties.insert(name.clone(), dat);
        }
    }
}

/// Pair candidate generator for one loop.
enum Search<'s> {
    All,
    Cells(Cow<'s, CellList>),
    List(Cow<'s, NeighbourStructure>),
}

struct PairSpec<'s> {
    pos: &'s [f64],
    domain: Domain,
    cut2: f64,
    search: Search<'s>,
}

impl PairSpec<'_> {
    #[inline]
    fn for_each<F>(&self, i: usize, mut f: F) -> Result<()>
    where
        F: FnMut(usize, [f64; 3]) -> Result<()>,
    {
        let pos = self.pos;
        let ri = [pos[3 * i], pos[3 * i + 1], pos[3 * i + 2]];
        let mut visit = |j: usize, s: [f64; 3]| -> Result<()> {
            let dx = ri[0] - (pos[3 * j] + s[0]);
            let dy = ri[1] - (pos[3 * j + 1] + s[1]);
            let dz = ri[2] - (pos[3 * j + 2] + s[2]);
            if dx * dx + dy * dy + dz * dz <= self.cut2 {
                f(j, s)?;
            }
            Ok(())
        };
        let min_image = |j: usize| -> [f64; 3] {
            let d = &self.domain;
            [
                d.image_shift(0, ri[0], pos[3 * j]),
                d.image_shift(1, ri[1], pos[3 * j + 1]),
                d.image_shift(2, ri[2], pos[3 * j + 2]),
            ]
        };
        match &self.search {
            Search::All => {
                for j in 0..pos.len() / 3 {
                    if j != i {
                        visit(j, min_image(j))?;
                    }
                }
                Ok(())
            }
            Search::Cells(cl) => cl.for_each_candidate(i, visit),
            Search::List(ns) => {
                for &j in ns.neighbours(i) {
                    visit(j, min_image(j))?;
                }
                Ok(())
            }
        }
    }
}

fn check_cutoff(r_c: f64) -> Result<()> {
    if r_c.is_finite() && r_c > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "r_c",
            reason: alloc::format!("{r_c} is not a positive length"),
        })
    }
}

impl Engine {
    /// Runs `kernel` once for every particle.
    pub fn particle_loop<K>(
        &self,
        state: &mut State,
        kernel: &K,
        bindings: &mut [AccessBinding<'_>],
    ) -> Result<LoopStats>
    where
        K: Kernel + ?Sized,
    {
        self.execute(state, kernel, bindings, None)
    }

    /// Runs `kernel` for every ordered pair `(i, j)`, `i != j`, whose
    /// minimum-image distance is at most `r_c`.
    ///
    /// Cell-based backends need at least three cells of width `r_c` per
    /// axis. The neighbour-list backend uses the state's list when it was
    /// built for a cutoff of at least `r_c`, and a one-off list otherwise.
    pub fn pair_loop<K>(
        &self,
        state: &mut State,
        kernel: &K,
        bindings: &mut [AccessBinding<'_>],
        r_c: f64,
        backend: Backend,
    ) -> Result<LoopStats>
    where
        K: Kernel + ?Sized,
    {
        check_cutoff(r_c)?;
        self.execute(state, kernel, bindings, Some((r_c, backend)))
    }

    fn execute<K>(
        &self,
        state: &mut State,
        kernel: &K,
        bindings: &mut [AccessBinding<'_>],
        pair: Option<(f64, Backend)>,
    ) -> Result<LoopStats>
    where
        K: Kernel + ?Sized,
    {
        let mut sources: Vec<Option<Source>> = Vec::with_capacity(bindings.len());
        for (k, b) in bindings.iter().enumerate() {
            if bindings[..k].iter().any(|o| o.label == b.label) {
                return Err(Error::DuplicateLabel(b.label.clone()));
            }
            match &b.target {
                Target::Dat(name) => {
                    let src = source_of(state, name)?;
                    if sources.iter().flatten().any(|s| *s == src) {
                        return Err(Error::AliasedBinding(name.clone()));
                    }
                    if pair.is_some() && src == Source::Positions && b.mode != AccessMode::Read {
                        return Err(Error::PositionsWrittenInPairLoop);
                    }
                    sources.push(Some(src));
                }
                Target::Global(_) => sources.push(None),
            }
        }
        if pair.is_some() {
            state.positions()?;
        }

        let mut owned: Vec<Option<ParticleDat>> = sources
            .iter()
            .zip(bindings.iter())
            .map(|(src, b)| match src {
                Some(src) if !b.mode.is_read_only() => Some(take(state, src)),
                _ => None,
            })
            .collect();

        let result = run(self, state, kernel, bindings, &sources, &mut owned, pair);

        for ((src, dat), b) in sources.iter().zip(owned).zip(bindings.iter()) {
            if let Some(src) = src {
                if let Some(dat) = dat {
                    put_back(state, src, dat);
                }
                if let Target::Dat(name) = &b.target {
                    state.dat_mut(name).expect("restored").mark_clean();
                }
            }
        }
        result
    }
}

fn run<K>(
    engine: &Engine,
    state: &State,
    kernel: &K,
    bindings: &mut [AccessBinding<'_>],
    sources: &[Option<Source>],
    owned: &mut [Option<ParticleDat>],
    pair: Option<(f64, Backend)>,
) -> Result<LoopStats>
where
    K: Kernel + ?Sized,
{
    let npart = state.npart();
    let kind = if pair.is_some() {
        LoopKind::Pair
    } else {
        LoopKind::Particle
    };

    let spec = match pair {
        None => None,
        Some((r_c, backend)) => {
            let pos = state.positions()?.points();
            let search = match backend {
                Backend::AllPairs => Search::All,
                Backend::CellList => {
                    let cl = CellList::build(state.domain(), pos, r_c)?;
                    cl.require_stencil()?;
                    Search::Cells(Cow::Owned(cl))
                }
                Backend::NeighbourList => match state.neighbours() {
                    Some(ns) if ns.serves(state, r_c) => Search::List(Cow::Borrowed(ns)),
                    _ => Search::List(Cow::Owned(NeighbourStructure::build(state, r_c, 0.0)?)),
                },
            };
            Some(PairSpec {
                pos,
                domain: *state.domain(),
                cut2: r_c * r_c,
                search,
            })
        }
    };

    // Zero INC_ZERO targets before anything reads them.
    for ((b, dat), _) in bindings.iter_mut().zip(owned.iter_mut()).zip(sources) {
        if b.mode == AccessMode::IncZero {
            match (&mut b.target, dat) {
                (Target::Global(g), _) => g.values.zero(),
                (Target::Dat(_), Some(d)) => d.values.zero(),
                _ => {}
            }
        }
    }

    let infos: Vec<SlotInfo<'_>> = bindings
        .iter()
        .zip(owned.iter())
        .zip(sources)
        .map(|((b, dat), src)| match (&b.target, src) {
            (Target::Global(g), _) => SlotInfo {
                label: &b.label,
                kind: SlotKind::Global,
                mode: b.mode,
                ncomp: g.ncomp(),
                dtype: g.dtype(),
            },
            (Target::Dat(_), Some(src)) => {
                let d = dat.as_ref().unwrap_or_else(|| dat_ref(state, src));
                SlotInfo {
                    label: &b.label,
                    kind: SlotKind::Particle,
                    mode: b.mode,
                    ncomp: d.ncomp(),
                    dtype: d.dtype(),
                }
            }
            (Target::Dat(_), None) => unreachable!("dat bindings always resolve"),
        })
        .collect();
    let linked = kernel.link(&infos, kind)?;
    drop(infos);

    let single = bindings
        .iter()
        .any(|b| matches!(b.target, Target::Global(_)) && (b.mode.can_write()));
    let nworkers = if single { 1 } else { engine.workers().min(npart).max(1) };
    let bounds: Vec<usize> = (0..=nworkers).map(|w| w * npart / nworkers).collect();

    // j-side reads of RW dats see the values from before the loop.
    let snapshots: Vec<Option<Values>> = bindings
        .iter()
        .zip(owned.iter())
        .map(|(b, dat)| match dat {
            Some(d) if pair.is_some() && b.mode == AccessMode::ReadWrite => Some(d.values.clone()),
            _ => None,
        })
        .collect();

    let nslots = bindings.len();
    let mut per_worker: Vec<Vec<View<'_>>> = (0..nworkers).map(|_| Vec::with_capacity(bindings.len())).collect();
    for (((b, dat), src), snap) in bindings.iter_mut().zip(owned.iter_mut()).zip(sources).zip(&snapshots) {
        let AccessBinding { label, target, mode } = b;
        let label: &str = label;
        let mode = *mode;
        match (target, dat, src) {
            (Target::Global(g), _, _) => {
                let ncomp = g.ncomp();
                if mode.is_read_only() {
                    let a = Arr::of(&g.values);
                    for views in &mut per_worker {
                        views.push(View {
                            label,
                            mode,
                            ncomp,
                            kind: ViewKind::Global(GlobalData::Shared(a)),
                        });
                    }
                } else if mode.can_write() {
                    let a = match &mut g.values {
                        Values::Float(v) => ArrMut::F(v),
                        Values::Int(v) => ArrMut::I(v),
                    };
                    per_worker[0].push(View {
                        label,
                        mode,
                        ncomp,
                        kind: ViewKind::Global(GlobalData::Direct(a)),
                    });
                } else {
                    for views in &mut per_worker {
                        let mut p = g.values.clone();
                        p.zero();
                        views.push(View {
                            label,
                            mode,
                            ncomp,
                            kind: ViewKind::Global(GlobalData::Partial(p)),
                        });
                    }
                }
            }
            (Target::Dat(_), None, Some(src)) => {
                let d = dat_ref(state, src);
                let a = Arr::of(&d.values);
                for views in &mut per_worker {
                    views.push(View {
                        label,
                        mode,
                        ncomp: d.ncomp(),
                        kind: ViewKind::Particle {
                            own: Own::Shared(a),
                            j_side: Some(a),
                            npart,
                            is_positions: *src == Source::Positions,
                        },
                    });
                }
            }
            (Target::Dat(_), Some(d), Some(src)) => {
                let ncomp = d.ncomp();
                let is_positions = *src == Source::Positions;
                let j_side = snap.as_ref().map(Arr::of);
                let blocks = split_rows(&mut d.values, ncomp, &bounds);
                for ((views, rows), &first_row) in per_worker.iter_mut().zip(blocks).zip(&bounds) {
                    views.push(View {
                        label,
                        mode,
                        ncomp,
                        kind: ViewKind::Particle {
                            own: Own::Block { rows, first_row },
                            j_side,
                            npart,
                            is_positions,
                        },
                    });
                }
            }
            (Target::Dat(_), _, None) => unreachable!("dat bindings always resolve"),
        }
    }

    let outcomes = run_workers(per_worker, &bounds, &*linked, spec.as_ref());

    let mut calls = 0;
    let mut partials: Vec<Vec<View<'_>>> = Vec::with_capacity(nworkers);
    for (res, views) in outcomes {
        calls += res?;
        partials.push(views);
    }
    // Merge per-worker increments in worker order.
    let mut merged: Vec<Option<Values>> = (0..nslots).map(|_| None).collect();
    for views in partials {
        for (slot, v) in views.into_iter().enumerate() {
            if let ViewKind::Global(GlobalData::Partial(p)) = v.kind {
                match &mut merged[slot] {
                    None => merged[slot] = Some(p),
                    Some(acc) => add_values(acc, &p),
                }
            }
        }
    }
    for (b, m) in bindings.iter_mut().zip(merged) {
        if let (Target::Global(g), Some(p)) = (&mut b.target, m) {
            add_values(&mut g.values, &p);
        }
    }
    Ok(LoopStats {
        kernel_calls: calls,
        workers: nworkers,
    })
}

fn add_values(acc: &mut Values, p: &Values) {
    match (acc, p) {
        (Values::Float(a), Values::Float(p)) => a.iter_mut().zip(p).for_each(|(a, p)| *a += p),
        (Values::Int(a), Values::Int(p)) => a.iter_mut().zip(p).for_each(|(a, p)| *a += p),
        _ => unreachable!("partials share the dtype of their target"),
    }
}

fn split_rows<'d>(values: &'d mut Values, ncomp: usize, bounds: &[usize]) -> Vec<ArrMut<'d>> {
    let sizes = bounds.windows(2).map(|w| (w[1] - w[0]) * ncomp);
    match values {
        Values::Float(v) => {
            let mut rest: &mut [f64] = v;
            sizes
                .map(|n| {
                    let (a, b) = mem::take(&mut rest).split_at_mut(n);
                    rest = b;
                    ArrMut::F(a)
                })
                .collect()
        }
        Values::Int(v) => {
            let mut rest: &mut [i64] = v;
            sizes
                .map(|n| {
                    let (a, b) = mem::take(&mut rest).split_at_mut(n);
                    rest = b;
                    ArrMut::I(a)
                })
                .collect()
        }
    }
}

fn run_block(
    views: &mut [View<'_>],
    lo: usize,
    hi: usize,
    kernel: &dyn Invoke,
    spec: Option<&PairSpec<'_>>,
) -> Result<u64> {
    let mut ctx = Ctx {
        i: lo,
        j: None,
        shift: [0.0; 3],
        views,
    };
    let mut calls = 0u64;
    match spec {
        None => {
            for i in lo..hi {
                ctx.i = i;
                kernel.invoke(&mut ctx)?;
                calls += 1;
            }
        }
        Some(spec) => {
            for i in lo..hi {
                ctx.i = i;
                spec.for_each(i, |j, s| {
                    ctx.j = Some(j);
                    ctx.shift = s;
                    calls += 1;
                    kernel.invoke(&mut ctx)
                })?;
            }
        }
    }
    Ok(calls)
}

type Outcome<'d> = (Result<u64>, Vec<View<'d>>);

#[cfg(feature = "std")]
fn run_workers<'d>(
    per_worker: Vec<Vec<View<'d>>>,
    bounds: &[usize],
    kernel: &dyn Invoke,
    spec: Option<&PairSpec<'_>>,
) -> Vec<Outcome<'d>> {
    if per_worker.len() == 1 {
        return run_serial(per_worker, bounds, kernel, spec);
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = per_worker
            .into_iter()
            .enumerate()
            .map(|(w, mut views)| {
                let (lo, hi) = (bounds[w], bounds[w + 1]);
                s.spawn(move || (run_block(&mut views, lo, hi, kernel, spec), views))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    })
}

#[cfg(not(feature = "std"))]
fn run_workers<'d>(
    per_worker: Vec<Vec<View<'d>>>,
    bounds: &[usize],
    kernel: &dyn Invoke,
    spec: Option<&PairSpec<'_>>,
) -> Vec<Outcome<'d>> {
    run_serial(per_worker, bounds, kernel, spec)
}

fn run_serial<'d>(
    per_worker: Vec<Vec<View<'d>>>,
    bounds: &[usize],
    kernel: &dyn Invoke,
    spec: Option<&PairSpec<'_>>,
) -> Vec<Outcome<'d>> {
    per_worker
        .into_iter()
        .enumerate()
        .map(|(w, mut views)| (run_block(&mut views, bounds[w], bounds[w + 1], kernel, spec), views))
        .collect()
}
