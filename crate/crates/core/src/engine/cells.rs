use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Domain, State};
use crate::error::{Error, Result};
use crate::math;

/// Uniform binning of particles into `n_x * n_y * n_z` cells of width at
/// least the requested width. Membership is stored contiguously per cell, in
/// increasing particle index.
#[derive(Clone, Debug, PartialEq)]
pub struct CellList {
    counts: [usize; 3],
    widths: [f64; 3],
    extents: [f64; 3],
    start: Vec<usize>,
    members: Vec<usize>,
    cell_of: Vec<usize>,
}

impl CellList {
    /// Bins the state's positions. A single cell per axis is allowed here;
    /// pair loops check for the stencil requirement separately.
    pub fn from_state(state: &State, width: f64) -> Result<Self> {
        let pos = state.positions()?;
        Self::build(state.domain(), pos.points(), width)
    }

    /// Bins `positions` (row-major xyz), which must already lie in the box.
    pub fn build(domain: &Domain, positions: &[f64], width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter {
                name: "cell width",
                reason: alloc::format!("{width} is not a positive length"),
            });
        }
        let extents = domain.extents();
        let mut counts = [1usize; 3];
        let mut widths = [0.0; 3];
        for d in 0..3 {
            counts[d] = (math::floor(extents[d] / width) as usize).max(1);
            widths[d] = extents[d] / counts[d] as f64;
        }
        let ncells = counts.iter().product::<usize>();
        let npart = positions.len() / 3;
        let mut cell_of = Vec::with_capacity(npart);
        for (i, p) in positions.chunks_exact(3).enumerate() {
            let mut c = [0usize; 3];
            for d in 0..3 {
                let x = p[d];
                if !(0.0..extents[d]).contains(&x) {
                    return Err(if x.is_finite() {
                        Error::UnwrappedPosition { particle: i }
                    } else {
                        Error::NonFinitePosition { particle: i }
                    });
                }
                c[d] = ((x / widths[d]) as usize).min(counts[d] - 1);
            }
            cell_of.push(c[0] + counts[0] * (c[1] + counts[1] * c[2]));
        }
        let mut start = vec![0usize; ncells + 1];
        for &c in &cell_of {
            start[c + 1] += 1;
        }
        for c in 0..ncells {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut members = vec![0usize; npart];
        for (i, &c) in cell_of.iter().enumerate() {
            members[fill[c]] = i;
            fill[c] += 1;
        }
        Ok(Self {
            counts,
            widths,
            extents,
            start,
            members,
            cell_of,
        })
    }

    pub fn cell_counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn cell_widths(&self) -> [f64; 3] {
        self.widths
    }

    pub fn ncells(&self) -> usize {
        self.start.len() - 1
    }

    pub fn members(&self, cell: usize) -> &[usize] {
        &self.members[self.start[cell]..self.start[cell + 1]]
    }

    pub fn cell_of(&self, i: usize) -> usize {
        self.cell_of[i]
    }

    /// Integer coordinates of a linear cell index.
    pub fn coords(&self, cell: usize) -> [usize; 3] {
        let [nx, ny, _] = self.counts;
        [cell % nx, (cell / nx) % ny, cell / (nx * ny)]
    }

    /// Errors unless every axis has at least three cells, so that the 27
    /// stencil cells around any cell are distinct.
    pub(crate) fn require_stencil(&self) -> Result<()> {
        for d in 0..3 {
            if self.counts[d] < 3 {
                return Err(Error::CellDecomposition {
                    width: self.widths[d],
                    axis: d,
                    cells: self.counts[d],
                });
            }
        }
        Ok(())
    }

    /// Calls `f(j, shift)` for every particle `j != i` in the 27 cells around
    /// particle `i`'s cell. `shift` moves `j` to the image adjacent to `i`.
    #[inline]
    pub(crate) fn for_each_candidate<F>(&self, i: usize, mut f: F) -> Result<()>
    where
        F: FnMut(usize, [f64; 3]) -> Result<()>,
    {
        let c = self.coords(self.cell_of[i]);
        let [nx, ny, nz] = self.counts;
        let wrap = |c: usize, dc: isize, n: usize, len: f64| -> (usize, f64) {
            let k = c as isize + dc;
            if k < 0 {
                ((k + n as isize) as usize, -len)
            } else if k as usize >= n {
                (k as usize - n, len)
            } else {
                (k as usize, 0.0)
            }
        };
        for dz in -1isize..=1 {
            let (z, sz) = wrap(c[2], dz, nz, self.extents[2]);
            for dy in -1isize..=1 {
                let (y, sy) = wrap(c[1], dy, ny, self.extents[1]);
                for dx in -1isize..=1 {
                    let (x, sx) = wrap(c[0], dx, nx, self.extents[0]);
                    let cell = x + nx * (y + ny * z);
                    for &j in self.members(cell) {
                        if j != i {
                            f(j, [sx, sy, sz])?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Domain;

    fn cubic(l: f64) -> Domain {
        Domain::cubic(l).unwrap()
    }

    #[test]
    fn exact_division() {
        let cl = CellList::build(&cubic(10.0), &[1.0, 2.0, 3.0], 2.5).unwrap();
        assert_eq!(cl.cell_counts(), [4, 4, 4]);
        assert_eq!(cl.cell_widths(), [2.5; 3]);
    }

    #[test]
    fn floor_rule_keeps_width_at_least_requested() {
        let cl = CellList::build(&cubic(10.0), &[], 3.0).unwrap();
        assert_eq!(cl.cell_counts(), [3, 3, 3]);
        assert!((cl.cell_widths()[0] - 10.0 / 3.0).abs() < 1e-15);
        assert!(cl.cell_widths()[0] >= 3.0);
    }

    #[test]
    fn oversized_width_falls_back_to_one_cell_but_not_for_stencils() {
        let cl = CellList::build(&cubic(10.0), &[5.0, 5.0, 5.0], 12.0).unwrap();
        assert_eq!(cl.cell_counts(), [1, 1, 1]);
        assert!(matches!(cl.require_stencil(), Err(Error::CellDecomposition { .. })));
    }

    #[test]
    fn unwrapped_positions_are_rejected() {
        let err = CellList::build(&cubic(10.0), &[1.0, 1.0, 1.0, 10.0, 0.0, 0.0], 2.5).unwrap_err();
        assert_eq!(err, Error::UnwrappedPosition { particle: 1 });
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_and_bounds(
                pts in proptest::collection::vec((0.0f64..10.0, 0.0f64..7.0, 0.0f64..13.0), 0..80),
                width in 0.5f64..4.0,
            ) {
                let flat: Vec<f64> = pts.iter().flat_map(|&(x, y, z)| [x, y, z]).collect();
                let dom = Domain::new([10.0, 7.0, 13.0]).unwrap();
                let cl = CellList::build(&dom, &flat, width).unwrap();
                let total: usize = (0..cl.ncells()).map(|c| cl.members(c).len()).sum();
                prop_assert_eq!(total, pts.len());
                let mut seen = vec![0u32; pts.len()];
                for c in 0..cl.ncells() {
                    let [cx, cy, cz] = cl.coords(c);
                    let lo = [cx, cy, cz];
                    for &i in cl.members(c) {
                        seen[i] += 1;
                        for d in 0..3 {
                            let x = flat[3 * i + d];
                            let w = cl.cell_widths()[d];
                            prop_assert!(x >= lo[d] as f64 * w - 1e-12);
                            prop_assert!(x <= (lo[d] + 1) as f64 * w + 1e-12);
                        }
                    }
                }
                prop_assert!(seen.iter().all(|&s| s == 1));
                for d in 0..3 {
                    prop_assert!(cl.cell_widths()[d] >= width || cl.cell_counts()[d] == 1);
                }
            }
        }
    }
}
