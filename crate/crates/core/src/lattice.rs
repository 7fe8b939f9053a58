//! Perfect crystal lattices in periodic orthorhombic boxes.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::data::{Domain, State};
use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Structure {
    Sc,
    Fcc,
    Bcc,
    Hcp,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

impl Structure {
    pub const ALL: [Structure; 4] = [Structure::Sc, Structure::Fcc, Structure::Bcc, Structure::Hcp];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Sc => "sc",
            Structure::Fcc => "fcc",
            Structure::Bcc => "bcc",
            Structure::Hcp => "hcp",
        }
    }

    /// Fractional coordinates of the atoms in one unit cell.
    fn basis(self) -> &'static [[f64; 3]] {
        match self {
            Structure::Sc => &[[0.0, 0.0, 0.0]],
            Structure::Fcc => &[[0.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]],
            Structure::Bcc => &[[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]],
            // Orthorhombic cell (a, sqrt(3) a, c) holding two close-packed layers.
            Structure::Hcp => &[
                [0.0, 0.0, 0.0],
                [0.5, 0.5, 0.0],
                [0.5, 1.0 / 6.0, 0.5],
                [0.0, 2.0 / 3.0, 0.5],
            ],
        }
    }

    pub fn atoms_per_cell(self) -> usize {
        self.basis().len()
    }

    /// Unit-cell edge lengths for lattice constant `a`. For hcp `a` is the
    /// in-plane spacing and the axial ratio is ideal.
    pub fn cell_shape(self, a: f64) -> [f64; 3] {
        match self {
            Structure::Hcp => [a, SQRT3 * a, math::sqrt(8.0 / 3.0) * a],
            _ => [a; 3],
        }
    }

    /// Distance between nearest neighbours for lattice constant `a`.
    pub fn nearest_neighbour_distance(self, a: f64) -> f64 {
        match self {
            Structure::Sc | Structure::Hcp => a,
            Structure::Fcc => a / math::sqrt(2.0),
            Structure::Bcc => a * SQRT3 / 2.0,
        }
    }

    /// Lattice constant whose nearest-neighbour distance is `d`.
    pub fn lattice_constant_for(self, d: f64) -> f64 {
        d / self.nearest_neighbour_distance(1.0)
    }

    /// Neighbour cutoff midway between the shells used for structure
    /// analysis: first and second shell for sc, fcc and hcp (6, 12, 12
    /// neighbours), second and third shell for bcc (14 neighbours).
    pub fn analysis_cutoff(self, a: f64) -> f64 {
        let d = self.nearest_neighbour_distance(a);
        match self {
            Structure::Bcc => 0.5 * (1.0 + math::sqrt(2.0)) * a,
            _ => 0.5 * (1.0 + math::sqrt(2.0)) * d,
        }
    }
}

impl core::fmt::Display for Structure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sc" | "cubic" | "simple-cubic" => Ok(Structure::Sc),
            "fcc" => Ok(Structure::Fcc),
            "bcc" => Ok(Structure::Bcc),
            "hcp" => Ok(Structure::Hcp),
            other => Err(Error::InvalidParameter {
                name: "lattice",
                reason: alloc::format!("unknown lattice `{other}` (expected sc, fcc, bcc or hcp)"),
            }),
        }
    }
}

/// Lattice sites and the periodic box that tiles them.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub structure: Structure,
    pub lattice_constant: f64,
    pub points: Vec<[f64; 3]>,
    pub domain: Domain,
}

impl Lattice {
    /// `cells` unit cells per axis with lattice constant `a`. Sites are
    /// shifted off the box faces by a quarter of the nearest-neighbour
    /// distance.
    pub fn new(structure: Structure, cells: [usize; 3], a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lattice constant",
                reason: a.to_string(),
            });
        }
        if cells.contains(&0) {
            return Err(Error::InvalidParameter {
                name: "cells",
                reason: "need at least one cell per axis".into(),
            });
        }
        let shape = structure.cell_shape(a);
        let extents = [0, 1, 2].map(|d| shape[d] * cells[d] as f64);
        let domain = Domain::new(extents)?;
        let offset = 0.25 * structure.nearest_neighbour_distance(a);
        let mut points = Vec::with_capacity(cells.iter().product::<usize>() * structure.atoms_per_cell());
        for cx in 0..cells[0] {
            for cy in 0..cells[1] {
                for cz in 0..cells[2] {
                    let c = [cx as f64, cy as f64, cz as f64];
                    for b in structure.basis() {
                        points.push([0, 1, 2].map(|d| (c[d] + b[d]) * shape[d] + offset));
                    }
                }
            }
        }
        Ok(Self {
            structure,
            lattice_constant: a,
            points,
            domain,
        })
    }

    /// Cubic arrangement of `n` cells per side, with nearest-neighbour
    /// distance `d`.
    pub fn with_spacing(structure: Structure, n: usize, d: f64) -> Result<Self> {
        Self::new(structure, [n; 3], structure.lattice_constant_for(d))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Structure-analysis cutoff for this lattice.
    pub fn cutoff(&self) -> f64 {
        self.structure.analysis_cutoff(self.lattice_constant)
    }

    pub fn into_state(self) -> Result<State> {
        State::with_positions(self.domain, &self.points)
    }
}
