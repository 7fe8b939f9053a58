//! Per-particle and global property storage, the simulation domain and the
//! [`State`] container that ties them together.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};
use core::str::FromStr;

use crate::engine::NeighbourStructure;
use crate::error::{Error, Result};
use crate::math;

/// Element type of a dat.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    Float64,
    Int64,
}

impl FromStr for Dtype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "float64" | "f64" | "double" | "c_double" => Ok(Dtype::Float64),
            "int64" | "i64" | "long" | "c_long" | "int" | "c_int" => Ok(Dtype::Int64),
            other => Err(Error::InvalidDat {
                name: String::new(),
                reason: format!("unknown dtype `{other}`"),
            }),
        }
    }
}

/// A single value of either dtype.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scalar {
    Float(f64),
    Int(i64),
}

impl Scalar {
    pub fn as_f64(self) -> f64 {
        match self {
            Scalar::Float(x) => x,
            Scalar::Int(x) => x as f64,
        }
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Float(x)
    }
}

impl From<i64> for Scalar {
    fn from(x: i64) -> Self {
        Scalar::Int(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Values {
    Float(Vec<f64>),
    Int(Vec<i64>),
}

impl Values {
    fn filled(dtype: Dtype, len: usize, init: Scalar, name: &str) -> Result<Self> {
        Ok(match dtype {
            Dtype::Float64 => Values::Float(vec![init.as_f64(); len]),
            Dtype::Int64 => {
                let v = match init {
                    Scalar::Int(v) => v,
                    Scalar::Float(x) if x.is_finite() && crate::math::trunc(x) == x => x as i64,
                    Scalar::Float(x) => {
                        return Err(Error::InvalidDat {
                            name: name.to_string(),
                            reason: format!("initial value {x} is not an integer"),
                        })
                    }
                };
                Values::Int(vec![v; len])
            }
        })
    }

    pub(crate) fn len(&self) -> usize {
        match self {
            Values::Float(v) => v.len(),
            Values::Int(v) => v.len(),
        }
    }

    pub(crate) fn dtype(&self) -> Dtype {
        match self {
            Values::Float(_) => Dtype::Float64,
            Values::Int(_) => Dtype::Int64,
        }
    }

    fn get(&self, k: usize) -> Scalar {
        match self {
            Values::Float(v) => Scalar::Float(v[k]),
            Values::Int(v) => Scalar::Int(v[k]),
        }
    }

    fn set(&mut self, k: usize, x: Scalar) {
        match self {
            Values::Float(v) => v[k] = x.as_f64(),
            Values::Int(v) => {
                v[k] = match x {
                    Scalar::Int(i) => i,
                    Scalar::Float(f) => f as i64,
                }
            }
        }
    }

    pub(crate) fn zero(&mut self) {
        match self {
            Values::Float(v) => v.iter_mut().for_each(|x| *x = 0.0),
            Values::Int(v) => v.iter_mut().for_each(|x| *x = 0),
        }
    }
}

/// Per-particle property: `npart` rows of `ncomp` components.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleDat {
    name: String,
    npart: usize,
    ncomp: usize,
    pub(crate) values: Values,
    dirty: bool,
}

impl ParticleDat {
    pub fn new(
        name: impl Into<String>,
        npart: usize,
        ncomp: usize,
        dtype: Dtype,
        initial_value: impl Into<Scalar>,
    ) -> Result<Self> {
        let name = name.into();
        if ncomp == 0 {
            return Err(Error::InvalidDat {
                name,
                reason: "ncomp must be at least 1".into(),
            });
        }
        let values = Values::filled(dtype, npart * ncomp, initial_value.into(), &name)?;
        Ok(Self {
            name,
            npart,
            ncomp,
            values,
            dirty: false,
        })
    }

    pub fn zeros(name: impl Into<String>, npart: usize, ncomp: usize, dtype: Dtype) -> Result<Self> {
        Self::new(name, npart, ncomp, dtype, Scalar::Int(0))
    }

    /// Float dat from row-major values; `values.len()` must be a multiple of `ncomp`.
    pub fn from_f64(name: impl Into<String>, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if ncomp == 0 || !values.len().is_multiple_of(ncomp) {
            return Err(Error::InvalidDat {
                name,
                reason: format!("{} values do not form rows of {ncomp}", values.len()),
            });
        }
        Ok(Self {
            npart: values.len() / ncomp,
            ncomp,
            name,
            values: Values::Float(values),
            dirty: false,
        })
    }

    pub fn from_i64(name: impl Into<String>, ncomp: usize, values: Vec<i64>) -> Result<Self> {
        let name = name.into();
        if ncomp == 0 || !values.len().is_multiple_of(ncomp) {
            return Err(Error::InvalidDat {
                name,
                reason: format!("{} values do not form rows of {ncomp}", values.len()),
            });
        }
        Ok(Self {
            npart: values.len() / ncomp,
            ncomp,
            name,
            values: Values::Int(values),
            dirty: false,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn npart(&self) -> usize {
        self.npart
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn dtype(&self) -> Dtype {
        self.values.dtype()
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub(crate) fn mark_clean(&mut self) {
        self.dirty = false;
    }

    fn check(&self, i: usize, r: usize) -> Result<usize> {
        if i >= self.npart || r >= self.ncomp {
            return Err(Error::OutOfBounds {
                label: self.name.clone(),
                particle: i,
                component: r,
                npart: self.npart,
                ncomp: self.ncomp,
            });
        }
        Ok(i * self.ncomp + r)
    }

    pub fn get(&self, i: usize, r: usize) -> Result<Scalar> {
        let k = self.check(i, r)?;
        Ok(self.values.get(k))
    }

    /// Writes one element and marks the dat dirty.
    pub fn set(&mut self, i: usize, r: usize, x: impl Into<Scalar>) -> Result<()> {
        let k = self.check(i, r)?;
        self.values.set(k, x.into());
        self.dirty = true;
        Ok(())
    }

    /// Row-major values of a float dat.
    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.values {
            Values::Float(v) => Some(v),
            Values::Int(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<&[i64]> {
        match &self.values {
            Values::Int(v) => Some(v),
            Values::Float(_) => None,
        }
    }

    /// Mutable float values; marks the dat dirty.
    pub fn as_f64_mut(&mut self) -> Option<&mut [f64]> {
        self.dirty = true;
        match &mut self.values {
            Values::Float(v) => Some(v),
            Values::Int(_) => None,
        }
    }

    pub fn as_i64_mut(&mut self) -> Option<&mut [i64]> {
        self.dirty = true;
        match &mut self.values {
            Values::Int(v) => Some(v),
            Values::Float(_) => None,
        }
    }

    /// One row as `f64`, converting integer values.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        let lo = i * self.ncomp;
        match &self.values {
            Values::Float(v) => v[lo..lo + self.ncomp].to_vec(),
            Values::Int(v) => v[lo..lo + self.ncomp].iter().map(|&x| x as f64).collect(),
        }
    }
}

/// The dat holding particle positions (`ncomp = 3`, float64).
#[derive(Clone, Debug, PartialEq)]
pub struct PositionDat(ParticleDat);

impl PositionDat {
    pub fn new(npart: usize) -> Self {
        Self(ParticleDat::new("r", npart, 3, Dtype::Float64, 0.0).expect("ncomp is 3"))
    }

    pub fn from_points(points: &[[f64; 3]]) -> Self {
        let flat = points.iter().flat_map(|p| p.iter().copied()).collect();
        Self(ParticleDat::from_f64("r", 3, flat).expect("rows of 3"))
    }

    pub fn points(&self) -> &[f64] {
        self.0.as_f64().expect("positions are float64")
    }

    pub fn into_inner(self) -> ParticleDat {
        self.0
    }

    pub(crate) fn from_dat(dat: ParticleDat) -> Self {
        Self(dat)
    }
}

impl Deref for PositionDat {
    type Target = ParticleDat;

    fn deref(&self) -> &ParticleDat {
        &self.0
    }
}

impl DerefMut for PositionDat {
    fn deref_mut(&mut self) -> &mut ParticleDat {
        &mut self.0
    }
}

/// Global property shared by all particles.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarArray {
    name: String,
    pub(crate) values: Values,
}

impl ScalarArray {
    pub fn new(name: impl Into<String>, ncomp: usize, dtype: Dtype, initial_value: impl Into<Scalar>) -> Result<Self> {
        let name = name.into();
        if ncomp == 0 {
            return Err(Error::InvalidDat {
                name,
                reason: "ncomp must be at least 1".into(),
            });
        }
        let values = Values::filled(dtype, ncomp, initial_value.into(), &name)?;
        Ok(Self { name, values })
    }

    pub fn float(name: impl Into<String>, ncomp: usize) -> Self {
        Self::new(name, ncomp, Dtype::Float64, 0.0).expect("valid float array")
    }

    pub fn int(name: impl Into<String>, ncomp: usize) -> Self {
        Self::new(name, ncomp, Dtype::Int64, 0i64).expect("valid int array")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ncomp(&self) -> usize {
        self.values.len()
    }

    pub fn dtype(&self) -> Dtype {
        self.values.dtype()
    }

    pub fn get(&self, r: usize) -> Option<Scalar> {
        (r < self.ncomp()).then(|| self.values.get(r))
    }

    /// Component `r` as `f64`; panics when out of range.
    pub fn value(&self, r: usize) -> f64 {
        self.values.get(r).as_f64()
    }

    pub fn set(&mut self, r: usize, x: impl Into<Scalar>) -> Result<()> {
        if r >= self.ncomp() {
            return Err(Error::OutOfBounds {
                label: self.name.clone(),
                particle: 0,
                component: r,
                npart: 1,
                ncomp: self.ncomp(),
            });
        }
        self.values.set(r, x.into());
        Ok(())
    }
}

/// Named numerical constant substituted into kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct Constant {
    label: String,
    value: Scalar,
}

impl Constant {
    pub fn new(label: impl Into<String>, value: impl Into<Scalar>) -> Self {
        Self {
            label: label.into(),
            value: value.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self) -> Scalar {
        self.value
    }
}

/// Boundary condition. Only periodic boxes are supported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Boundary {
    #[default]
    Periodic,
}

/// Orthorhombic box `[0, Lx) x [0, Ly) x [0, Lz)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    extents: [f64; 3],
    boundary: Boundary,
}

impl Domain {
    pub fn new(extents: [f64; 3]) -> Result<Self> {
        if extents.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidDomain("extents must be finite and strictly positive"));
        }
        Ok(Self {
            extents,
            boundary: Boundary::Periodic,
        })
    }

    pub fn cubic(len: f64) -> Result<Self> {
        Self::new([len; 3])
    }

    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn min_extent(&self) -> f64 {
        self.extents.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Periodic-image offset to add to `b` so that `a - (b + shift)` is the
    /// minimum-image separation along axis `d`.
    #[inline]
    pub fn image_shift(&self, d: usize, a: f64, b: f64) -> f64 {
        let l = self.extents[d];
        l * math::round((a - b) / l)
    }
}

/// Name of the integer global-id dat every state carries.
pub const GLOBAL_IDS: &str = "gid";

/// Particle system: domain, positions, global ids, named properties and the
/// neighbour structure shared by pair loops.
#[derive(Clone, Debug)]
pub struct State {
    npart: usize,
    domain: Domain,
    pub(crate) positions: Option<PositionDat>,
    pub(crate) global_ids: ParticleDat,
    pub(crate) properties: BTreeMap<String, ParticleDat>,
    pub(crate) neighbours: Option<NeighbourStructure>,
}

impl State {
    /// Empty state for `npart` particles with ids `0..npart`.
    pub fn new(domain: Domain, npart: usize) -> Self {
        let ids = (0..npart as i64).collect();
        Self {
            npart,
            domain,
            positions: None,
            global_ids: ParticleDat::from_i64(GLOBAL_IDS, 1, ids).expect("rows of 1"),
            properties: BTreeMap::new(),
            neighbours: None,
        }
    }

    /// State with positions already attached under the name `r`.
    pub fn with_positions(domain: Domain, points: &[[f64; 3]]) -> Result<Self> {
        let mut s = Self::new(domain, points.len());
        s.attach_positions("r", PositionDat::from_points(points))?;
        Ok(s)
    }

    pub fn npart(&self) -> usize {
        self.npart
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn attach(&mut self, name: impl Into<String>, mut dat: ParticleDat) -> Result<()> {
        let name = name.into();
        if dat.npart() != self.npart {
            return Err(Error::RowMismatch {
                name,
                got: dat.npart(),
                expected: self.npart,
            });
        }
        if self.has(&name) {
            return Err(Error::DuplicateName(name));
        }
        dat.name = name.clone();
        self.properties.insert(name, dat);
        Ok(())
    }

    pub fn attach_positions(&mut self, name: impl Into<String>, mut dat: PositionDat) -> Result<()> {
        let name = name.into();
        if self.positions.is_some() {
            return Err(Error::DuplicatePositions);
        }
        if dat.npart() != self.npart {
            return Err(Error::RowMismatch {
                name,
                got: dat.npart(),
                expected: self.npart,
            });
        }
        if self.has(&name) {
            return Err(Error::DuplicateName(name));
        }
        dat.0.name = name;
        self.positions = Some(dat);
        Ok(())
    }

    pub fn has(&self, name: &str) -> bool {
        self.properties.contains_key(name)
            || name == self.global_ids.name()
            || self.positions.as_ref().is_some_and(|p| p.name() == name)
    }

    pub fn positions(&self) -> Result<&PositionDat> {
        self.positions.as_ref().ok_or(Error::MissingPositions)
    }

    pub fn positions_mut(&mut self) -> Result<&mut PositionDat> {
        self.positions.as_mut().ok_or(Error::MissingPositions)
    }

    pub fn global_ids(&self) -> &ParticleDat {
        &self.global_ids
    }

    pub fn global_ids_mut(&mut self) -> &mut ParticleDat {
        &mut self.global_ids
    }

    pub fn dat(&self, name: &str) -> Result<&ParticleDat> {
        if let Some(p) = self.positions.as_ref().filter(|p| p.name() == name) {
            return Ok(p);
        }
        if name == self.global_ids.name() {
            return Ok(&self.global_ids);
        }
        self.properties
            .get(name)
            .ok_or_else(|| Error::UnknownProperty(name.into()))
    }

    pub fn dat_mut(&mut self, name: &str) -> Result<&mut ParticleDat> {
        if let Some(p) = self.positions.as_mut().filter(|p| p.name() == name) {
            return Ok(p);
        }
        if name == self.global_ids.name() {
            return Ok(&mut self.global_ids);
        }
        self.properties
            .get_mut(name)
            .ok_or_else(|| Error::UnknownProperty(name.into()))
    }

    /// Removes a property and returns it.
    pub fn detach(&mut self, name: &str) -> Result<ParticleDat> {
        self.properties
            .remove(name)
            .ok_or_else(|| Error::UnknownProperty(name.into()))
    }

    pub fn property_names(&self) -> impl Iterator<Item = &str> {
        self.properties.keys().map(String::as_str)
    }

    /// Folds every position component into `[0, L_d)`.
    pub fn wrap_positions(&mut self) -> Result<()> {
        let ext = self.domain.extents();
        let pos = self.positions.as_mut().ok_or(Error::MissingPositions)?;
        let xs = pos.as_f64_mut().expect("positions are float64");
        for (i, p) in xs.chunks_exact_mut(3).enumerate() {
            for (x, &l) in p.iter_mut().zip(ext.iter()) {
                if !x.is_finite() {
                    return Err(Error::NonFinitePosition { particle: i });
                }
                *x = math::wrap(*x, l);
            }
        }
        Ok(())
    }

    pub fn neighbours(&self) -> Option<&NeighbourStructure> {
        self.neighbours.as_ref()
    }

    pub fn neighbours_mut(&mut self) -> Option<&mut NeighbourStructure> {
        self.neighbours.as_mut()
    }

    pub fn set_neighbours(&mut self, ns: NeighbourStructure) {
        self.neighbours = Some(ns);
    }

    pub fn clear_neighbours(&mut self) {
        self.neighbours = None;
    }

    /// Checks that the global ids are a permutation of `0..N`.
    pub fn check_global_ids(&self) -> Result<()> {
        let ids = self.global_ids.as_i64().expect("ids are int64");
        let mut seen = vec![false; self.npart];
        for &g in ids {
            match usize::try_from(g).ok().filter(|&k| k < self.npart) {
                Some(k) if !seen[k] => seen[k] = true,
                _ => return Err(Error::GlobalIds(g)),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_dat_fills_initial_value() {
        let v = ParticleDat::new("v", 2, 3, Dtype::Float64, 0.0).unwrap();
        assert_eq!(v.as_f64().unwrap(), &[0.0; 6]);
        assert!(!v.is_dirty());

        let s = ParticleDat::new("S", 0, 1, Dtype::Int64, 0i64).unwrap();
        assert_eq!(s.npart(), 0);
        assert!(s.as_i64().unwrap().is_empty());

        let q = ParticleDat::new("q", 3, 13, Dtype::Float64, 1.5).unwrap();
        assert_eq!(q.as_f64().unwrap().len(), 39);
        assert!(q.as_f64().unwrap().iter().all(|&x| x == 1.5));
    }

    #[test]
    fn create_dat_rejects_bad_shape_and_dtype() {
        assert!(ParticleDat::new("x", 2, 0, Dtype::Float64, 0.0).is_err());
        assert!("float32".parse::<Dtype>().is_err());
        assert_eq!("float64".parse::<Dtype>().unwrap(), Dtype::Float64);
        assert!(ParticleDat::new("x", 2, 1, Dtype::Int64, 0.5).is_err());
    }

    #[test]
    fn set_element_marks_dirty_and_last_write_wins() {
        let mut v = ParticleDat::zeros("v", 2, 3, Dtype::Float64).unwrap();
        v.set(0, 2, 7.0).unwrap();
        assert_eq!(v.get(0, 2).unwrap(), Scalar::Float(7.0));
        assert!(v.is_dirty());
        v.set(0, 2, -1.0).unwrap();
        assert_eq!(v.get(0, 2).unwrap(), Scalar::Float(-1.0));
        assert!(matches!(v.set(2, 0, 1.0), Err(Error::OutOfBounds { .. })));
        assert!(matches!(v.set(0, 3, 1.0), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn attach_checks_rows_names_and_position_uniqueness() {
        let mut st = State::new(Domain::cubic(10.0).unwrap(), 2);
        st.attach("v", ParticleDat::zeros("v", 2, 3, Dtype::Float64).unwrap())
            .unwrap();
        assert!(st.dat("v").is_ok());
        assert!(matches!(
            st.attach("w", ParticleDat::zeros("w", 3, 3, Dtype::Float64).unwrap()),
            Err(Error::RowMismatch { .. })
        ));
        assert!(matches!(
            st.attach("v", ParticleDat::zeros("v", 2, 1, Dtype::Float64).unwrap()),
            Err(Error::DuplicateName(_))
        ));
        st.attach_positions("r", PositionDat::new(2)).unwrap();
        assert_eq!(
            st.attach_positions("r2", PositionDat::new(2)),
            Err(Error::DuplicatePositions)
        );
    }

    #[test]
    fn wrap_positions_half_open() {
        let mut st = State::with_positions(
            Domain::cubic(10.0).unwrap(),
            &[[-0.25, 10.0, 23.5], [-1e-17, 9.999, 0.0]],
        )
        .unwrap();
        st.wrap_positions().unwrap();
        let p = st.positions().unwrap().points();
        assert_eq!(&p[..3], &[9.75, 0.0, 3.5]);
        assert!(p.iter().all(|&x| (0.0..10.0).contains(&x)));
    }

    #[test]
    fn wrap_positions_reports_non_finite() {
        let mut st = State::with_positions(Domain::cubic(10.0).unwrap(), &[[0.0; 3], [f64::NAN, 0.0, 0.0]]).unwrap();
        assert_eq!(st.wrap_positions(), Err(Error::NonFinitePosition { particle: 1 }));
    }

    #[test]
    fn domain_rejects_non_positive_extents() {
        assert!(Domain::new([1.0, 0.0, 1.0]).is_err());
        assert!(Domain::new([1.0, -2.0, 1.0]).is_err());
        assert!(Domain::new([1.0, f64::INFINITY, 1.0]).is_err());
    }

    #[test]
    fn global_ids_are_a_permutation() {
        let mut st = State::new(Domain::cubic(1.0).unwrap(), 4);
        st.check_global_ids().unwrap();
        st.global_ids_mut().set(3, 0, 1i64).unwrap();
        assert_eq!(st.check_global_ids(), Err(Error::GlobalIds(1)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn read_after_write(i in 0usize..5, r in 0usize..4, x in proptest::num::f64::ANY) {
                let mut d = ParticleDat::zeros("d", 5, 4, Dtype::Float64).unwrap();
                d.set(i, r, x).unwrap();
                let got = d.get(i, r).unwrap().as_f64();
                prop_assert_eq!(got.to_bits(), x.to_bits());
            }

            #[test]
            fn wrap_is_idempotent(xs in proptest::collection::vec(-1e3f64..1e3, 3..30)) {
                let n = xs.len() / 3;
                let pts: Vec<[f64; 3]> = xs.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
                let mut st = State::with_positions(Domain::new([7.0, 3.3, 11.1]).unwrap(), &pts).unwrap();
                st.wrap_positions().unwrap();
                let once = st.positions().unwrap().points().to_vec();
                st.wrap_positions().unwrap();
                prop_assert_eq!(once.len(), 3 * n);
                prop_assert_eq!(once, st.positions().unwrap().points().to_vec());
            }
        }
    }
}
