//! XYZ and CSV particle snapshots. Floats are written with 17 significant
//! digits so that reading a file back reproduces every coordinate exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use partloop_core::sim::VELOCITY;
use partloop_core::{Domain, State};

use crate::config::Format;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub extents: [f64; 3],
    pub ids: Vec<i64>,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Option<Vec<[f64; 3]>>,
    /// Extra per-particle columns, written to CSV only.
    pub columns: Vec<(String, Vec<f64>)>,
}

fn triples(flat: &[f64]) -> Vec<[f64; 3]> {
    flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

impl Snapshot {
    pub fn from_state(state: &State, step: usize, time: f64) -> Result<Self> {
        let velocities = if state.has(VELOCITY) {
            let v = state.dat(VELOCITY)?;
            Some(triples(v.as_f64().context("velocities are not float64")?))
        } else {
            None
        };
        Ok(Self {
            step,
            time,
            extents: state.domain().extents(),
            ids: state.global_ids().as_i64().context("ids are not int64")?.to_vec(),
            positions: triples(state.positions()?.points()),
            velocities,
            columns: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        ensure!(
            values.len() == self.len(),
            "column `{name}` has {} values for {} particles",
            values.len(),
            self.len()
        );
        self.columns.push((name, values));
        Ok(self)
    }

    /// State with this snapshot's box and positions.
    pub fn to_state(&self) -> Result<State> {
        Ok(State::with_positions(Domain::new(self.extents)?, &self.positions)?)
    }

    /// `N`, a comment line with step, time and box, then `id x y z` rows.
    pub fn write_xyz<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.len())?;
        writeln!(
            w,
            "step={} time={} box={} {} {}",
            self.step,
            fmt(self.time),
            fmt(self.extents[0]),
            fmt(self.extents[1]),
            fmt(self.extents[2])
        )?;
        for (id, p) in self.ids.iter().zip(&self.positions) {
            writeln!(w, "{id} {} {} {}", fmt(p[0]), fmt(p[1]), fmt(p[2]))?;
        }
        Ok(())
    }

    /// Header `id,x,y,z[,vx,vy,vz][,extra...]`, one row per particle.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["id", "x", "y", "z"].map(String::from).to_vec();
        if self.velocities.is_some() {
            header.extend(["vx", "vy", "vz"].map(String::from));
        }
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        out.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![self.ids[i].to_string()];
            row.extend(self.positions[i].map(fmt));
            if let Some(v) = &self.velocities {
                row.extend(v[i].map(fmt));
            }
            row.extend(self.columns.iter().map(|(_, c)| fmt(c[i])));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_xyz<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .with_context(|| format!("file ends before the {what}"))?
                .map_err(Into::into)
        };
        let n: usize = next("particle count")?
            .trim()
            .parse()
            .context("first line must be the particle count")?;
        let comment = next("comment line")?;
        let mut step = 0;
        let mut time = 0.0;
        let mut extents = None;
        let mut words = comment.split_whitespace();
        while let Some(word) = words.next() {
            if let Some(v) = word.strip_prefix("step=") {
                step = v.parse().context("bad step")?;
            } else if let Some(v) = word.strip_prefix("time=") {
                time = v.parse().context("bad time")?;
            } else if let Some(v) = word.strip_prefix("box=") {
                let lx: f64 = v.parse().context("bad box")?;
                let ly: f64 = words
                    .next()
                    .context("box needs three lengths")?
                    .parse()
                    .context("bad box")?;
                let lz: f64 = words
                    .next()
                    .context("box needs three lengths")?
                    .parse()
                    .context("bad box")?;
                extents = Some([lx, ly, lz]);
            }
        }
        let Some(extents) = extents else {
            bail!("comment line has no `box=Lx Ly Lz`");
        };
        let mut ids = Vec::with_capacity(n);
        let mut positions = Vec::with_capacity(n);
        for k in 0..n {
            let line = next("particle rows")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            ensure!(f.len() >= 4, "row {} needs `id x y z`", k + 1);
            ids.push(f[0].parse().with_context(|| format!("row {}: bad id", k + 1))?);
            let mut p = [0.0; 3];
            for d in 0..3 {
                p[d] = f[1 + d]
                    .parse()
                    .with_context(|| format!("row {}: bad coordinate", k + 1))?;
            }
            positions.push(p);
        }
        Ok(Self {
            step,
            time,
            extents,
            ids,
            positions,
            velocities: None,
            columns: Vec::new(),
        })
    }

    pub fn read_xyz_file(path: &Path) -> Result<Self> {
        let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        Self::read_xyz(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
    }

    pub fn write_file(&self, path: &Path, format: Format) -> Result<()> {
        let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut w = BufWriter::new(f);
        match format {
            Format::Xyz => self.write_xyz(&mut w)?,
            Format::Csv => self.write_csv(&mut w)?,
        }
        w.flush()?;
        Ok(())
    }
}
