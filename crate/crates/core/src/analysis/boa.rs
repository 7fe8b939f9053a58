use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::harmonics;
use crate::data::{Domain, Dtype, ParticleDat, State};
use crate::engine::{native, AccessBinding, AccessMode, Backend, Ctx, Engine};
use crate::error::{Error, Result};
use crate::math;

const PI: f64 = core::f64::consts::PI;
const MOMENTS: &str = "boa.q";
const COUNTS: &str = "boa.nu";

/// Bond-order analysis settings.
#[derive(Clone, Debug, PartialEq)]
pub struct BoaConfig {
    pub l_values: Vec<u32>,
    pub r_c: f64,
}

impl BoaConfig {
    pub fn new(l_values: Vec<u32>, r_c: f64) -> Result<Self> {
        if !(r_c.is_finite() && r_c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "r_c",
                reason: alloc::format!("must be positive, got {r_c}"),
            });
        }
        if l_values.is_empty() {
            return Err(Error::InvalidParameter {
                name: "l_values",
                reason: "need at least one degree".into(),
            });
        }
        Ok(Self { l_values, r_c })
    }

    /// Offset of each degree's block in the interleaved moment row.
    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.l_values
            .iter()
            .map(|&l| {
                let o = acc;
                acc += 2 * (2 * l as usize + 1);
                o
            })
            .collect()
    }

    /// Moment components per particle: `2 (2l + 1)` reals per degree.
    pub fn moment_width(&self) -> usize {
        self.l_values.iter().map(|&l| 2 * (2 * l as usize + 1)).sum()
    }
}

/// Unnormalised moments `sum_j Y_l^m(r_ij / |r_ij|)`, interleaved re/im
/// per degree in `l_values` order, and neighbour counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub config: BoaConfig,
    pub q: ParticleDat,
    pub nu: ParticleDat,
}

impl Moments {
    /// `q~_lm` of particle `i` for the `k`-th configured degree.
    pub fn moment(&self, i: usize, k: usize, m: i32) -> Complex64 {
        let l = self.config.l_values[k] as i32;
        let base = self.config.offsets()[k] + 2 * (m + l) as usize;
        let row = &self.q.as_f64().expect("float moments")[i * self.q.ncomp()..];
        Complex64::new(row[base], row[base + 1])
    }
}

/// Accumulates spherical-harmonic moments and neighbour counts over all
/// pairs within `cfg.r_c`.
pub fn boa_moments(engine: &Engine, state: &mut State, cfg: &BoaConfig, backend: Backend) -> Result<Moments> {
    let n = state.npart();
    state.attach(
        MOMENTS,
        ParticleDat::zeros(MOMENTS, n, cfg.moment_width(), Dtype::Float64)?,
    )?;
    if let Err(e) = state.attach(COUNTS, ParticleDat::zeros(COUNTS, n, 1, Dtype::Int64)?) {
        state.detach(MOMENTS)?;
        return Err(e);
    }
    let result = moments_loop(engine, state, cfg, backend);
    let q = state.detach(MOMENTS)?;
    let nu = state.detach(COUNTS)?;
    result?;
    Ok(Moments {
        config: cfg.clone(),
        q,
        nu,
    })
}

fn moments_loop(engine: &Engine, state: &mut State, cfg: &BoaConfig, backend: Backend) -> Result<()> {
    let offsets = cfg.offsets();
    let ls = cfg.l_values.clone();
    let lmax = ls.iter().copied().max().unwrap_or(0) as usize;
    let rc_sq = cfg.r_c * cfg.r_c;
    let k = native(move |ctx: &mut Ctx<'_, '_>| {
        let mut d = [0.0; 3];
        for (c, x) in d.iter_mut().enumerate() {
            *x = ctx.read_i(0, c)? - ctx.read_j(0, c)?;
        }
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        if r2 >= rc_sq {
            return Ok(());
        }
        if r2 == 0.0 {
            return Err(Error::CoincidentParticles {
                i: ctx.i(),
                j: ctx.j().unwrap_or(ctx.i()),
            });
        }
        let r = math::sqrt(r2);
        let dir = d.map(|x| x / r);
        let mut stack = [Complex64::new(0.0, 0.0); 33];
        let mut heap = Vec::new();
        let buf: &mut [Complex64] = if 2 * lmax < stack.len() {
            &mut stack
        } else {
            heap.resize(2 * lmax + 1, Complex64::new(0.0, 0.0));
            &mut heap
        };
        for (&l, &off) in ls.iter().zip(&offsets) {
            let out = &mut buf[..2 * l as usize + 1];
            harmonics::fill(l, dir, out);
            for (m, y) in out.iter().enumerate() {
                ctx.inc_i(1, off + 2 * m, y.re)?;
                ctx.inc_i(1, off + 2 * m + 1, y.im)?;
            }
        }
        ctx.inc_i(2, 0, 1.0)
    });
    let pos = state.positions()?.name().to_string();
    let mut b = [
        AccessBinding::dat_as("r", pos, AccessMode::Read),
        AccessBinding::dat(MOMENTS, AccessMode::IncZero),
        AccessBinding::dat(COUNTS, AccessMode::IncZero),
    ];
    engine.pair_loop(state, &k, &mut b, cfg.r_c, backend)?;
    Ok(())
}

/// `Q_l = sqrt(4 pi / (2l + 1) sum_m |q~_lm / nu|^2)` per particle, one
/// column per configured degree. Particles without neighbours get NaN.
pub fn boa_finalize(engine: &Engine, moments: &Moments) -> Result<ParticleDat> {
    let cfg = &moments.config;
    let n = moments.q.npart();
    let mut tmp = State::new(Domain::cubic(1.0)?, n);
    tmp.attach(MOMENTS, moments.q.clone())?;
    tmp.attach(COUNTS, moments.nu.clone())?;
    tmp.attach("Q", ParticleDat::zeros("Q", n, cfg.l_values.len(), Dtype::Float64)?)?;
    let offsets = cfg.offsets();
    let ls = cfg.l_values.clone();
    let k = native(move |ctx: &mut Ctx<'_, '_>| {
        let nu = ctx.read_i(1, 0)?;
        for (c, (&l, &off)) in ls.iter().zip(&offsets).enumerate() {
            let value = if nu == 0.0 {
                f64::NAN
            } else {
                let mut sum = 0.0;
                for m in 0..(2 * l as usize + 1) {
                    let re = ctx.read_i(0, off + 2 * m)? / nu;
                    let im = ctx.read_i(0, off + 2 * m + 1)? / nu;
                    sum += re * re + im * im;
                }
                math::sqrt(4.0 * PI / (2 * l + 1) as f64 * sum)
            };
            ctx.write_i(2, c, value)?;
        }
        Ok(())
    });
    let mut b = [
        AccessBinding::dat(MOMENTS, AccessMode::Read),
        AccessBinding::dat(COUNTS, AccessMode::Read),
        AccessBinding::dat("Q", AccessMode::Write),
    ];
    engine.particle_loop(&mut tmp, &k, &mut b)?;
    tmp.detach("Q")
}

/// Moments followed by finalisation.
pub fn bond_order(engine: &Engine, state: &mut State, cfg: &BoaConfig, backend: Backend) -> Result<ParticleDat> {
    let m = boa_moments(engine, state, cfg, backend)?;
    boa_finalize(engine, &m)
}

/// Column means of a `Q` dat, skipping NaN entries. A column with no
/// defined entries gives NaN.
pub fn mean_q(q: &ParticleDat) -> Vec<f64> {
    let w = q.ncomp();
    let v = q.as_f64().expect("float Q");
    let mut sums = vec![(0.0, 0usize); w];
    for row in v.chunks_exact(w) {
        for (s, &x) in sums.iter_mut().zip(row) {
            if !x.is_nan() {
                s.0 += x;
                s.1 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|(s, c)| if c == 0 { f64::NAN } else { s / c as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_state(sep: [f64; 3]) -> State {
        State::with_positions(
            Domain::cubic(10.0).unwrap(),
            &[
                [2.0, 2.0, 2.0],
                [2.0 + sep[0], 2.0 + sep[1], 2.0 + sep[2]],
                [7.0, 7.0, 7.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_neighbour_moment_is_the_harmonic() {
        let mut s = pair_state([0.3, -0.4, 1.2]);
        let cfg = BoaConfig::new(vec![4, 6], 2.0).unwrap();
        let m = boa_moments(&Engine::serial(), &mut s, &cfg, Backend::AllPairs).unwrap();
        assert_eq!(m.nu.as_i64().unwrap(), [1, 1, 0]);
        let dir = [-0.3 / 1.3, 0.4 / 1.3, -1.2 / 1.3];
        for m_ in -6..=6 {
            let y = harmonics::spherical_harmonic(6, m_, dir).unwrap();
            assert!((m.moment(0, 1, m_) - y).norm_sqr() < 1e-28);
        }
        assert!(!s.has(MOMENTS) && !s.has(COUNTS));
    }

    #[test]
    fn isolated_particle_is_nan_and_excluded_from_means() {
        let mut s = pair_state([0.3, -0.4, 1.2]);
        let cfg = BoaConfig::new(vec![4, 5, 6], 2.0).unwrap();
        let q = bond_order(&Engine::serial(), &mut s, &cfg, Backend::AllPairs).unwrap();
        let row = q.row_f64(2);
        assert!(row.iter().all(|x| x.is_nan()));
        for x in q.row_f64(0) {
            assert!((x - 1.0).abs() < 1e-12);
        }
        for mean in mean_q(&q) {
            assert!((mean - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_particle_has_zero_moments() {
        let mut s = State::with_positions(Domain::cubic(10.0).unwrap(), &[[1.0, 1.0, 1.0]]).unwrap();
        let cfg = BoaConfig::new(vec![6], 2.0).unwrap();
        let m = boa_moments(&Engine::serial(), &mut s, &cfg, Backend::AllPairs).unwrap();
        assert!(m.q.as_f64().unwrap().iter().all(|&x| x == 0.0));
        assert_eq!(m.nu.as_i64().unwrap(), [0]);
    }

    #[test]
    fn config_is_validated() {
        assert!(BoaConfig::new(vec![6], 0.0).is_err());
        assert!(BoaConfig::new(vec![], 1.0).is_err());
    }
}
