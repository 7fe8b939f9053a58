use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;

const PI: f64 = core::f64::consts::PI;

fn check_unit(dir: [f64; 3]) -> Result<()> {
    let n = math::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    if (n - 1.0).abs() > 1e-9 || !n.is_finite() {
        return Err(Error::InvalidParameter {
            name: "direction",
            reason: alloc::format!("must be a unit vector, |dir| = {n}"),
        });
    }
    Ok(())
}

/// Fully normalised `Y_l^m` with the Condon-Shortley phase, for a unit
/// vector `dir`.
pub fn spherical_harmonic(l: u32, m: i32, dir: [f64; 3]) -> Result<Complex64> {
    if m.unsigned_abs() > l {
        return Err(Error::InvalidHarmonic { l, m });
    }
    check_unit(dir)?;
    let y = positive_order(l, m.unsigned_abs(), dir);
    Ok(if m < 0 { flip(m.unsigned_abs(), y) } else { y })
}

/// All `2l + 1` harmonics of degree `l`; `out[l + m]` holds `Y_l^m`.
pub fn spherical_harmonics(l: u32, dir: [f64; 3], out: &mut [Complex64]) -> Result<()> {
    check_unit(dir)?;
    fill(l, dir, out);
    Ok(())
}

/// Unchecked version of [`spherical_harmonics`] for hot loops.
pub(crate) fn fill(l: u32, dir: [f64; 3], out: &mut [Complex64]) {
    let l_us = l as usize;
    assert_eq!(out.len(), 2 * l_us + 1, "need 2l+1 output slots");
    for m in 0..=l {
        let y = positive_order(l, m, dir);
        out[l_us + m as usize] = y;
        if m > 0 {
            out[l_us - m as usize] = flip(m, y);
        }
    }
}

/// `Y_l^{-m} = (-1)^m conj(Y_l^m)`.
#[inline]
fn flip(m: u32, y: Complex64) -> Complex64 {
    let c = y.conj();
    if m % 2 == 1 {
        -c
    } else {
        c
    }
}

/// `Y_l^m` for `m >= 0` as `K_lm P~_l^m(z) (x + iy)^m`, where `P~` is the
/// associated Legendre function with the `sin^m` factor removed, so no
/// angles are ever formed.
fn positive_order(l: u32, m: u32, dir: [f64; 3]) -> Complex64 {
    let z = dir[2];
    // P~_m^m = (-1)^m (2m-1)!!
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64);
    }
    let p = if l == m {
        pmm
    } else {
        let mut prev = pmm;
        let mut cur = z * (2 * m + 1) as f64 * pmm;
        for ll in (m + 2)..=l {
            let next = ((2 * ll - 1) as f64 * z * cur - (ll + m - 1) as f64 * prev) / (ll - m) as f64;
            prev = cur;
            cur = next;
        }
        cur
    };
    // K_lm = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!)
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    let norm = math::sqrt((2 * l + 1) as f64 / (4.0 * PI) * ratio);
    let xy = Complex64::new(dir[0], dir[1]);
    let mut phase = Complex64::new(1.0, 0.0);
    for _ in 0..m {
        phase *= xy;
    }
    phase * (norm * p)
}
