//! Float functions that work with and without `std`.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn floor(x: f64) -> f64 {
        x.floor()
    }
    #[inline]
    pub fn round(x: f64) -> f64 {
        x.round()
    }
    #[inline]
    pub fn trunc(x: f64) -> f64 {
        x.trunc()
    }
    #[inline]
    pub fn cbrt(x: f64) -> f64 {
        x.cbrt()
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    pub use libm::{cbrt, floor, round, sqrt, trunc};
}

pub(crate) use imp::*;

/// `x` folded into `[0, len)`.
#[inline]
pub(crate) fn wrap(x: f64, len: f64) -> f64 {
    let r = x % len;
    let r = if r < 0.0 { r + len } else { r };
    if r >= len {
        0.0
    } else {
        r + 0.0
    }
}
