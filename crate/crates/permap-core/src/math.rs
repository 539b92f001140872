//! Scalar math shims and angle utilities.
//!
//! `f64` transcendentals are inherent methods under `std` but live in `libm`
//! on `no_std` targets; the functions here paper over the difference so the
//! rest of the crate can stay agnostic.

use core::f64::consts::{PI, TAU};

macro_rules! shim1 {
    ($name:ident, $libm:ident) => {
        #[inline]
        pub fn $name(x: f64) -> f64 {
            #[cfg(feature = "std")]
            {
                x.$name()
            }
            #[cfg(not(feature = "std"))]
            {
                libm::$libm(x)
            }
        }
    };
}

shim1!(exp, exp);
shim1!(ln, log);
shim1!(sqrt, sqrt);
shim1!(sin, sin);
shim1!(cos, cos);
shim1!(ceil, ceil);

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        y.atan2(x)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::atan2(y, x)
    }
}

#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.hypot(y)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::hypot(x, y)
    }
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.powf(y)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::pow(x, y)
    }
}

/// `x * x`, spelled out so callers stay free of `std`-only float methods.
#[inline]
pub fn sq(x: f64) -> f64 {
    x * x
}

/// Wrap an angle to the half-open interval `(-pi, pi]`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    // Euclidean remainder by a full turn, valid without std.
    let mut r = theta % TAU;
    if r < 0.0 {
        r += TAU;
    }
    if r > PI {
        r - TAU
    } else {
        r
    }
}
