//! Planar vector helpers and angle reduction.

use core::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Rotation by +90 degrees.
#[inline]
pub fn perp(v: &Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[inline]
pub fn unit(angle: f64) -> Vec2 {
    let (s, c) = libm::sincos(angle);
    Vec2::new(c, s)
}

/// Reduces an angle to `[0, 2pi)`.
#[inline]
pub fn wrap_tau(x: f64) -> f64 {
    let r = x - TAU * libm::floor(x / TAU);
    if (0.0..TAU).contains(&r) {
        r
    } else {
        0.0
    }
}

/// Reduces an angle to `(-pi, pi]`.
#[inline]
pub fn wrap_pi(x: f64) -> f64 {
    let r = wrap_tau(x);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Signed angle from `a` to `b`, in `(-pi, pi]`.
#[inline]
pub fn angle_between(a: &Vec2, b: &Vec2) -> f64 {
    libm::atan2(cross(a, b), a.dot(b))
}

/// Length of the shorter arc between two angles.
#[inline]
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_pi(a - b).abs()
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
