//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Infallible for the two supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean norm of a point.
#[inline]
pub fn norm<T: Real>(x: &[T]) -> T {
    match x.len() {
        1 => x[0].abs(),
        _ => x.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt(),
    }
}

/// Euclidean distance between two points of equal dimension.
#[inline]
pub fn dist<T: Real>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    if x.len() == 1 {
        return (x[0] - y[0]).abs();
    }
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
        .sqrt()
}

/// `|x|^(-c)` with the conventions `0^0 = 1` and `0^(-c) = +inf` for `c > 0`.
#[inline]
pub fn inv_pow<T: Real>(r: T, c: T) -> T {
    if c == T::zero() {
        T::one()
    } else if r == T::zero() {
        if c > T::zero() {
            T::infinity()
        } else {
            T::zero()
        }
    } else {
        r.powf(-c)
    }
}

/// `|x|^c` with `0^0 = 1`.
#[inline]
pub fn pow_abs<T: Real>(r: T, c: T) -> T {
    if c == T::zero() {
        T::one()
    } else if c == T::one() {
        r.abs()
    } else if c == T::two() {
        r * r
    } else {
        r.abs().powf(c)
    }
}

fn gamma_half_integer(k: u32) -> f64 {
    // Gamma(k / 2) for k >= 1.
    let mut g = if k % 2 == 0 { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut m = if k % 2 == 0 { 2 } else { 1 };
    while m < k {
        g *= m as f64 / 2.0;
        m += 2;
    }
    g
}

/// Surface area of the unit sphere `S^(n-1)`; equals 2 for `n = 1`.
pub fn sphere_area<T: Real>(n: usize) -> T {
    let n32 = n as u32;
    let val = 2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half_integer(n32);
    T::lit(val)
}

/// Volume of the unit ball `B_1` in `R^n`.
pub fn unit_ball_volume<T: Real>(n: usize) -> T {
    match n {
        1 => T::two(),
        2 => T::PI(),
        _ => T::lit(sphere_area::<f64>(n) / n as f64),
    }
}
