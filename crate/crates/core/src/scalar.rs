//! Scalar abstraction shared by every numerical module.
//!
//! All engine types are generic over a real scalar `T: Real`; complex
//! quantities are `Complex<T>`. `f64` is the working precision for the
//! acceptance tolerances, `f32` is supported for low-precision runs.

use nalgebra::{ComplexField, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

pub use nalgebra::Complex;

/// Real scalar usable by the engine.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Default + std::fmt::Display + Send + Sync + 'static
{
    /// Machine epsilon of the type.
    fn eps() -> Self;
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

#[inline]
pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cone<T: Real>() -> Complex<T> {
    Complex::new(T::one(), T::zero())
}

#[inline]
pub fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    let r = z.re.exp();
    Complex::new(r * z.im.cos(), r * z.im.sin())
}

/// `exp(-2πi x)`.
#[inline]
pub fn phase<T: Real>(x: T) -> Complex<T> {
    let a = -T::two_pi() * x;
    Complex::new(a.cos(), a.sin())
}

#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// Principal square root.
#[inline]
pub fn csqrt<T: Real>(z: Complex<T>) -> Complex<T> {
    ComplexField::sqrt(z)
}

/// Principal logarithm.
#[inline]
pub fn cln<T: Real>(z: Complex<T>) -> Complex<T> {
    Complex::new(cabs(z).ln(), z.im.atan2(z.re))
}

#[inline]
pub fn cscale<T: Real>(z: Complex<T>, a: T) -> Complex<T> {
    Complex::new(z.re * a, z.im * a)
}

#[inline]
pub fn is_finite_c<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// `[re, im]` pair used by the JSON and CSV emitters.
#[inline]
pub fn pair<T: Real>(z: Complex<T>) -> [f64; 2] {
    [to_f64(z.re), to_f64(z.im)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_helpers_match_std() {
        let z = Complex::new(0.3_f64, -1.2);
        let e = cexp(z);
        assert!((e.re - 0.3_f64.exp() * 1.2_f64.cos()).abs() < 1e-15);
        assert!((e.im + 0.3_f64.exp() * 1.2_f64.sin()).abs() < 1e-15);
        let l = cln(e);
        assert!((l - z).norm() < 1e-15);
        let s = csqrt(Complex::new(-4.0_f64, 0.0));
        assert!((s - Complex::new(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn quarter_phase_is_minus_i() {
        let p = phase(0.25_f64);
        assert!((p - Complex::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn f32_helpers() {
        let x: f32 = lit(0.5);
        assert_eq!(x, 0.5f32);
        assert!((cabs(Complex::new(3.0f32, 4.0)) - 5.0).abs() < 1e-6);
    }
}
