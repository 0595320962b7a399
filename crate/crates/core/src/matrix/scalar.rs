use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Field element used by the dense matrix and the polynomial codec.
///
/// Two backends exist: `f64` for realistic runs and [`BigRational`] for
/// bit-exact decode checks on integer inputs.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    /// Exact conversion where the backend allows it; `None` for non-finite input.
    fn from_f64(v: f64) -> Option<Self>;
    fn to_f64(&self) -> f64;
    fn is_finite(&self) -> bool;
    fn is_zero(&self) -> bool;

    /// `acc[j] += s * row[j]` over the whole slice.
    fn axpy(acc: &mut [Self], s: &Self, row: &[Self]) {
        for (a, r) in acc.iter_mut().zip(row) {
            *a = a.clone() + s.clone() * r.clone();
        }
    }

    fn pow(&self, exp: usize) -> Self {
        let mut out = Self::one();
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                out = out * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        out
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    #[inline]
    fn axpy(acc: &mut [f64], s: &f64, row: &[f64]) {
        let s = *s;
        for (a, r) in acc.iter_mut().zip(row) {
            *a += s * r;
        }
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_f64(v: f64) -> Option<Self> {
        BigRational::from_float(v)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_finite(&self) -> bool {
        true
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn axpy(acc: &mut [Self], s: &Self, row: &[Self]) {
        if Zero::is_zero(s) {
            return;
        }
        for (a, r) in acc.iter_mut().zip(row) {
            if !Zero::is_zero(r) {
                *a += s * r;
            }
        }
    }
}
