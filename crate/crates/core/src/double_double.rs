//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`s
//! giving roughly 106 bits of significand.
//!
//! The binomial double sums cancel heavily when the post-selection
//! probability is small (the denominator can be twelve orders of magnitude
//! below its individual terms), so the analytic layer can be instantiated
//! with this type where `f64` runs out of digits.
//!
//! Arithmetic, `sqrt`, `exp`, `ln`, `sin` and `cos` are carried out at full
//! double-double precision. The remaining transcendental functions required
//! by [`num_traits::Float`] are evaluated on the leading `f64` component and
//! are only `f64`-accurate.

use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const LN2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};
const FRAC_PI_2: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::FRAC_PI_2,
    lo: 6.123_233_995_736_766e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    /// Normalizes `hi + lo`.
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    pub const fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    fn from_parts(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        Self::from_parts(p, e + self.lo * b)
    }

    fn ldexp(self, k: i32) -> Self {
        // split so the factor stays finite for large |k|
        let mut out = self;
        let mut k = k;
        while k != 0 {
            let step = k.clamp(-1000, 1000);
            let f = 2f64.powi(step);
            out = Self {
                hi: out.hi * f,
                lo: out.lo * f,
            };
            k -= step;
        }
        out
    }

    fn sqr(self) -> Self {
        self * self
    }

    /// exp(x) - 1 for |x| small, by Taylor series.
    fn expm1_small(r: Self) -> Self {
        let mut term = r;
        let mut sum = r;
        let mut i = 2.0;
        while term.hi.abs() > 1e-36 * sum.hi.abs().max(1e-300) {
            term = term * r / Self::from_f64(i);
            sum = sum + term;
            i += 1.0;
            if i > 60.0 {
                break;
            }
        }
        sum
    }

    fn exp_impl(self) -> Self {
        if self.hi.is_nan() {
            return Self::from_f64(f64::NAN);
        }
        if self.hi > 709.7 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::ZERO;
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Self::ONE;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2.mul_f64(k);
        // exp(r) = (1 + s)^(2^10) with s = expm1(r / 2^10), squared via s(s+2)
        let r = r.ldexp(-10);
        let mut s = Self::expm1_small(r);
        for _ in 0..10 {
            s = s * (s + Self::from_f64(2.0));
        }
        (s + Self::ONE).ldexp(k as i32)
    }

    fn ln_impl(self) -> Self {
        if self.hi.is_nan() || self.hi < 0.0 {
            return Self::from_f64(f64::NAN);
        }
        if self.hi == 0.0 {
            return Self::from_f64(f64::NEG_INFINITY);
        }
        if self.hi.is_infinite() {
            return self;
        }
        // Newton on exp(y) = x
        let mut y = Self::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp_impl() - Self::ONE;
        }
        y
    }

    /// sin and cos of |r| <= pi/4.
    fn sin_cos_small(r: Self) -> (Self, Self) {
        let r2 = r.sqr();
        let mut sin = r;
        let mut term = r;
        let mut i = 1.0;
        loop {
            term = -(term * r2) / Self::from_f64((i + 1.0) * (i + 2.0));
            sin = sin + term;
            i += 2.0;
            if term.hi.abs() < 1e-36 || i > 60.0 {
                break;
            }
        }
        let mut cos = Self::ONE;
        let mut term = Self::ONE;
        let mut i = 0.0;
        loop {
            term = -(term * r2) / Self::from_f64((i + 1.0) * (i + 2.0));
            cos = cos + term;
            i += 2.0;
            if term.hi.abs() < 1e-36 || i > 60.0 {
                break;
            }
        }
        (sin, cos)
    }

    fn sin_cos_impl(self) -> (Self, Self) {
        if !self.hi.is_finite() {
            let nan = Self::from_f64(f64::NAN);
            return (nan, nan);
        }
        let k = (self.hi / FRAC_PI_2.hi).round();
        let r = self - FRAC_PI_2.mul_f64(k);
        let (s, c) = Self::sin_cos_small(r);
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&(self.hi + self.lo), f)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::from_parts(s, e + f)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        Self::from_parts(p, e + (self.hi * rhs.lo + self.lo * rhs.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q1 = self.hi / rhs.hi;
        if !q1.is_finite() {
            return Self::from_f64(q1);
        }
        let r = self - rhs.mul_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs.mul_f64(q2);
        let q3 = r.hi / rhs.hi;
        Self::from_parts(q1, q2) + Self::from_f64(q3)
    }
}

impl Rem for DoubleDouble {
    type Output = Self;
    fn rem(self, rhs: Self) -> Self {
        self - (self / rhs).trunc() * rhs
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        Self::ZERO
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        Self::ONE
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = num_traits::ParseFloatError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::from_f64)
    }
}

impl ToPrimitive for DoubleDouble {
    fn to_i64(&self) -> Option<i64> {
        let t = self.trunc();
        let hi = t.hi.to_i64()?;
        hi.checked_add(t.lo.to_i64()?)
    }
    fn to_u64(&self) -> Option<u64> {
        let t = self.trunc();
        let v = t.hi.to_i128()? + t.lo.to_i128()?;
        u64::try_from(v).ok()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.hi + self.lo)
    }
}

impl FromPrimitive for DoubleDouble {
    fn from_i64(n: i64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Self::new(hi, lo))
    }
    fn from_u64(n: u64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Self::new(hi, lo))
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Self::from_f64(n))
    }
}

impl NumCast for DoubleDouble {
    fn from<T: ToPrimitive>(n: T) -> Option<Self> {
        if let Some(i) = n.to_i64() {
            if let Some(f) = n.to_f64() {
                if f == i as f64 {
                    return <Self as FromPrimitive>::from_i64(i);
                }
            }
        }
        n.to_f64().map(Self::from_f64)
    }
}

impl Float for DoubleDouble {
    fn nan() -> Self {
        Self::from_f64(f64::NAN)
    }
    fn infinity() -> Self {
        Self::from_f64(f64::INFINITY)
    }
    fn neg_infinity() -> Self {
        Self::from_f64(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Self::from_f64(-0.0)
    }
    fn min_value() -> Self {
        Self::from_f64(f64::MIN)
    }
    fn min_positive_value() -> Self {
        // smallest value that still carries a full second component
        Self::from_f64(f64::MIN_POSITIVE * 2f64.powi(53))
    }
    fn epsilon() -> Self {
        Self::from_f64(2f64.powi(-104))
    }
    fn max_value() -> Self {
        Self::from_f64(f64::MAX)
    }
    fn is_nan(self) -> bool {
        self.hi.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.hi.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.hi.is_finite()
    }
    fn is_normal(self) -> bool {
        self.hi.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.hi.classify()
    }
    fn floor(self) -> Self {
        let hi = self.hi.floor();
        if hi == self.hi {
            Self::from_parts(hi, self.lo.floor())
        } else {
            Self::from_f64(hi)
        }
    }
    fn ceil(self) -> Self {
        let hi = self.hi.ceil();
        if hi == self.hi {
            Self::from_parts(hi, self.lo.ceil())
        } else {
            Self::from_f64(hi)
        }
    }
    fn round(self) -> Self {
        if self.hi >= 0.0 {
            (self + Self::from_f64(0.5)).floor()
        } else {
            (self - Self::from_f64(0.5)).ceil()
        }
    }
    fn trunc(self) -> Self {
        if self.hi >= 0.0 {
            self.floor()
        } else {
            self.ceil()
        }
    }
    fn fract(self) -> Self {
        self - self.trunc()
    }
    fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        Self::from_f64(self.hi.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.hi.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.hi.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        Self::ONE / self
    }
    fn powi(self, n: i32) -> Self {
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Self::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base.sqr();
            e >>= 1;
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }
    fn powf(self, n: Self) -> Self {
        (n * self.ln_impl()).exp_impl()
    }
    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(self.hi.sqrt());
        }
        let y = Self::from_f64(self.hi.sqrt());
        y + (self - y.sqr()) / y.mul_f64(2.0)
    }
    fn exp(self) -> Self {
        self.exp_impl()
    }
    fn exp2(self) -> Self {
        (self * LN2).exp_impl()
    }
    fn ln(self) -> Self {
        self.ln_impl()
    }
    fn log(self, base: Self) -> Self {
        self.ln_impl() / base.ln_impl()
    }
    fn log2(self) -> Self {
        self.ln_impl() / LN2
    }
    fn log10(self) -> Self {
        self.ln_impl() / Self::from_f64(10.0).ln_impl()
    }
    fn max(self, other: Self) -> Self {
        if self >= other || other.is_nan() {
            self
        } else {
            other
        }
    }
    fn min(self, other: Self) -> Self {
        if self <= other || other.is_nan() {
            self
        } else {
            other
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        if self > other {
            self - other
        } else {
            Self::ZERO
        }
    }
    fn cbrt(self) -> Self {
        Self::from_f64(self.hi.cbrt())
    }
    fn hypot(self, other: Self) -> Self {
        (self.sqr() + other.sqr()).sqrt()
    }
    fn sin(self) -> Self {
        self.sin_cos_impl().0
    }
    fn cos(self) -> Self {
        self.sin_cos_impl().1
    }
    fn tan(self) -> Self {
        let (s, c) = self.sin_cos_impl();
        s / c
    }
    fn asin(self) -> Self {
        Self::from_f64(self.hi.asin())
    }
    fn acos(self) -> Self {
        Self::from_f64(self.hi.acos())
    }
    fn atan(self) -> Self {
        Self::from_f64(self.hi.atan())
    }
    fn atan2(self, other: Self) -> Self {
        Self::from_f64(self.hi.atan2(other.hi))
    }
    fn sin_cos(self) -> (Self, Self) {
        self.sin_cos_impl()
    }
    fn exp_m1(self) -> Self {
        if self.hi.abs() < 0.5 {
            Self::expm1_small(self)
        } else {
            self.exp_impl() - Self::ONE
        }
    }
    fn ln_1p(self) -> Self {
        (self + Self::ONE).ln_impl()
    }
    fn sinh(self) -> Self {
        let e = self.exp_impl();
        (e - e.recip()).mul_f64(0.5)
    }
    fn cosh(self) -> Self {
        let e = self.exp_impl();
        (e + e.recip()).mul_f64(0.5)
    }
    fn tanh(self) -> Self {
        self.sinh() / self.cosh()
    }
    fn asinh(self) -> Self {
        Self::from_f64(self.hi.asinh())
    }
    fn acosh(self) -> Self {
        Self::from_f64(self.hi.acosh())
    }
    fn atanh(self) -> Self {
        Self::from_f64(self.hi.atanh())
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.hi.integer_decode()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd(v: f64) -> DoubleDouble {
        DoubleDouble::from_f64(v)
    }

    #[test]
    fn arithmetic_keeps_low_order_bits() {
        let tiny = dd(1e-20);
        let x = dd(1.0) + tiny - dd(1.0);
        assert_eq!(x.hi(), 1e-20);
        let third = dd(1.0) / dd(3.0);
        let back = third * dd(3.0) - dd(1.0);
        assert!(back.abs().hi() < 1e-31);
    }

    #[test]
    fn sqrt_squares_back() {
        let r = dd(2.0).sqrt();
        assert!((r * r - dd(2.0)).abs().hi() < 1e-31);
    }

    #[test]
    fn exp_and_ln_are_inverse() {
        for &v in &[-30.0, -1.0, -5e-13, 1e-9, 0.5, 2.0, 40.0] {
            let x = dd(v);
            let y = x.exp().ln();
            assert!((y - x).abs().hi() <= 1e-30 * v.abs().max(1.0), "{v}");
        }
        // e to 32 digits: 2.7182818284590452353602874713527
        let e = dd(1.0).exp();
        let reference = DoubleDouble::new(std::f64::consts::E, 1.445_646_891_729_250_2e-16);
        assert!((e - reference).abs().hi() < 1e-30);
    }

    #[test]
    fn exp_of_tiny_argument_resolves_offset_from_one() {
        // exp(-5e-13) - 1 = -5e-13 + 1.25e-25 - ...
        let x = dd(-5e-13).exp() - dd(1.0);
        let expected = dd(-5e-13) + dd(1.25e-25) - dd(2.0833333333333333e-38);
        assert!((x - expected).abs().hi() < 1e-30);
    }

    #[test]
    fn sin_cos_match_pythagoras_and_f64() {
        for &v in &[0.0, 0.3, 0.62, 1.2, 2.53, 3.0, -4.0, 10.0] {
            let (s, c) = dd(v).sin_cos();
            assert!((s * s + c * c - dd(1.0)).abs().hi() < 1e-30);
            assert!((s.hi() - v.sin()).abs() < 1e-15);
            assert!((c.hi() - v.cos()).abs() < 1e-15);
        }
        // cos(pi/2 as f64) is the f64 rounding error of pi/2
        let c = dd(std::f64::consts::FRAC_PI_2).cos();
        assert!((c.hi() - 6.123233995736766e-17).abs() < 1e-30);
    }

    #[test]
    fn integer_conversions_are_exact() {
        let big = 118_264_581_564_861_424u64; // C(60, 30)
        let x = <DoubleDouble as FromPrimitive>::from_u64(big).unwrap();
        assert_eq!(x.to_u64(), Some(big));
        assert_eq!(dd(-3.7).floor().to_i64(), Some(-4));
        assert_eq!(dd(2.5).round().to_i64(), Some(3));
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = dd(0.9);
        let mut p = dd(1.0);
        for _ in 0..7 {
            p = p * x;
        }
        assert!((x.powi(7) - p).abs().hi() < 1e-31);
        assert!((x.powi(-2) * x * x - dd(1.0)).abs().hi() < 1e-30);
    }
}
