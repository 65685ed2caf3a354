//! Scalar types used for weights and evaluation.
//!
//! `f64` is the default; [`Hp`] wraps an MPFR float. New `Hp` values are
//! created at the thread's working precision, and binary operations keep the
//! larger of the operand precisions.

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::Float;

pub const DEFAULT_BITS: u32 = 256;

thread_local! {
    static WORKING_BITS: Cell<u32> = const { Cell::new(DEFAULT_BITS) };
}

/// Current working precision of this thread in bits.
pub fn working_bits() -> u32 {
    WORKING_BITS.with(|c| c.get())
}

/// Runs `f` with the working precision raised to at least `bits`.
/// Nested calls never lower the precision.
pub fn with_bits<R>(bits: u32, f: impl FnOnce() -> R) -> R {
    struct Restore(u32);
    impl Drop for Restore {
        fn drop(&mut self) {
            WORKING_BITS.with(|c| c.set(self.0));
        }
    }
    let old = working_bits();
    let _restore = Restore(old);
    WORKING_BITS.with(|c| c.set(old.max(bits)));
    f()
}

/// Runs `f` with the working precision set to exactly `bits`.
pub fn with_exact_bits<R>(bits: u32, f: impl FnOnce() -> R) -> R {
    let old = working_bits();
    WORKING_BITS.with(|c| c.set(bits.max(2)));
    let out = f();
    WORKING_BITS.with(|c| c.set(old));
    out
}

pub trait Real:
    Clone
    + fmt::Debug
    + fmt::Display
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
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    /// True for arbitrary-precision types.
    const MULTIPRECISION: bool;

    fn from_f64(x: f64) -> Self;
    fn from_i128(x: i128) -> Self;
    /// `x` at the same precision as `like`.
    fn lift(x: f64, like: &Self) -> Self;
    fn lift_i128(x: i128, like: &Self) -> Self;
    fn to_f64(&self) -> f64;
    fn tanh(&self) -> Self;
    fn exp(&self) -> Self;
    fn abs(&self) -> Self;
    fn is_zero(&self) -> bool;
    /// `self += a * b`.
    fn add_mul(&mut self, a: &Self, b: &Self);
    fn tanh_mut(&mut self);
    fn bits(&self) -> u32;
    /// Decimal representation that parses back to the same value.
    fn to_exact_string(&self) -> String;
    fn parse_exact(s: &str, bits: u32) -> Option<Self>;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn from_usize(n: usize) -> Self {
        Self::from_i128(n as i128)
    }
    fn powu(&self, n: u32) -> Self {
        let mut out = Self::lift(1.0, self);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                out *= base.clone();
            }
            e >>= 1;
            if e > 0 {
                base = base.clone() * base;
            }
        }
        out
    }
}

impl Real for f64 {
    const MULTIPRECISION: bool = false;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_i128(x: i128) -> Self {
        x as f64
    }
    fn lift(x: f64, _like: &Self) -> Self {
        x
    }
    fn lift_i128(x: i128, _like: &Self) -> Self {
        x as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn tanh_mut(&mut self) {
        *self = f64::tanh(*self);
    }
    fn bits(&self) -> u32 {
        53
    }
    fn to_exact_string(&self) -> String {
        format!("{self:?}")
    }
    fn parse_exact(s: &str, _bits: u32) -> Option<Self> {
        s.parse().ok()
    }
}

/// Arbitrary-precision real backed by MPFR.
#[derive(Clone, PartialEq)]
pub struct Hp(pub Float);

impl Hp {
    pub fn with_bits(x: f64, bits: u32) -> Self {
        Hp(Float::with_val(bits, x))
    }
    fn widen(mut self, other: &Hp) -> Self {
        let p = other.0.prec();
        if self.0.prec() < p {
            self.0.set_prec(p);
        }
        self
    }
}

impl fmt::Debug for Hp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hp({})", self.0.to_f64())
    }
}

impl fmt::Display for Hp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl PartialOrd for Hp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

macro_rules! hp_binop {
    ($tr:ident, $m:ident, $tra:ident, $ma:ident, $op:tt) => {
        impl $tr for Hp {
            type Output = Hp;
            fn $m(self, rhs: Hp) -> Hp {
                let mut out = self.widen(&rhs);
                out.0 $op rhs.0;
                out
            }
        }
        impl $tra for Hp {
            fn $ma(&mut self, rhs: Hp) {
                if self.0.prec() < rhs.0.prec() {
                    self.0.set_prec(rhs.0.prec());
                }
                self.0 $op rhs.0;
            }
        }
    };
}
hp_binop!(Add, add, AddAssign, add_assign, +=);
hp_binop!(Sub, sub, SubAssign, sub_assign, -=);
hp_binop!(Mul, mul, MulAssign, mul_assign, *=);
hp_binop!(Div, div, DivAssign, div_assign, /=);

impl Neg for Hp {
    type Output = Hp;
    fn neg(self) -> Hp {
        Hp(-self.0)
    }
}

impl Real for Hp {
    const MULTIPRECISION: bool = true;

    fn from_f64(x: f64) -> Self {
        Hp(Float::with_val(working_bits(), x))
    }
    fn from_i128(x: i128) -> Self {
        Hp(Float::with_val(working_bits(), x))
    }
    fn lift(x: f64, like: &Self) -> Self {
        Hp(Float::with_val(like.0.prec(), x))
    }
    fn lift_i128(x: i128, like: &Self) -> Self {
        Hp(Float::with_val(like.0.prec(), x))
    }
    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }
    fn tanh(&self) -> Self {
        Hp(self.0.clone().tanh())
    }
    fn exp(&self) -> Self {
        Hp(self.0.clone().exp())
    }
    fn abs(&self) -> Self {
        Hp(self.0.clone().abs())
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        self.0 += &a.0 * &b.0;
    }
    fn tanh_mut(&mut self) {
        self.0.tanh_mut();
    }
    fn bits(&self) -> u32 {
        self.0.prec()
    }
    fn to_exact_string(&self) -> String {
        self.0.to_string_radix(10, None)
    }
    fn parse_exact(s: &str, bits: u32) -> Option<Self> {
        Float::parse(s).ok().map(|p| Hp(Float::with_val(bits, p)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_scopes_nest_upward() {
        assert_eq!(working_bits(), DEFAULT_BITS);
        with_bits(400, || {
            assert_eq!(working_bits(), 400);
            with_bits(100, || assert_eq!(working_bits(), 400));
            assert_eq!(Hp::one().bits(), 400);
        });
        assert_eq!(working_bits(), DEFAULT_BITS);
    }

    #[test]
    fn mixed_precision_ops_keep_the_larger() {
        let a = Hp::with_bits(1.0, 64);
        let b = Hp::with_bits(3.0, 300);
        assert_eq!((a.clone() / b).bits(), 300);
        assert_eq!(a.bits(), 64);
    }

    #[test]
    fn exact_strings_round_trip() {
        let x = with_bits(300, || Hp::one() / Hp::from_f64(3.0));
        let back = Hp::parse_exact(&x.to_exact_string(), 300).unwrap();
        assert_eq!(x, back);
        let y = 0.1f64 + 0.2;
        assert_eq!(f64::parse_exact(&y.to_exact_string(), 53).unwrap(), y);
    }

    #[test]
    fn powu_matches_repeated_product() {
        assert_eq!(Real::powu(&3.0f64, 5), 243.0);
        let h = Hp::from_f64(1.5).powu(7);
        assert_eq!(h.to_f64(), 1.5f64.powi(7));
    }
}
