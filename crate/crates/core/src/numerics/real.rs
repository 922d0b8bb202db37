//! Extended-precision real scalar backed by MPFR.
//!
//! Every `Real` carries its own mantissa width. Binary operations produce a
//! result at the wider of the two operand precisions and are correctly
//! rounded to nearest.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::OnceLock;

use rug::float::{Constant, Round};
use rug::ops::Pow;
use rug::{Float, Integer};

/// Smallest mantissa width accepted anywhere in the crate.
pub const MIN_PRECISION: u32 = 64;
/// Mantissa width used when nothing else is requested.
pub const DEFAULT_PRECISION: u32 = 256;
/// Environment override for [`default_precision`].
pub const PRECISION_ENV: &str = "TA_PRECISION_BITS";

/// Process-wide default precision: `TA_PRECISION_BITS` if set and valid,
/// otherwise 256.
pub fn default_precision() -> u32 {
    static PREC: OnceLock<u32> = OnceLock::new();
    *PREC.get_or_init(|| {
        std::env::var(PRECISION_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<u32>().ok())
            .map(|p| p.max(MIN_PRECISION))
            .unwrap_or(DEFAULT_PRECISION)
    })
}

fn check_prec(prec: u32) -> u32 {
    prec.max(MIN_PRECISION)
}

#[derive(Clone)]
pub struct Real(Float);

impl Real {
    pub fn with_prec(value: f64, prec: u32) -> Self {
        Real(Float::with_val(check_prec(prec), value))
    }

    pub fn from_f64(value: f64) -> Self {
        Self::with_prec(value, default_precision())
    }

    pub fn from_i64(value: i64, prec: u32) -> Self {
        Real(Float::with_val(check_prec(prec), value))
    }

    pub fn from_integer(value: &Integer, prec: u32) -> Self {
        Real(Float::with_val(check_prec(prec), value))
    }

    /// `num / den`, correctly rounded.
    pub fn ratio(num: i64, den: i64, prec: u32) -> Self {
        let prec = check_prec(prec);
        let n = Float::with_val(prec + 64, num);
        Real(Float::with_val(prec, n / den))
    }

    pub fn zero(prec: u32) -> Self {
        Self::from_i64(0, prec)
    }

    pub fn one(prec: u32) -> Self {
        Self::from_i64(1, prec)
    }

    pub fn pi(prec: u32) -> Self {
        Real(Float::with_val(check_prec(prec), Constant::Pi))
    }

    pub fn e(prec: u32) -> Self {
        Self::one(prec).exp()
    }

    /// Parses a decimal (or `inf`/`nan`) literal at `prec` bits.
    pub fn parse(text: &str, prec: u32) -> Result<Self, ParseRealError> {
        let parsed = Float::parse(text.trim()).map_err(|_| ParseRealError(text.to_string()))?;
        Ok(Real(Float::with_val(check_prec(prec), parsed)))
    }

    pub fn from_float(value: Float) -> Self {
        let prec = check_prec(value.prec());
        let mut value = value;
        value.set_prec(prec);
        Real(value)
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn into_float(self) -> Float {
        self.0
    }

    pub fn prec(&self) -> u32 {
        self.0.prec()
    }

    /// Same value re-rounded to `prec` bits.
    pub fn to_prec(&self, prec: u32) -> Self {
        let mut f = self.0.clone();
        f.set_prec(check_prec(prec));
        Real(f)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative() && !self.0.is_zero()
    }

    pub fn signum_i32(&self) -> i32 {
        match self.0.cmp0() {
            Some(Ordering::Less) => -1,
            Some(Ordering::Greater) => 1,
            _ => 0,
        }
    }

    fn unary(&self, f: impl FnOnce(&mut Float)) -> Self {
        let mut out = self.0.clone();
        f(&mut out);
        Real(out)
    }

    pub fn abs(&self) -> Self {
        self.unary(|x| {
            x.abs_mut();
        })
    }
    pub fn sin(&self) -> Self {
        self.unary(|x| {
            x.sin_mut();
        })
    }
    pub fn cos(&self) -> Self {
        self.unary(|x| {
            x.cos_mut();
        })
    }
    pub fn asin(&self) -> Self {
        self.unary(|x| {
            x.asin_mut();
        })
    }
    pub fn atan(&self) -> Self {
        self.unary(|x| {
            x.atan_mut();
        })
    }
    pub fn exp(&self) -> Self {
        self.unary(|x| {
            x.exp_mut();
        })
    }
    pub fn ln(&self) -> Self {
        self.unary(|x| {
            x.ln_mut();
        })
    }
    pub fn log2(&self) -> Self {
        self.unary(|x| {
            x.log2_mut();
        })
    }
    pub fn sqrt(&self) -> Self {
        self.unary(|x| {
            x.sqrt_mut();
        })
    }
    pub fn square(&self) -> Self {
        self.unary(|x| {
            x.square_mut();
        })
    }
    pub fn floor(&self) -> Self {
        self.unary(|x| {
            x.floor_mut();
        })
    }
    /// Round half away from zero.
    pub fn round(&self) -> Self {
        self.unary(|x| {
            x.round_mut();
        })
    }
    /// `sin(2πx)` with the argument reduced modulo 1 first, so large `x`
    /// does not lose the fractional part to the multiplication by π.
    pub fn sin_2pi(&self) -> Self {
        let frac = self - &self.round();
        let arg = frac * Self::pi(self.prec()) * 2;
        arg.sin()
    }
    pub fn cos_2pi(&self) -> Self {
        let frac = self - &self.round();
        let arg = frac * Self::pi(self.prec()) * 2;
        arg.cos()
    }

    pub fn powi(&self, n: i32) -> Self {
        Real(Float::with_val(self.prec(), (&self.0).pow(n)))
    }

    pub fn pow(&self, exponent: &Real) -> Self {
        let prec = self.prec().max(exponent.prec());
        Real(Float::with_val(prec, (&self.0).pow(&exponent.0)))
    }

    pub fn recip(&self) -> Self {
        self.unary(|x| {
            x.recip_mut();
        })
    }

    pub fn max(&self, other: &Real) -> Real {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn min(&self, other: &Real) -> Real {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Nearest integer (ties away from zero), `None` for non-finite values.
    pub fn to_integer(&self) -> Option<Integer> {
        self.0.to_integer_round(Round::Nearest).map(|(i, _)| i)
    }

    /// Largest integer not exceeding the value.
    pub fn floor_integer(&self) -> Option<Integer> {
        self.0.to_integer_round(Round::Down).map(|(i, _)| i)
    }

    pub fn next_up(&self) -> Self {
        self.unary(|x| x.next_up())
    }

    pub fn next_down(&self) -> Self {
        self.unary(|x| x.next_down())
    }

    /// Full-precision decimal rendering; parsing it back at the same
    /// precision yields the identical value.
    pub fn to_decimal(&self) -> String {
        self.0.to_string_radix(10, None)
    }

    /// Short rendering for reports and logs.
    pub fn to_short(&self, digits: usize) -> String {
        self.0.to_string_radix(10, Some(digits.max(2)))
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Real({})", self.to_short(20))
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid real literal `{0}`")]
pub struct ParseRealError(pub String);

impl FromStr for Real {
    type Err = ParseRealError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Real::parse(s, default_precision())
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl PartialEq<f64> for Real {
    fn eq(&self, other: &f64) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<f64> for Real {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

impl PartialEq<i32> for Real {
    fn eq(&self, other: &i32) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<i32> for Real {
    fn partial_cmp(&self, other: &i32) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(-self.0)
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(Float::with_val(self.prec(), -&self.0))
    }
}

macro_rules! real_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                let prec = self.prec().max(rhs.prec());
                Real(Float::with_val(prec, &self.0 $op &rhs.0))
            }
        }
        impl $trait<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                (&self).$method(rhs)
            }
        }
        impl $trait<Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                self.$method(&rhs)
            }
        }
        impl $trait<f64> for &Real {
            type Output = Real;
            fn $method(self, rhs: f64) -> Real {
                Real(Float::with_val(self.prec(), &self.0 $op rhs))
            }
        }
        impl $trait<f64> for Real {
            type Output = Real;
            fn $method(self, rhs: f64) -> Real {
                (&self).$method(rhs)
            }
        }
        impl $trait<i32> for &Real {
            type Output = Real;
            fn $method(self, rhs: i32) -> Real {
                Real(Float::with_val(self.prec(), &self.0 $op rhs))
            }
        }
        impl $trait<i32> for Real {
            type Output = Real;
            fn $method(self, rhs: i32) -> Real {
                (&self).$method(rhs)
            }
        }
    };
}

real_binop!(Add, add, +);
real_binop!(Sub, sub, -);
real_binop!(Mul, mul, *);
real_binop!(Div, div, /);

macro_rules! scalar_lhs {
    ($scalar:ty; $($trait:ident, $method:ident, $op:tt);*) => {
        $(
            impl $trait<&Real> for $scalar {
                type Output = Real;
                fn $method(self, rhs: &Real) -> Real {
                    Real(Float::with_val(rhs.prec(), self $op &rhs.0))
                }
            }
            impl $trait<Real> for $scalar {
                type Output = Real;
                fn $method(self, rhs: Real) -> Real {
                    self.$method(&rhs)
                }
            }
        )*
    };
}

scalar_lhs!(f64; Add, add, +; Sub, sub, -; Mul, mul, *; Div, div, /);
scalar_lhs!(i32; Add, add, +; Sub, sub, -; Mul, mul, *; Div, div, /);

impl std::iter::Sum for Real {
    fn sum<I: Iterator<Item = Real>>(iter: I) -> Real {
        let mut acc: Option<Real> = None;
        for x in iter {
            acc = Some(match acc {
                None => x,
                Some(a) => a + x,
            });
        }
        acc.unwrap_or_else(|| Real::zero(default_precision()))
    }
}

/// Max norm of a vector.
pub fn max_norm(v: &[Real]) -> Real {
    let prec = v.first().map(Real::prec).unwrap_or_else(default_precision);
    v.iter().fold(Real::zero(prec), |acc, x| acc.max(&x.abs()))
}

/// Euclidean norm of a vector.
pub fn euclid_norm(v: &[Real]) -> Real {
    let prec = v.first().map(Real::prec).unwrap_or_else(default_precision);
    v.iter()
        .fold(Real::zero(prec), |acc, x| acc + x.square())
        .sqrt()
}
