//! Closed intervals with outward (directed) rounding.
//!
//! Every operation returns an enclosure of the exact image of its inputs.
//! Endpoints are computed with MPFR's directed rounding modes, so the
//! enclosure holds for the real-number operations, not just up to
//! round-off.

use std::fmt;

use rug::float::{Constant, Round};
use rug::Float;

use super::real::Real;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IntervalError {
    #[error("{op}: enclosure [{lo}, {hi}] leaves the domain")]
    Domain { op: &'static str, lo: String, hi: String },
    #[error("division by an interval containing zero")]
    DivisionByZero,
}

#[derive(Clone, PartialEq)]
pub struct Interval {
    lo: Real,
    hi: Real,
}

macro_rules! rnd {
    ($prec:expr, $val:expr, $mode:expr) => {
        Float::with_val_round($prec, $val, $mode).0
    };
}

impl Interval {
    /// Panics if `lo > hi` or either endpoint is NaN.
    pub fn new(lo: Real, hi: Real) -> Self {
        assert!(lo <= hi, "interval endpoints out of order: {lo:?} > {hi:?}");
        Interval { lo, hi }
    }

    pub fn point(x: &Real) -> Self {
        Interval { lo: x.clone(), hi: x.clone() }
    }

    /// Enclosure of `x ± radius`.
    pub fn ball(x: &Real, radius: &Real) -> Self {
        let p = x.prec().max(radius.prec());
        let lo = Real::from_float(rnd!(p, x.as_float() - radius.as_float(), Round::Down));
        let hi = Real::from_float(rnd!(p, x.as_float() + radius.as_float(), Round::Up));
        Interval { lo, hi }
    }

    /// Enclosure of a decimal literal that may not be exactly representable.
    pub fn from_decimal(text: &str, prec: u32) -> Self {
        let parsed = Float::parse(text).expect("valid decimal literal");
        let lo = Real::from_float(rnd!(prec, parsed, Round::Down));
        let parsed = Float::parse(text).expect("valid decimal literal");
        let hi = Real::from_float(rnd!(prec, parsed, Round::Up));
        Interval { lo, hi }
    }

    /// Enclosure of `num / den`.
    pub fn ratio(num: i64, den: i64, prec: u32) -> Self {
        let n = Float::with_val(prec + 64, num);
        let lo = Real::from_float(rnd!(prec, &n / den, Round::Down));
        let hi = Real::from_float(rnd!(prec, &n / den, Round::Up));
        Interval { lo, hi }
    }

    pub fn pi(prec: u32) -> Self {
        Interval {
            lo: Real::from_float(rnd!(prec, Constant::Pi, Round::Down)),
            hi: Real::from_float(rnd!(prec, Constant::Pi, Round::Up)),
        }
    }

    pub fn lo(&self) -> &Real {
        &self.lo
    }

    pub fn hi(&self) -> &Real {
        &self.hi
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    pub fn width(&self) -> Real {
        let p = self.prec();
        Real::from_float(rnd!(p, self.hi.as_float() - self.lo.as_float(), Round::Up))
    }

    pub fn mid(&self) -> Real {
        (&self.lo + &self.hi) / 2
    }

    pub fn contains(&self, x: &Real) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Upper bound on `|x|` over the interval.
    pub fn mag(&self) -> Real {
        self.lo.abs().max(&self.hi.abs())
    }

    /// Lower bound on `|x|` over the interval.
    pub fn mig(&self) -> Real {
        if self.lo.signum_i32() <= 0 && self.hi.signum_i32() >= 0 {
            Real::zero(self.prec())
        } else {
            self.lo.abs().min(&self.hi.abs())
        }
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval { lo: self.lo.min(&other.lo), hi: self.hi.max(&other.hi) }
    }

    /// `[lo − rad, hi + rad]`, rounded outward.
    pub fn inflate(&self, rad: &Real) -> Interval {
        let p = self.prec().max(rad.prec());
        Interval {
            lo: Real::from_float(rnd!(p, self.lo.as_float() - rad.as_float(), Round::Down)),
            hi: Real::from_float(rnd!(p, self.hi.as_float() + rad.as_float(), Round::Up)),
        }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: -&self.hi, hi: -&self.lo }
    }

    pub fn add(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        Interval {
            lo: Real::from_float(rnd!(p, self.lo.as_float() + o.lo.as_float(), Round::Down)),
            hi: Real::from_float(rnd!(p, self.hi.as_float() + o.hi.as_float(), Round::Up)),
        }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        Interval {
            lo: Real::from_float(rnd!(p, self.lo.as_float() - o.hi.as_float(), Round::Down)),
            hi: Real::from_float(rnd!(p, self.hi.as_float() - o.lo.as_float(), Round::Up)),
        }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        let pairs = [
            (&self.lo, &o.lo),
            (&self.lo, &o.hi),
            (&self.hi, &o.lo),
            (&self.hi, &o.hi),
        ];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let d = rnd!(p, a.as_float() * b.as_float(), Round::Down);
            let u = rnd!(p, a.as_float() * b.as_float(), Round::Up);
            lo = Some(match lo {
                Some(l) if l <= d => l,
                _ => d,
            });
            hi = Some(match hi {
                Some(h) if h >= u => h,
                _ => u,
            });
        }
        Interval { lo: Real::from_float(lo.unwrap()), hi: Real::from_float(hi.unwrap()) }
    }

    pub fn div(&self, o: &Interval) -> Result<Interval, IntervalError> {
        if o.lo.signum_i32() <= 0 && o.hi.signum_i32() >= 0 {
            return Err(IntervalError::DivisionByZero);
        }
        let p = self.prec().max(o.prec());
        let inv = Interval {
            lo: Real::from_float(rnd!(p, 1 / o.hi.as_float(), Round::Down)),
            hi: Real::from_float(rnd!(p, 1 / o.lo.as_float(), Round::Up)),
        };
        Ok(self.mul(&inv))
    }

    pub fn scale(&self, k: &Real) -> Interval {
        self.mul(&Interval::point(k))
    }

    pub fn add_real(&self, k: &Real) -> Interval {
        self.add(&Interval::point(k))
    }

    pub fn sqr(&self) -> Interval {
        let p = self.prec();
        let m = self.mag();
        let n = self.mig();
        Interval {
            lo: Real::from_float(rnd!(p, n.as_float() * n.as_float(), Round::Down)),
            hi: Real::from_float(rnd!(p, m.as_float() * m.as_float(), Round::Up)),
        }
    }

    pub fn powi(&self, n: u32) -> Interval {
        match n {
            0 => Interval::point(&Real::one(self.prec())),
            1 => self.clone(),
            _ if n.is_multiple_of(2) => self.sqr().powi(n / 2),
            _ => self.mul(&self.powi(n - 1)),
        }
    }

    pub fn abs(&self) -> Interval {
        Interval { lo: self.mig(), hi: self.mag() }
    }

    fn monotone_inc(&self, f: impl Fn(&Float, Round) -> Float) -> Interval {
        Interval {
            lo: Real::from_float(f(self.lo.as_float(), Round::Down)),
            hi: Real::from_float(f(self.hi.as_float(), Round::Up)),
        }
    }

    pub fn exp(&self) -> Interval {
        let p = self.prec();
        self.monotone_inc(|x, r| rnd!(p, x.exp_ref(), r))
    }

    pub fn atan(&self) -> Interval {
        let p = self.prec();
        self.monotone_inc(|x, r| rnd!(p, x.atan_ref(), r))
    }

    pub fn asin(&self) -> Result<Interval, IntervalError> {
        if self.lo < -1 || self.hi > 1 {
            return Err(self.domain("arcsin"));
        }
        let p = self.prec();
        Ok(self.monotone_inc(|x, r| rnd!(p, x.asin_ref(), r)))
    }

    pub fn log2(&self) -> Result<Interval, IntervalError> {
        if self.lo.signum_i32() <= 0 {
            return Err(self.domain("log2"));
        }
        let p = self.prec();
        Ok(self.monotone_inc(|x, r| rnd!(p, x.log2_ref(), r)))
    }

    pub fn sqrt(&self) -> Result<Interval, IntervalError> {
        if self.lo.is_sign_negative() {
            return Err(self.domain("sqrt"));
        }
        let p = self.prec();
        Ok(self.monotone_inc(|x, r| rnd!(p, x.sqrt_ref(), r)))
    }

    /// `1/x` for intervals on one side of zero.
    pub fn recip(&self) -> Result<Interval, IntervalError> {
        Interval::point(&Real::one(self.prec())).div(self)
    }

    fn domain(&self, op: &'static str) -> IntervalError {
        IntervalError::Domain { op, lo: self.lo.to_short(12), hi: self.hi.to_short(12) }
    }

    /// Does `[lo, hi]` possibly contain a point `offset + 2πk`? Errs on the
    /// side of `true`, which only widens the result.
    fn may_contain_phase(&self, offset_over_pi: f64) -> bool {
        let p = self.prec() + 16;
        let two_pi = Float::with_val(p, Constant::Pi) * 2u32;
        let off = Float::with_val(p, Constant::Pi) * offset_over_pi;
        let slack = Float::with_val(p, Float::i_exp(1, -(self.prec() as i32) + 12));
        let a = Float::with_val(p, self.lo.as_float() - &off) / &two_pi - &slack;
        let b = Float::with_val(p, self.hi.as_float() - &off) / &two_pi + &slack;
        let (Some((ka, _)), Some((kb, _))) =
            (a.to_integer_round(Round::Up), b.to_integer_round(Round::Down))
        else {
            return true;
        };
        kb >= ka
    }

    fn wide(&self) -> bool {
        // widths beyond 2π cover a full period
        self.width() >= Real::from_i64(7, 32)
    }

    pub fn sin(&self) -> Interval {
        let p = self.prec();
        if !self.lo.is_finite() || !self.hi.is_finite() || self.wide() {
            return Interval { lo: Real::from_i64(-1, p), hi: Real::from_i64(1, p) };
        }
        let (l0, l1) = (rnd!(p, self.lo.as_float().sin_ref(), Round::Down), rnd!(p, self.lo.as_float().sin_ref(), Round::Up));
        let (h0, h1) = (rnd!(p, self.hi.as_float().sin_ref(), Round::Down), rnd!(p, self.hi.as_float().sin_ref(), Round::Up));
        let mut lo = if l0 < h0 { l0 } else { h0 };
        let mut hi = if l1 > h1 { l1 } else { h1 };
        if self.may_contain_phase(0.5) {
            hi = Float::with_val(p, 1);
        }
        if self.may_contain_phase(-0.5) {
            lo = Float::with_val(p, -1);
        }
        Interval { lo: Real::from_float(lo), hi: Real::from_float(hi) }
    }

    pub fn cos(&self) -> Interval {
        let p = self.prec();
        if !self.lo.is_finite() || !self.hi.is_finite() || self.wide() {
            return Interval { lo: Real::from_i64(-1, p), hi: Real::from_i64(1, p) };
        }
        let (l0, l1) = (rnd!(p, self.lo.as_float().cos_ref(), Round::Down), rnd!(p, self.lo.as_float().cos_ref(), Round::Up));
        let (h0, h1) = (rnd!(p, self.hi.as_float().cos_ref(), Round::Down), rnd!(p, self.hi.as_float().cos_ref(), Round::Up));
        let mut lo = if l0 < h0 { l0 } else { h0 };
        let mut hi = if l1 > h1 { l1 } else { h1 };
        if self.may_contain_phase(0.0) {
            hi = Float::with_val(p, 1);
        }
        if self.may_contain_phase(1.0) {
            lo = Float::with_val(p, -1);
        }
        Interval { lo: Real::from_float(lo), hi: Real::from_float(hi) }
    }

    /// Enclosure of `sin(2πx)`. The integer part is removed exactly before
    /// scaling so wide-magnitude arguments keep their fractional bits.
    pub fn sin_2pi(&self) -> Interval {
        self.reduce_unit().mul(&Interval::pi(self.prec()).scale(&Real::from_i64(2, 32))).sin()
    }

    pub fn cos_2pi(&self) -> Interval {
        self.reduce_unit().mul(&Interval::pi(self.prec()).scale(&Real::from_i64(2, 32))).cos()
    }

    /// Shift by an integer so the lower end lies in `[-1/2, 1/2]`; exact.
    fn reduce_unit(&self) -> Interval {
        let Some(k) = self.lo.to_integer() else {
            return self.clone();
        };
        if k == 0 {
            return self.clone();
        }
        let p = self.prec();
        let kf = Float::with_val(p.max(k.significant_bits() + 2), &k);
        Interval {
            lo: Real::from_float(rnd!(p, self.lo.as_float() - &kf, Round::Down)),
            hi: Real::from_float(rnd!(p, self.hi.as_float() - &kf, Round::Up)),
        }
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo.to_short(20), self.hi.to_short(20))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const P: u32 = 256;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(Real::with_prec(a, P), Real::with_prec(b, P))
    }

    #[test]
    fn decimal_enclosure_brackets_literal() {
        let x = Interval::from_decimal("0.2", P);
        assert!(x.lo() < x.hi());
        assert!(x.width() < Real::with_prec(1e-70, P));
    }

    #[test]
    fn sin_hits_extrema_inside() {
        let s = iv(1.0, 2.0).sin();
        assert_eq!(*s.hi(), 1.0);
        let s = iv(4.0, 5.0).sin();
        assert_eq!(*s.lo(), -1.0);
        let c = iv(-0.5, 0.5).cos();
        assert_eq!(*c.hi(), 1.0);
    }

    #[test]
    fn asin_outside_domain_is_an_error() {
        assert!(iv(0.5, 1.5).asin().is_err());
        assert!(iv(-1.0, 1.0).asin().is_ok());
    }

    #[test]
    fn division_by_zero_straddle() {
        assert_eq!(iv(1.0, 2.0).div(&iv(-1.0, 1.0)), Err(IntervalError::DivisionByZero));
    }

    #[test]
    fn random_points_are_enclosed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let a: f64 = rng.gen_range(-20.0..20.0);
            let w: f64 = rng.gen_range(0.0..0.5);
            let x = iv(a, a + w);
            let t: f64 = rng.gen_range(0.0..=1.0);
            let pt = Real::with_prec(a + t * w, P);
            assert!(x.sin().contains(&pt.sin()));
            assert!(x.cos().contains(&pt.cos()));
            assert!(x.exp().contains(&pt.exp()));
            assert!(x.atan().contains(&pt.atan()));
            assert!(x.sqr().contains(&pt.square()));
            assert!(x.powi(3).contains(&pt.powi(3)));
            assert!(x.sin_2pi().contains(&pt.sin_2pi()));
            let y = iv(0.1, 3.0);
            assert!(x.mul(&y).contains(&(&pt * 2.5)) || !(0.1..=3.0).contains(&2.5));
            assert!(x.div(&y).unwrap().contains(&(&pt / 2.0)));
        }
    }
}
