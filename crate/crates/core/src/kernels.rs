//! Scalar error-correcting and gating functions.
//!
//! * `Ψ(x, y) = x − asin(sin(2πx)(1 − e^{−y−2})) / 2π` pulls `x` towards the
//!   nearest integer with strength `e^{−y}`.
//! * `σ(x) = x − 0.2 sin(2πx)` contracts a `1/4`-neighbourhood of every
//!   integer by `λ = 0.4π − 1`.
//! * `θ(x) = e^{−1/x}` for `x > 0`, `0` otherwise.
//! * `v` rises by one on each `[n+1/2, n+1]` and is flat on `[n, n+1/2]`;
//!   `r(x) = v(x + 1/4)` is therefore exactly `n` on `[n−1/4, n+1/4]`.
//! * `ξ` switches from `0` (below `1/4`) to `1` (above `3/4`).
//! * `s(t) = (sin²(2πt) + sin(2πt)) / 2` and `φ(t, y) = Ψ(s(t), y)`.
//!
//! The smooth step functions are integrals of `θ`-bumps; their flat parts
//! are returned exactly and the rising parts come from precomputed
//! quadrature tables.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::numerics::interval::{Interval, IntervalError};
use crate::numerics::quad::{CumulativeIntegral, QuadError};
use crate::numerics::real::{default_precision, Real};

/// Per-precision constants and quadrature tables.
#[derive(Debug)]
pub struct Kernels {
    prec: u32,
    pub lambda_quarter: Real,
    pub c_bar: Real,
    pub c_xi: Real,
    fifth: Real,
    quarter: Real,
    half: Real,
    three_quarters: Real,
    two_pi: Real,
    v_table: CumulativeIntegral,
    xi_table: CumulativeIntegral,
    /// Bound on the absolute error of table-based values.
    table_slack: Real,
}

fn theta_raw(x: &Real) -> Real {
    if x.signum_i32() <= 0 {
        Real::zero(x.prec())
    } else {
        (-x.recip()).exp()
    }
}

impl Kernels {
    pub fn build(prec: u32) -> Result<Self, QuadError> {
        let tol = Real::one(prec) / Real::from_i64(2, prec).powi(prec as i32 - 16);
        let quarter = Real::ratio(1, 4, prec);
        let half = Real::ratio(1, 2, prec);
        let three_quarters = Real::ratio(3, 4, prec);
        let v_table = CumulativeIntegral::build(
            Arc::new(|s: &Real| theta_raw(&-s.sin_2pi())),
            &half,
            &Real::one(prec),
            &tol,
        )?;
        let (q1, q3) = (quarter.clone(), three_quarters.clone());
        let xi_table = CumulativeIntegral::build(
            Arc::new(move |x: &Real| theta_raw(&-((x - &q1) * (x - &q3)))),
            &quarter,
            &three_quarters,
            &tol,
        )?;
        let c_bar = v_table.total().recip();
        let c_xi = xi_table.total().recip();
        let pi = Real::pi(prec);
        Ok(Kernels {
            prec,
            lambda_quarter: &pi * Real::ratio(2, 5, prec) - 1,
            c_bar,
            c_xi,
            fifth: Real::ratio(1, 5, prec),
            quarter,
            half,
            three_quarters,
            two_pi: pi * 2,
            v_table,
            xi_table,
            table_slack: Real::one(prec) / Real::from_i64(2, prec).powi(prec as i32 - 24),
        })
    }

    /// Shared instance for a precision, built on first use.
    pub fn at(prec: u32) -> Arc<Kernels> {
        static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Kernels>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(k) = cache.lock().unwrap().get(&prec) {
            return k.clone();
        }
        let built = Arc::new(Kernels::build(prec).expect("kernel tables converge"));
        cache.lock().unwrap().entry(prec).or_insert(built).clone()
    }

    pub fn default_prec() -> Arc<Kernels> {
        Kernels::at(default_precision())
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn table_slack(&self) -> &Real {
        &self.table_slack
    }

    pub fn psi(&self, x: &Real, y: &Real) -> Real {
        let damp = 1 - (-(y + 2)).exp();
        let arg = x.sin_2pi() * damp;
        x - &(arg.asin() / &self.two_pi)
    }

    pub fn sigma(&self, x: &Real) -> Real {
        x - &(&self.fifth * &x.sin_2pi())
    }

    pub fn sigma_iter(&self, x: &Real, l: usize) -> Real {
        let mut y = x.clone();
        for _ in 0..l {
            y = self.sigma(&y);
        }
        y
    }

    pub fn theta(&self, x: &Real) -> Real {
        theta_raw(x)
    }

    pub fn v(&self, x: &Real) -> Real {
        let n = x.floor();
        let frac = x - &n;
        if frac <= self.half {
            return n;
        }
        n + &(&self.c_bar * &self.v_table.upto(&frac))
    }

    pub fn r(&self, x: &Real) -> Real {
        self.v(&(x + &self.quarter))
    }

    pub fn xi(&self, x: &Real) -> Real {
        if *x <= self.quarter {
            return Real::zero(self.prec.max(x.prec()));
        }
        if *x >= self.three_quarters {
            return Real::one(self.prec.max(x.prec()));
        }
        &self.c_xi * &self.xi_table.upto(x)
    }

    pub fn s(&self, t: &Real) -> Real {
        let sn = t.sin_2pi();
        (sn.square() + sn) / 2
    }

    pub fn gate_phi(&self, t: &Real, y: &Real) -> Real {
        self.psi(&self.s(t), y)
    }

    // ---- interval versions -------------------------------------------

    fn iv(&self, x: &Real) -> Interval {
        Interval::point(x)
    }

    /// Widen by a few units in the last place relative to `scale`, so the
    /// enclosure also covers rounded point evaluations of the same formula.
    fn pad(&self, out: Interval, scale: &Interval) -> Interval {
        let rad = (Real::one(self.prec) + out.mag() + scale.mag())
            / Real::from_i64(2, self.prec).powi(self.prec as i32 - 12);
        out.inflate(&rad)
    }

    fn two_pi_iv(&self) -> Interval {
        Interval::pi(self.prec).scale(&Real::from_i64(2, 32))
    }

    pub fn psi_interval(&self, x: &Interval, y: &Interval) -> Result<Interval, IntervalError> {
        let one = self.iv(&Real::one(self.prec));
        let damp = one.sub(&y.add_real(&Real::from_i64(2, self.prec)).neg().exp());
        let arg = x.sin_2pi().mul(&damp);
        let a = arg.asin()?;
        Ok(self.pad(x.sub(&a.div(&self.two_pi_iv())?), x))
    }

    pub fn sigma_interval(&self, x: &Interval) -> Interval {
        self.pad(x.sub(&x.sin_2pi().mul(&Interval::ratio(1, 5, self.prec))), x)
    }

    pub fn sigma_iter_interval(&self, x: &Interval, l: usize) -> Interval {
        let mut y = x.clone();
        for _ in 0..l {
            y = self.sigma_interval(&y);
        }
        y
    }

    pub fn theta_interval(&self, x: &Interval) -> Interval {
        let zero = Real::zero(self.prec);
        let bound = |e: &Real, up: bool| -> Real {
            if e.signum_i32() <= 0 {
                return zero.clone();
            }
            let inner = Interval::point(e).recip().expect("positive").neg().exp();
            if up {
                inner.hi().clone()
            } else {
                inner.lo().clone()
            }
        };
        let out = Interval::new(bound(x.lo(), false), bound(x.hi(), true));
        self.pad(out, &Interval::point(&zero))
    }

    /// Enclosure for a nondecreasing table-based function.
    fn monotone(&self, x: &Interval, f: impl Fn(&Real) -> Real, flat_lo: bool, flat_hi: bool) -> Interval {
        let lo = f(x.lo());
        let hi = f(x.hi());
        let lo = if flat_lo { lo } else { lo - &self.table_slack };
        let hi = if flat_hi { hi } else { hi + &self.table_slack };
        Interval::new(lo, hi)
    }

    fn on_plateau_v(&self, x: &Real) -> bool {
        let frac = x - &x.floor();
        frac <= self.half
    }

    pub fn v_interval(&self, x: &Interval) -> Interval {
        self.monotone(x, |t| self.v(t), self.on_plateau_v(x.lo()), self.on_plateau_v(x.hi()))
    }

    pub fn r_interval(&self, x: &Interval) -> Interval {
        let shifted = x.add(&Interval::ratio(1, 4, self.prec));
        self.v_interval(&shifted)
    }

    pub fn xi_interval(&self, x: &Interval) -> Interval {
        let flat = |t: &Real| *t <= self.quarter || *t >= self.three_quarters;
        self.monotone(x, |t| self.xi(t), flat(x.lo()), flat(x.hi()))
    }

    pub fn s_interval(&self, t: &Interval) -> Interval {
        let sn = t.sin_2pi();
        // (sn² + sn)/2 = ((sn + 1/2)² − 1/4)/2 avoids the dependency blow-up
        let h = Interval::ratio(1, 2, self.prec);
        let q = Interval::ratio(1, 4, self.prec);
        self.pad(sn.add(&h).sqr().sub(&q).mul(&h), t)
    }

    pub fn gate_phi_interval(&self, t: &Interval, y: &Interval) -> Result<Interval, IntervalError> {
        self.psi_interval(&self.s_interval(t), y)
    }
}

// Free-function conveniences at the argument's precision.

pub fn psi_correct(x: &Real, y: &Real) -> Real {
    Kernels::at(x.prec().max(y.prec())).psi(x, y)
}

pub fn sigma(x: &Real) -> Real {
    Kernels::at(x.prec()).sigma(x)
}

pub fn sigma_iter(x: &Real, l: usize) -> Real {
    Kernels::at(x.prec()).sigma_iter(x, l)
}

pub fn theta(x: &Real) -> Real {
    theta_raw(x)
}

pub fn r_floor(x: &Real) -> Real {
    Kernels::at(x.prec()).r(x)
}

pub fn xi(x: &Real) -> Real {
    Kernels::at(x.prec()).xi(x)
}

pub fn gate_phi(t: &Real, y: &Real) -> Real {
    Kernels::at(t.prec().max(y.prec())).gate_phi(t, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::quad_adaptive;

    const P: u32 = 256;

    fn k() -> Arc<Kernels> {
        Kernels::at(P)
    }

    fn r(v: f64) -> Real {
        Real::with_prec(v, P)
    }

    fn dec(s: &str) -> Real {
        Real::parse(s, P).unwrap()
    }

    fn close(a: &Real, b: &Real, tol: f64) -> bool {
        (a - b).abs() <= r(tol)
    }

    #[test]
    fn normalizers_match_reference() {
        let k = k();
        assert!(close(&k.c_bar, &dec("9.56966814805039696498312969368370506664146153034927213636079"), 1e-55));
        assert!(close(&k.c_xi, &dec("83748827.9496645980221218001763783201013075140390143575969617"), 1e-48));
        assert!(close(&k.lambda_quarter, &dec("0.256637061435917295385057353311801153678867759750042328389978"), 1e-58));
    }

    #[test]
    fn r_values() {
        let k = k();
        assert_eq!(k.r(&r(3.2)), 3.0);
        assert_eq!(k.r(&r(3.25)), 3.0);
        assert_eq!(k.r(&r(0.0)), 0.0);
        assert!(close(&k.r(&r(3.5)), &r(3.5), 1e-60));
        assert!(close(&k.r(&dec("3.4")), &dec("3.1720270011240424848937153506396860982334100910547370654178"), 1e-55));
        assert!(close(&k.r(&dec("-2.3")), &dec("-2.00389424898381398917880218477992292813539344500129979982549"), 1e-55));
        assert!(close(&k.r(&dec("0.6")), &dec("0.827972998875957515106284649360313901766589908945262934582203"), 1e-55));
        for n in -5..=5 {
            let y = k.r(&r(n as f64 + 0.5));
            assert!(y > n as f64 && y < (n + 1) as f64);
        }
    }

    #[test]
    fn xi_values() {
        let k = k();
        assert_eq!(k.xi(&r(0.0)), 0.0);
        assert_eq!(k.xi(&r(1.0)), 1.0);
        assert!(close(&k.xi(&r(0.5)), &r(0.5), 1e-55));
        assert!(close(&k.xi(&dec("0.4")), &dec("0.00510061645723329673485589059114634470681470446010981597255808"), 1e-55));
        assert!(close(&k.xi(&dec("0.6")), &dec("0.994899383542766703265144109408853655293185295539890184027442"), 1e-55));
    }

    #[test]
    fn psi_and_sigma_values() {
        let k = k();
        assert!(close(&k.psi(&dec("0.2"), &r(0.0)), &dec("0.0463326882255766157768965966954391730128570504286199096091421"), 1e-58));
        assert!(close(
            &k.psi(&dec("0.19"), &r(10.0)),
            &dec("0.00000246979900973316033881248502915736670275001916488734982627825"),
            1e-62
        ));
        assert_eq!(k.psi(&r(-7.0), &r(3.0)), -7.0);
        assert!(close(&k.sigma(&dec("0.3")), &dec("0.109788696740969285576712133324123571318860273174849955510539"), 1e-58));
        assert!(close(&k.sigma(&r(0.25)), &dec("0.05"), 1e-70));
        assert_eq!(k.sigma(&r(7.0)), 7.0);
        assert!(close(&k.theta(&r(1.0)), &dec("0.367879441171442321595523770161460867445811131031767834507837"), 1e-58));
        assert_eq!(k.theta(&r(-3.0)), 0.0);
    }

    #[test]
    fn gate_integral_and_tail() {
        let k = k();
        let y = r(8.0);
        let q = quad_adaptive(&|t: &Real| k.gate_phi(t, &y), &r(0.0), &r(0.5), &r(1e-40)).unwrap();
        assert!(q > 0.128);
        assert!(close(&q, &dec("0.28751324526170310693745184461533959239865248138221"), 1e-38));
        assert_eq!(k.gate_phi(&r(0.0), &r(10.0)), 0.0);
    }

    #[test]
    fn theta_gate_half_period_integral() {
        let k = k();
        let q = quad_adaptive(&|t: &Real| k.theta(&t.sin_2pi()), &r(0.0), &r(0.5), &r(1e-50)).unwrap();
        assert!(close(&q, &dec("0.104496831502326163718287513648172504504351211226073174878787"), 1e-48));
        assert!(q >= 0.25 * (-(2f64.sqrt())).exp());
    }

    #[test]
    fn interval_versions_enclose_points() {
        let k = k();
        for i in 0..200 {
            let x = r(-3.0 + i as f64 * 0.031);
            let y = r((i % 17) as f64);
            let xi_ = Interval::point(&x);
            let yi = Interval::point(&y);
            assert!(k.psi_interval(&xi_, &yi).unwrap().contains(&k.psi(&x, &y)));
            assert!(k.sigma_interval(&xi_).contains(&k.sigma(&x)));
            assert!(k.theta_interval(&xi_).contains(&k.theta(&x)));
            assert!(k.r_interval(&xi_).contains(&k.r(&x)));
            assert!(k.xi_interval(&xi_).contains(&k.xi(&x)));
            assert!(k.s_interval(&xi_).contains(&k.s(&x)));
            assert!(k.gate_phi_interval(&xi_, &yi).unwrap().contains(&k.gate_phi(&x, &y)));
        }
    }
}
