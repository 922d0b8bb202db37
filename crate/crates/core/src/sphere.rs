//! Transport of a planar time-dependent field onto the sphere `Sⁿ`.
//!
//! The inverse stereographic projection `φ(x) = ((r²−1)/(1+r²), 2x/(1+r²))`
//! sends `ℝⁿ` onto the sphere minus its north pole `(1, 0, …, 0)`. Pushing
//! `f` forward directly gives a field that is undefined at the pole, so the
//! planar system is first slowed down by a positive factor `K`:
//!
//! ```text
//! τ′ = K(x̄),   x̄′ = K(x̄) f(τ, x̄)
//! ```
//!
//! Its orbits are those of `x′ = f(τ, x)` with `x̄(t) = x(τ(t))`. With a
//! factor decaying fast enough in `r`, the transported field tends to zero
//! at the pole and is extended there by zero.

use std::sync::Arc;

use crate::numerics::ivp::{solve_ivp, IvpError, IvpSpec, Rhs, StepLimit, Trajectory};
use crate::numerics::real::{euclid_norm, Real};
use crate::noise::SmoothNoise;
use crate::ode_sim::{OdeSimError, SimulationOde, SimulationParams, SolverSettings};
use crate::robust_map::Variant;
use crate::tm::TuringMachine;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SphereError {
    #[error("the point is at (or numerically indistinguishable from) the north pole")]
    NorthPole,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Ivp(#[from] IvpError),
    #[error(transparent)]
    Simulation(#[from] OdeSimError),
}

/// Planar field `f(t, x)`.
pub type PlanarField = Arc<dyn Fn(&Real, &[Real]) -> Vec<Real> + Send + Sync>;

/// The slow-down factor `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reparam {
    /// `K(x) = e^{−√(1+r²)} = e^{−√(2/(1−y₀))}`. Flat at the pole, so the
    /// transported field and all its derivatives vanish there, while `ln K`
    /// stays Lipschitz in `x` and the slowed clock remains integrable far
    /// from the origin.
    #[default]
    Decaying,
    /// `K(x) = e^{−2/(1+r²)} = e^{−(1−y₀)}`, which tends to `1` at the pole.
    Printed,
}

impl Reparam {
    /// `K` from `r²`.
    pub fn from_r2(&self, r2: &Real) -> Real {
        match self {
            Reparam::Decaying => (-(r2 + 1).sqrt()).exp(),
            Reparam::Printed => (-(2 / (r2 + 1))).exp(),
        }
    }

    pub fn at(&self, x: &[Real]) -> Real {
        self.from_r2(&r_squared(x))
    }
}

fn r_squared(x: &[Real]) -> Real {
    let p = x.iter().map(Real::prec).max().unwrap_or(64);
    x.iter().fold(Real::zero(p), |acc, v| acc + v.square())
}

/// `1 − y₀` below this counts as the north pole.
pub fn pole_guard(prec: u32) -> Real {
    Real::one(prec) / Real::from_i64(2, prec).powi((prec / 2) as i32)
}

pub fn stereo(x: &[Real]) -> Vec<Real> {
    let r2 = r_squared(x);
    let den = &r2 + 1;
    let mut y = Vec::with_capacity(x.len() + 1);
    y.push((&r2 - 1) / &den);
    y.extend(x.iter().map(|v| v * 2 / &den));
    y
}

pub fn stereo_inv(y: &[Real]) -> Result<Vec<Real>, SphereError> {
    let gap = 1 - &y[0];
    if gap < pole_guard(y[0].prec()) {
        return Err(SphereError::NorthPole);
    }
    Ok(y[1..].iter().map(|v| v / &gap).collect())
}

/// `φ_*` of a planar vector `f` (already evaluated at `φ⁻¹(y)`) at `y`.
pub fn pushforward_vector(f: &[Real], y: &[Real]) -> Vec<Real> {
    let n = f.len();
    let p = y[0].prec();
    let gap = 1 - &y[0];
    let mut v = vec![Real::zero(p); n + 1];
    for i in 1..=n {
        let fi = &f[i - 1];
        if fi.is_zero() {
            continue;
        }
        v[0] = &v[0] + &(fi * &(&gap * &y[i]));
        for j in 1..=n {
            let coeff = if j == i { &gap - &y[i].square() } else { -(&y[i] * &y[j]) };
            v[j] = &v[j] + &(fi * &coeff);
        }
    }
    v
}

/// `φ_*(f)(y)` at time `t`.
pub fn pushforward(f: &PlanarField, t: &Real, y: &[Real]) -> Result<Vec<Real>, SphereError> {
    let x = stereo_inv(y)?;
    Ok(pushforward_vector(&f(t, &x), y))
}

/// A planar field together with its slow-down factor.
#[derive(Clone)]
pub struct SphereField {
    pub base: PlanarField,
    pub n: usize,
    pub k: Reparam,
}

impl SphereField {
    pub fn new(base: PlanarField, n: usize) -> Self {
        SphereField { base, n, k: Reparam::Decaying }
    }

    /// The two-dimensional simulating field of `m`, built with the smooth
    /// kernels so that all of its derivatives grow polynomially.
    pub fn simulating(m: Arc<TuringMachine>, params: SimulationParams) -> Result<Self, SphereError> {
        let ode = SimulationOde::with_variant(m, params, SmoothNoise::None, Variant::Smooth)?;
        let base: PlanarField = Arc::new(move |t: &Real, x: &[Real]| ode.field(t, x).to_vec());
        Ok(SphereField::new(base, 2))
    }

    pub fn with_reparam(mut self, k: Reparam) -> Self {
        self.k = k;
        self
    }

    /// `h(τ, x) = K(x) f(τ, x)`
    pub fn reparam_field(&self) -> PlanarField {
        let (f, k) = (self.base.clone(), self.k);
        Arc::new(move |t: &Real, x: &[Real]| {
            let kx = k.at(x);
            f(t, x).into_iter().map(|v| v * &kx).collect()
        })
    }

    /// `K · φ_*(f(τ, ·))` at `y`, and exactly zero at the north pole.
    pub fn sphere_field(&self, tau: &Real, y: &[Real]) -> Vec<Real> {
        let p = y[0].prec();
        let gap = 1 - &y[0];
        if gap < pole_guard(p) {
            return vec![Real::zero(p); y.len()];
        }
        let x: Vec<Real> = y[1..].iter().map(|v| v / &gap).collect();
        let kx = self.k.from_r2(&(2 / gap - 1));
        if kx.is_zero() {
            return vec![Real::zero(p); y.len()];
        }
        pushforward_vector(&(self.base)(tau, &x), y).into_iter().map(|v| v * &kx).collect()
    }
}

/// Planar orbit `x′ = f(τ, x)` from `τ = 0`, with the inverse clock
/// `s = τ⁻¹(τ)` carried along as `s·K(x₀)` in the last component, so
/// the clock starts with unit slope whatever the size of `K`.
#[derive(Debug, Clone)]
pub struct PlanarRun {
    pub trajectory: Trajectory,
    pub k0: Real,
}

impl PlanarRun {
    pub fn x(&self, tau: &Real) -> Result<Vec<Real>, SphereError> {
        let mut z = self.trajectory.eval(tau)?;
        z.pop();
        Ok(z)
    }

    /// `τ⁻¹(a)`
    pub fn tau_inv(&self, a: &Real) -> Result<Real, SphereError> {
        let z = self.trajectory.eval(a)?;
        Ok(z.last().unwrap() / &self.k0)
    }
}

pub fn planar_with_inverse_clock(
    field: &SphereField,
    x0: &[Real],
    tau_end: &Real,
    settings: &SolverSettings,
) -> Result<PlanarRun, SphereError> {
    let (f, k) = (field.base.clone(), field.k);
    let k0 = k.at(x0);
    let kk = k0.clone();
    let rhs: Rhs = Arc::new(move |t: &Real, z: &[Real]| {
        let (x, _) = z.split_at(z.len() - 1);
        let mut d = f(t, x);
        d.push(&kk / &k.at(x));
        Ok(d)
    });
    let p = x0[0].prec();
    let mut y0 = x0.to_vec();
    y0.push(Real::zero(p));
    let trajectory = solve_ivp(&settings.spec(rhs, Real::zero(p), y0), tau_end)?;
    Ok(PlanarRun { trajectory, k0 })
}

/// `τ⁻¹(a)`, the time at which the slowed-down system reaches `τ = a`.
pub fn tau_inv(field: &SphereField, x0: &[Real], a: &Real, settings: &SolverSettings) -> Result<Real, SphereError> {
    if a.is_zero() {
        return Ok(Real::zero(a.prec()));
    }
    planar_with_inverse_clock(field, x0, a, settings)?.tau_inv(a)
}

/// Steps of at most `0.01` in `τ`, i.e. `0.01/K` in `t`.
fn clock_limit(k: Reparam, offset: usize, chart: bool) -> StepLimit {
    Arc::new(move |_t: &Real, z: &[Real]| {
        let coords = &z[offset..];
        let kx = if chart {
            k.at(coords)
        } else {
            let gap = 1 - &coords[0];
            k.from_r2(&(2 / gap - 1))
        };
        Real::with_prec(0.01, z[0].prec()) / kx
    })
}

/// Chart integration of `(τ, x̄)` in the slowed-down time `t`.
pub fn integrate_chart(field: &SphereField, x0: &[Real], t_end: &Real, settings: &SolverSettings) -> Result<Trajectory, SphereError> {
    let (f, k) = (field.base.clone(), field.k);
    let rhs: Rhs = Arc::new(move |_t: &Real, z: &[Real]| {
        let (tau, x) = (&z[0], &z[1..]);
        let kx = k.at(x);
        let mut d = vec![kx.clone()];
        d.extend(f(tau, x).into_iter().map(|v| v * &kx));
        Ok(d)
    });
    let p = x0[0].prec();
    let mut y0 = vec![Real::zero(p)];
    y0.extend(x0.iter().cloned());
    let mut spec = settings.spec(rhs, Real::zero(p), y0);
    spec.max_step = Real::from_float(rug::Float::with_val(p, rug::Float::i_exp(1, 1 << 24)));
    let spec = spec.step_limit(clock_limit(k, 1, true));
    Ok(solve_ivp(&spec, t_end)?)
}

/// Ambient integration of `(τ, y)` in `ℝ^{n+2}`, renormalizing `y` onto
/// the sphere between `chunks` consecutive pieces.
pub fn integrate_ambient(
    field: &SphereField,
    y0: &[Real],
    t_end: &Real,
    chunks: usize,
    settings: &SolverSettings,
) -> Result<Vec<Trajectory>, SphereError> {
    let fld = field.clone();
    let rhs: Rhs = Arc::new(move |_t: &Real, z: &[Real]| {
        let (tau, y) = (&z[0], &z[1..]);
        let gap = 1 - &y[0];
        let p = y[0].prec();
        let kx = if gap < pole_guard(p) { Real::zero(p) } else { fld.k.from_r2(&(2 / gap - 1)) };
        let mut d = vec![kx];
        d.extend(fld.sphere_field(tau, y));
        Ok(d)
    });
    let p = y0[0].prec();
    let mut state = vec![Real::zero(p)];
    state.extend(y0.iter().cloned());
    let mut pieces = Vec::with_capacity(chunks);
    let mut t = Real::zero(p);
    for c in 1..=chunks {
        let t_next = t_end * &Real::ratio(c as i64, chunks as i64, p);
        let mut spec = IvpSpec::new(rhs.clone(), t.clone(), state.clone())
            .tolerances(settings.abs_tol, settings.rel_tol)
            .step_limit(clock_limit(field.k, 1, false));
        spec.max_step = Real::from_float(rug::Float::with_val(p, rug::Float::i_exp(1, 1 << 24)));
        let tr = solve_ivp(&spec, &t_next)?;
        state = tr.final_state().to_vec();
        let norm = euclid_norm(&state[1..]);
        for v in &mut state[1..] {
            *v = &*v / &norm;
        }
        pieces.push(tr);
        t = t_next;
    }
    Ok(pieces)
}

/// All three views of one orbit: planar with its inverse clock, the
/// slowed-down chart system and the ambient system on the sphere.
#[derive(Debug, Clone)]
pub struct SphereRun {
    pub planar: PlanarRun,
    pub chart: Trajectory,
    pub ambient: Vec<Trajectory>,
    /// `τ⁻¹(τ_end)`
    pub t_end: Real,
}

impl SphereRun {
    /// Ambient point at the slowed-down time `t`.
    pub fn point(&self, t: &Real) -> Result<Vec<Real>, SphereError> {
        let mut y = eval_pieces(&self.ambient, t)?;
        y.remove(0);
        Ok(y)
    }

    /// Planar point read back through the ambient orbit at `τ⁻¹(a)`.
    pub fn decode_at(&self, a: &Real) -> Result<Vec<Real>, SphereError> {
        stereo_inv(&self.point(&self.planar.tau_inv(a)?)?)
    }
}

pub fn run_on_sphere(
    field: &SphereField,
    x0: &[Real],
    tau_end: &Real,
    chunks: usize,
    settings: &SolverSettings,
) -> Result<SphereRun, SphereError> {
    let planar = planar_with_inverse_clock(field, x0, tau_end, settings)?;
    let t_end = planar.tau_inv(tau_end)?;
    let chart = integrate_chart(field, x0, &t_end, settings)?;
    let ambient = integrate_ambient(field, &stereo(x0), &t_end, chunks, settings)?;
    Ok(SphereRun { planar, chart, ambient, t_end })
}

/// Evaluate a chunked trajectory at `t`.
pub fn eval_pieces(pieces: &[Trajectory], t: &Real) -> Result<Vec<Real>, SphereError> {
    for tr in pieces {
        if t <= tr.t_end() {
            return Ok(tr.eval(t)?);
        }
    }
    Ok(pieces.last().unwrap().eval(t)?)
}

/// `sup |f(t, z)| / (1 + ‖z‖^d)` on one sampled shell `‖z‖ = radius`.
pub fn growth_ratio(f: &PlanarField, ts: &[Real], radius: &Real, directions: usize, d: i32) -> Real {
    let p = radius.prec();
    let mut sup = Real::zero(p);
    let denom = radius.powi(d) + 1;
    for t in ts {
        for i in 0..directions {
            let angle = Real::ratio(i as i64, directions as i64, p);
            let z = [radius * &angle.cos_2pi(), radius * &angle.sin_2pi()];
            let v = euclid_norm(&f(t, &z));
            sup = sup.max(&(v / &denom));
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Real {
        Real::ratio(n, d, 256)
    }

    #[test]
    fn projection_basics() {
        let s = stereo(&[r(0, 1), r(0, 1)]);
        assert_eq!(s, vec![r(-1, 1), r(0, 1), r(0, 1)]);
        let x = [r(3, 7), r(-250, 3)];
        let back = stereo_inv(&stereo(&x)).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-60);
        }
        assert!(matches!(stereo_inv(&[r(1, 1), r(0, 1), r(0, 1)]), Err(SphereError::NorthPole)));
    }

    #[test]
    fn pushforward_at_south_pole() {
        let y = [r(-1, 1), r(0, 1), r(0, 1)];
        let v = pushforward_vector(&[r(1, 1), r(0, 1)], &y);
        assert_eq!(v, vec![r(0, 1), r(2, 1), r(0, 1)]);
        let zero = pushforward_vector(&[r(0, 1), r(0, 1)], &y);
        assert!(zero.iter().all(Real::is_zero));
    }

    #[test]
    fn reparam_values() {
        let origin = [r(0, 1), r(0, 1)];
        assert!((Reparam::Printed.at(&origin) - Real::from_i64(-2, 256).exp()).abs() < 1e-70);
        assert!((Reparam::Decaying.at(&origin) - Real::from_i64(-1, 256).exp()).abs() < 1e-70);
        let x = [Real::from_i64(3, 256), Real::from_i64(4, 256)];
        assert!((Reparam::Decaying.at(&x) - (-Real::from_i64(26, 256).sqrt()).exp()).abs() < 1e-70);
        let field = SphereField::new(Arc::new(|_t: &Real, x: &[Real]| x.to_vec()), 2);
        assert!(field.sphere_field(&r(0, 1), &[r(1, 1), r(0, 1), r(0, 1)]).iter().all(Real::is_zero));
    }

    #[test]
    fn zero_field_is_constant() {
        let field = SphereField::new(Arc::new(|t: &Real, _x: &[Real]| vec![Real::zero(t.prec()); 2]), 2);
        let x0 = [r(1, 2), r(-1, 3)];
        let tr = integrate_chart(&field, &x0, &r(3, 1), &SolverSettings::default()).unwrap();
        assert_eq!(&tr.final_state()[1..], &x0);
        assert_eq!(tau_inv(&field, &x0, &r(0, 1), &SolverSettings::default()).unwrap(), 0);
    }
}
