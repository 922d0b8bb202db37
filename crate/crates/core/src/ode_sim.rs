//! Continuous-time simulation: targeting equations, the two-phase
//! iteration ODE, the analytic two-dimensional simulation ODE and the
//! gated ODEs that realize the unpairing functions `J₂,₁` and `J₂,₂`.
//!
//! All systems share one pattern. A variable is driven towards a target
//! by `c (b − z)³ · gate(t)`, and the gates of the two halves of each unit
//! time interval alternate, so one variable moves while the other holds
//! its value.

use std::sync::Arc;

use rug::Integer;
use serde::Serialize;

use crate::encoding;
use crate::kernels::Kernels;
use crate::noise::{NoiseSpec, SmoothNoise};
use crate::numerics::interval::Interval;
use crate::numerics::ivp::{solve_ivp, IvpError, IvpSpec, Rhs, RhsError, Trajectory};
use crate::numerics::quad::{quad_adaptive, QuadError};
use crate::numerics::real::{default_precision, Real};
use crate::robust_map::{compile_map_with, CompiledMap, RobustError, Variant};
use crate::tm::TuringMachine;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeSimError {
    #[error(transparent)]
    Ivp(#[from] IvpError),
    #[error(transparent)]
    Map(#[from] RobustError),
    #[error("quadrature failed: {0}")]
    Quad(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("window {j} violated: sup error {sup_error} > {bound}")]
    ContractViolation { j: usize, sup_error: String, bound: String },
}

impl From<QuadError> for OdeSimError {
    fn from(e: QuadError) -> Self {
        OdeSimError::Quad(e.to_string())
    }
}

/// Integrator settings shared by the simulations in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { abs_tol: 1e-12, rel_tol: 1e-12, max_step: 0.01 }
    }
}

impl SolverSettings {
    pub fn spec(&self, rhs: Rhs, t0: Real, y0: Vec<Real>) -> IvpSpec {
        IvpSpec::new(rhs, t0, y0).tolerances(self.abs_tol, self.rel_tol).max_step(self.max_step)
    }
}

pub type ScalarFn = Arc<dyn Fn(&Real) -> Real + Send + Sync>;

/// Nonnegative clock factor of a targeting equation.
#[derive(Clone)]
pub enum Gate {
    /// `θ(sin 2πt)`, active on `[k, k+1/2]`.
    ThetaSin,
    /// `θ(−sin 2πt)`, active on `[k+1/2, k+1]`.
    ThetaNegSin,
    /// `φ(t, y)`
    Phi(Real),
    Custom(ScalarFn),
}

impl std::fmt::Debug for Gate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Gate::ThetaSin => f.write_str("ThetaSin"),
            Gate::ThetaNegSin => f.write_str("ThetaNegSin"),
            Gate::Phi(y) => write!(f, "Phi({})", y.to_short(8)),
            Gate::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Gate {
    pub fn eval(&self, kern: &Kernels, t: &Real) -> Real {
        match self {
            Gate::ThetaSin => kern.theta(&t.sin_2pi()),
            Gate::ThetaNegSin => kern.theta(&-t.sin_2pi()),
            Gate::Phi(y) => kern.gate_phi(t, y),
            Gate::Custom(f) => f(t),
        }
    }
}

fn cube(x: &Real) -> Real {
    x.square() * x
}

/// `b − z`, or zero once the two agree to within the resolution of the
/// larger one. Without the cut-off, rounding residue of a huge target would
/// be cubed into an arbitrarily stiff right-hand side.
pub fn settled_diff(b: &Real, z: &Real) -> Real {
    let p = b.prec().max(z.prec());
    settled_diff_rel(b, z, &machine_resolution(p))
}

pub fn machine_resolution(prec: u32) -> Real {
    Real::one(prec) / Real::from_i64(2, prec).powi(prec as i32 - 16)
}

/// `b − z`, or zero when `|b − z| ≤ rel · max(|b|, |z|)`.
pub fn settled_diff_rel(b: &Real, z: &Real, rel: &Real) -> Real {
    let d = b - z;
    let scale = b.abs().max(&z.abs());
    if d.abs() <= scale * rel {
        Real::zero(d.prec())
    } else {
        d
    }
}

/// Data of a targeting problem `y′ = c(b − y)³ φ(t)` on `[t₀, t₁]`.
#[derive(Debug, Clone)]
pub struct TargetingSpec {
    pub b: Real,
    pub gamma: Real,
    pub t0: Real,
    pub t1: Real,
    pub phi: Gate,
    pub c: Real,
    pub rho: Real,
    pub delta: Real,
}

impl TargetingSpec {
    /// Checks `t₁ > t₀` and `c ≥ 1/(2γ² ∫φ)`.
    pub fn new(b: Real, gamma: Real, t0: Real, t1: Real, phi: Gate, c: Real) -> Result<Self, OdeSimError> {
        let p = b.prec();
        let spec = TargetingSpec { b, gamma, t0, t1, phi, c, rho: Real::zero(p), delta: Real::zero(p) };
        if spec.t1 <= spec.t0 {
            return Err(OdeSimError::Params("arrival time must follow departure".into()));
        }
        if spec.gamma.signum_i32() <= 0 {
            return Err(OdeSimError::Params("gamma must be positive".into()));
        }
        let need = spec.minimal_gain()?;
        if spec.c < need {
            return Err(OdeSimError::Params(format!("gain {} is below {}", spec.c.to_short(8), need.to_short(8))));
        }
        Ok(spec)
    }

    /// Same, with `c` set to the smallest admissible gain.
    pub fn with_minimal_gain(b: Real, gamma: Real, t0: Real, t1: Real, phi: Gate) -> Result<Self, OdeSimError> {
        let p = b.prec();
        let mut spec = TargetingSpec { b, gamma, t0, t1, phi, c: Real::zero(p), rho: Real::zero(p), delta: Real::zero(p) };
        spec.c = spec.minimal_gain()?;
        Ok(spec)
    }

    pub fn perturbation(mut self, rho: Real, delta: Real) -> Self {
        self.rho = rho;
        self.delta = delta;
        self
    }

    pub fn gate_integral(&self) -> Result<Real, OdeSimError> {
        let kern = Kernels::at(self.b.prec());
        let tol = Real::with_prec(1e-30, self.b.prec());
        Ok(quad_adaptive(&|t: &Real| self.phi.eval(&kern, t), &self.t0, &self.t1, &tol)?)
    }

    /// `1/(2γ² ∫_{t₀}^{t₁} φ)`.
    pub fn minimal_gain(&self) -> Result<Real, OdeSimError> {
        let integral = self.gate_integral()?;
        if integral.signum_i32() <= 0 {
            return Err(OdeSimError::Params("gate integrates to zero".into()));
        }
        Ok((self.gamma.square() * integral * 2).recip())
    }

    /// `ρ + γ + δ(t₁ − t₀)`
    pub fn perturbed_bound(&self) -> Real {
        &self.rho + &self.gamma + &(&self.delta * &(&self.t1 - &self.t0))
    }
}

pub fn target_solve(spec: &TargetingSpec, y0: &Real, settings: &SolverSettings) -> Result<Trajectory, OdeSimError> {
    let b = spec.b.clone();
    target_perturbed(spec, y0, Arc::new(move |_| b.clone()), Arc::new(|t: &Real| Real::zero(t.prec())), settings)
}

/// `z′ = c(b̄(t) − z)³ φ(t) + E(t)` from `t₀` to `t₁`.
pub fn target_perturbed(
    spec: &TargetingSpec,
    y0: &Real,
    bbar: ScalarFn,
    noise: ScalarFn,
    settings: &SolverSettings,
) -> Result<Trajectory, OdeSimError> {
    let kern = Kernels::at(spec.b.prec());
    let (c, gate) = (spec.c.clone(), spec.phi.clone());
    let rhs: Rhs = Arc::new(move |t: &Real, y: &[Real]| {
        let g = gate.eval(&kern, t);
        let drive = if g.is_zero() { Real::zero(t.prec()) } else { &c * &cube(&settled_diff(&bbar(t), &y[0])) * g };
        Ok(vec![drive + noise(t)])
    });
    let ivp = settings.spec(rhs, spec.t0.clone(), vec![y0.clone()]);
    Ok(solve_ivp(&ivp, &spec.t1)?)
}

/// `f(r(z₂))` vs `z₁` on the first half of each unit interval, `r(z₁)` vs
/// `z₂` on the second.
#[derive(Clone)]
pub struct IterationOde {
    pub f: ScalarFn,
    pub c_tilde: Real,
    /// Exchange the two gates, so `z₁` moves on the second half instead.
    pub swap_phases: bool,
    /// Relative distance at which a target counts as reached. Loose
    /// tolerances on astronomically large targets need this well above
    /// the machine resolution, since an accepted step may overshoot by
    /// about `rel_tol · |b|`.
    pub settle_rel: Real,
}

impl IterationOde {
    pub fn new(f: ScalarFn) -> Self {
        let p = default_precision();
        IterationOde { f, c_tilde: Real::from_i64(206, p), swap_phases: false, settle_rel: machine_resolution(p) }
    }

    pub fn settle(mut self, rel: f64) -> Self {
        self.settle_rel = Real::with_prec(rel, self.c_tilde.prec());
        self
    }

    pub fn rhs(&self) -> Rhs {
        let kern = Kernels::at(self.c_tilde.prec());
        let (f, c, swap, rel) = (self.f.clone(), self.c_tilde.clone(), self.swap_phases, self.settle_rel.clone());
        Arc::new(move |t: &Real, z: &[Real]| {
            let sn = t.sin_2pi();
            let (g1, g2) = if swap { (kern.theta(&-&sn), kern.theta(&sn)) } else { (kern.theta(&sn), kern.theta(&-&sn)) };
            let zero = Real::zero(t.prec());
            let d1 = if g1.is_zero() { zero.clone() } else { &c * &cube(&settled_diff_rel(&f(&kern.r(&z[1])), &z[0], &rel)) * g1 };
            let d2 = if g2.is_zero() { zero } else { &c * &cube(&settled_diff_rel(&kern.r(&z[0]), &z[1], &rel)) * g2 };
            Ok(vec![d1, d2])
        })
    }
}

/// Iterate `f` from `z₁(0) = z₂(0) = x₀` up to `t_end`.
pub fn iterate_ode(ode: &IterationOde, x0: &Real, t_end: &Real, settings: &SolverSettings) -> Result<Trajectory, OdeSimError> {
    let p = x0.prec().max(ode.c_tilde.prec());
    let spec = settings.spec(ode.rhs(), Real::zero(p), vec![x0.to_prec(p), x0.to_prec(p)]);
    Ok(solve_ivp(&spec, t_end)?)
}

/// Constants of the two-dimensional simulation.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationParams {
    #[serde(serialize_with = "ser_real")]
    pub gamma: Real,
    #[serde(serialize_with = "ser_real")]
    pub delta: Real,
    #[serde(serialize_with = "ser_real")]
    pub eta: Real,
    pub l: usize,
    #[serde(serialize_with = "ser_real")]
    pub c1: Real,
    #[serde(serialize_with = "ser_real")]
    pub c2: Real,
}

fn ser_real<S: serde::Serializer>(x: &Real, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(x.to_f64())
}

impl SimulationParams {
    /// Largest admissible `γ`, namely `(1/5 − δ/2)/2`.
    pub fn new(delta: &Real) -> Result<Self, OdeSimError> {
        let p = delta.prec().max(default_precision());
        let gamma = (Real::ratio(1, 5, p) - delta / 2) / 2;
        SimulationParams::with_gamma(delta, &gamma)
    }

    pub fn with_gamma(delta: &Real, gamma: &Real) -> Result<Self, OdeSimError> {
        let p = delta.prec().max(gamma.prec()).max(default_precision());
        let delta = delta.to_prec(p);
        let gamma = gamma.to_prec(p);
        if delta.is_sign_negative() && !delta.is_zero() || delta >= Real::ratio(2, 5, p) {
            return Err(OdeSimError::Params(format!("delta {} outside [0, 2/5)", delta.to_short(8))));
        }
        if gamma.signum_i32() <= 0 || &gamma * 2 + &delta / 2 > Real::ratio(1, 5, p) {
            return Err(OdeSimError::Params(format!("gamma {} violates 2γ + δ/2 ≤ 1/5", gamma.to_short(8))));
        }
        let eta = (&gamma + &delta) / 2 + Real::ratio(1, 5, p);
        let l = contraction_iterations(&Kernels::at(p), &eta, &gamma);
        let c = gamma.square().recip() * 4;
        Ok(SimulationParams { gamma, delta, eta, l, c1: c.clone(), c2: c })
    }
}

/// Least `l` with `|σ^{[l]}(x)| ≤ γ` for every `|x| ≤ η`, certified by
/// interval evaluation on a partition of `[0, η]` (`σ` is odd).
pub fn contraction_iterations(kern: &Kernels, eta: &Real, gamma: &Real) -> usize {
    const PIECES: i64 = 2048;
    let p = kern.prec();
    let cells: Vec<Interval> = (0..PIECES)
        .map(|i| Interval::new(eta * &Real::ratio(i, PIECES, p), eta * &Real::ratio(i + 1, PIECES, p)))
        .collect();
    for l in 0..64 {
        if cells.iter().all(|c| kern.sigma_iter_interval(c, l).mag() <= *gamma) {
            return l;
        }
    }
    panic!("sigma does not contract {} into {}", eta.to_short(6), gamma.to_short(6));
}

/// The compiled right-hand side `h_M(t, z)` of the simulation ODE.
#[derive(Clone)]
pub struct SimulationOde {
    pub params: SimulationParams,
    pub map: CompiledMap,
    pub noise: SmoothNoise,
}

impl SimulationOde {
    /// `g_M` is compiled with the `δ`-budget `η/2`.
    pub fn new(m: Arc<TuringMachine>, params: SimulationParams, noise: SmoothNoise) -> Result<Self, OdeSimError> {
        SimulationOde::with_variant(m, params, noise, Variant::Analytic)
    }

    /// With [`Variant::Smooth`] every `Ψ` is replaced by `r`: inside `g_M`
    /// and in the gates, which become `r(s(±t))` and vanish identically on
    /// the inactive half-period.
    pub fn with_variant(
        m: Arc<TuringMachine>,
        params: SimulationParams,
        noise: SmoothNoise,
        variant: Variant,
    ) -> Result<Self, OdeSimError> {
        if noise.bound() > params.delta {
            return Err(OdeSimError::Params(format!(
                "noise bound {} exceeds delta {}",
                noise.bound().to_short(8),
                params.delta.to_short(8)
            )));
        }
        let map = compile_map_with(m, &(&params.eta / 2), variant)?;
        Ok(SimulationOde { params, map, noise })
    }

    /// `σ^{[l]} ∘ g_M ∘ σ^{[l]}(z₂)`
    pub fn target1(&self, z2: &Real) -> Real {
        let k = self.map.kernels();
        k.sigma_iter(&self.map.apply_total(&k.sigma_iter(z2, self.params.l)), self.params.l)
    }

    /// `σ^{[l]}(z₁)`
    pub fn target2(&self, z1: &Real) -> Real {
        self.map.kernels().sigma_iter(z1, self.params.l)
    }

    /// Noise-free field at `(t, z)`.
    pub fn field(&self, t: &Real, z: &[Real]) -> [Real; 2] {
        let k = self.map.kernels();
        let prm = &self.params;
        let e1 = settled_diff(&self.target1(&z[1]), &z[0]);
        let e2 = settled_diff(&self.target2(&z[0]), &z[1]);
        let (phi1, phi2) = match self.map.variant() {
            Variant::Analytic => {
                let y1 = &prm.c1 / &prm.gamma * e1.square().square() + &prm.c1 / &prm.gamma + 10;
                let y2 = &prm.c2 / &prm.gamma * e2.square().square() + &prm.c2 / &prm.gamma + 10;
                (k.gate_phi(t, &y1), k.gate_phi(&-t, &y2))
            }
            Variant::Smooth => (k.r(&k.s(t)), k.r(&k.s(&-t))),
        };
        [&prm.c1 * &cube(&e1) * phi1, &prm.c2 * &cube(&e2) * phi2]
    }

    pub fn rhs(&self) -> Rhs {
        let me = self.clone();
        Arc::new(move |t: &Real, z: &[Real]| -> Result<Vec<Real>, RhsError> {
            let [d1, d2] = me.field(t, z);
            let e = me.noise.eval(t);
            Ok(vec![d1 + &e, d2 + e])
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowCheck {
    pub j: usize,
    pub expected: String,
    pub decoded: String,
    pub sup_error: f64,
    pub eta: f64,
    /// Total variation of `z₂` over the window, from the dense output.
    pub variation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HaltCheck {
    pub n0: usize,
    pub from_t: f64,
    pub sup_error: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub params: SimulationParams,
    pub windows: Vec<WindowCheck>,
    pub halting: Option<HaltCheck>,
    pub pass: bool,
    pub accepted_steps: usize,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

impl SimulationReport {
    pub fn first_violation(&self) -> Option<OdeSimError> {
        self.windows.iter().find(|w| !w.pass).map(|w| OdeSimError::ContractViolation {
            j: w.j,
            sup_error: format!("{:.6e}", w.sup_error),
            bound: format!("{:.6e}", w.eta),
        })
    }
}

/// Probe times in `[a, b]`: `probes` equispaced points plus every
/// integration node inside.
fn window_times(traj: &Trajectory, a: &Real, b: &Real, probes: i64) -> Vec<Real> {
    let mut ts: Vec<Real> = (0..probes).map(|i| a + &((b - a) * &Real::ratio(i, probes - 1, a.prec()))).collect();
    ts.extend(traj.times().iter().filter(|t| *t >= a && *t <= b).cloned());
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts
}

/// Run the simulation ODE from `(x̄₀, ȳ₀)` for `steps` unit intervals and
/// check `|z₂(t) − ψ^{[j]}(x₀)| ≤ η` on every `[j, j+1/2]`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_2d(
    m: Arc<TuringMachine>,
    params: &SimulationParams,
    x0: &Integer,
    x0bar: &Real,
    y0bar: &Real,
    steps: usize,
    noise: &NoiseSpec,
    settings: &SolverSettings,
) -> Result<SimulationReport, OdeSimError> {
    let p = params.gamma.prec();
    let fifth = Real::ratio(1, 5, p);
    for v in [x0bar, y0bar] {
        if (v - &Real::from_integer(x0, p)).abs() > fifth {
            return Err(OdeSimError::Params("initial values must lie within 1/5 of the code".into()));
        }
    }
    let orbit = encoding::psi_orbit(&m, x0, steps).map_err(|e| OdeSimError::Params(e.to_string()))?;
    let ode = SimulationOde::new(m.clone(), params.clone(), SmoothNoise::from_spec(noise))?;
    let spec = settings.spec(ode.rhs(), Real::zero(p), vec![x0bar.to_prec(p), y0bar.to_prec(p)]);
    let t_end = Real::from_i64(steps as i64, p) + Real::ratio(1, 2, p);
    let traj = solve_ivp(&spec, &t_end)?;

    let half = Real::ratio(1, 2, p);
    let mut windows = Vec::new();
    for (j, want) in orbit.iter().enumerate() {
        let a = Real::from_i64(j as i64, p);
        let b = &a + &half;
        let target = Real::from_integer(want, p);
        let mut sup = Real::zero(p);
        let mut variation = Real::zero(p);
        let mut prev: Option<Real> = None;
        for t in window_times(&traj, &a, &b, 8) {
            let z2 = traj.eval_component(&t, 1)?;
            sup = sup.max(&(&z2 - &target).abs());
            if let Some(q) = &prev {
                variation = variation + (&z2 - q).abs();
            }
            prev = Some(z2);
        }
        let mid = traj.eval_component(&(&a + &Real::ratio(1, 4, p)), 1)?;
        let decoded = mid.to_integer().map(|n| n.to_string()).unwrap_or_default();
        windows.push(WindowCheck {
            j,
            expected: want.to_string(),
            decoded,
            sup_error: sup.to_f64(),
            eta: params.eta.to_f64(),
            variation: variation.to_f64(),
            pass: sup <= params.eta,
        });
    }

    let halting = m.run_to_halt(&encoding::decode(&m, x0).map_err(|e| OdeSimError::Params(e.to_string()))?, steps).map(|(n0, cfg)| {
        let ch = Real::from_integer(&encoding::encode(&m, &cfg), p);
        let from = Real::from_i64(n0 as i64, p) + &half;
        let mut ts: Vec<Real> = Vec::new();
        let mut t = from.clone();
        while t <= t_end {
            ts.push(t.clone());
            t = t + Real::ratio(1, 16, p);
        }
        ts.extend(traj.times().iter().filter(|s| **s >= from).cloned());
        let mut sup = Real::zero(p);
        for t in &ts {
            let z2 = traj.eval_component(t, 1).expect("inside the integrated range");
            sup = sup.max(&(z2 - &ch).abs());
        }
        HaltCheck { n0, from_t: from.to_f64(), sup_error: sup.to_f64(), bound: 0.2, pass: sup <= fifth }
    });

    let pass = windows.iter().all(|w| w.pass) && halting.as_ref().is_none_or(|h| h.pass || !params.delta.is_zero());
    Ok(SimulationReport { params: params.clone(), windows, halting, pass, accepted_steps: traj.accepted, trajectory: Some(traj) })
}

/// Which unpairing function an `Ω̃` system realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Unpairing {
    J21,
    J22,
}

impl std::str::FromStr for Unpairing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['_', ','], "").as_str() {
            "j21" | "21" => Ok(Unpairing::J21),
            "j22" | "22" => Ok(Unpairing::J22),
            other => Err(format!("unknown unpairing `{other}` (expected J21 or J22)")),
        }
    }
}

/// How the copy equations of the `Ω̃` systems are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Reading {
    /// `x₂′ = c̃(r(x₁) − x₂)³ θ(−sin 2πt)`, likewise for `s₂`.
    #[default]
    Corrected,
    /// `x₂′ = c̃(r(x₁) − x₁)³ θ(−sin 2πt)`, likewise for `s₂`.
    Printed,
}

/// Four-state system `(x₁, x₂, s₁, s₂)`: `x₂` holds `J₂,ᵢ(k)` and `s₂` the
/// diagonal sum on `[k, k+1/2]`.
pub fn omega_rhs(which: Unpairing, reading: Reading, prec: u32) -> Rhs {
    let kern = Kernels::at(prec);
    let c = Real::from_i64(206, prec);
    Arc::new(move |t: &Real, z: &[Real]| {
        let (x1, x2, s1, s2) = (&z[0], &z[1], &z[2], &z[3]);
        let sn = t.sin_2pi();
        let up = kern.theta(&sn);
        let down = kern.theta(&-&sn);
        let zero = Real::zero(t.prec());
        let mut d = vec![zero.clone(), zero.clone(), zero.clone(), zero];
        if !up.is_zero() {
            let (rx2, rs2) = (kern.r(x2), kern.r(s2));
            let (bx, bs) = match which {
                Unpairing::J21 => (
                    kern.xi(&(&rs2 - &rx2)) * (&rx2 + 1),
                    &rs2 + &kern.xi(&(&rx2 + 1 - &rs2)),
                ),
                Unpairing::J22 => {
                    let (hi, lo) = (kern.xi(x2), kern.xi(&(1 - x2)));
                    (&hi * &(&rx2 - 1) + &lo * &(&rs2 + 1), hi * &rs2 + lo * (&rs2 + 1))
                }
            };
            d[0] = &c * &cube(&(bx - x1)) * &up;
            d[2] = &c * &cube(&(bs - s1)) * &up;
        }
        if !down.is_zero() {
            let (hx, hs) = match reading {
                Reading::Corrected => (x2, s2),
                Reading::Printed => (x1, s1),
            };
            d[1] = &c * &cube(&(kern.r(x1) - hx)) * &down;
            d[3] = &c * &cube(&(kern.r(s1) - hs)) * &down;
        }
        Ok(d)
    })
}

/// Raw and `σ`-wrapped readings of an `Ω̃` system at `z = 0, 1, …, n_max`.
#[derive(Debug, Clone, Serialize)]
pub struct OmegaSample {
    pub z: u64,
    pub raw: f64,
    pub wrapped: f64,
    pub expected: u64,
}

/// Integrate once to `n_max + 1/4` and read `x₂` at each `z + 1/4`.
pub fn omega_tilde_batch(
    which: Unpairing,
    reading: Reading,
    n_max: u64,
    settings: &SolverSettings,
) -> Result<(Vec<OmegaSample>, Vec<Real>), OdeSimError> {
    let p = default_precision();
    let kern = Kernels::at(p);
    let spec = settings.spec(omega_rhs(which, reading, p), Real::zero(p), vec![Real::zero(p); 4]);
    let quarter = Real::ratio(1, 4, p);
    let traj = solve_ivp(&spec, &(Real::from_i64(n_max as i64, p) + &quarter))?;
    let mut out = Vec::new();
    let mut wrapped_exact = Vec::new();
    for z in 0..=n_max {
        let raw = traj.eval_component(&(Real::from_i64(z as i64, p) + &quarter), 1)?;
        let wrapped = kern.sigma(&raw);
        let (a, b) = encoding::unpair2(&Integer::from(z));
        let expected = match which {
            Unpairing::J21 => a,
            Unpairing::J22 => b,
        };
        out.push(OmegaSample { z, raw: raw.to_f64(), wrapped: wrapped.to_f64(), expected: expected.to_u64().unwrap() });
        wrapped_exact.push(wrapped);
    }
    Ok((out, wrapped_exact))
}

/// `Ω̄₂,ᵢ(z) = σ(x₂(z + 1/4))`.
pub fn omega_tilde(which: Unpairing, z: &Real, reading: Reading, settings: &SolverSettings) -> Result<Real, OdeSimError> {
    let p = z.prec().max(default_precision());
    let quarter = Real::ratio(1, 4, p);
    if *z < -&quarter {
        return Err(OdeSimError::Params("omega_tilde needs z >= -1/4".into()));
    }
    let spec = settings.spec(omega_rhs(which, reading, p), Real::zero(p), vec![Real::zero(p); 4]);
    let t_end = z + &quarter;
    let traj = solve_ivp(&spec, &t_end)?;
    Ok(Kernels::at(p).sigma(&traj.final_state()[1]))
}
