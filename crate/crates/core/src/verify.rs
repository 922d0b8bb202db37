//! Property suites over the whole pipeline.
//!
//! Every check reports how many cases it ran, whether all of them held and
//! its worst relative margin `(bound − observed) / bound`, so a negative
//! margin means a violation. Randomized checks draw from a ChaCha stream
//! keyed by one seed.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Integer;
use serde::Serialize;

use crate::encoding::{self, pair_k, unpair2, unpair_k};
use crate::kernels::Kernels;
use crate::noise::{NoiseMode, NoiseSpec, SmoothNoise};
use crate::numerics::interval::Interval;
use crate::numerics::quad::quad_adaptive;
use crate::numerics::real::{default_precision, euclid_norm, Real};
use crate::ode_sim::{
    iterate_ode, omega_tilde_batch, simulate_2d, target_perturbed, target_solve, Gate, IterationOde, Reading, ScalarFn,
    SimulationOde, SimulationParams, SolverSettings, TargetingSpec, Unpairing,
};
use crate::robust_map::{compile_map, iterate_noisy, nearest_natural, upsilon_k, Variant};
use crate::sphere::{growth_ratio, pushforward_vector, run_on_sphere, stereo, PlanarField, SphereField};
use crate::tm::{parse_tm, TuringMachine, BB2_TM, SUCC_TM};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub cases: usize,
    pub pass: bool,
    pub worst_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, worst margin {:.4e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst_margin
        )?;
        if let Some(why) = &self.first_failure {
            write!(f, " (first failure: {why})")?;
        }
        Ok(())
    }
}

/// Accumulates one check case by case.
struct Tally {
    name: String,
    cases: usize,
    pass: bool,
    worst: f64,
    first_failure: Option<String>,
}

impl Tally {
    fn new(name: impl Into<String>) -> Self {
        Tally { name: name.into(), cases: 0, pass: true, worst: f64::INFINITY, first_failure: None }
    }

    fn record(&mut self, ok: bool, margin: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        self.worst = self.worst.min(margin);
        if !ok {
            if self.pass {
                self.first_failure = Some(describe());
            }
            self.pass = false;
        }
    }

    /// Observed value against an upper bound.
    fn bound(&mut self, observed: &Real, bound: &Real, strict: bool, describe: impl FnOnce() -> String) {
        let ok = if strict { observed < bound } else { observed <= bound };
        self.record(ok, relative_margin(observed, bound), describe);
    }

    fn fail(&mut self, why: String) {
        self.record(false, f64::NEG_INFINITY, || why);
    }

    fn done(self) -> Check {
        let worst = if self.cases == 0 { 0.0 } else { self.worst };
        Check {
            name: self.name,
            cases: self.cases,
            pass: self.pass && self.cases > 0,
            worst_margin: worst,
            first_failure: self.first_failure,
            note: None,
        }
    }
}

fn relative_margin(observed: &Real, bound: &Real) -> f64 {
    if bound.is_zero() {
        return if observed.is_zero() { 0.0 } else { f64::NEG_INFINITY };
    }
    ((bound - observed) / bound).to_f64()
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: usize,
    pub pass: bool,
    pub worst_margin: f64,
    pub seconds: f64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>, checks: Vec<Check>, started: Instant) -> Self {
        SuiteReport {
            suite: suite.into(),
            cases: checks.iter().map(|c| c.cases).sum(),
            pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
            worst_margin: checks.iter().map(|c| c.worst_margin).fold(f64::INFINITY, f64::min),
            seconds: started.elapsed().as_secs_f64(),
            checks,
        }
    }
}

/// Split `items` over the available cores and keep the input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items.chunks(chunk).map(|part| scope.spawn(|| part.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// A machine together with the input it is started on.
#[derive(Debug, Clone)]
pub struct Workload {
    pub name: String,
    pub machine: Arc<TuringMachine>,
    pub input: Vec<usize>,
}

impl Workload {
    pub fn new(name: impl Into<String>, machine: Arc<TuringMachine>, input: Vec<usize>) -> Self {
        Workload { name: name.into(), machine, input }
    }

    pub fn code(&self) -> Integer {
        encoding::input_code(&self.machine, &self.input)
    }

    /// Unary successor on `11` and the two-state busy beaver on a blank tape.
    pub fn defaults() -> Vec<Workload> {
        let succ = Arc::new(parse_tm(SUCC_TM).expect("bundled machine"));
        let bb2 = Arc::new(parse_tm(BB2_TM).expect("bundled machine"));
        let two = succ.parse_word("11").expect("bundled input");
        vec![Workload::new("succ", succ, two), Workload::new("bb2", bb2, Vec::new())]
    }
}

// ---- kernels ------------------------------------------------------------

/// `|Ψ(x, y) − k| < e^{−y}|x − k|` with both sides enclosed by intervals.
pub fn psi_contraction(prec: u32, samples: usize, seed: u64) -> Check {
    let kern = Kernels::at(prec);
    let mut r = rng(seed, 1);
    let draws: Vec<(i64, f64, f64)> = (0..samples)
        .map(|_| {
            let mut e = 0.0;
            while e == 0.0 {
                e = r.gen_range(-0.2..=0.2);
            }
            (r.gen_range(-1000..=1000), e, r.gen_range(0.0..=60.0))
        })
        .collect();
    let results = par_map(&draws, |&(k, e, y)| {
        let kr = Real::from_i64(k, prec);
        let x = &kr + &Real::with_prec(e, prec);
        let yy = Interval::point(&Real::with_prec(y, prec));
        let lhs = match kern.psi_interval(&Interval::point(&x), &yy) {
            Ok(iv) => iv.add_real(&-&kr).abs().hi().clone(),
            Err(err) => return (false, f64::NEG_INFINITY, format!("k={k} e={e} y={y}: {err}")),
        };
        let rhs = yy.neg().exp().mul(&Interval::point(&Real::with_prec(e.abs(), prec))).lo().clone();
        (lhs < rhs, relative_margin(&lhs, &rhs), format!("k={k} e={e} y={y}: {} vs {}", lhs.to_short(6), rhs.to_short(6)))
    });
    let mut t = Tally::new("psi contraction (interval certified)");
    for (ok, margin, why) in results {
        t.record(ok, margin, || why);
    }
    t.done()
}

/// `|σ(n + δ) − n| ≤ (0.4π − 1)|δ|`, and the observed ratio of successive
/// iterates stays below the same factor.
pub fn sigma_contraction(prec: u32, samples: usize, seed: u64) -> Check {
    let kern = Kernels::at(prec);
    let lambda = Real::pi(prec) * Real::ratio(2, 5, prec) - 1;
    let mut r = rng(seed, 2);
    let draws: Vec<(i64, f64)> = (0..samples).map(|_| (r.gen_range(-50..=50), r.gen_range(-0.25..=0.25))).collect();
    let results = par_map(&draws, |&(n, d)| {
        let nr = Real::from_i64(n, prec);
        let dr = Real::with_prec(d, prec);
        let err1 = (kern.sigma(&(&nr + &dr)) - &nr).abs();
        let bound = &lambda * &dr.abs();
        let err2 = (kern.sigma_iter(&(&nr + &dr), 2) - &nr).abs();
        let ok = err1 <= bound && err2 <= &lambda * &err1;
        (ok, relative_margin(&err1, &bound), format!("n={n} d={d}: {} vs {}", err1.to_short(6), bound.to_short(6)))
    });
    let mut t = Tally::new("sigma contraction");
    for (ok, margin, why) in results {
        t.record(ok, margin, || why);
    }
    t.done()
}

/// Plateaus of `r`, `ξ` and `θ`, periodicity and the two gate bounds of `φ`.
pub fn kernel_properties(prec: u32, seed: u64) -> Vec<Check> {
    let kern = Kernels::at(prec);
    let mut r = rng(seed, 3);
    let mut out = Vec::new();

    let mut t = Tally::new("r plateau and midpoints");
    for _ in 0..2000 {
        let n: i64 = r.gen_range(-100..=100);
        let d: f64 = r.gen_range(-0.25..=0.25);
        let v = kern.r(&(Real::from_i64(n, prec) + Real::with_prec(d, prec)));
        let ok = v == Real::from_i64(n, prec);
        t.record(ok, if ok { 1.0 } else { -1.0 }, || format!("r({n}{d:+}) = {}", v.to_short(12)));
    }
    for n in -5..=5i64 {
        let v = kern.r(&(Real::from_i64(n, prec) + Real::ratio(1, 2, prec)));
        let ok = v > Real::from_i64(n, prec) && v < Real::from_i64(n + 1, prec);
        t.record(ok, if ok { 1.0 } else { -1.0 }, || format!("r({n}.5) = {}", v.to_short(12)));
    }
    out.push(t.done());

    let mut t = Tally::new("xi plateaus and monotonicity");
    let mut prev = Real::zero(prec);
    for i in 0..=400 {
        let x = Real::ratio(i - 100, 200, prec);
        let v = kern.xi(&x);
        // near the ends of the switch 1 − ξ and ξ drop below the working
        // precision, so only the midpoint is required to be strictly inside
        let plateau_ok = if x <= 0.25 {
            v.is_zero()
        } else if x >= 0.75 {
            v == Real::one(prec)
        } else if x == 0.5 {
            v > 0 && v < Real::one(prec)
        } else {
            v >= 0 && v <= Real::one(prec)
        };
        let ok = plateau_ok && v >= prev;
        t.record(ok, if ok { 1.0 } else { -1.0 }, || format!("xi({}) = {}", x.to_short(6), v.to_short(12)));
        prev = v;
    }
    out.push(t.done());

    let mut t = Tally::new("theta range");
    t.record(kern.theta(&Real::from_i64(-3, prec)).is_zero(), 1.0, || "theta(-3) != 0".into());
    for _ in 0..1000 {
        let x: f64 = r.gen_range(1e-3..1e3);
        let v = kern.theta(&Real::with_prec(x, prec));
        let ok = v > 0 && v < 1;
        t.record(ok, if ok { 1.0 } else { -1.0 }, || format!("theta({x}) = {}", v.to_short(12)));
    }
    out.push(t.done());

    let mut t = Tally::new("phi periodicity");
    let slack = Real::one(prec) / Real::from_i64(2, prec).powi((prec * 3 / 4) as i32);
    for _ in 0..500 {
        let tt = Real::with_prec(r.gen_range(-10.0..10.0), prec);
        let y = Real::with_prec(r.gen_range(0.0..20.0), prec);
        let gap = (kern.gate_phi(&(&tt + 1), &y) - kern.gate_phi(&tt, &y)).abs();
        t.bound(&gap, &slack, false, || format!("t={} y={}: {}", tt.to_short(8), y.to_short(8), gap.to_short(6)));
    }
    out.push(t.done());

    let mut t = Tally::new("phi active-half integral > 0.128");
    let tol = Real::with_prec(1e-30, prec);
    for y in [5, 8, 12, 20] {
        let yr = Real::from_i64(y, prec);
        match quad_adaptive(&|s: &Real| kern.gate_phi(s, &yr), &Real::zero(prec), &Real::ratio(1, 2, prec), &tol) {
            Ok(v) => {
                let need = Real::with_prec(0.128, prec);
                let ok = v > need;
                t.record(ok, ((&v - &need) / &need).to_f64(), || format!("y={y}: {}", v.to_short(8)));
            }
            Err(e) => t.fail(format!("y={y}: {e}")),
        }
    }
    out.push(t.done());

    // Ψ(·, y) is nondecreasing, so on each cell φ lies between Ψ at the two
    // ends of an enclosure of s; this avoids the dependency blow-up of
    // evaluating Ψ directly on a wide argument.
    let mut t = Tally::new("phi idle-half bound e^-y/8 (interval sweep)");
    let cells = 1024;
    for y in [5, 8, 12] {
        let yi = Interval::point(&Real::from_i64(y, prec));
        let bound = Real::from_i64(-y, prec).exp() / 8;
        for c in 0..cells {
            let cell = Interval::new(Real::ratio(cells + c, 2 * cells, prec), Real::ratio(cells + c + 1, 2 * cells, prec));
            let s = kern.s_interval(&cell);
            let ends = kern.psi_interval(&Interval::point(s.lo()), &yi).and_then(|a| Ok(a.hull(&kern.psi_interval(&Interval::point(s.hi()), &yi)?)));
            match ends {
                Ok(v) => {
                    let m = v.mag();
                    t.bound(&m, &bound, true, || format!("y={y} cell {c}: {}", m.to_short(6)));
                }
                Err(e) => t.fail(format!("y={y} cell {c}: {e}")),
            }
        }
    }
    out.push(t.done());
    out
}

// ---- pairing ------------------------------------------------------------

/// Round trip and injectivity of `I₃`/`J₃` on every triple with entries
/// below `limit`, and `J₃` followed by `I₃` on the codes below `limit³`.
pub fn pairing_bijection(limit: u32) -> Check {
    let mut t = Tally::new(format!("pairing bijection on entries < {limit}"));
    let mut seen = std::collections::HashSet::new();
    for a in 0..limit {
        for b in 0..limit {
            for c in 0..limit {
                let xs = [Integer::from(a), Integer::from(b), Integer::from(c)];
                let z = pair_k(&xs);
                let back = unpair_k(&z, 3);
                let fresh = seen.insert(z.clone());
                let ok = fresh && back.as_deref() == Ok(&xs[..]);
                t.record(ok, if ok { 1.0 } else { -1.0 }, || format!("({a},{b},{c}) -> {z}"));
            }
        }
    }
    let total = u64::from(limit).pow(3);
    for z in 0..total {
        let z = Integer::from(z);
        let ok = unpair_k(&z, 3).map(|xs| pair_k(&xs) == z).unwrap_or(false);
        t.record(ok, if ok { 1.0 } else { -1.0 }, || format!("code {z}"));
    }
    t.done()
}

/// `|Υ₃(x) − I₃(y)| ≤ ‖x − y‖` for integer triples `y` and `‖x − y‖ ≤ 1/5`.
pub fn upsilon_robustness(prec: u32, samples: usize, seed: u64, variant: Variant) -> Check {
    let kern = Kernels::at(prec);
    let mut r = rng(seed, 4);
    let draws: Vec<([u32; 3], [f64; 3], f64)> = (0..samples)
        .map(|_| {
            let y = [r.gen_range(0..=40), r.gen_range(0..=40), r.gen_range(0..=40)];
            let dir = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
            (y, dir, r.gen_range(0.0..=0.2))
        })
        .collect();
    let results = par_map(&draws, |(y, dir, radius)| {
        let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-300);
        let pert: Vec<Real> = dir.iter().map(|d| Real::with_prec(d / len * radius, prec)).collect();
        let x: Vec<Real> = y.iter().zip(&pert).map(|(&v, p)| Real::from_i64(v.into(), prec) + p).collect();
        let exact = Real::from_integer(&pair_k(&y.map(Integer::from)), prec);
        let err = (upsilon_k(&kern, &x, variant) - exact).abs();
        let norm = euclid_norm(&pert);
        (err <= norm, relative_margin(&err, &norm), format!("{y:?} radius {radius}: {}", err.to_short(6)))
    });
    let mut t = Tally::new(format!("upsilon3 robustness ({variant:?})"));
    for (ok, margin, why) in results {
        t.record(ok, margin, || why);
    }
    t.done()
}

// ---- targeting ----------------------------------------------------------

/// Randomized instances of the exact and perturbed targeting bounds, half
/// each, plus the fixed instance `b = 5`, `γ = 1/5`, `c = 206`.
pub fn targeting(prec: u32, instances: usize, seed: u64, settings: &SolverSettings) -> Vec<Check> {
    let five = Real::from_i64(5, prec);
    let fixed = TargetingSpec::new(
        five.clone(),
        Real::ratio(1, 5, prec),
        Real::zero(prec),
        Real::ratio(1, 2, prec),
        Gate::ThetaSin,
        Real::from_i64(206, prec),
    );
    let mut exact = Tally::new("targeting endpoint < gamma");
    let mut pert = Tally::new("perturbed targeting endpoint < rho + gamma + delta(t1 - t0)");
    let fixed = match fixed {
        Ok(s) => s,
        Err(e) => {
            exact.fail(format!("b=5 gamma=0.2 c=206 rejected: {e}"));
            return vec![exact.done(), pert.done()];
        }
    };
    let integral = fixed.gate_integral().expect("gate integral of theta(sin)");

    // (b, γ, y0, gain factor, ρ, δ, noise kind, seed)
    type Draw = (f64, f64, f64, f64, f64, f64, u8, u64);
    let mut r = rng(seed, 5);
    let mut draws: Vec<Draw> = Vec::new();
    for y0 in [-100.0, 0.0, 100.0] {
        draws.push((5.0, 0.2, y0, 0.0, 0.0, 0.0, 0, 0));
        draws.push((5.0, 0.2, y0, 0.0, 0.05, 0.1, 1, 0));
    }
    let half = instances / 2;
    while draws.len() < 2 * half.max(3) {
        let b = r.gen_range(-20.0..20.0);
        let gamma = r.gen_range(0.05..0.3);
        let y0 = b + r.gen_range(-100.0..100.0);
        let gain = r.gen_range(1.0..3.0);
        draws.push((b, gamma, y0, gain, 0.0, 0.0, 0, 0));
        draws.push((b, gamma, y0, gain, r.gen_range(0.0..0.1), r.gen_range(0.0..0.2), r.gen_range(1..=4), r.gen()));
    }

    let results = par_map(&draws, |&(b, gamma, y0, gain, rho, delta, kind, nseed)| {
        let mut spec = fixed.clone();
        spec.b = Real::with_prec(b, prec);
        spec.gamma = Real::with_prec(gamma, prec);
        if gain > 0.0 {
            spec.c = (spec.gamma.square() * &integral * 2).recip() * gain;
        }
        let y0r = Real::with_prec(y0, prec);
        let perturbed = kind > 0;
        let outcome = if perturbed {
            spec = spec.perturbation(Real::with_prec(rho, prec), Real::with_prec(delta, prec));
            let target = spec.b.clone();
            let wobble = spec.rho.clone();
            let bbar: ScalarFn = Arc::new(move |t: &Real| &target + &(&wobble * &(t * 3 + 0.125).sin_2pi()));
            let d = spec.delta.clone();
            let noise = match kind {
                1 => SmoothNoise::Constant(d),
                2 => SmoothNoise::Constant(-d),
                3 => SmoothNoise::Cosine(d),
                _ => SmoothNoise::seeded(d, nseed),
            };
            let e: ScalarFn = Arc::new(move |t: &Real| noise.eval(t));
            target_perturbed(&spec, &y0r, bbar, e, settings)
        } else {
            target_solve(&spec, &y0r, settings)
        };
        let label = format!("b={b:.4} gamma={gamma:.4} y0={y0:.3} rho={rho:.4} delta={delta:.4} kind={kind}");
        match outcome {
            Ok(tr) => {
                let err = (&tr.final_state()[0] - &spec.b).abs();
                let bound = if perturbed { spec.perturbed_bound() } else { spec.gamma.clone() };
                (perturbed, err < bound, relative_margin(&err, &bound), format!("{label}: {}", err.to_short(6)))
            }
            Err(e) => (perturbed, false, f64::NEG_INFINITY, format!("{label}: {e}")),
        }
    });
    for (perturbed, ok, margin, why) in results {
        let t = if perturbed { &mut pert } else { &mut exact };
        t.record(ok, margin, || why);
    }
    vec![exact.done(), pert.done()]
}

// ---- iteration ODE ------------------------------------------------------

fn window_sup(traj: &crate::numerics::ivp::Trajectory, j: i64, comp: usize, target: &Real, probes: i64) -> Result<Real, String> {
    let p = target.prec();
    let a = Real::from_i64(j, p);
    let b = &a + &Real::ratio(1, 2, p);
    let mut ts: Vec<Real> = (0..probes).map(|i| &a + &Real::ratio(i, 2 * (probes - 1), p)).collect();
    ts.extend(traj.times().iter().filter(|t| **t >= a && **t <= b).cloned());
    let mut sup = Real::zero(p);
    for t in ts {
        let z = traj.eval_component(&t, comp).map_err(|e| e.to_string())?;
        sup = sup.max(&(z - target).abs());
    }
    Ok(sup)
}

/// `z₂` within `1/5` of `f^{[j]}(x₀)` on `[j, j + 1/2]` for `f(x) = 2ˣ`
/// from `x₀ = 1` (windows `1..=4`) and for the identity from `3`.
pub fn iteration_exp2(prec: u32, settings: &SolverSettings, settle: f64) -> Check {
    let mut t = Tally::new("iteration ODE windows (2^x and identity)");
    let fifth = Real::ratio(1, 5, prec);
    let two = Real::from_i64(2, prec);
    let exp2 = IterationOde::new(Arc::new(move |x: &Real| two.pow(x))).settle(settle);
    match iterate_ode(&exp2, &Real::one(prec), &Real::ratio(9, 2, prec), settings) {
        Ok(tr) => {
            for (j, want) in [(1, 2), (2, 4), (3, 16), (4, 65536)] {
                let target = Real::from_i64(want, prec);
                match window_sup(&tr, j, 1, &target, 8) {
                    Ok(sup) => t.bound(&sup, &fifth, false, || format!("2^x window {j}: {}", sup.to_short(6))),
                    Err(e) => t.fail(e),
                }
            }
        }
        Err(e) => t.fail(format!("2^x: {e}")),
    }
    let id = IterationOde::new(Arc::new(|x: &Real| x.clone()));
    match iterate_ode(&id, &Real::from_i64(3, prec), &Real::ratio(7, 2, prec), settings) {
        Ok(tr) => {
            let target = Real::from_i64(3, prec);
            for j in 0..=3 {
                match window_sup(&tr, j, 1, &target, 8) {
                    Ok(sup) => t.bound(&sup, &fifth, false, || format!("identity window {j}: {}", sup.to_short(6))),
                    Err(e) => t.fail(e),
                }
            }
        }
        Err(e) => t.fail(format!("identity: {e}")),
    }
    t.done()
}

// ---- robust map ---------------------------------------------------------

/// Noisy iteration of the compiled map from `x₀ + offset`: every iterate is
/// within `1/5` of the orbit and decodes to it.
pub fn map_simulation(work: &Workload, delta: &Real, steps: usize, offset: &Real, modes: &[NoiseMode], seed: u64) -> Check {
    let mut t = Tally::new(format!("map simulation {} (delta {})", work.name, delta.to_short(4)));
    let prec = delta.prec().max(default_precision());
    let fifth = Real::ratio(1, 5, prec);
    let map = match compile_map(work.machine.clone(), delta) {
        Ok(m) => m,
        Err(e) => {
            t.fail(e.to_string());
            return t.done();
        }
    };
    let x0 = work.code();
    let orbit = match encoding::psi_orbit(&work.machine, &x0, steps) {
        Ok(o) => o,
        Err(e) => {
            t.fail(e.to_string());
            return t.done();
        }
    };
    let start = Real::from_integer(&x0, prec) + offset;
    for &mode in modes {
        let noise = NoiseSpec::new(mode, delta.clone(), seed);
        match iterate_noisy(&map, &start, steps, &noise) {
            Ok(xs) => {
                for (j, (x, want)) in xs.iter().zip(&orbit).enumerate() {
                    let dist = (x - &Real::from_integer(want, prec)).abs();
                    let decoded = nearest_natural(x).map(|(n, _)| n);
                    let ok = dist <= fifth && decoded.as_ref() == Some(want);
                    t.record(ok, relative_margin(&dist, &fifth), || {
                        format!("{mode} step {j}: {} vs {want}", x.to_short(10))
                    });
                }
            }
            Err(e) => t.fail(format!("{mode}: {e}")),
        }
    }
    t.done()
}

// ---- two-dimensional ODE ------------------------------------------------

/// Window and halting checks of the simulation ODE for one workload and `δ`.
pub fn ode_simulation(work: &Workload, delta: &Real, steps: usize, seed: u64, settings: &SolverSettings) -> Check {
    let mut t = Tally::new(format!("2-D ODE simulation {} (delta {})", work.name, delta.to_short(4)));
    let params = match SimulationParams::new(delta) {
        Ok(p) => p,
        Err(e) => {
            t.fail(e.to_string());
            return t.done();
        }
    };
    let prec = params.gamma.prec();
    let x0 = work.code();
    let start = Real::from_integer(&x0, prec) + Real::ratio(19, 100, prec);
    let mode = if delta.is_zero() { NoiseMode::None } else { NoiseMode::Uniform };
    let noise = NoiseSpec::new(mode, delta.clone(), seed);
    match simulate_2d(work.machine.clone(), &params, &x0, &start, &start, steps, &noise, settings) {
        Ok(rep) => {
            for w in &rep.windows {
                let ok = w.pass && w.decoded == w.expected;
                t.record(ok, (w.eta - w.sup_error) / w.eta, || {
                    format!("window {}: sup {:.4e} > eta {:.4e} or decoded {} != {}", w.j, w.sup_error, w.eta, w.decoded, w.expected)
                });
            }
            if let Some(h) = rep.halting.as_ref().filter(|_| delta.is_zero()) {
                t.record(h.pass, (h.bound - h.sup_error) / h.bound, || format!("after halting at {}: {:.4e}", h.n0, h.sup_error));
            }
        }
        Err(e) => t.fail(e.to_string()),
    }
    t.done().with_note(format!("l = {}, eta = {}", params.l, params.eta.to_short(6)))
}

// ---- Ω̃ ODEs -------------------------------------------------------------

/// Outputs at `0..=n_max` within `1/4` of the unpairing before the `σ`
/// wrapper and within `1/5` after it.
pub fn omega_odes(n_max: u64, settings: &SolverSettings) -> Vec<Check> {
    let mut out = Vec::new();
    for which in [Unpairing::J21, Unpairing::J22] {
        let mut raw = Tally::new(format!("omega {which:?} raw within 1/4"));
        let mut wrapped = Tally::new(format!("omega {which:?} wrapped within 1/5"));
        match omega_tilde_batch(which, Reading::Corrected, n_max, settings) {
            Ok((samples, _)) => {
                for s in samples {
                    let e = s.expected as f64;
                    let (dr, dw) = ((s.raw - e).abs(), (s.wrapped - e).abs());
                    raw.record(dr <= 0.25, (0.25 - dr) / 0.25, || format!("z={}: {} vs {}", s.z, s.raw, s.expected));
                    wrapped.record(dw <= 0.2, (0.2 - dw) / 0.2, || format!("z={}: {} vs {}", s.z, s.wrapped, s.expected));
                }
            }
            Err(e) => {
                raw.fail(e.to_string());
                wrapped.fail(e.to_string());
            }
        }
        out.push(raw.done());
        out.push(wrapped.done());
    }
    out
}

// ---- sphere -------------------------------------------------------------

fn simulating_sphere_field(work: &Workload) -> Result<SphereField, String> {
    let params = SimulationParams::new(&Real::zero(default_precision())).map_err(|e| e.to_string())?;
    SphereField::simulating(work.machine.clone(), params).map_err(|e| e.to_string())
}

/// `⟨v, y⟩ = 0` for transported vectors: half with random planar vectors,
/// half with the simulating field itself.
pub fn sphere_tangency(work: &Workload, prec: u32, samples: usize, seed: u64) -> Check {
    let mut t = Tally::new("sphere tangency");
    let field = match simulating_sphere_field(work) {
        Ok(f) => f,
        Err(e) => {
            t.fail(e);
            return t.done();
        }
    };
    let bound = Real::with_prec(1e-30, prec);
    let mut r = rng(seed, 6);
    for i in 0..samples {
        let scale = 10f64.powf(r.gen_range(-2.0..3.0));
        let x = [Real::with_prec(r.gen_range(-1.0..1.0) * scale, prec), Real::with_prec(r.gen_range(-1.0..1.0) * scale, prec)];
        let y = stereo(&x);
        let v = if i % 2 == 0 {
            let f = [Real::with_prec(r.gen_range(-1e3..1e3), prec), Real::with_prec(r.gen_range(-1e3..1e3), prec)];
            pushforward_vector(&f, &y)
        } else {
            field.sphere_field(&Real::with_prec(r.gen_range(0.0..4.0), prec), &y)
        };
        let dot = v.iter().zip(&y).fold(Real::zero(prec), |acc, (a, b)| acc + a * b).abs();
        t.bound(&dot, &bound, false, || format!("sample {i}: {}", dot.to_short(6)));
    }
    t.done()
}

/// `‖F(y)‖` at `1 − y₀ = 10^{-d}`, `d = 2..=8`, strictly decreasing along
/// several approach directions, and exactly zero at the pole.
pub fn sphere_decay(work: &Workload, prec: u32) -> Check {
    let mut t = Tally::new("sphere field decay at the north pole");
    let field = match simulating_sphere_field(work) {
        Ok(f) => f,
        Err(e) => {
            t.fail(e);
            return t.done();
        }
    };
    let tau = Real::ratio(1, 8, prec);
    for dir in 0..8 {
        let angle = Real::ratio(dir, 8, prec) + Real::ratio(1, 16, prec);
        let mut prev: Option<Real> = None;
        for d in 2..=8 {
            let gap = Real::one(prec) / Real::from_i64(10, prec).powi(d);
            let y0 = 1 - &gap;
            let rad = (1 - y0.square()).sqrt();
            let y = [y0, &rad * &angle.cos_2pi(), &rad * &angle.sin_2pi()];
            let norm = euclid_norm(&field.sphere_field(&tau, &y));
            if let Some(p) = &prev {
                t.bound(&norm, p, true, || format!("direction {dir}, 1-y0 = 1e-{d}: {} not below {}", norm.to_short(6), p.to_short(6)));
            }
            prev = Some(norm);
        }
    }
    let pole = [Real::one(prec), Real::zero(prec), Real::zero(prec)];
    let at_pole = field.sphere_field(&tau, &pole);
    t.record(at_pole.iter().all(Real::is_zero), 1.0, || "field is not exactly zero at the pole".into());
    t.done()
}

/// Planar, chart and ambient runs of the simulating field from `x₀ + 0.19`
/// up to `τ = steps + 3/4`.
pub fn sphere_orbit(work: &Workload, steps: usize, settings: &SolverSettings) -> Vec<Check> {
    let mut corr = Tally::new("planar vs sphere correspondence within 10x tolerance");
    let mut chart = Tally::new("chart vs ambient orbits at matched tau within 10x tolerance");
    let mut norm = Tally::new("ambient orbit stays on the sphere");
    let mut clock = Tally::new("tau(tau_inv(a)) = a within 10x tolerance");
    let mut decode = Tally::new(format!("decoded sphere orbit of {}", work.name));
    let all = |ts: Vec<Tally>| ts.into_iter().map(Tally::done).collect::<Vec<_>>();
    let fail_all = |mut ts: Vec<Tally>, why: String| {
        for t in &mut ts {
            t.fail(why.clone());
        }
        all(ts)
    };
    let field = match simulating_sphere_field(work) {
        Ok(f) => f,
        Err(e) => return fail_all(vec![corr, chart, norm, clock, decode], e),
    };
    let prec = default_precision();
    let x0 = work.code();
    let start = Real::from_integer(&x0, prec) + Real::ratio(19, 100, prec);
    let xs = [start.clone(), start];
    let tau_end = Real::from_i64(steps as i64, prec) + Real::ratio(3, 4, prec);
    let run = match run_on_sphere(&field, &xs, &tau_end, 20, settings) {
        Ok(r) => r,
        Err(e) => return fail_all(vec![corr, chart, norm, clock, decode], e.to_string()),
    };
    // errors of a vector quantity are Euclidean, against the mixed tolerance
    // at the size of the integrated state
    let tol = |state: &[Real]| (euclid_norm(state) * settings.rel_tol + settings.abs_tol) * 10;
    let dist = |a: &[Real], b: &[Real]| euclid_norm(&a.iter().zip(b).map(|(u, v)| u - v).collect::<Vec<_>>());

    for piece in &run.ambient {
        for st in piece.states() {
            match run.planar.x(&st[0]) {
                Ok(px) => {
                    let d = dist(&stereo(&px), &st[1..]);
                    corr.bound(&d, &tol(&st[1..]), false, || format!("tau {}: {}", st[0].to_short(8), d.to_short(6)));
                }
                Err(e) => corr.fail(e.to_string()),
            }
        }
    }

    // Chart and ambient points are paired at equal τ rather than equal t:
    // across the fast transition a timing difference far below the
    // tolerance is multiplied by |y′| when compared at equal times.
    for (tt, st) in run.chart.times().iter().zip(run.chart.states()) {
        match ambient_at_tau(&run, &field, tt, &st[0]) {
            Ok(y) => {
                let d = dist(&stereo(&st[1..]), &y);
                chart.bound(&d, &tol(&y), false, || format!("t {}: {}", tt.to_short(8), d.to_short(6)));
            }
            Err(e) => chart.fail(e.to_string()),
        }
    }

    let n = 1000;
    let drift_bound = Real::with_prec(settings.abs_tol + settings.rel_tol, prec);
    for i in 0..=n {
        let tt = &run.t_end * &Real::ratio(i, n, prec);
        match run.point(&tt) {
            Ok(y) => {
                let drift = (euclid_norm(&y) - 1).abs();
                norm.bound(&drift, &drift_bound, false, || format!("sample {i}: {}", drift.to_short(6)));
            }
            Err(e) => norm.fail(e.to_string()),
        }
    }

    for a in [Real::ratio(1, 2, prec), Real::one(prec), Real::from_i64(5, prec)].into_iter().filter(|a| *a <= tau_end) {
        match run.planar.tau_inv(&a).and_then(|t| Ok(run.chart.eval(&t)?)) {
            Ok(state) => {
                let d = (&state[0] - &a).abs();
                clock.bound(&d, &tol(&state), false, || format!("a = {}: {}", a.to_short(4), d.to_short(6)));
            }
            Err(e) => clock.fail(e.to_string()),
        }
    }

    match encoding::psi_orbit(&work.machine, &x0, steps) {
        Ok(orbit) => {
            let half = Real::ratio(1, 2, prec);
            for (j, want) in orbit.iter().enumerate() {
                let a = Real::from_i64(j as i64, prec) + Real::ratio(1, 4, prec);
                match run.decode_at(&a) {
                    Ok(x) => {
                        let dist = (&x[1] - &Real::from_integer(want, prec)).abs();
                        decode.bound(&dist, &half, true, || format!("step {j}: {} vs {want}", x[1].to_short(10)));
                    }
                    Err(e) => decode.fail(e.to_string()),
                }
            }
        }
        Err(e) => decode.fail(e.to_string()),
    }
    all(vec![corr, chart, norm, clock, decode])
}

/// Ambient point whose carried clock equals `tau`, by Newton steps in `t`
/// starting from `t_guess` (`dτ/dt = K`).
fn ambient_at_tau(run: &crate::sphere::SphereRun, field: &SphereField, t_guess: &Real, tau: &Real) -> Result<Vec<Real>, crate::sphere::SphereError> {
    let mut t = t_guess.clone();
    let mut state = crate::sphere::eval_pieces(&run.ambient, &t)?;
    for _ in 0..4 {
        let gap = 1 - &state[1];
        let k = field.k.from_r2(&(2 / gap - 1));
        if k.is_zero() {
            break;
        }
        t = (&t + &((tau - &state[0]) / &k)).max(&Real::zero(t.prec())).min(&run.t_end);
        state = crate::sphere::eval_pieces(&run.ambient, &t)?;
    }
    state.remove(0);
    Ok(state)
}

// ---- growth probe -------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GrowthProbe {
    pub radii: Vec<f64>,
    /// `ratios[d][i]`: `sup |g(t, z)| / (1 + ‖z‖^d)` on shell `i`.
    pub ratios: Vec<Vec<f64>>,
    pub exhibited: Option<i32>,
}

/// Sampled growth of the smooth simulating field: the least `d ≤ d_max`
/// whose ratio on the outermost shell does not exceed the ratio on the
/// shell before it. Evidence only: a finite sample proves no bound.
pub fn growth_probe(work: &Workload, radii: &[f64], d_max: i32) -> (Check, GrowthProbe) {
    let prec = default_precision();
    let mut t = Tally::new(format!("growth probe of the smooth simulating field of {}", work.name));
    let ode = match SimulationParams::new(&Real::zero(prec))
        .and_then(|p| SimulationOde::with_variant(work.machine.clone(), p, SmoothNoise::None, Variant::Smooth))
    {
        Ok(o) => o,
        Err(e) => {
            t.fail(e.to_string());
            return (t.done(), GrowthProbe { radii: radii.to_vec(), ratios: Vec::new(), exhibited: None });
        }
    };
    let f: PlanarField = Arc::new(move |s: &Real, z: &[Real]| ode.field(s, z).to_vec());
    let ts: Vec<Real> = (0..=16).map(|i| Real::ratio(i, 4, prec) + Real::ratio(1, 97, prec)).collect();
    let mut ratios = Vec::new();
    let mut exhibited = None;
    for d in 0..=d_max {
        let row: Vec<f64> = radii.iter().map(|&rad| growth_ratio(&f, &ts, &Real::with_prec(rad, prec), 24, d).to_f64()).collect();
        let n = row.len();
        if exhibited.is_none() && n >= 2 && row.iter().all(|v| v.is_finite()) && row[n - 1] <= row[n - 2] {
            exhibited = Some(d);
        }
        ratios.push(row);
    }
    match exhibited {
        Some(d) => {
            let row = &ratios[d as usize];
            let n = row.len();
            t.record(true, (row[n - 2] - row[n - 1]) / row[n - 2], String::new);
        }
        None => t.fail(format!("no d <= {d_max} with a non-increasing outer ratio")),
    }
    let note = match exhibited {
        Some(d) => format!("exhibited d = {d}; sampled evidence, not a proof of polynomial boundedness"),
        None => "sampled evidence, not a proof of polynomial boundedness".to_string(),
    };
    (t.done().with_note(note), GrowthProbe { radii: radii.to_vec(), ratios, exhibited })
}

// ---- suites -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernels,
    Pairing,
    Targeting,
    Iteration,
    Map,
    Simulate,
    Omega,
    Sphere,
    Growth,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Kernels,
        Suite::Pairing,
        Suite::Targeting,
        Suite::Iteration,
        Suite::Map,
        Suite::Simulate,
        Suite::Omega,
        Suite::Sphere,
        Suite::Growth,
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Kernels => "kernels",
            Suite::Pairing => "pairing",
            Suite::Targeting => "targeting",
            Suite::Iteration => "iteration",
            Suite::Map => "map",
            Suite::Simulate => "simulate",
            Suite::Omega => "omega",
            Suite::Sphere => "sphere",
            Suite::Growth => "growth",
        })
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown suite `{s}`; expected one of kernels, pairing, targeting, iteration, map, simulate, omega, sphere, growth"))
    }
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub prec: u32,
    pub seed: u64,
    /// Multiplies the sample counts of the randomized checks.
    pub scale: f64,
    pub delta: Real,
    pub steps: Option<usize>,
    pub settings: SolverSettings,
    pub workloads: Vec<Workload>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let prec = default_precision();
        VerifyConfig {
            prec,
            seed: 0,
            scale: 1.0,
            delta: Real::ratio(1, 10, prec),
            steps: None,
            settings: SolverSettings::default(),
            workloads: Workload::defaults(),
        }
    }
}

impl VerifyConfig {
    fn samples(&self, n: usize) -> usize {
        ((n as f64 * self.scale).round() as usize).max(1)
    }
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> SuiteReport {
    let started = Instant::now();
    let p = cfg.prec;
    let checks = match suite {
        Suite::Kernels => {
            let mut v = vec![psi_contraction(p, cfg.samples(100_000), cfg.seed), sigma_contraction(p, cfg.samples(10_000), cfg.seed)];
            v.extend(kernel_properties(p, cfg.seed));
            v
        }
        Suite::Pairing => vec![pairing_bijection(50), upsilon_robustness(p, cfg.samples(10_000), cfg.seed, Variant::Analytic)],
        Suite::Targeting => targeting(p, cfg.samples(200), cfg.seed, &cfg.settings),
        Suite::Iteration => {
            let s = SolverSettings { abs_tol: 1e-8, rel_tol: 1e-8, ..cfg.settings };
            vec![iteration_exp2(p, &s, 1e-7)]
        }
        Suite::Map => {
            let offset = Real::ratio(19, 100, p);
            cfg.workloads
                .iter()
                .map(|w| map_simulation(w, &cfg.delta, cfg.steps.unwrap_or(20), &offset, &NoiseMode::ADVERSARIAL, cfg.seed))
                .collect()
        }
        Suite::Simulate => {
            let deltas = [Real::zero(p), cfg.delta.clone()];
            cfg.workloads
                .iter()
                .flat_map(|w| deltas.iter().map(|d| ode_simulation(w, d, cfg.steps.unwrap_or(10), cfg.seed, &cfg.settings)).collect::<Vec<_>>())
                .collect()
        }
        Suite::Omega => omega_odes(30, &cfg.settings),
        Suite::Sphere => {
            let w = &cfg.workloads[0];
            let mut v = vec![sphere_tangency(w, p, cfg.samples(10_000), cfg.seed), sphere_decay(w, p)];
            v.extend(sphere_orbit(w, cfg.steps.unwrap_or(5), &cfg.settings));
            v
        }
        Suite::Growth => cfg.workloads.iter().map(|w| growth_probe(w, &[10.0, 100.0, 1000.0, 10000.0], 8).0).collect(),
    };
    SuiteReport::new(suite.to_string(), checks, started)
}

/// Unpairing table `J₂,ᵢ(0..=n)`, as a brute-force reference.
pub fn unpairing_table(which: Unpairing, n: u64) -> Vec<u64> {
    (0..=n)
        .map(|z| {
            let (a, b) = unpair2(&Integer::from(z));
            let v = if which == Unpairing::J21 { a } else { b };
            v.to_u64().expect("small code")
        })
        .collect()
}
