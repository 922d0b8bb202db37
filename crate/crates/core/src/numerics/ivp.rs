//! Dormand–Prince 5(4) integrator with continuous (dense) output.
//!
//! The step controller works entirely in `Real`, so trajectories whose
//! state grows far beyond `f64` range (the exponential-iteration examples)
//! are handled without special casing.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rug::Float;

use super::real::{default_precision, euclid_norm, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct RhsError(pub String);

impl fmt::Display for RhsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for RhsError {}

pub type RhsFn = dyn Fn(&Real, &[Real]) -> Result<Vec<Real>, RhsError> + Send + Sync;
pub type Rhs = Arc<RhsFn>;
pub type StepLimit = Arc<dyn Fn(&Real, &[Real]) -> Real + Send + Sync>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IvpError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: String },
    #[error("state norm exceeded the ceiling at t = {t}")]
    BlowUp { t: String },
    #[error("step budget of {steps} exhausted at t = {t}")]
    StepBudget { t: String, steps: usize },
    #[error("right-hand side failed at t = {t}: {message}")]
    Rhs { t: String, message: String },
    #[error("invalid problem: {0}")]
    BadSpec(String),
    #[error("t = {t} lies outside the integrated range")]
    OutOfRange { t: String },
}

/// An initial-value problem together with its controller settings.
#[derive(Clone)]
pub struct IvpSpec {
    pub rhs: Rhs,
    pub t0: Real,
    pub state0: Vec<Real>,
    pub abs_tol: Real,
    pub rel_tol: Real,
    pub max_step: Real,
    /// Optional state-dependent cap applied on top of `max_step`.
    pub step_limit: Option<StepLimit>,
    pub max_steps: usize,
    pub norm_ceiling: Real,
}

impl fmt::Debug for IvpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IvpSpec")
            .field("t0", &self.t0)
            .field("state0", &self.state0)
            .field("abs_tol", &self.abs_tol)
            .field("rel_tol", &self.rel_tol)
            .field("max_step", &self.max_step)
            .finish_non_exhaustive()
    }
}

impl IvpSpec {
    pub fn new(rhs: Rhs, t0: Real, state0: Vec<Real>) -> Self {
        let prec = state0.iter().map(Real::prec).chain([t0.prec()]).max().unwrap_or_else(default_precision);
        IvpSpec {
            rhs,
            t0,
            state0,
            abs_tol: Real::with_prec(1e-20, prec),
            rel_tol: Real::with_prec(1e-20, prec),
            max_step: Real::with_prec(0.01, prec),
            step_limit: None,
            max_steps: 20_000_000,
            norm_ceiling: Real::from_float(Float::with_val(prec, Float::i_exp(1, 1 << 20))),
        }
    }

    pub fn tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        let p = self.prec();
        self.abs_tol = Real::with_prec(abs_tol, p);
        self.rel_tol = Real::with_prec(rel_tol, p);
        self
    }

    pub fn max_step(mut self, h: f64) -> Self {
        self.max_step = Real::with_prec(h, self.prec());
        self
    }

    pub fn step_limit(mut self, limit: StepLimit) -> Self {
        self.step_limit = Some(limit);
        self
    }

    pub fn prec(&self) -> u32 {
        self.state0.iter().map(Real::prec).chain([self.t0.prec()]).max().unwrap_or_else(default_precision)
    }

    pub fn dim(&self) -> usize {
        self.state0.len()
    }

    fn validate(&self) -> Result<(), IvpError> {
        if self.state0.is_empty() {
            return Err(IvpError::BadSpec("empty state".into()));
        }
        if self.abs_tol.signum_i32() <= 0 || self.rel_tol.signum_i32() <= 0 {
            return Err(IvpError::BadSpec("tolerances must be positive".into()));
        }
        if self.max_step.signum_i32() <= 0 {
            return Err(IvpError::BadSpec("max_step must be positive".into()));
        }
        Ok(())
    }
}

struct Tableau {
    c: [Real; 7],
    a: Vec<Vec<Real>>,
    e: [Real; 7],
    d: [Real; 7],
}

impl Tableau {
    fn new(p: u32) -> Self {
        let q = |n: i64, d: i64| Real::ratio(n, d, p);
        let z = || Real::zero(p);
        Tableau {
            c: [z(), q(1, 5), q(3, 10), q(4, 5), q(8, 9), q(1, 1), q(1, 1)],
            a: vec![
                vec![],
                vec![q(1, 5)],
                vec![q(3, 40), q(9, 40)],
                vec![q(44, 45), q(-56, 15), q(32, 9)],
                vec![q(19372, 6561), q(-25360, 2187), q(64448, 6561), q(-212, 729)],
                vec![q(9017, 3168), q(-355, 33), q(46732, 5247), q(49, 176), q(-5103, 18656)],
                vec![q(35, 384), z(), q(500, 1113), q(125, 192), q(-2187, 6784), q(11, 84)],
            ],
            e: [
                q(71, 57600),
                z(),
                q(-71, 16695),
                q(71, 1920),
                q(-17253, 339200),
                q(22, 525),
                q(-1, 40),
            ],
            d: [
                q(-12715105075, 11282082432),
                z(),
                q(87487479700, 32700410799),
                q(-10690763975, 1880347072),
                q(701980252875, 199316789632),
                q(-1453857185, 822651844),
                q(69997945, 29380423),
            ],
        }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Clone, Debug)]
struct Segment {
    h: Real,
    rcont: [Vec<Real>; 5],
}

/// Solution of an IVP: accepted nodes plus a quartic interpolant per step.
#[derive(Clone)]
pub struct Trajectory {
    spec: IvpSpec,
    times: Vec<Real>,
    states: Vec<Vec<Real>>,
    segments: Vec<Segment>,
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("t0", self.times.first().unwrap())
            .field("t_end", self.times.last().unwrap())
            .field("accepted", &self.accepted)
            .field("rejected", &self.rejected)
            .finish()
    }
}

impl Trajectory {
    pub fn spec(&self) -> &IvpSpec {
        &self.spec
    }

    pub fn t0(&self) -> &Real {
        &self.times[0]
    }

    pub fn t_end(&self) -> &Real {
        self.times.last().unwrap()
    }

    pub fn times(&self) -> &[Real] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<Real>] {
        &self.states
    }

    pub fn final_state(&self) -> &[Real] {
        self.states.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// Dense-output value at `t`; exact stored state at nodes.
    pub fn eval(&self, t: &Real) -> Result<Vec<Real>, IvpError> {
        if t < self.t0() || t > self.t_end() {
            return Err(IvpError::OutOfRange { t: t.to_short(17) });
        }
        let i = self.times.partition_point(|s| s < t);
        if i < self.times.len() && &self.times[i] == t {
            return Ok(self.states[i].clone());
        }
        let seg = &self.segments[i - 1];
        let theta = (t - &self.times[i - 1]) / &seg.h;
        let theta1 = 1 - &theta;
        let [r1, r2, r3, r4, r5] = &seg.rcont;
        Ok((0..self.dim())
            .map(|k| {
                let inner = &r4[k] + &(&theta1 * &r5[k]);
                let inner = &r3[k] + &(&theta * &inner);
                let inner = &r2[k] + &(&theta1 * &inner);
                &r1[k] + &(&theta * &inner)
            })
            .collect())
    }

    pub fn eval_component(&self, t: &Real, k: usize) -> Result<Real, IvpError> {
        Ok(self.eval(t)?.swap_remove(k))
    }

    /// CSV with header `t,state_0,...` and full-precision decimals.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "t")?;
        for k in 0..self.dim() {
            write!(out, ",state_{k}")?;
        }
        writeln!(out)?;
        for (t, y) in self.times.iter().zip(&self.states) {
            write!(out, "{}", t.to_decimal())?;
            for v in y {
                write!(out, ",{}", v.to_decimal())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn rhs_call(spec: &IvpSpec, t: &Real, y: &[Real], evals: &mut usize) -> Result<Vec<Real>, RhsError> {
    *evals += 1;
    let out = (spec.rhs)(t, y)?;
    if out.len() != y.len() {
        return Err(RhsError(format!("rhs returned {} components for a {}-dim state", out.len(), y.len())));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(RhsError("non-finite derivative".into()));
    }
    Ok(out)
}

fn axpy_sum(y: &[Real], h: &Real, coeffs: &[Real], ks: &[Vec<Real>]) -> Vec<Real> {
    (0..y.len())
        .map(|i| {
            let mut s = Real::zero(y[i].prec());
            for (c, k) in coeffs.iter().zip(ks) {
                if !c.is_zero() {
                    s = s + c * &k[i];
                }
            }
            &y[i] + &(h * &s)
        })
        .collect()
}

fn weighted_rms(err: &[Real], y0: &[Real], y1: &[Real], spec: &IvpSpec) -> Real {
    let n = err.len() as i32;
    let mut acc = Real::zero(spec.prec());
    for i in 0..err.len() {
        let sc = &spec.abs_tol + &(&spec.rel_tol * &y0[i].abs().max(&y1[i].abs()));
        acc = acc + (&err[i] / &sc).square();
    }
    (acc / n).sqrt()
}

/// Integrate from `spec.t0` to `t_end`.
pub fn solve_ivp(spec: &IvpSpec, t_end: &Real) -> Result<Trajectory, IvpError> {
    spec.validate()?;
    if t_end < &spec.t0 {
        return Err(IvpError::BadSpec("t_end precedes t0".into()));
    }
    let p = spec.prec();
    let tab = Tableau::new(p);
    let mut evals = 0usize;
    let mut t = spec.t0.to_prec(p);
    let mut y: Vec<Real> = spec.state0.iter().map(|v| v.to_prec(p)).collect();
    let mut traj = Trajectory {
        spec: spec.clone(),
        times: vec![t.clone()],
        states: vec![y.clone()],
        segments: Vec::new(),
        accepted: 0,
        rejected: 0,
        rhs_evals: 0,
    };
    if &t == t_end {
        return Ok(traj);
    }
    let err_at = |t: &Real, e: RhsError| IvpError::Rhs { t: t.to_short(17), message: e.0 };
    let mut k1 = rhs_call(spec, &t, &y, &mut evals).map_err(|e| err_at(&t, e))?;

    let cap = |t: &Real, y: &[Real]| -> Real {
        let mut h = spec.max_step.clone();
        if let Some(limit) = &spec.step_limit {
            h = h.min(&limit(t, y));
        }
        h
    };

    // initial step from the scaled sizes of y and y'
    let mut h = {
        let sc: Vec<Real> = y.iter().map(|v| &spec.abs_tol + &(&spec.rel_tol * &v.abs())).collect();
        let d0 = euclid_norm(&y.iter().zip(&sc).map(|(v, s)| v / s).collect::<Vec<_>>());
        let d1 = euclid_norm(&k1.iter().zip(&sc).map(|(v, s)| v / s).collect::<Vec<_>>());
        let guess = if d0 < 1e-5 || d1 < 1e-5 { t.abs().max(&Real::one(p)) * 1e-6 } else { (d0 / d1) * 0.01 };
        guess.min(&cap(&t, &y))
    };
    let tiny_rel = Real::one(p) / Real::from_i64(2, p).powi(p as i32 - 4);
    let mut last_rejected = false;

    loop {
        if traj.accepted + traj.rejected >= spec.max_steps {
            return Err(IvpError::StepBudget { t: t.to_short(17), steps: spec.max_steps });
        }
        h = h.min(&cap(&t, &y));
        let remaining = t_end - &t;
        let mut last = false;
        if h >= remaining {
            h = remaining.clone();
            last = true;
        }
        let floor = &tiny_rel * &t.abs().max(&Real::one(p));
        if h <= floor {
            return Err(IvpError::StepUnderflow { t: t.to_short(17) });
        }

        match attempt(spec, &tab, &t, &y, &k1, &h, &mut evals) {
            Err(e) => {
                let next = &h / 4;
                if next <= floor {
                    return Err(err_at(&t, e));
                }
                h = next;
                traj.rejected += 1;
                last_rejected = true;
                continue;
            }
            Ok(stage) => {
                let err = weighted_rms(&stage.err, &y, &stage.y_new, spec);
                let err_f = err.to_f64();
                let mut fac = if err_f == 0.0 { 10.0 } else { 0.9 * err_f.powf(-0.2) };
                if !fac.is_finite() || fac < 1e-4 {
                    fac = 1e-4;
                }
                if err_f <= 1.0 {
                    if last_rejected {
                        fac = fac.min(1.0);
                    }
                    fac = fac.min(10.0);
                    let t_new = if last { t_end.to_prec(p) } else { &t + &h };
                    if stage.y_new.iter().any(|v| v.abs() > spec.norm_ceiling) {
                        return Err(IvpError::BlowUp { t: t_new.to_short(17) });
                    }
                    let ydiff: Vec<Real> = stage.y_new.iter().zip(&y).map(|(a, b)| a - b).collect();
                    let bspl: Vec<Real> = k1.iter().zip(&ydiff).map(|(k, d)| &(&h * k) - d).collect();
                    let r4: Vec<Real> = (0..y.len())
                        .map(|i| &(&ydiff[i] - &(&h * &stage.k7[i])) - &bspl[i])
                        .collect();
                    let r5: Vec<Real> = (0..y.len())
                        .map(|i| {
                            let mut s = Real::zero(p);
                            for (d, k) in tab.d.iter().zip(&stage.ks) {
                                if !d.is_zero() {
                                    s = s + d * &k[i];
                                }
                            }
                            &h * &s
                        })
                        .collect();
                    traj.segments.push(Segment {
                        h: h.clone(),
                        rcont: [y.clone(), ydiff, bspl, r4, r5],
                    });
                    t = t_new;
                    y = stage.y_new;
                    k1 = stage.k7;
                    traj.times.push(t.clone());
                    traj.states.push(y.clone());
                    traj.accepted += 1;
                    last_rejected = false;
                    if last {
                        traj.rhs_evals = evals;
                        return Ok(traj);
                    }
                    h = &h * fac;
                } else {
                    traj.rejected += 1;
                    last_rejected = true;
                    h = &h * fac.min(0.9);
                }
            }
        }
    }
}

struct StageResult {
    y_new: Vec<Real>,
    err: Vec<Real>,
    k7: Vec<Real>,
    ks: Vec<Vec<Real>>,
}

fn attempt(
    spec: &IvpSpec,
    tab: &Tableau,
    t: &Real,
    y: &[Real],
    k1: &[Real],
    h: &Real,
    evals: &mut usize,
) -> Result<StageResult, RhsError> {
    let mut ks: Vec<Vec<Real>> = vec![k1.to_vec()];
    for s in 1..7 {
        let ys = axpy_sum(y, h, &tab.a[s], &ks);
        let ts = t + &(h * &tab.c[s]);
        let k = rhs_call(spec, &ts, &ys, evals)?;
        if s == 6 {
            // y_new equals the 7th stage argument (FSAL)
            let err = (0..y.len())
                .map(|i| {
                    let mut e = Real::zero(y[i].prec());
                    for (c, kk) in tab.e.iter().zip(ks.iter().chain(std::iter::once(&k))) {
                        if !c.is_zero() {
                            e = e + c * &kk[i];
                        }
                    }
                    h * &e
                })
                .collect();
            ks.push(k.clone());
            return Ok(StageResult { y_new: ys, err, k7: k, ks });
        }
        ks.push(k);
    }
    unreachable!()
}

/// Outcome of re-solving with both tolerances halved.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub max_diff: Real,
    pub threshold: Real,
    pub pass: bool,
}

/// Solve at the given tolerances and at half of them; the endpoints must
/// agree to within the coarser tolerance.
pub fn tolerance_halving_check(spec: &IvpSpec, t_end: &Real) -> Result<(Trajectory, ConvergenceReport), IvpError> {
    let coarse = solve_ivp(spec, t_end)?;
    let mut fine_spec = spec.clone();
    fine_spec.abs_tol = &spec.abs_tol / 2;
    fine_spec.rel_tol = &spec.rel_tol / 2;
    let fine = solve_ivp(&fine_spec, t_end)?;
    let mut max_diff = Real::zero(spec.prec());
    let mut threshold_min: Option<Real> = None;
    let mut pass = true;
    for (a, b) in coarse.final_state().iter().zip(fine.final_state()) {
        let d = (a - b).abs();
        let thr = &spec.abs_tol + &(&spec.rel_tol * &a.abs());
        if d > thr {
            pass = false;
        }
        max_diff = max_diff.max(&d);
        threshold_min = Some(match threshold_min {
            Some(m) => m.min(&thr),
            None => thr,
        });
    }
    Ok((coarse, ConvergenceReport { max_diff, threshold: threshold_min.unwrap(), pass }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = 256;

    fn r(v: f64) -> Real {
        Real::with_prec(v, P)
    }

    #[test]
    fn zero_field_is_constant() {
        let rhs: Rhs = Arc::new(|_, y: &[Real]| Ok(vec![Real::zero(y[0].prec())]));
        let spec = IvpSpec::new(rhs, r(0.0), vec![r(3.0)]);
        let tr = solve_ivp(&spec, &r(10.0)).unwrap();
        assert_eq!(tr.final_state()[0], 3.0);
        assert_eq!(*tr.t_end(), 10.0);
    }

    #[test]
    fn exponential_growth_matches_e() {
        let rhs: Rhs = Arc::new(|_, y: &[Real]| Ok(vec![y[0].clone()]));
        let spec = IvpSpec::new(rhs, r(0.0), vec![r(1.0)]).tolerances(1e-25, 1e-25).max_step(1.0);
        let tr = solve_ivp(&spec, &r(1.0)).unwrap();
        let err = (&tr.final_state()[0] - &Real::e(P)).abs();
        assert!(err < r(1e-24), "error {err:?}");
    }

    #[test]
    fn dense_output_is_accurate_between_nodes() {
        let rhs: Rhs = Arc::new(|t: &Real, _: &[Real]| Ok(vec![t.cos()]));
        let spec = IvpSpec::new(rhs, r(0.0), vec![r(0.0)]).tolerances(1e-18, 1e-18).max_step(0.5);
        let tr = solve_ivp(&spec, &r(3.0)).unwrap();
        for k in 1..60 {
            let t = r(k as f64 * 0.05);
            let v = tr.eval_component(&t, 0).unwrap();
            assert!((v - t.sin()).abs() < r(1e-15), "t={k}");
        }
    }

    #[test]
    fn nodes_return_stored_states() {
        let rhs: Rhs = Arc::new(|_, y: &[Real]| Ok(vec![-&y[0]]));
        let spec = IvpSpec::new(rhs, r(0.0), vec![r(1.0)]).tolerances(1e-12, 1e-12);
        let tr = solve_ivp(&spec, &r(0.3)).unwrap();
        for (t, s) in tr.times().iter().zip(tr.states()) {
            assert_eq!(tr.eval(t).unwrap(), *s);
        }
        assert!(tr.eval(&r(0.31)).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let rhs: Rhs = Arc::new(|_, y: &[Real]| Ok(vec![y[0].square()]));
        let mut spec = IvpSpec::new(rhs, r(0.0), vec![r(1.0)]).tolerances(1e-10, 1e-10);
        spec.norm_ceiling = r(1e6);
        assert!(matches!(solve_ivp(&spec, &r(2.0)), Err(IvpError::BlowUp { .. } | IvpError::StepUnderflow { .. })));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let rhs: Rhs = Arc::new(|_, y: &[Real]| Ok(vec![Real::zero(P), y[0].clone()]));
        let spec = IvpSpec::new(rhs, r(0.0), vec![r(1.0), r(0.0)]).max_step(0.5);
        let tr = solve_ivp(&spec, &r(1.0)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,state_0,state_1\n"));
        assert_eq!(text.lines().count(), tr.times().len() + 1);
    }

    #[test]
    fn halving_check_passes_on_smooth_problem() {
        let rhs: Rhs = Arc::new(|_, y: &[Real]| Ok(vec![-&y[0]]));
        let spec = IvpSpec::new(rhs, r(0.0), vec![r(1.0)]).tolerances(1e-14, 1e-14);
        let (_, rep) = tolerance_halving_check(&spec, &r(2.0)).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}
