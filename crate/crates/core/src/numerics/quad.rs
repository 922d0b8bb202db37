//! Adaptive Gauss–Legendre quadrature.
//!
//! Each panel is integrated with a 20-point rule and compared against the
//! sum over its two halves; panels whose estimates disagree by more than
//! their share of the tolerance are bisected. The accepted panels can be
//! kept as a table of cumulative sums so that `∫_a^x f` for arbitrary `x`
//! costs one extra rule application.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::real::Real;

pub const GL_POINTS: usize = 20;
pub const DEFAULT_MAX_DEPTH: u32 = 60;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadError {
    #[error("quadrature did not converge on [{a}, {b}] within depth {depth}")]
    NonConvergence { a: String, b: String, depth: u32 },
    #[error("integration bounds out of order")]
    BadBounds,
}

/// Nodes and weights of the Gauss–Legendre rule on [-1, 1].
#[derive(Debug)]
pub struct GaussLegendre {
    nodes: Vec<Real>,
    weights: Vec<Real>,
    prec: u32,
}

impl GaussLegendre {
    fn compute(n: usize, prec: u32) -> Self {
        let wp = prec + 32;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let tiny = Real::from_i64(1, wp) / Real::from_i64(2, wp).powi((wp - 8) as i32);
        for i in 1..=n {
            let guess = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut x = Real::with_prec(guess, wp);
            let mut dp;
            loop {
                let (p, d) = legendre(n, &x);
                dp = d;
                let dx = &p / &dp;
                x = &x - &dx;
                if dx.abs() <= tiny {
                    break;
                }
            }
            let (_, d) = legendre(n, &x);
            dp = d;
            let w = Real::from_i64(2, wp) / ((1 - x.square()) * dp.square());
            nodes.push(x.to_prec(prec));
            weights.push(w.to_prec(prec));
        }
        GaussLegendre { nodes, weights, prec }
    }

    /// Shared rule at the given precision; computed once per precision.
    pub fn at(prec: u32) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<u32, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().unwrap().get(&prec) {
            return rule.clone();
        }
        let rule = Arc::new(GaussLegendre::compute(GL_POINTS, prec));
        cache.lock().unwrap().entry(prec).or_insert(rule).clone()
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn integrate<F: Fn(&Real) -> Real + ?Sized>(&self, f: &F, a: &Real, b: &Real) -> Real {
        let half = (b - a) / 2;
        let mid = (a + b) / 2;
        let mut acc = Real::zero(self.prec);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let t = &mid + &(&half * x);
            acc = acc + w * &f(&t);
        }
        acc * half
    }
}

/// Returns `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: &Real) -> (Real, Real) {
    let p = x.prec();
    let mut p0 = Real::one(p);
    let mut p1 = x.clone();
    for k in 2..=n {
        let k = k as i32;
        let p2 = ((2 * k - 1) * (x * &p1) - (k - 1) * &p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = (n as i32) * (x * &p1 - &p0) / (x.square() - 1);
    (p1, d)
}

/// One accepted panel of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Panel {
    pub a: Real,
    pub b: Real,
    pub value: Real,
}

/// Adaptive integration returning the accepted panels in order.
pub fn quad_panels<F: Fn(&Real) -> Real + ?Sized>(
    f: &F,
    a: &Real,
    b: &Real,
    tol: &Real,
    max_depth: u32,
) -> Result<Vec<Panel>, QuadError> {
    if a > b {
        return Err(QuadError::BadBounds);
    }
    let prec = a.prec().max(b.prec());
    let rule = GaussLegendre::at(prec);
    if a == b {
        return Ok(vec![Panel { a: a.clone(), b: b.clone(), value: Real::zero(prec) }]);
    }
    let whole = rule.integrate(f, a, b);
    let scale = whole.abs().max(&Real::one(prec));
    let budget = tol * &scale;
    let noise = Real::one(prec) / Real::from_i64(2, prec).powi(prec as i32 - 12);
    let len = b - a;

    let mut out = Vec::new();
    // stack holds (a, b, estimate, depth); processed left to right
    let mut stack = vec![(a.clone(), b.clone(), whole, 0u32)];
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = (&lo + &hi) / 2;
        let left = rule.integrate(f, &lo, &mid);
        let right = rule.integrate(f, &mid, &hi);
        let refined = &left + &right;
        let err = (&refined - &est).abs();
        let share = &budget * &((&hi - &lo) / &len);
        let floor = &noise * &(left.abs() + right.abs()).max(&scale);
        if err <= share || err <= floor {
            out.push(Panel { a: lo, b: hi, value: refined });
            continue;
        }
        if depth >= max_depth {
            return Err(QuadError::NonConvergence {
                a: lo.to_short(17),
                b: hi.to_short(17),
                depth: max_depth,
            });
        }
        stack.push((mid.clone(), hi, right, depth + 1));
        stack.push((lo, mid, left, depth + 1));
    }
    Ok(out)
}

/// `∫_a^b f` with `|Q − ∫f| ≤ tol·max(1, |Q|)`.
pub fn quad_adaptive<F: Fn(&Real) -> Real + ?Sized>(
    f: &F,
    a: &Real,
    b: &Real,
    tol: &Real,
) -> Result<Real, QuadError> {
    let panels = quad_panels(f, a, b, tol, DEFAULT_MAX_DEPTH)?;
    let prec = a.prec().max(b.prec());
    Ok(panels.into_iter().fold(Real::zero(prec), |acc, p| acc + p.value))
}

type Integrand = Arc<dyn Fn(&Real) -> Real + Send + Sync>;

/// Precomputed running integral `x ↦ ∫_a^x f` on a fixed interval.
#[derive(Clone)]
pub struct CumulativeIntegral {
    f: Integrand,
    rule: Arc<GaussLegendre>,
    starts: Vec<Real>,
    ends: Vec<Real>,
    before: Vec<Real>,
    total: Real,
}

impl std::fmt::Debug for CumulativeIntegral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CumulativeIntegral")
            .field("panels", &self.starts.len())
            .field("total", &self.total)
            .finish()
    }
}

impl CumulativeIntegral {
    pub fn build(f: Integrand, a: &Real, b: &Real, tol: &Real) -> Result<Self, QuadError> {
        let panels = quad_panels(f.as_ref(), a, b, tol, DEFAULT_MAX_DEPTH)?;
        let prec = a.prec().max(b.prec());
        let mut acc = Real::zero(prec);
        let mut starts = Vec::with_capacity(panels.len());
        let mut ends = Vec::with_capacity(panels.len());
        let mut before = Vec::with_capacity(panels.len());
        for p in panels {
            before.push(acc.clone());
            acc = acc + &p.value;
            starts.push(p.a);
            ends.push(p.b);
        }
        Ok(CumulativeIntegral { f, rule: GaussLegendre::at(prec), starts, ends, before, total: acc })
    }

    pub fn total(&self) -> &Real {
        &self.total
    }

    pub fn panels(&self) -> usize {
        self.starts.len()
    }

    /// `∫_a^x f`, clamped to the table's interval.
    pub fn upto(&self, x: &Real) -> Real {
        if x <= &self.starts[0] {
            return Real::zero(self.total.prec());
        }
        if x >= self.ends.last().unwrap() {
            return self.total.clone();
        }
        let i = self.ends.partition_point(|e| e < x);
        &self.before[i] + &self.rule.integrate(self.f.as_ref(), &self.starts[i], x)
    }
}
