//! Robust real extensions of the machine's transition function and the
//! one-dimensional map `g_M = σ^{[j]} ∘ Υ₃ ∘ f ∘ (Ω₃,₁, Ω₃,₂, Ω₃,₃)`.
//!
//! The three-dimensional step `f` and the unpairings `Ω` are reference
//! implementations: round to the nearest integer, check the distance, then
//! compute exactly. They meet their error contracts with zero slack. `Υₖ` is
//! evaluated from its closed form.

use std::sync::Arc;

use rug::Integer;

use crate::encoding::{self, DecodeError};
use crate::kernels::Kernels;
use crate::noise::NoiseSpec;
use crate::numerics::real::Real;
use crate::tm::TuringMachine;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RobustError {
    #[error("{detail}")]
    NotNearConfiguration { detail: String },
    #[error("{x} is not within 1/5 of a natural number")]
    NotNearInteger { x: String },
    #[error("delta must satisfy 0 <= delta < 1/5, got {delta}")]
    BadDelta { delta: String },
    #[error("noise magnitude {noise} exceeds the budget {budget}")]
    NoiseExceedsBudget { noise: String, budget: String },
    #[error("step {step}: {source}")]
    AtStep { step: usize, source: Box<RobustError> },
}

/// Which error-correcting function feeds the pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// `Ψ(x, 32(1+‖x‖²))`, real analytic.
    #[default]
    Analytic,
    /// `r(x)`, smooth with polynomially bounded derivatives.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionTag {
    Reference,
    External,
}

/// Nearest natural number to `x` and the distance to it.
pub fn nearest_natural(x: &Real) -> Option<(Integer, Real)> {
    let n = x.to_integer()?;
    if n < 0 {
        return None;
    }
    let d = (x - &Real::from_integer(&n, x.prec())).abs();
    Some((n, d))
}

/// A robust extension of the `ℕ³` transition `ψ₃`.
#[derive(Debug, Clone)]
pub struct RobustExtension3 {
    machine: Arc<TuringMachine>,
    eps_in: Real,
    tag: ExtensionTag,
}

impl RobustExtension3 {
    pub fn reference(machine: Arc<TuringMachine>, eps_in: Real) -> Self {
        assert!(eps_in <= Real::ratio(1, 5, eps_in.prec()), "eps_in must not exceed 1/5");
        RobustExtension3 { machine, eps_in, tag: ExtensionTag::Reference }
    }

    pub fn machine(&self) -> &TuringMachine {
        &self.machine
    }

    pub fn eps_in(&self) -> &Real {
        &self.eps_in
    }

    pub fn tag(&self) -> ExtensionTag {
        self.tag
    }

    pub fn apply(&self, x: &[Real; 3]) -> Result<[Real; 3], RobustError> {
        f_ref(&self.machine, &self.eps_in, x)
    }
}

/// Round to the nearest triple, check it is an encoded configuration and
/// return `ψ₃` of it.
pub fn f_ref(m: &TuringMachine, eps_in: &Real, x: &[Real; 3]) -> Result<[Real; 3], RobustError> {
    let prec = x.iter().map(Real::prec).max().unwrap();
    let mut n: [Integer; 3] = Default::default();
    for (i, xi) in x.iter().enumerate() {
        match nearest_natural(xi) {
            Some((k, d)) if d <= *eps_in => n[i] = k,
            _ => {
                return Err(RobustError::NotNearConfiguration {
                    detail: format!("coordinate {} = {} is not within {} of a natural", i + 1, xi.to_short(12), eps_in.to_short(6)),
                })
            }
        }
    }
    let next = encoding::psi3(m, &n).map_err(|e| not_config(&e))?;
    Ok(next.map(|v| Real::from_integer(&v, prec)))
}

fn not_config(e: &DecodeError) -> RobustError {
    RobustError::NotNearConfiguration { detail: e.to_string() }
}

/// `Υ₂(x₁, x₂) = I(ε(x₁), ε(x₂))` with `I(a,b) = ((a+b)² + 3a + b)/2` and
/// `ε` the variant's error-correcting function.
pub fn upsilon2(kern: &Kernels, a: &Real, b: &Real, variant: Variant) -> Real {
    let (ca, cb) = match variant {
        Variant::Analytic => {
            let y = (a.square() + b.square() + 1) * 32;
            (kern.psi(a, &y), kern.psi(b, &y))
        }
        Variant::Smooth => (kern.r(a), kern.r(b)),
    };
    let s = &ca + &cb;
    (s.square() + ca * 3 + cb) / 2
}

/// `Υₖ₊₁(x) = Υ₂(Υₖ(x₁..xₖ), xₖ₊₁)`.
pub fn upsilon_k(kern: &Kernels, xs: &[Real], variant: Variant) -> Real {
    assert!(xs.len() >= 2, "upsilon_k needs k >= 2");
    let mut acc = upsilon2(kern, &xs[0], &xs[1], variant);
    for x in &xs[2..] {
        acc = upsilon2(kern, &acc, x, variant);
    }
    acc
}

/// `J_{k,i}(n)` for the natural `n` within `1/5` of `x`.
pub fn omega_exact(x: &Real, k: usize, i: usize) -> Result<Integer, RobustError> {
    let fifth = Real::ratio(1, 5, x.prec());
    match nearest_natural(x) {
        Some((n, d)) if d <= fifth => Ok(encoding::unpair_component(&n, k, i).map_err(|e| not_config(&e))?),
        _ => Err(RobustError::NotNearInteger { x: x.to_short(20) }),
    }
}

/// Smallest `j ≥ 1` with `λ^j / 5 < 1/5 − δ`.
pub fn contraction_depth(kern: &Kernels, delta: &Real) -> usize {
    let fifth = Real::ratio(1, 5, kern.prec());
    let room = &fifth - delta;
    let mut j = 1;
    let mut lam = kern.lambda_quarter.clone();
    while &lam / 5 >= room {
        lam = lam * &kern.lambda_quarter;
        j += 1;
    }
    j
}

/// The compiled one-dimensional map `g_M`.
#[derive(Debug, Clone)]
pub struct CompiledMap {
    machine: Arc<TuringMachine>,
    f: RobustExtension3,
    delta: Real,
    j_contract: usize,
    variant: Variant,
    kern: Arc<Kernels>,
}

pub fn compile_map(m: Arc<TuringMachine>, delta: &Real) -> Result<CompiledMap, RobustError> {
    compile_map_with(m, delta, Variant::Analytic)
}

pub fn compile_map_with(m: Arc<TuringMachine>, delta: &Real, variant: Variant) -> Result<CompiledMap, RobustError> {
    let prec = delta.prec().max(crate::numerics::real::default_precision());
    if delta.is_sign_negative() && !delta.is_zero() || *delta >= Real::ratio(1, 5, prec) {
        return Err(RobustError::BadDelta { delta: delta.to_short(12) });
    }
    let kern = Kernels::at(prec);
    let j_contract = contraction_depth(&kern, delta);
    Ok(CompiledMap {
        f: RobustExtension3::reference(m.clone(), Real::ratio(1, 5, prec)),
        machine: m,
        delta: delta.to_prec(prec),
        j_contract,
        variant,
        kern,
    })
}

impl CompiledMap {
    pub fn machine(&self) -> &TuringMachine {
        &self.machine
    }

    pub fn machine_arc(&self) -> Arc<TuringMachine> {
        self.machine.clone()
    }

    pub fn delta(&self) -> &Real {
        &self.delta
    }

    pub fn j_contract(&self) -> usize {
        self.j_contract
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn kernels(&self) -> &Arc<Kernels> {
        &self.kern
    }

    pub fn prec(&self) -> u32 {
        self.kern.prec()
    }

    /// `g_M(x)`: unpair, step, pair, contract.
    pub fn apply(&self, x: &Real) -> Result<Real, RobustError> {
        let x = x.to_prec(self.prec());
        let mut parts = Vec::with_capacity(3);
        for i in 1..=3 {
            parts.push(Real::from_integer(&omega_exact(&x, 3, i)?, self.prec()));
        }
        let parts: [Real; 3] = parts.try_into().unwrap();
        let next = self.f.apply(&parts)?;
        let paired = upsilon_k(&self.kern, &next, self.variant);
        Ok(self.kern.sigma_iter(&paired, self.j_contract))
    }

    /// Exact `ψ(n)` on codes and the identity on naturals that do not
    /// decode.
    fn anchor(&self, n: &Integer) -> Integer {
        if *n < 0 {
            return n.clone();
        }
        encoding::psi(&self.machine, n).unwrap_or_else(|_| n.clone())
    }

    /// A total smooth extension of `g_M`: with `r(x) = n + ρ`, blend the
    /// exact images of `n` and `n+1` by `ρ`. It equals `g_M` on every
    /// `[c − 1/4, c + 1/4]` around a code `c`.
    pub fn apply_total(&self, x: &Real) -> Real {
        let x = x.to_prec(self.prec());
        let quarter = Real::ratio(1, 4, self.prec());
        let base = (&x + &quarter).floor();
        let rho = self.kern.r(&x) - &base;
        let n = base.to_integer().expect("finite argument");
        let lo = Real::from_integer(&self.anchor(&n), self.prec());
        let blended = if rho.is_zero() {
            lo
        } else {
            let hi = Real::from_integer(&self.anchor(&Integer::from(&n + 1u32)), self.prec());
            &lo + &(rho * (hi - &lo))
        };
        self.kern.sigma_iter(&blended, self.j_contract)
    }
}

/// Distance from each iterate to its nearest natural.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMargin {
    pub step: usize,
    pub value: Real,
    pub nearest: Integer,
    pub distance: Real,
}

/// Iterate `x ↦ g_M(x) + e_k` from `x̄₀`; returns `x̄₀` and every iterate.
pub fn iterate_noisy(map: &CompiledMap, x0bar: &Real, steps: usize, noise: &NoiseSpec) -> Result<Vec<Real>, RobustError> {
    if noise.magnitude() > *map.delta() {
        return Err(RobustError::NoiseExceedsBudget {
            noise: noise.magnitude().to_short(12),
            budget: map.delta().to_short(12),
        });
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0bar.to_prec(map.prec());
    let mut errs = noise.sequence();
    out.push(x.clone());
    for step in 0..steps {
        let gx = map.apply(&x).map_err(|e| RobustError::AtStep { step, source: Box::new(e) })?;
        x = gx + errs.next().unwrap();
        out.push(x.clone());
    }
    Ok(out)
}

pub fn margins(iterates: &[Real]) -> Vec<StepMargin> {
    iterates
        .iter()
        .enumerate()
        .map(|(step, v)| {
            let n = v.to_integer().unwrap_or_default();
            let distance = (v - &Real::from_integer(&n, v.prec())).abs();
            StepMargin { step, value: v.clone(), nearest: n, distance }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseMode;
    use crate::tm::{parse_tm, SUCC_TM};

    fn kern() -> Arc<Kernels> {
        Kernels::at(256)
    }

    fn r(num: i64, den: i64) -> Real {
        Real::ratio(num, den, 256)
    }

    #[test]
    fn upsilon_on_integers_is_pairing() {
        let k = kern();
        assert!((upsilon2(&k, &r(0, 1), &r(1, 1), Variant::Analytic) - 1).abs() < 1e-60);
        for (a, b, c) in [(0, 0, 1), (3, 7, 2), (12, 0, 5)] {
            let want = encoding::pair_k(&[Integer::from(a), Integer::from(b), Integer::from(c)]);
            let xs = [r(a, 1), r(b, 1), r(c, 1)];
            for v in [Variant::Analytic, Variant::Smooth] {
                let got = upsilon_k(&k, &xs, v);
                assert!((got - Real::from_integer(&want, 256)).abs() < 1e-50);
            }
        }
    }

    #[test]
    fn upsilon_near_point() {
        let k = kern();
        let got = upsilon2(&k, &r(1, 10), &r(9, 10), Variant::Analytic);
        let want = Real::parse("1.00000000000000000000000000079649230153100427311768313154679", 256).unwrap();
        assert!((&got - &want).abs() < 1e-55, "{got}");
        assert!((got - 1).abs() <= 0.1);
    }

    #[test]
    fn omega_cases() {
        assert_eq!(omega_exact(&r(2, 1), 2, 1).unwrap(), 1);
        assert_eq!(omega_exact(&r(519, 100), 2, 1).unwrap(), encoding::unpair2(&Integer::from(5)).0);
        assert!(matches!(omega_exact(&r(1, 2), 2, 1), Err(RobustError::NotNearInteger { .. })));
    }

    #[test]
    fn contraction_depths() {
        let k = kern();
        assert_eq!(contraction_depth(&k, &r(0, 1)), 1);
        assert_eq!(contraction_depth(&k, &r(19, 100)), 3);
        let mut prev = 0;
        for i in 0..20 {
            let j = contraction_depth(&k, &r(i, 100));
            assert!(j >= prev);
            prev = j;
        }
    }

    #[test]
    fn compile_rejects_bad_delta() {
        let m = Arc::new(parse_tm(SUCC_TM).unwrap());
        assert!(compile_map(m.clone(), &r(1, 5)).is_err());
        assert!(compile_map(m.clone(), &r(-1, 10)).is_err());
        let g = compile_map(m, &r(1, 10)).unwrap();
        let too_big = NoiseSpec::new(NoiseMode::ConstPlus, r(21, 100), 0);
        assert!(matches!(iterate_noisy(&g, &r(64, 1), 3, &too_big), Err(RobustError::NoiseExceedsBudget { .. })));
    }

    #[test]
    fn map_reproduces_psi() {
        let m = Arc::new(parse_tm(SUCC_TM).unwrap());
        let g = compile_map(m.clone(), &r(1, 10)).unwrap();
        let out = g.apply(&r(64, 1)).unwrap();
        assert!((out - 133).abs() < 1e-60);
        let total = g.apply_total(&(r(64, 1) + r(1, 5)));
        assert!((total - 133).abs() < 1e-60);
        let noisy = iterate_noisy(&g, &(r(64, 1) + r(19, 100)), 20, &NoiseSpec::new(NoiseMode::ConstPlus, r(1, 10), 0)).unwrap();
        let ms = margins(&noisy);
        assert_eq!(ms[1].nearest, 133);
        assert!(ms.iter().all(|s| s.distance <= r(1, 5)));
    }

    #[test]
    fn f_ref_absorbs_halt_and_rounds() {
        let m = parse_tm(SUCC_TM).unwrap();
        let fifth = r(1, 5);
        let halted = encoding::EncodedConfig::from_code(&Integer::from(133), 2).triple();
        let x = halted.clone().map(|v| Real::from_integer(&v, 256));
        let y = f_ref(&m, &fifth, &x).unwrap();
        assert_eq!(y.iter().map(|v| v.to_integer().unwrap()).collect::<Vec<_>>(), halted.to_vec());
        let start = encoding::EncodedConfig::from_code(&Integer::from(64), 2).triple();
        let x = start.map(|v| Real::from_integer(&v, 256) + r(19, 100));
        let y = f_ref(&m, &fifth, &x).unwrap();
        assert_eq!(y.iter().map(|v| v.to_integer().unwrap()).collect::<Vec<_>>(), halted.to_vec());
        assert!(f_ref(&m, &fifth, &[r(1, 2), r(0, 1), r(1, 1)]).is_err());
    }
}
