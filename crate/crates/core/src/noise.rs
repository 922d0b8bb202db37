//! Bounded perturbations for the robustness experiments.
//!
//! Discrete noise feeds map iterations one value per step. Continuous noise
//! is a smooth function of time added to an ODE right-hand side.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    None,
    /// Independent draws, uniform in `[−δ, δ]`.
    Uniform,
    ConstPlus,
    ConstMinus,
    /// `+δ, −δ, +δ, …`
    Alternating,
}

impl NoiseMode {
    pub const ADVERSARIAL: [NoiseMode; 3] = [NoiseMode::Uniform, NoiseMode::ConstPlus, NoiseMode::Alternating];
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseMode::None => "none",
            NoiseMode::Uniform => "uniform",
            NoiseMode::ConstPlus => "const+",
            NoiseMode::ConstMinus => "const-",
            NoiseMode::Alternating => "alternating",
        })
    }
}

impl FromStr for NoiseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "zero" => Ok(NoiseMode::None),
            "uniform" | "random" => Ok(NoiseMode::Uniform),
            "const+" | "const" | "plus" | "constant" => Ok(NoiseMode::ConstPlus),
            "const-" | "minus" => Ok(NoiseMode::ConstMinus),
            "alternating" | "alt" => Ok(NoiseMode::Alternating),
            other => Err(format!("unknown noise mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    pub delta: Real,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(mode: NoiseMode, delta: Real, seed: u64) -> Self {
        NoiseSpec { mode, delta, seed }
    }

    pub fn none(prec: u32) -> Self {
        NoiseSpec::new(NoiseMode::None, Real::zero(prec), 0)
    }

    /// The largest magnitude this spec can produce.
    pub fn magnitude(&self) -> Real {
        match self.mode {
            NoiseMode::None => Real::zero(self.delta.prec()),
            _ => self.delta.abs(),
        }
    }

    /// Per-step values for a discrete iteration.
    pub fn sequence(&self) -> DiscreteNoise {
        DiscreteNoise { spec: self.clone(), rng: ChaCha8Rng::seed_from_u64(self.seed), step: 0 }
    }
}

pub struct DiscreteNoise {
    spec: NoiseSpec,
    rng: ChaCha8Rng,
    step: u64,
}

impl Iterator for DiscreteNoise {
    type Item = Real;

    fn next(&mut self) -> Option<Real> {
        let d = &self.spec.delta;
        let value = match self.spec.mode {
            NoiseMode::None => Real::zero(d.prec()),
            NoiseMode::Uniform => {
                let u: f64 = self.rng.gen_range(-1.0..=1.0);
                d * u
            }
            NoiseMode::ConstPlus => d.clone(),
            NoiseMode::ConstMinus => -d,
            NoiseMode::Alternating => {
                if self.step.is_multiple_of(2) {
                    d.clone()
                } else {
                    -d
                }
            }
        };
        self.step += 1;
        Some(value)
    }
}

/// Time-dependent perturbation `E(t)` with `|E(t)| ≤ δ`.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothNoise {
    None,
    Constant(Real),
    /// `δ cos 2πt`
    Cosine(Real),
    /// `δ Σ aᵢ sin(2π(fᵢ t + pᵢ))` with `Σ |aᵢ| = 1`.
    Sinusoids { delta: Real, terms: Vec<(f64, f64, f64)> },
}

impl SmoothNoise {
    /// A random sum of eight sinusoids, frequencies in `[0.5, 4]`.
    pub fn seeded(delta: Real, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms: Vec<(f64, f64, f64)> =
            (0..8).map(|_| (rng.gen_range(0.1..1.0), rng.gen_range(0.5..4.0), rng.gen::<f64>())).collect();
        let total: f64 = terms.iter().map(|t| t.0).sum();
        for t in &mut terms {
            t.0 /= total * (1.0 + 1e-12);
        }
        SmoothNoise::Sinusoids { delta, terms }
    }

    /// Continuous counterpart of a discrete mode.
    pub fn from_spec(spec: &NoiseSpec) -> Self {
        match spec.mode {
            NoiseMode::None => SmoothNoise::None,
            NoiseMode::Uniform => SmoothNoise::seeded(spec.delta.clone(), spec.seed),
            NoiseMode::ConstPlus => SmoothNoise::Constant(spec.delta.clone()),
            NoiseMode::ConstMinus => SmoothNoise::Constant(-&spec.delta),
            NoiseMode::Alternating => SmoothNoise::Cosine(spec.delta.clone()),
        }
    }

    pub fn eval(&self, t: &Real) -> Real {
        match self {
            SmoothNoise::None => Real::zero(t.prec()),
            SmoothNoise::Constant(c) => c.clone(),
            SmoothNoise::Cosine(d) => d * &t.cos_2pi(),
            SmoothNoise::Sinusoids { delta, terms } => {
                let mut acc = Real::zero(t.prec());
                for &(a, f, p) in terms {
                    acc = acc + (t * f + p).sin_2pi() * a;
                }
                delta * &acc
            }
        }
    }

    pub fn bound(&self) -> Real {
        match self {
            SmoothNoise::None => Real::zero(64),
            SmoothNoise::Constant(c) => c.abs(),
            SmoothNoise::Cosine(d) | SmoothNoise::Sinusoids { delta: d, .. } => d.abs(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_modes_respect_bound() {
        let d = Real::ratio(1, 10, 128);
        for mode in [NoiseMode::Uniform, NoiseMode::ConstPlus, NoiseMode::ConstMinus, NoiseMode::Alternating] {
            let spec = NoiseSpec::new(mode, d.clone(), 7);
            for e in spec.sequence().take(500) {
                assert!(e.abs() <= d, "{mode}: {e}");
            }
        }
        let alt: Vec<f64> = NoiseSpec::new(NoiseMode::Alternating, d.clone(), 0).sequence().take(3).map(|x| x.to_f64()).collect();
        assert_eq!(alt, vec![0.1, -0.1, 0.1]);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let d = Real::ratio(1, 10, 128);
        let a: Vec<Real> = NoiseSpec::new(NoiseMode::Uniform, d.clone(), 42).sequence().take(20).collect();
        let b: Vec<Real> = NoiseSpec::new(NoiseMode::Uniform, d, 42).sequence().take(20).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn smooth_noise_bounded() {
        let d = Real::ratio(1, 10, 128);
        let n = SmoothNoise::seeded(d.clone(), 3);
        for i in 0..400 {
            let t = Real::ratio(i, 37, 128);
            assert!(n.eval(&t).abs() <= d);
        }
        assert_eq!("alt".parse::<NoiseMode>().unwrap(), NoiseMode::Alternating);
    }
}
