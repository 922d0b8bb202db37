//! Exact integer codes for configurations.
//!
//! A word `w₁w₂…wₙ` is the base-`k` number `Σ γ(wᵢ) k^{i-1}` with
//! `γ(B) = 0`. A configuration becomes the triple `(y₁, y₂, q)` of its
//! right word, its left word (head cell first) and its 1-based state
//! number, and the triple collapses to one natural through the diagonal
//! pairing `I(x, y) = (x+y)(x+y+1)/2 + x`.

use rug::ops::Pow;
use rug::Integer;

use crate::tm::{Configuration, TuringMachine};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("state number {q} is outside 1..={m}")]
    BadState { q: String, m: usize },
    #[error("unpairing needs k >= 2, got {0}")]
    BadArity(usize),
}

/// `(x+y)(x+y+1)/2 + x`.
pub fn pair2(x: &Integer, y: &Integer) -> Integer {
    let s = Integer::from(x + y);
    let t = Integer::from(&s + 1u32) * &s;
    (t >> 1u32) + x
}

/// Inverse of [`pair2`].
pub fn unpair2(z: &Integer) -> (Integer, Integer) {
    // s = floor((sqrt(8z+1) - 1) / 2) is the diagonal holding z
    let disc = Integer::from(z << 3u32) + 1u32;
    let s: Integer = (disc.sqrt() - 1u32) >> 1u32;
    let t = (Integer::from(&s + 1u32) * &s) >> 1u32;
    let x = Integer::from(z - &t);
    let y = Integer::from(&s - &x);
    (x, y)
}

/// `I₂(I₂(…I₂(x₁,x₂)…), xₖ)`.
pub fn pair_k(xs: &[Integer]) -> Integer {
    assert!(xs.len() >= 2, "pair_k needs at least two components");
    let mut acc = pair2(&xs[0], &xs[1]);
    for x in &xs[2..] {
        acc = pair2(&acc, x);
    }
    acc
}

pub fn unpair_k(z: &Integer, k: usize) -> Result<Vec<Integer>, DecodeError> {
    if k < 2 {
        return Err(DecodeError::BadArity(k));
    }
    let mut out = vec![Integer::new(); k];
    let mut acc = z.clone();
    for i in (1..k).rev() {
        let (a, b) = unpair2(&acc);
        out[i] = b;
        acc = a;
    }
    out[0] = acc;
    Ok(out)
}

/// `J_{k,i}(z)`: the `i`-th (1-based) component of the `k`-fold unpairing.
pub fn unpair_component(z: &Integer, k: usize, i: usize) -> Result<Integer, DecodeError> {
    let mut parts = unpair_k(z, k)?;
    Ok(parts.swap_remove(i - 1))
}

pub fn word_code(word: &[usize], base: usize) -> Integer {
    let mut acc = Integer::new();
    for &s in word.iter().rev() {
        acc *= base as u32;
        acc += s as u32;
    }
    acc
}

pub fn word_decode(code: &Integer, base: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut rest = code.clone();
    while rest != 0 {
        let digit = Integer::from(rest.mod_u(base as u32));
        out.push(digit.to_usize().unwrap());
        rest /= base as u32;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedConfig {
    pub y1: Integer,
    pub y2: Integer,
    pub q: Integer,
    pub k: usize,
    pub c: Integer,
}

impl EncodedConfig {
    pub fn from_triple(y1: Integer, y2: Integer, q: Integer, k: usize) -> Self {
        let c = pair_k(&[y1.clone(), y2.clone(), q.clone()]);
        EncodedConfig { y1, y2, q, k, c }
    }

    pub fn from_code(c: &Integer, k: usize) -> Self {
        let parts = unpair_k(c, 3).expect("arity 3");
        let [y1, y2, q]: [Integer; 3] = parts.try_into().unwrap();
        EncodedConfig { y1, y2, q, k, c: c.clone() }
    }

    pub fn triple(&self) -> [Integer; 3] {
        [self.y1.clone(), self.y2.clone(), self.q.clone()]
    }
}

pub fn encode_config(m: &TuringMachine, cfg: &Configuration) -> EncodedConfig {
    let k = m.k();
    EncodedConfig::from_triple(word_code(&cfg.u, k), word_code(&cfg.v, k), Integer::from(cfg.state + 1), k)
}

pub fn decode_config(m: &TuringMachine, e: &EncodedConfig) -> Result<Configuration, DecodeError> {
    let q = e.q.to_usize().filter(|&q| (1..=m.m()).contains(&q)).ok_or_else(|| DecodeError::BadState {
        q: e.q.to_string(),
        m: m.m(),
    })?;
    Ok(Configuration::new(word_decode(&e.y1, m.k()), word_decode(&e.y2, m.k()), q - 1))
}

pub fn encode(m: &TuringMachine, cfg: &Configuration) -> Integer {
    encode_config(m, cfg).c
}

pub fn decode(m: &TuringMachine, c: &Integer) -> Result<Configuration, DecodeError> {
    decode_config(m, &EncodedConfig::from_code(c, m.k()))
}

/// One machine step on codes.
pub fn psi(m: &TuringMachine, c: &Integer) -> Result<Integer, DecodeError> {
    Ok(encode(m, &m.step(&decode(m, c)?)))
}

/// One machine step on `(y₁, y₂, q)` triples.
pub fn psi3(m: &TuringMachine, y: &[Integer; 3]) -> Result<[Integer; 3], DecodeError> {
    let e = EncodedConfig::from_triple(y[0].clone(), y[1].clone(), y[2].clone(), m.k());
    let next = encode_config(m, &m.step(&decode_config(m, &e)?));
    Ok(next.triple())
}

/// The code orbit `c, ψ(c), …, ψ^{[n]}(c)`.
pub fn psi_orbit(m: &TuringMachine, c: &Integer, n: usize) -> Result<Vec<Integer>, DecodeError> {
    let cfg = decode(m, c)?;
    Ok(m.run_n(&cfg, n).iter().map(|x| encode(m, x)).collect())
}

/// Code of the initial configuration for an input word.
pub fn input_code(m: &TuringMachine, input: &[usize]) -> Integer {
    encode(m, &m.initial(input))
}

/// `k^n - 1`, the code of `n` copies of the first symbol when `k = 2`.
pub fn unary_code(n: u32) -> Integer {
    Integer::from(2u32).pow(n) - 1u32
}
