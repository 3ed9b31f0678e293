//! Reduction of a base-`N` model to a base-2 model with smaller rates.
//!
//! Writing `a(i,j) = γ_{|i-j|}` with `γ_k = α_k N^{-k}`, the rates are first
//! lowered to their minima over consecutive blocks of `m` levels; a block of
//! `m` levels of `Ω_N` holds `N^m >= 2^n` sites, so it contains a copy of an
//! `n`-level block of `Ω_2`. Each block minimum is then spread over `n`
//! binary levels. A surviving base-2 process therefore implies survival of
//! the original one.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::AlphaSeq;

/// Relative slack for the floating-point sandwich comparison.
const SANDWICH_SLACK: f64 = 1e-12;
const MAX_M: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMin {
    pub block: usize,
    /// Level `i_l ∈ {lm+1, ..., lm+m}` attaining the minimum.
    pub argmin: usize,
    pub ln_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    #[serde(rename = "N")]
    pub base: u32,
    #[serde(rename = "N_prime")]
    pub n_prime: f64,
    pub m: usize,
    pub n: usize,
    pub alpha_doubleprime: AlphaSeq,
    pub blocks: Vec<BlockMin>,
    /// Partial sums of `(N')^{-k} ln α_k`; bounded below when the survival
    /// hypothesis holds for the original rates.
    pub hypothesis_partial_sums: Vec<f64>,
}

pub fn is_power_of_two(n: u32) -> bool {
    n.is_power_of_two()
}

pub fn sandwich_holds(n_prime: f64, base: u32, m: usize, n: usize) -> bool {
    let two_n = 2f64.powi(n as i32);
    n_prime.powi(m as i32) <= two_n * (1.0 + SANDWICH_SLACK)
        && two_n <= (base as f64).powi(m as i32) * (1.0 + SANDWICH_SLACK)
}

/// Smallest `m`, and for it the smallest `n`, with `(N')^m <= 2^n <= N^m`.
pub fn smallest_sandwich(n_prime: f64, base: u32) -> Option<(usize, usize)> {
    (1..=MAX_M).find_map(|m| {
        let n = ((m as f64) * n_prime.log2() - SANDWICH_SLACK).ceil().max(1.0) as usize;
        sandwich_holds(n_prime, base, m, n).then_some((m, n))
    })
}

pub fn compare_reduce(alpha: &AlphaSeq, base: u32, n_prime: f64) -> Result<Reduction> {
    alpha.validate()?;
    if base < 2 {
        return Err(invalid(format!("N must be >= 2, got {base}")));
    }
    if !(n_prime > 1.0) {
        return Err(invalid(format!("N' must exceed 1, got {n_prime}")));
    }
    if is_power_of_two(base) {
        if n_prime > base as f64 {
            return Err(invalid(format!("N' = {n_prime} exceeds N = {base}")));
        }
    } else if n_prime >= base as f64 {
        return Err(invalid(format!("N' must be below N = {base} when N is not a power of 2, got {n_prime}")));
    }
    let (m, n) = smallest_sandwich(n_prime, base)
        .ok_or_else(|| invalid(format!("no (m, n) with m <= {MAX_M} fits between {n_prime} and {base}")))?;

    let ln_n = (base as f64).ln();
    let blocks = (0..8)
        .map(|l| {
            let (argmin, ln_gamma) = (l * m + 1..=l * m + m)
                .map(|i| (i, alpha.ln_value(i) - i as f64 * ln_n))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            BlockMin { block: l, argmin, ln_gamma }
        })
        .collect();
    let hypothesis_partial_sums = (1..=40)
        .scan(0.0, |s, k| {
            *s += n_prime.powi(-(k as i32)) * alpha.ln_value(k);
            Some(*s)
        })
        .collect();
    let alpha_doubleprime = if base == 2 && m == 1 && n == 1 {
        alpha.clone()
    } else {
        AlphaSeq::Reduced { source: Box::new(alpha.clone()), source_base: base, m, n }
    };
    Ok(Reduction { base, n_prime, m, n, alpha_doubleprime, blocks, hypothesis_partial_sums })
}
