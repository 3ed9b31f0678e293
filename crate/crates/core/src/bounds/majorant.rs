//! Quadratic majorants/minorants of `ε(k)` and the summability functional `F_η`.

use serde::{Deserialize, Serialize};

use super::functions::smallness_constants;
use super::recursion::recursion;
use crate::error::{invalid, Result};
use crate::lattice::AlphaSeq;

fn positive_prefix(alpha: &AlphaSeq, len: usize) -> Result<Vec<f64>> {
    let ln: Vec<f64> = (1..=len).map(|k| alpha.ln_value(k)).collect();
    if let Some(k) = ln.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("alpha_{} is zero; the quadratic recursion needs positive rates", k + 1)));
    }
    Ok(ln)
}

/// `ε̃(0..=n)` for `ε̃(k+1) = c (α_{k+1}/α_{k+2}) ε̃(k)²`, `ε̃(0) = δ/α_1`,
/// computed both by iteration and from the closed form
/// `ε̃(n) = (cδ)^{2^n} / (c α_{n+1} Π_{k=1}^n α_k^{2^{n-k}})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsTilde {
    pub factor: f64,
    pub ln_iterated: Vec<f64>,
    pub ln_closed: Vec<f64>,
    /// Largest relative difference between the two sequences.
    pub max_rel_diff: f64,
}

impl EpsTilde {
    pub fn iterated(&self) -> Vec<f64> {
        self.ln_iterated.iter().map(|l| l.exp()).collect()
    }
}

pub fn eps_tilde_bounds(delta: f64, alpha: &AlphaSeq, n: usize, factor: f64) -> Result<EpsTilde> {
    if !(delta > 0.0 && factor > 0.0) {
        return Err(invalid("delta and factor must be positive"));
    }
    let ln_a = positive_prefix(alpha, n + 1)?;
    let ln_c = factor.ln();

    let mut ln_iterated = vec![delta.ln() - ln_a[0]];
    for k in 0..n {
        ln_iterated.push(ln_c + ln_a[k] - ln_a[k + 1] + 2.0 * ln_iterated[k]);
    }
    let ln_closed: Vec<f64> = (0..=n)
        .map(|m| {
            let weight = |k: usize| 2f64.powi((m - k) as i32);
            let denom: f64 = (1..=m).map(|k| weight(k) * ln_a[k - 1]).sum();
            2f64.powi(m as i32) * (ln_c + delta.ln()) - ln_c - ln_a[m] - denom
        })
        .collect();
    let max_rel_diff = ln_iterated
        .iter()
        .zip(&ln_closed)
        .map(|(a, b)| (a - b).exp_m1().abs())
        .fold(0.0, f64::max);
    Ok(EpsTilde { factor, ln_iterated, ln_closed, max_rel_diff })
}

/// Comparison of the true `ε(k)` with the factor-9 and factor-7 sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsDomination {
    pub c7: f64,
    pub c9: f64,
    pub eps: Vec<f64>,
    pub upper9: Vec<f64>,
    pub lower7: Vec<f64>,
    /// Levels `k` for which the 7-comparison applies: `ε̃_7(j) <= c7` for all `j < k`.
    pub lower_valid_until: usize,
    /// `ε(k) <= ε̃_9(k)` at every level (with relative slack `1e-12`).
    pub upper_holds: bool,
    /// `ε(k) >= ε̃_7(k)` at every valid level (with relative slack `1e-12`).
    pub lower_holds: bool,
}

pub fn eps_domination(delta: f64, alpha: &AlphaSeq, n: usize) -> Result<EpsDomination> {
    let s = smallness_constants();
    let trace = recursion(delta, alpha, n + 1)?;
    let eps = trace.eps_seq.ok_or_else(|| invalid("needs positive rates"))?;
    let upper9 = eps_tilde_bounds(delta, alpha, n, 9.0)?.iterated();
    let lower7 = eps_tilde_bounds(delta, alpha, n, 7.0)?.iterated();
    let lower_valid_until = lower7.iter().position(|&e| e > s.c7).map_or(n + 1, |p| p + 1);
    let slack = 1.0 + 1e-12;
    let upper_holds = (0..=n).all(|k| eps[k] <= upper9[k] * slack);
    let lower_holds = (0..lower_valid_until.min(n + 1)).all(|k| eps[k] * slack >= lower7[k]);
    Ok(EpsDomination { c7: s.c7, c9: s.c9, eps, upper9, lower7, lower_valid_until, upper_holds, lower_holds })
}

/// `ln F_η(n)` with `F_η(n) = η^{2^n} / (α_{n+1} Π_{k=1}^n α_k^{2^{n-k}})`.
pub fn ln_f_eta(alpha: &AlphaSeq, eta: f64, n: usize) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(invalid(format!("eta must be positive, got {eta}")));
    }
    let ln_a = positive_prefix(alpha, n + 1)?;
    let denom: f64 = (1..=n).map(|k| 2f64.powi((n - k) as i32) * ln_a[k - 1]).sum();
    Ok(2f64.powi(n as i32) * eta.ln() - ln_a[n] - denom)
}

#[allow(non_snake_case)]
pub fn F_eta(alpha: &AlphaSeq, eta: f64, n: usize) -> Result<f64> {
    Ok(ln_f_eta(alpha, eta, n)?.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityScan {
    pub eta: f64,
    pub depth: usize,
    /// `ln η - Σ_{k<=depth} 2^{-k} ln α_k`; negative means `F_η(n) → 0`.
    pub criterion: f64,
    pub ln_f_values: Vec<f64>,
    pub eventually_below_one: bool,
}

pub fn summability_scan(alpha: &AlphaSeq, eta: f64, depth: usize) -> Result<SummabilityScan> {
    let ln_a = positive_prefix(alpha, depth)?;
    let series: f64 = ln_a.iter().enumerate().map(|(i, l)| 2f64.powi(-(i as i32 + 1)) * l).sum();
    let criterion = eta.ln() - series;
    let ln_f_values = (0..depth).map(|n| ln_f_eta(alpha, eta, n)).collect::<Result<Vec<_>>>()?;
    Ok(SummabilityScan { eta, depth, criterion, ln_f_values, eventually_below_one: criterion < 0.0 })
}
