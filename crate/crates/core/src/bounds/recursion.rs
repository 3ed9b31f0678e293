//! The renormalization recursion for `N = 2` and the survival bounds built on it.
//!
//! Level `k` of the recursion is a `(δ(k), α_1(k), α_2(k), ...)` contact
//! process with `α_j(k) = 2^{-k} α_{j+k}`, `ξ(k) = f(α_1(k)/δ(k))` and
//! `δ(k+1) = 2 ξ(k) δ(k)`. Everything is carried in logarithms, because
//! `δ(k)` shrinks doubly exponentially once the recursion contracts.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::functions::{f_unchecked, g_ratio, smallness_constants, xi_from_eps, Smallness};
use crate::error::{invalid, Result};
use crate::lattice::AlphaSeq;

/// `ln α_j(k) = ln α_{j+k} - k ln 2`.
pub fn ln_level_alpha(alpha: &AlphaSeq, k: usize, j: usize) -> f64 {
    alpha.ln_value(j + k) - k as f64 * LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurvivalVerdict {
    Positive,
    ZeroIndicated,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormTrace {
    pub delta: f64,
    pub n_levels: usize,
    /// `ln δ(k)`, `k = 0..=n_levels`.
    pub ln_delta_seq: Vec<f64>,
    /// `δ(k)`, `k = 0..=n_levels`; underflows to 0 deep in the contracting regime.
    pub delta_seq: Vec<f64>,
    /// `ξ(k) = f(α_1(k)/δ(k))`, `k < n_levels`.
    pub xi_seq: Vec<f64>,
    /// `ε(k)` from the inductive formula `ε(k+1) = (α_{k+1}/α_{k+2}) g(ε(k))`,
    /// present when `α_1..α_{n_levels}` are all positive.
    pub eps_seq: Option<Vec<f64>>,
    /// Largest `|ξ(k) - f(1/ε(k))|` between the two routes.
    pub route_gap: Option<f64>,
    /// `ln Π_{j<k} (1 - ξ(j))`, `k = 0..=n_levels`.
    pub ln_product_partial: Vec<f64>,
    pub product_partial: Vec<f64>,
    /// `zero_indicated` once the rates have run out (`ξ` pinned at 1/2), else `truncated`.
    pub verdict: SurvivalVerdict,
    pub smallness: Smallness,
}

impl RenormTrace {
    /// `ln ε(k) = ln δ(k) - ln α_1(k)`, straight from the trace.
    pub fn ln_eps_direct(&self, alpha: &AlphaSeq, k: usize) -> f64 {
        self.ln_delta_seq[k] - ln_level_alpha(alpha, k, 1)
    }
}

/// Runs the recursion for `n_levels` steps.
pub fn recursion(delta: f64, alpha: &AlphaSeq, n_levels: usize) -> Result<RenormTrace> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    alpha.validate()?;
    let mut ln_delta_seq = Vec::with_capacity(n_levels + 1);
    let mut xi_seq = Vec::with_capacity(n_levels);
    let mut ln_product_partial = Vec::with_capacity(n_levels + 1);
    ln_delta_seq.push(delta.ln());
    ln_product_partial.push(0.0);
    for k in 0..n_levels {
        let ln_r = ln_level_alpha(alpha, k, 1) - ln_delta_seq[k];
        let xi = f_unchecked(ln_r.exp());
        xi_seq.push(xi);
        ln_delta_seq.push(LN_2 + xi.ln() + ln_delta_seq[k]);
        ln_product_partial.push(ln_product_partial[k] + (-xi).ln_1p());
    }

    let all_positive = (1..=n_levels).all(|j| alpha.value(j) > 0.0);
    let eps_seq = if all_positive && n_levels > 0 {
        let mut eps = Vec::with_capacity(n_levels);
        eps.push(delta / alpha.value(1));
        for k in 0..n_levels - 1 {
            let prev: f64 = eps[k];
            let ln_ratio = alpha.ln_value(k + 1) - alpha.ln_value(k + 2);
            eps.push((ln_ratio + 2.0 * prev.ln() + g_ratio(prev).ln()).exp());
        }
        Some(eps)
    } else {
        None
    };
    let route_gap = eps_seq.as_ref().map(|eps| {
        eps.iter()
            .zip(&xi_seq)
            .map(|(&e, &x)| (xi_from_eps(e) - x).abs())
            .fold(0.0, f64::max)
    });

    let pinned = alpha.support().is_some_and(|s| s < n_levels);
    Ok(RenormTrace {
        delta,
        n_levels,
        delta_seq: ln_delta_seq.iter().map(|l| l.exp()).collect(),
        ln_delta_seq,
        xi_seq,
        eps_seq,
        route_gap,
        product_partial: ln_product_partial.iter().map(|l| l.exp()).collect(),
        ln_product_partial,
        verdict: if pinned { SurvivalVerdict::ZeroIndicated } else { SurvivalVerdict::Truncated },
        smallness: smallness_constants(),
    })
}

/// Lower bound `Π_{k<n} (1 - ξ(k)) e^{-δ(n) t}` on the probability that the
/// `n`-level process started from a single infected site is alive at `t`.
pub fn finite_survival_bound(delta: f64, alpha: &AlphaSeq, n: usize, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("t must be >= 0, got {t}")));
    }
    let trace = recursion(delta, alpha, n)?;
    Ok((trace.ln_product_partial[n] - trace.delta_seq[n] * t).exp())
}

/// Knobs of [`survival_product`]'s tail certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailOptions {
    /// Certification is attempted once `ξ(k)` drops below this.
    pub xi_cutoff: f64,
    /// Maximum number of majorant steps per attempt.
    pub horizon: usize,
    /// The majorant is accepted once `ln ε̃` and its per-step change are both below this.
    pub ln_floor: f64,
    /// Consecutive growth steps of `ε(k) > 1` that indicate a vanishing product.
    pub divergence_run: usize,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self { xi_cutoff: 1e-8, horizon: 2048, ln_floor: -1e4, divergence_run: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalProduct {
    pub delta: f64,
    pub verdict: SurvivalVerdict,
    /// Certified lower bound on `Π_k (1 - ξ(k))` when positive, else 0.
    pub pi_lower: f64,
    /// `ln Π_{k<levels_used} (1 - ξ(k))`, an upper bound on `ln Π`.
    pub ln_pi_partial: f64,
    pub levels_used: usize,
    /// Bound on `Σ_{k >= levels_used} ξ(k)` from the factor-9 majorant.
    pub tail_xi_bound: Option<f64>,
    pub reason: String,
    pub smallness: Smallness,
}

/// Result of one majorant run: the bound on `Σ ε̃(j)`, or `None` if rejected.
fn majorant_tail(alpha: &AlphaSeq, start: usize, ln_eps: f64, opts: &TailOptions, c9: f64) -> Option<f64> {
    let ln9 = 9f64.ln();
    let mut l = ln_eps;
    let mut sum = 0.0;
    for j in start..start + opts.horizon {
        if l > c9.ln() {
            return None;
        }
        sum += l.exp();
        let ln_ratio = alpha.ln_value(j + 1) - alpha.ln_value(j + 2);
        if !ln_ratio.is_finite() {
            return None;
        }
        let next = 2.0 * l + ln9 + ln_ratio;
        if l <= opts.ln_floor && next - l <= opts.ln_floor {
            return Some(sum + 2.0 * next.exp());
        }
        l = next;
    }
    None
}

/// Evaluates `Π_{k>=0} (1 - ξ(k))` for the base-2 model `(δ, α)`.
///
/// The recursion runs until either the tail can be certified with the
/// factor-9 majorant `ε̃(j+1) = 9 (α_{j+1}/α_{j+2}) ε̃(j)²` (using
/// `ξ <= 2ε` and `ln(1-ξ) >= -2ξ`), the rates run out, or `ε(k)` grows past 1
/// for `divergence_run` consecutive levels. Neither of the latter two is a
/// proof that the product vanishes except when the rates have finite support.
pub fn survival_product(delta: f64, alpha: &AlphaSeq, tolerance: f64, max_levels: usize) -> Result<SurvivalProduct> {
    let opts = TailOptions { xi_cutoff: tolerance, ..TailOptions::default() };
    survival_product_with(delta, alpha, max_levels, &opts)
}

pub fn survival_product_with(
    delta: f64,
    alpha: &AlphaSeq,
    max_levels: usize,
    opts: &TailOptions,
) -> Result<SurvivalProduct> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    alpha.validate()?;
    let smallness = smallness_constants();
    let support = alpha.support();
    let mut ln_delta = delta.ln();
    let mut ln_pi = 0.0;
    let mut growth_run = 0usize;
    let mut prev_ln_eps = f64::NEG_INFINITY;
    let done = |verdict, pi_lower, ln_pi, k, tail, reason: &str| SurvivalProduct {
        delta,
        verdict,
        pi_lower,
        ln_pi_partial: ln_pi,
        levels_used: k,
        tail_xi_bound: tail,
        reason: reason.to_string(),
        smallness,
    };

    for k in 0..max_levels {
        if support.is_some_and(|s| k >= s) {
            return Ok(done(
                SurvivalVerdict::ZeroIndicated,
                0.0,
                ln_pi,
                k,
                None,
                "rates exhausted: xi pinned at 1/2 for every further level",
            ));
        }
        let ln_eps = ln_delta - ln_level_alpha(alpha, k, 1);
        let xi = f_unchecked((-ln_eps).exp());
        if xi < opts.xi_cutoff {
            if let Some(eps_sum) = majorant_tail(alpha, k, ln_eps, opts, smallness.c9) {
                let tail = 2.0 * eps_sum;
                let pi_lower = (ln_pi - 2.0 * tail).exp();
                return Ok(done(SurvivalVerdict::Positive, pi_lower, ln_pi, k, Some(tail), "tail certified"));
            }
        }
        if ln_eps > 0.0 && ln_eps > prev_ln_eps {
            growth_run += 1;
            if growth_run >= opts.divergence_run {
                return Ok(done(
                    SurvivalVerdict::ZeroIndicated,
                    0.0,
                    ln_pi,
                    k,
                    None,
                    "eps increasing above 1",
                ));
            }
        } else {
            growth_run = 0;
        }
        prev_ln_eps = ln_eps;
        ln_pi += (-xi).ln_1p();
        ln_delta += LN_2 + xi.ln();
    }
    Ok(done(SurvivalVerdict::Truncated, 0.0, ln_pi, max_levels, None, "max_levels reached"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geometric() -> AlphaSeq {
        AlphaSeq::Geometric { q: 0.5 }
    }

    #[test]
    fn routes_agree() {
        let t = recursion(0.1, &geometric(), 30).unwrap();
        assert!(t.route_gap.unwrap() < 1e-12, "gap {:?}", t.route_gap);
        let t = recursion(0.01, &AlphaSeq::DoubleExp { theta: 1.5 }, 12).unwrap();
        assert!(t.route_gap.unwrap() < 1e-12);
    }

    #[test]
    fn delta_is_product_of_two_xi() {
        let t = recursion(0.3, &geometric(), 10).unwrap();
        let mut d = 0.3;
        for k in 0..10 {
            assert_relative_eq!(t.delta_seq[k], d, max_relative = 1e-13);
            d *= 2.0 * t.xi_seq[k];
        }
        for k in 0..10 {
            let expect = 2.0 * t.xi_seq[k] * t.delta_seq[k];
            assert_relative_eq!(t.delta_seq[k + 1], expect, max_relative = 1e-13);
        }
    }

    #[test]
    fn zero_rate_pins_xi() {
        let alpha = AlphaSeq::explicit([1.0, 0.0, 0.5]);
        let t = recursion(0.2, &alpha, 4).unwrap();
        assert_eq!(t.xi_seq[1], 0.5);
        assert_eq!(t.xi_seq[3], 0.5);
        assert!(t.eps_seq.is_none());
        assert_eq!(t.verdict, SurvivalVerdict::ZeroIndicated);
    }

    #[test]
    fn finite_bound_edges() {
        let b = finite_survival_bound(0.7, &geometric(), 0, 2.0).unwrap();
        assert_relative_eq!(b, (-1.4f64).exp(), max_relative = 1e-15);
        let t = recursion(0.1, &geometric(), 3).unwrap();
        let b0 = finite_survival_bound(0.1, &geometric(), 3, 0.0).unwrap();
        assert_relative_eq!(b0, t.product_partial[3], max_relative = 1e-15);
    }

    #[test]
    fn double_exp_regimes() {
        let p = survival_product(0.001, &AlphaSeq::DoubleExp { theta: 1.5 }, 1e-8, 500).unwrap();
        assert_eq!(p.verdict, SurvivalVerdict::Positive);
        assert!(p.pi_lower > 0.0 && p.pi_lower <= p.ln_pi_partial.exp());
        for delta in [1.0, 0.1, 0.01, 1e-3, 1e-4] {
            let p = survival_product(delta, &AlphaSeq::DoubleExp { theta: 3.0 }, 1e-8, 500).unwrap();
            assert_ne!(p.verdict, SurvivalVerdict::Positive, "delta {delta}");
        }
    }

    #[test]
    fn finite_support_is_zero() {
        let p = survival_product(1e-6, &AlphaSeq::explicit([5.0, 1.0]), 1e-8, 100).unwrap();
        assert_eq!(p.verdict, SurvivalVerdict::ZeroIndicated);
        assert_eq!(p.pi_lower, 0.0);
    }

    #[test]
    fn product_nonincreasing_in_delta() {
        let grid: Vec<f64> = (0..=40).map(|i| 0.01 * 10f64.powf(i as f64 / 20.0)).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&d| survival_product(d, &geometric(), 1e-8, 400).unwrap().pi_lower)
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0], "{vals:?}");
        }
        assert!(vals[0] > 0.0);
    }
}
