//! Finite-depth evidence for the two asymptotic rate conditions.
//!
//! Extinction holds when `liminf N^{-k} log β_k = -∞`; survival holds when
//! `Σ N^{-k} log α_k > -∞`. Neither can be decided from a finite prefix, so
//! the verdict here is a trend heuristic and is labelled as such.

use serde::{Deserialize, Serialize};

use super::AlphaSeq;
use crate::error::{invalid, Result};

/// Median growth factor of `|N^{-k} log β_k|` above which the extinction
/// condition is flagged.
const GROWTH_FACTOR: f64 = 1.05;
/// Median contraction factor of the survival-series increments below which
/// that series is flagged as convergent.
const CONTRACTION_FACTOR: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionVerdict {
    ExtinctionConditionIndicated,
    SurvivalConditionIndicated,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    #[serde(rename = "N")]
    pub base: u32,
    pub depth: usize,
    /// `N^{-k} log β_k` for `k = 1..=depth`; `-inf` where `β_k = 0`.
    pub extinction_terms: Vec<f64>,
    /// Running minimum of `extinction_terms`, the finite stand-in for the liminf.
    pub extinction_running_min: Vec<f64>,
    /// Partial sums of `N^{-k} log α_k`, `k = 1..=depth`.
    pub survival_partial_sums: Vec<f64>,
    pub verdict: ConditionVerdict,
    /// Always true: a finite prefix cannot prove either condition.
    pub heuristic: bool,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

pub fn condition_diagnostics(alpha: &AlphaSeq, base: u32, depth: usize) -> Result<ConditionReport> {
    if depth < 2 {
        return Err(invalid(format!("depth must be >= 2, got {depth}")));
    }
    if base < 2 {
        return Err(invalid(format!("N must be >= 2, got {base}")));
    }
    alpha.validate()?;
    let ln_n = (base as f64).ln();
    let scale = |k: usize| (-(k as f64) * ln_n).exp();

    let extinction_terms = (1..=depth)
        .map(|k| Ok(scale(k) * alpha.ln_beta_tail(k)?))
        .collect::<Result<Vec<f64>>>()?;
    let extinction_running_min = extinction_terms
        .iter()
        .scan(f64::INFINITY, |m, &v| {
            *m = m.min(v);
            Some(*m)
        })
        .collect();
    let increments: Vec<f64> = (1..=depth).map(|k| scale(k) * alpha.ln_value(k)).collect();
    let survival_partial_sums = increments
        .iter()
        .scan(0.0, |s, &v| {
            *s += v;
            Some(*s)
        })
        .collect();

    let verdict = if extinction_terms.contains(&f64::NEG_INFINITY) {
        ConditionVerdict::ExtinctionConditionIndicated
    } else {
        let tail = depth / 2;
        let growth = median(
            extinction_terms[tail..]
                .windows(2)
                .filter(|w| w[0] != 0.0)
                .map(|w| w[1] / w[0])
                .collect(),
        );
        let contraction = median(
            increments[tail..]
                .windows(2)
                .filter(|w| w[0] != 0.0)
                .map(|w| (w[1] / w[0]).abs())
                .collect(),
        );
        let finite = increments.iter().all(|v| v.is_finite());
        match (growth, contraction) {
            (Some(g), _) if g > GROWTH_FACTOR => ConditionVerdict::ExtinctionConditionIndicated,
            (_, Some(c)) if finite && c < CONTRACTION_FACTOR => ConditionVerdict::SurvivalConditionIndicated,
            _ => ConditionVerdict::Inconclusive,
        }
    };

    Ok(ConditionReport {
        base,
        depth,
        extinction_terms,
        extinction_running_min,
        survival_partial_sums,
        verdict,
        heuristic: true,
    })
}
