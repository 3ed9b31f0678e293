//! Extinction certificates from the subcritical-branching comparison.
//!
//! With time rescaled so that the per-site infection rate `|a| = (1 - 1/N) Σ α_k`
//! is 1, each "type" started by a long-range infection produces fewer than
//! `(1 - 1/N)(1 + 1/δ)^{N^n} β_{n+1}` new types on average. If that number is
//! below 1 for some `n`, the types form a subcritical branching process and
//! the contact process dies out.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::AlphaSeq;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionCertificate {
    pub n_witness: usize,
    pub ln_offspring: f64,
    pub offspring_value: f64,
    pub delta: f64,
    #[serde(rename = "N")]
    pub base: u32,
    pub alpha: AlphaSeq,
}

impl ExtinctionCertificate {
    /// Recomputes the offspring bound from the stored fields.
    pub fn recompute(&self) -> Result<f64> {
        ln_offspring(self.delta, &self.alpha, self.base, self.n_witness)
    }
}

/// `ln[(1 - 1/N)(1 + 1/δ̂)^{N^n} β̂_{n+1}]` in the model rescaled to `|a| = 1`.
pub fn ln_offspring(delta: f64, alpha: &AlphaSeq, base: u32, n: usize) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    if base < 2 || n == 0 {
        return Err(invalid("need N >= 2 and n >= 1"));
    }
    let keep = 1.0 - 1.0 / base as f64;
    let total = alpha.total()?;
    if total == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_a = keep.ln() + total.ln();
    let ln_beta = alpha.ln_beta_tail(n + 1)?;
    let sites = (base as f64).powi(n as i32);
    let delta_hat = delta / ln_a.exp();
    Ok(keep.ln() + sites * (1.0 / delta_hat).ln_1p() + ln_beta - ln_a)
}

/// First `n <= max_depth` whose offspring bound is below 1.
pub fn certify_extinction(
    delta: f64,
    alpha: &AlphaSeq,
    base: u32,
    max_depth: usize,
) -> Result<Option<ExtinctionCertificate>> {
    for n in 1..=max_depth {
        let ln_off = ln_offspring(delta, alpha, base, n)?;
        if ln_off < 0.0 {
            return Ok(Some(ExtinctionCertificate {
                n_witness: n,
                ln_offspring: ln_off,
                offspring_value: ln_off.exp(),
                delta,
                base,
                alpha: alpha.clone(),
            }));
        }
    }
    Ok(None)
}
