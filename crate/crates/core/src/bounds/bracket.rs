//! Two-sided brackets on the critical recovery rate.
//!
//! The lower end is the largest `δ` at which [`survival_product`] certifies a
//! positive product; the upper end is the smallest `δ` that admits an
//! extinction certificate. Both properties are monotone in `δ`, so each end
//! is located by a decade scan followed by log-scale bisection.

use serde::{Deserialize, Serialize};

use super::compare::{compare_reduce, is_power_of_two};
use super::extinction::certify_extinction;
use super::recursion::{survival_product_with, SurvivalVerdict, TailOptions};
use crate::error::{invalid, Result};
use crate::lattice::{AlphaSeq, RateModel};
use crate::simulate::{estimate_survival, SparseConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n: usize,
    pub t: f64,
    pub replicas: u64,
    pub seed: u64,
    /// The estimate is where the finite-system survival fraction crosses this level.
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketOptions {
    pub bisect_iters: usize,
    pub rel_tol: f64,
    pub delta_floor: f64,
    pub delta_ceiling: f64,
    pub survival_levels: usize,
    pub certify_depth: usize,
    pub tail: TailOptions,
    /// Used for the lower end when `N` is not a power of 2; defaults to `N - 1/2`.
    pub n_prime: Option<f64>,
    pub mc: Option<McOptions>,
}

impl Default for BracketOptions {
    fn default() -> Self {
        Self {
            bisect_iters: 40,
            rel_tol: 1e-6,
            delta_floor: 1e-12,
            delta_ceiling: 1e12,
            survival_levels: 400,
            certify_depth: 60,
            tail: TailOptions::default(),
            n_prime: None,
            mc: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub family: String,
    #[serde(rename = "N")]
    pub base: u32,
    pub lower: f64,
    /// `f64::INFINITY` (serialized as null) when no certificate was found below the ceiling.
    pub upper: f64,
    /// The smallest probed `δ` already certified extinction, so `upper` is only the floor.
    pub upper_at_floor: bool,
    /// Base-2 rates used for the lower end (differs from the input for `N != 2`).
    pub lower_alpha: AlphaSeq,
    pub survival_levels: usize,
    pub certify_depth: usize,
    /// Finite-system Monte Carlo point estimate; not a bound.
    pub mc_estimate: Option<f64>,
    pub consistent: bool,
}

impl Bracket {
    pub fn csv_header() -> &'static str {
        "family,lower,upper,mc_estimate,survival_levels,certify_depth"
    }

    pub fn csv_row(&self) -> String {
        let mc = self.mc_estimate.map_or(String::new(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{}",
            self.family, self.lower, self.upper, mc, self.survival_levels, self.certify_depth
        )
    }
}

/// Largest `δ` in `[lo, hi)` with `pred(δ)`, given `pred(lo)` and `!pred(hi)`.
fn bisect_log(mut lo: f64, mut hi: f64, opts: &BracketOptions, pred: impl Fn(f64) -> Result<bool>) -> Result<(f64, f64)> {
    for _ in 0..opts.bisect_iters {
        if (hi - lo) / lo <= opts.rel_tol {
            break;
        }
        let mid = (lo * hi).sqrt();
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

fn decades(opts: &BracketOptions) -> Vec<f64> {
    let lo = opts.delta_floor.log10().floor() as i32;
    let hi = opts.delta_ceiling.log10().ceil() as i32;
    (lo..=hi).map(|j| 10f64.powi(j)).collect()
}

pub fn bracket_delta_c(alpha: &AlphaSeq, base: u32, opts: &BracketOptions) -> Result<Bracket> {
    alpha.validate()?;
    let lower_alpha = if base == 2 {
        alpha.clone()
    } else {
        let n_prime = opts
            .n_prime
            .unwrap_or(if is_power_of_two(base) { base as f64 } else { base as f64 - 0.5 });
        compare_reduce(alpha, base, n_prime)?.alpha_doubleprime
    };
    let mut out = Bracket {
        family: alpha.to_string(),
        base,
        lower: 0.0,
        upper: f64::INFINITY,
        upper_at_floor: false,
        lower_alpha: lower_alpha.clone(),
        survival_levels: opts.survival_levels,
        certify_depth: opts.certify_depth,
        mc_estimate: None,
        consistent: true,
    };

    if alpha.support().is_some() {
        out.upper = 0.0;
    } else {
        let grid = decades(opts);
        let survives = |d: f64| -> Result<bool> {
            Ok(survival_product_with(d, &lower_alpha, opts.survival_levels, &opts.tail)?.verdict
                == SurvivalVerdict::Positive)
        };
        if let Some(pos) = grid.iter().rposition(|&d| survives(d).unwrap_or(false)) {
            out.lower = match grid.get(pos + 1) {
                Some(&hi) => bisect_log(grid[pos], hi, opts, survives)?.0,
                None => grid[pos],
            };
        }

        let dies = |d: f64| -> Result<bool> { Ok(certify_extinction(d, alpha, base, opts.certify_depth)?.is_some()) };
        if let Some(pos) = grid.iter().position(|&d| dies(d).unwrap_or(false)) {
            if pos == 0 {
                out.upper = grid[0];
                out.upper_at_floor = true;
            } else {
                out.upper = bisect_log(grid[pos - 1], grid[pos], opts, |d| dies(d).map(|b| !b))?.1;
            }
        }
    }
    out.consistent = out.lower <= out.upper;

    if let Some(mc) = &opts.mc {
        out.mc_estimate = Some(mc_crossing(alpha, base, mc)?);
    }
    Ok(out)
}

/// `δ` at which the estimated survival fraction at `(n, t)` crosses `mc.level`,
/// by log-bisection over `[1e-4, 1e2]` with common seeds.
fn mc_crossing(alpha: &AlphaSeq, base: u32, mc: &McOptions) -> Result<f64> {
    if !(0.0 < mc.level && mc.level < 1.0) {
        return Err(invalid("mc level must lie in (0, 1)"));
    }
    let above = |d: f64| -> Result<bool> {
        let model = RateModel::new(base, d, alpha.clone())?;
        let init = SparseConfig::single(base, mc.n, 0)?;
        Ok(estimate_survival(&model, mc.n, &init, mc.t, mc.replicas, mc.seed)?.p_hat >= mc.level)
    };
    let (mut lo, mut hi) = (1e-4f64, 1e2f64);
    if !above(lo)? {
        return Ok(lo);
    }
    if above(hi)? {
        return Ok(hi);
    }
    for _ in 0..20 {
        let mid = (lo * hi).sqrt();
        if above(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}
