use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::cascade::{cascade, cascade_params};
use super::dynamics::{bit, check_level, Pair, PairParams};
use super::joint::{run_coupled, run_coupled_from, CoupledOptions, PairBits};
use crate::error::{invalid, Result};
use crate::exactgen::{build_kernel, exact_law, space_size};
use crate::lattice::RateModel;
use crate::simulate::{final_state_law, SparseConfig};
use crate::stats::{chi_square, min_expected, pool, proportion, total_variation, ChiSquare};

/// Significance level of every statistical check.
pub const SIGNIFICANCE: f64 = 1e-3;
/// Smallest expected cell count for a stratum to enter a chi-square test.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub x: u64,
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
}

impl Stratum {
    fn new(x: u64, counts: Vec<u64>, probs: &[f64]) -> (Self, ChiSquare) {
        let total: u64 = counts.iter().sum();
        let c = chi_square(&counts, probs);
        let expected = probs.iter().map(|p| p * total as f64).collect();
        (Self { x, counts, expected, chi2: c.chi2, df: c.df, p: c.p }, c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub test: String,
    pub params: Value,
    pub strata: Vec<Stratum>,
    pub pooled_p: Option<f64>,
    /// Test statistic compared with `threshold` when it is not a p-value.
    pub statistic: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    /// No stratum had enough data to test.
    pub inconclusive: bool,
}

fn origin(n: u32) -> Result<SparseConfig> {
    SparseConfig::single(2, n as usize, 0)
}

fn xi_of(model: &RateModel) -> Result<f64> {
    crate::bounds::f(model.alpha.value(1) / model.delta)
}

/// Checks `P[Ỹ_t = · | X_t = x] = P(x, ·)` stratum by stratum from `X_0 = δ_0`.
///
/// Also fails if any coupled replica breaks `Y ⊆ Ỹ` or leaves the kernel's support.
pub fn conditional_law_test(model: &RateModel, n: u32, t: f64, replicas: u64, seed: u64) -> Result<CouplingReport> {
    check_level(n)?;
    if n > 3 {
        return Err(invalid(format!("conditional-law test supports n <= 3, got {n}")));
    }
    if replicas == 0 {
        return Err(invalid("replicas must be >= 1"));
    }
    let x0 = origin(n)?;
    let finals: Vec<PairBits> = (0..replicas)
        .into_par_iter()
        .map(|r| run_coupled(model, n, &x0, t, seed, r, |_| {}).map(|run| run.state))
        .collect::<Result<_>>()?;
    let ny = space_size(n - 1);
    let mut by_x: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for s in &finals {
        by_x.entry(s.x).or_insert_with(|| vec![0; ny])[s.ytilde as usize] += 1;
    }
    let kernel = build_kernel(n, xi_of(model)?)?;
    let mut strata = Vec::new();
    let mut parts = Vec::new();
    for (x, counts) in by_x {
        let probs: Vec<f64> = (0..ny).map(|y| kernel.entry(x as usize, y)).collect();
        let total: u64 = counts.iter().sum();
        let point_mass = probs.iter().filter(|&&p| p > 0.0).count() == 1;
        let outside = counts.iter().zip(&probs).any(|(&c, &p)| c > 0 && p == 0.0);
        if point_mass || outside || min_expected(total, &probs) >= MIN_EXPECTED {
            let (s, c) = Stratum::new(x, counts, &probs);
            strata.push(s);
            parts.push(c);
        }
    }
    let dominated = finals.iter().all(|s| s.y & !s.ytilde == 0);
    let pooled = (!parts.is_empty()).then(|| pool(&parts));
    let inconclusive = parts.iter().all(|c| c.df == 0);
    let pooled_p = pooled.as_ref().map(|c| c.p);
    let pass = !inconclusive && dominated && pooled_p.is_some_and(|p| p > SIGNIFICANCE) && strata.iter().all(|s| s.chi2.is_finite());
    Ok(CouplingReport {
        test: "conditional_law".into(),
        params: json!({
            "delta": model.delta, "alpha": model.alpha, "n": n, "t": t,
            "replicas": replicas, "seed": seed, "xi": kernel.xi(),
            "pooled_chi2": pooled.as_ref().map(|c| c.chi2), "pooled_df": pooled.as_ref().map(|c| c.df),
        }),
        strata,
        pooled_p,
        statistic: None,
        threshold: SIGNIFICANCE,
        pass,
        inconclusive,
    })
}

/// Compares the law of `X_t` under the coupling with the plain process (and,
/// for `n <= 2`, with the exact law), by total variation.
pub fn marginal_test(model: &RateModel, n: u32, t: f64, replicas: u64, seed: u64, tv_threshold: f64) -> Result<CouplingReport> {
    check_level(n)?;
    if n > 2 {
        return Err(invalid(format!("marginal test tabulates X only for n <= 2, got {n}")));
    }
    if replicas == 0 {
        return Err(invalid("replicas must be >= 1"));
    }
    let x0 = origin(n)?;
    let nx = space_size(n);
    let coupled = (0..replicas)
        .into_par_iter()
        .map(|r| run_coupled(model, n, &x0, t, seed, r, |_| {}).map(|run| run.state.x))
        .collect::<Result<Vec<u64>>>()?;
    let mut counts = vec![0u64; nx];
    for x in coupled {
        counts[x as usize] += 1;
    }
    let plain = final_state_law(model, n as usize, &x0, t, replicas, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let emp = |c: &[u64]| {
        let tot: u64 = c.iter().sum();
        c.iter().map(|&v| v as f64 / tot as f64).collect::<Vec<f64>>()
    };
    let tv_plain = total_variation(&emp(&counts), &emp(&plain));
    let alpha: Vec<f64> = (1..=n as usize).map(|k| model.alpha.value(k)).collect();
    let exact = exact_law(n, model.delta, &alpha, 1, t)?;
    let tv_exact = total_variation(&emp(&counts), &exact);
    let (stratum, _) = Stratum::new(1, counts, &exact);
    let pass = tv_plain < tv_threshold && tv_exact < tv_threshold;
    Ok(CouplingReport {
        test: "marginal".into(),
        params: json!({
            "delta": model.delta, "alpha": model.alpha, "n": n, "t": t, "replicas": replicas, "seed": seed,
            "plain_counts": plain, "tv_plain": tv_plain, "tv_exact": tv_exact,
        }),
        strata: vec![stratum],
        pooled_p: None,
        statistic: Some(tv_plain.max(tv_exact)),
        threshold: tv_threshold,
        pass,
        inconclusive: false,
    })
}

/// Checks that the first jump of `Y` from a fixed snapshot follows the
/// `(δ', α')` contact rates, whatever `X` and `Ỹ` are doing.
pub fn y_first_jump_test(params: &PairParams, start: PairBits, replicas: u64, seed: u64) -> Result<CouplingReport> {
    let pair = Pair::new(params.clone());
    let ny = pair.y_sites();
    let rates: Vec<f64> = (0..ny).map(|i| pair.y_contact_rate(start.y, i)).collect();
    let total: f64 = rates.iter().sum();
    if total == 0.0 {
        return Err(invalid("Y cannot move from this snapshot"));
    }
    let opts = CoupledOptions { frozen_x: false, stop_on_y_jump: true };
    let outcomes = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let run = run_coupled_from(params, start, f64::INFINITY, opts, seed, r, |_| {})?;
            Ok(((run.state.y ^ start.y).trailing_zeros() as usize, run.t))
        })
        .collect::<Result<Vec<(usize, f64)>>>()?;
    let mut counts = vec![0u64; ny];
    let mut time_sum = 0.0;
    for &(i, t) in &outcomes {
        counts[i] += 1;
        time_sum += t;
    }
    let probs: Vec<f64> = rates.iter().map(|r| r / total).collect();
    let (stratum, c) = Stratum::new(start.y, counts, &probs);
    // Mean of `replicas` Exp(total) times, as a z-score.
    let mean = time_sum / replicas as f64;
    let z = (mean * total - 1.0) * (replicas as f64).sqrt();
    let pass = c.p > SIGNIFICANCE && z.abs() < 4.0;
    Ok(CouplingReport {
        test: "y_first_jump".into(),
        params: json!({
            "pair": params, "start": start, "replicas": replicas, "seed": seed,
            "rates": rates, "mean_time": mean, "expected_mean_time": 1.0 / total, "time_z": z,
            "ytilde_differs": (0..ny).any(|i| bit(start.ytilde, i) != bit(start.y, i)),
        }),
        strata: vec![stratum],
        pooled_p: Some(c.p),
        statistic: Some(z),
        threshold: SIGNIFICANCE,
        pass,
        inconclusive: false,
    })
}

/// Per-level frequencies from repeated cascades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeStats {
    pub n: u32,
    pub t: f64,
    pub replicas: u64,
    /// Empirical `P[X^{(n-m)}_0 = δ_0]`, `m = 0..=n`.
    pub origin_freq: Vec<f64>,
    /// `Π_{k<m} (1 - ξ(k))`.
    pub origin_expected: Vec<f64>,
    pub origin_stderr: Vec<f64>,
    /// Empirical `P[X^{(n-m)}_t ≠ 0]`.
    pub alive_freq: Vec<f64>,
    /// `e^{-δ(n) t} Π_{k<n} (1 - ξ(k))`, the exact value for the bottom level.
    pub bottom_expected: f64,
    /// Replicas where some level is alive while the level above is not.
    pub order_violations: u64,
    /// Largest `|freq - expected| / σ` over the origin and bottom-level checks.
    pub max_z: f64,
    pub pass: bool,
}

pub fn cascade_stats(model: &RateModel, n: u32, t: f64, replicas: u64, seed: u64) -> Result<CascadeStats> {
    if replicas == 0 {
        return Err(invalid("replicas must be >= 1"));
    }
    let params = cascade_params(model, n)?;
    let runs = (0..replicas)
        .into_par_iter()
        .map(|r| cascade(model, n, t, seed, r).map(|c| (c.starts_at_origin(), c.alive())))
        .collect::<Result<Vec<_>>>()?;
    let levels = n as usize + 1;
    let mut origin = vec![0u64; levels];
    let mut alive = vec![0u64; levels];
    let mut order_violations = 0;
    for (o, a) in &runs {
        for m in 0..levels {
            origin[m] += o[m] as u64;
            alive[m] += a[m] as u64;
        }
        if a.windows(2).any(|w| w[1] && !w[0]) {
            order_violations += 1;
        }
    }
    let mut prod = 1.0;
    let mut origin_expected = Vec::with_capacity(levels);
    for lp in &params {
        origin_expected.push(prod);
        if let Some(xi) = lp.xi {
            prod *= 1.0 - xi;
        }
    }
    let bottom_expected = (-params[n as usize].delta * t).exp() * origin_expected[n as usize];
    let sd = |p: f64| (p * (1.0 - p) / replicas as f64).sqrt();
    let z = |count: u64, p: f64| {
        let f = count as f64 / replicas as f64;
        let s = sd(p);
        if s == 0.0 {
            if (f - p).abs() == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            (f - p).abs() / s
        }
    };
    let mut max_z = (0..levels).map(|m| z(origin[m], origin_expected[m])).fold(0.0, f64::max);
    max_z = max_z.max(z(alive[n as usize], bottom_expected));
    let freq = |c: &[u64]| c.iter().map(|&v| proportion(v, replicas).0).collect::<Vec<f64>>();
    Ok(CascadeStats {
        n,
        t,
        replicas,
        origin_freq: freq(&origin),
        origin_stderr: origin_expected.iter().map(|&p| sd(p)).collect(),
        origin_expected,
        alive_freq: freq(&alive),
        bottom_expected,
        order_violations,
        max_z,
        pass: order_violations == 0 && max_z <= 3.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::AlphaSeq;

    fn model() -> RateModel {
        RateModel::new(2, 1.0, AlphaSeq::explicit(vec![2.0, 1.0])).unwrap()
    }

    #[test]
    fn conditional_law_small() {
        let r = conditional_law_test(&model(), 2, 1.0, 4000, 5).unwrap();
        assert!(r.pass, "{}", serde_json::to_string(&r).unwrap());
        // x = 0 stratum is a point mass at 0.
        let z = r.strata.iter().find(|s| s.x == 0).unwrap();
        assert_eq!(z.counts.iter().sum::<u64>(), z.counts[0]);
    }

    #[test]
    fn marginal_at_time_zero_is_exact() {
        let r = marginal_test(&model(), 2, 0.0, 500, 1, 1e-12).unwrap();
        assert_eq!(r.params["tv_plain"], 0.0);
        assert!(r.pass);
    }

    #[test]
    fn y_first_jump_follows_contact_rates() {
        let p = PairParams::from_rates(2, 1.0, &[2.0, 1.0]).unwrap();
        // X = (01, 11), Ỹ = (1, 1), Y = (0, 1): Y's infection at 0 uses its own clock.
        let start = PairBits { x: 0b1110, ytilde: 0b11, y: 0b10 };
        let r = y_first_jump_test(&p, start, 4000, 2).unwrap();
        assert!(r.pass, "{}", serde_json::to_string(&r).unwrap());
    }

    #[test]
    fn cascade_stats_small() {
        let s = cascade_stats(&RateModel::new(2, 0.3, AlphaSeq::Geometric { q: 0.5 }).unwrap(), 3, 0.5, 3000, 8).unwrap();
        assert_eq!(s.order_violations, 0);
        assert!(s.max_z < 4.5, "{s:?}");
        assert_eq!(s.origin_freq[0], 1.0);
    }
}
