//! Common-skeleton runs of several recovery rates at once.
//!
//! All runs share one uniformized event stream: at rate `N^n (δ_max + Λ)` a
//! site is picked uniformly together with a uniform `u`. Run `a` recovers
//! the site if it is infected and `u < δ_a/(δ_max + Λ)`; every run in which
//! the site is infected fires the same infection attempt if
//! `u >= δ_max/(δ_max + Λ)`. Each run is marginally the contact process
//! with its own `δ_a`, and a larger `δ` can only remove more sites.

use rand::Rng as _;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::engine::Sampler;
use super::SparseConfig;
use crate::error::{invalid, Result};
use crate::lattice::RateModel;
use crate::rng::replica_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneRun {
    pub deltas: Vec<f64>,
    pub events: u64,
    /// Events after which some run with larger `δ` held a site the smaller-`δ` run did not.
    pub violations: u64,
    pub final_counts: Vec<usize>,
}

/// Runs `model` at each of `deltas` (sorted ascending) on a shared skeleton.
pub fn run_common_skeleton(
    model: &RateModel,
    n: usize,
    init: &SparseConfig,
    deltas: &[f64],
    t_max: f64,
    seed: u64,
) -> Result<MonotoneRun> {
    if deltas.is_empty() || deltas.windows(2).any(|w| w[1] < w[0]) || deltas[0] < 0.0 {
        return Err(invalid("deltas must be nonempty, nonnegative and ascending"));
    }
    let d_max = *deltas.last().unwrap();
    let sampler = Sampler::new(&RateModel { delta: d_max, ..model.clone() }, n)?;
    let size = sampler.lattice().size();
    let dominating = d_max + sampler.dominating_rate();
    let mut states: Vec<SparseConfig> = vec![init.clone(); deltas.len()];
    let mut rng = replica_rng(seed, 0);
    let mut t = 0.0;
    let mut events = 0u64;
    let mut violations = 0u64;
    if dominating > 0.0 {
        loop {
            t += rng.sample::<f64, _>(Exp1) / (dominating * size as f64);
            if t > t_max || states.iter().all(|s| s.is_empty()) {
                break;
            }
            let site = rng.random_range(0..size);
            let u = rng.random::<f64>() * dominating;
            if u < d_max {
                for (s, &d) in states.iter_mut().zip(deltas) {
                    if u < d {
                        s.remove(site);
                    }
                }
            } else if states.iter().any(|s| s.contains(site)) {
                let target = sampler.infection_target(site, &mut rng);
                for s in states.iter_mut().filter(|s| s.contains(site)) {
                    s.insert(target);
                }
            }
            events += 1;
            if states.windows(2).any(|w| !w[1].is_subset_of(&w[0])) {
                violations += 1;
            }
        }
    }
    Ok(MonotoneRun {
        deltas: deltas.to_vec(),
        events,
        violations,
        final_counts: states.iter().map(|s| s.count()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::AlphaSeq;

    #[test]
    fn ordering_preserved() {
        let m = RateModel::new(2, 0.0, AlphaSeq::Geometric { q: 0.6 }).unwrap();
        let init = SparseConfig::single(2, 4, 0).unwrap();
        for seed in 0..20 {
            let r = run_common_skeleton(&m, 4, &init, &[0.1, 0.3, 0.9], 4.0, seed).unwrap();
            assert_eq!(r.violations, 0);
            assert!(r.final_counts.windows(2).all(|w| w[1] <= w[0]));
        }
        assert!(run_common_skeleton(&m, 4, &init, &[0.3, 0.1], 1.0, 0).is_err());
    }
}
