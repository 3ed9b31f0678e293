//! Monte Carlo simulation of the contact process on `Ω^n`, any `N`.
//!
//! Replica `r` of a batch draws from [`crate::rng::replica_rng`]`(seed, r)`,
//! so results do not depend on how replicas are scheduled across threads.

mod config;
mod engine;
mod monotone;

pub use config::SparseConfig;
pub use engine::{
    first_jump_distribution, run_in_place, run_replica, run_trajectory, sample_first_jump, Event, EventKind,
    Sampler, SimResult, Transition, FIRST_JUMP_CAP,
};
pub use monotone::{run_common_skeleton, MonotoneRun};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::RateModel;
use crate::stats::proportion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub survived: u64,
    pub replicas: u64,
}

/// Replicas `0..replicas` in index order.
pub fn run_batch(
    model: &RateModel,
    n: usize,
    init: &SparseConfig,
    t: f64,
    replicas: u64,
    seed: u64,
) -> Result<Vec<SimResult>> {
    if replicas == 0 {
        return Err(invalid("replicas must be >= 1"));
    }
    // Validates once; replicas then cannot fail.
    run_replica(model, n, init, 0.0, seed, 0, |_| {})?;
    let sampler = Sampler::new(model, n)?;
    Ok((0..replicas)
        .into_par_iter()
        .map(|r| engine::replica_with(&sampler, init, t, seed, r, |_| {}).0)
        .collect())
}

/// Fraction of replicas with a nonempty configuration at time `t`.
pub fn estimate_survival(
    model: &RateModel,
    n: usize,
    init: &SparseConfig,
    t: f64,
    replicas: u64,
    seed: u64,
) -> Result<SurvivalEstimate> {
    if replicas == 0 {
        return Err(invalid("replicas must be >= 1"));
    }
    run_replica(model, n, init, 0.0, seed, 0, |_| {})?;
    let sampler = Sampler::new(model, n)?;
    let survived: u64 = (0..replicas)
        .into_par_iter()
        .map(|r| engine::replica_with(&sampler, init, t, seed, r, |_| {}).0.survived_to_t as u64)
        .sum();
    let (p_hat, stderr) = proportion(survived, replicas);
    Ok(SurvivalEstimate { p_hat, stderr, survived, replicas })
}

/// Empirical law of the final configuration, indexed by its bit encoding (`N^n <= 16`).
pub fn final_state_law(
    model: &RateModel,
    n: usize,
    init: &SparseConfig,
    t: f64,
    replicas: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    let size = init.lattice().size();
    if size > 16 {
        return Err(invalid("final-state law is tabulated only for at most 16 sites"));
    }
    run_replica(model, n, init, 0.0, seed, 0, |_| {})?;
    let sampler = Sampler::new(model, n)?;
    Ok((0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut counts = vec![0u64; 1 << size];
            counts[engine::replica_with(&sampler, init, t, seed, r, |_| {}).1.to_bits() as usize] += 1;
            counts
        })
        .reduce(
            || vec![0u64; 1 << size],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::AlphaSeq;

    #[test]
    fn time_zero_survives() {
        let m = RateModel::new(2, 5.0, AlphaSeq::Geometric { q: 0.5 }).unwrap();
        let e = estimate_survival(&m, 3, &SparseConfig::single(2, 3, 0).unwrap(), 0.0, 100, 1).unwrap();
        assert_eq!(e.p_hat, 1.0);
    }

    #[test]
    fn tiny_delta_survives() {
        let m = RateModel::new(2, 1e-9, AlphaSeq::Geometric { q: 0.5 }).unwrap();
        let e = estimate_survival(&m, 3, &SparseConfig::single(2, 3, 0).unwrap(), 5.0, 2000, 2).unwrap();
        assert!(e.p_hat >= 1.0 - 1e-12 - e.stderr);
    }

    #[test]
    fn batch_is_ordered_and_reproducible() {
        let m = RateModel::new(3, 0.5, AlphaSeq::Geometric { q: 0.5 }).unwrap();
        let init = SparseConfig::single(3, 2, 0).unwrap();
        let a = run_batch(&m, 2, &init, 2.0, 64, 9).unwrap();
        let b = run_batch(&m, 2, &init, 2.0, 64, 9).unwrap();
        assert!(a.iter().enumerate().all(|(i, r)| r.replica == i as u64));
        let strip = |v: &[SimResult]| -> Vec<(bool, Option<f64>, u64)> {
            v.iter().map(|r| (r.survived_to_t, r.extinction_time, r.event_count)).collect()
        };
        assert_eq!(strip(&a), strip(&b));
        assert!(run_batch(&m, 2, &init, 2.0, 0, 9).is_err());
    }

    #[test]
    fn pure_death_is_max_of_exponentials() {
        // Three sites dying at rate 2: E[max] = (1 + 1/2 + 1/3)/2.
        let m = RateModel::new(2, 2.0, AlphaSeq::explicit([0.0, 0.0])).unwrap();
        let init = SparseConfig::from_sites(2, 2, [0, 1, 3]).unwrap();
        let runs = run_batch(&m, 2, &init, 1e9, 40_000, 4).unwrap();
        let mean = runs.iter().map(|r| r.extinction_time.unwrap()).sum::<f64>() / runs.len() as f64;
        let expect = (1.0 + 0.5 + 1.0 / 3.0) / 2.0;
        assert!((mean - expect).abs() < 0.02, "{mean} vs {expect}");
    }
}
