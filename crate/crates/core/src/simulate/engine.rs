//! Event-driven sampler for the contact process on `Ω^n`.
//!
//! Every infected site carries one clock of rate `δ + Λ`, with
//! `Λ = (1 - 1/N) Σ_{k<=n} α_k` its total outgoing infection rate. When a
//! clock rings the site recovers with probability `δ/(δ + Λ)`; otherwise a
//! distance `k` is drawn with weight `α_k` and a target uniformly among the
//! `N^{k-1}(N-1)` sites at exactly that distance. Hitting an infected target
//! changes nothing. This realizes the pair rate `α_k N^{-k}` exactly.

use std::time::Instant;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng as _;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::SparseConfig;
use crate::error::{invalid, Error, Result};
use crate::lattice::{FiniteLattice, RateModel};
use crate::rng::{replica_rng, Rng};

/// Largest lattice enumerated by [`first_jump_distribution`].
pub const FIRST_JUMP_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Recovery,
    Infection,
}

/// One effective transition, as written to trajectory dumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub event_type: EventKind,
    pub site_index: usize,
    pub infected_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub replica: u64,
    pub seed: u64,
    pub survived_to_t: bool,
    pub extinction_time: Option<f64>,
    pub final_infected_count: usize,
    /// Effective transitions; thinned no-op infections are not counted.
    pub event_count: u64,
    pub wall_time: f64,
}

/// Precomputed per-model quantities of the sampler.
#[derive(Debug, Clone)]
pub struct Sampler {
    lattice: FiniteLattice,
    delta: f64,
    lambda: f64,
    distance: Option<WeightedIndex<f64>>,
}

impl Sampler {
    pub fn new(model: &RateModel, n: usize) -> Result<Self> {
        model.validate()?;
        let lattice = FiniteLattice::new(model.base, n)?;
        let weights = model.alpha.prefix(n);
        let distance = if weights.iter().any(|&w| w > 0.0) {
            Some(WeightedIndex::new(&weights).map_err(|e| invalid(e.to_string()))?)
        } else {
            None
        };
        let lambda = if distance.is_some() { model.total_rate(n) } else { 0.0 };
        Ok(Self { lattice, delta: model.delta, lambda, distance })
    }

    pub fn lattice(&self) -> FiniteLattice {
        self.lattice
    }

    /// Clock rate of one infected site.
    pub fn site_rate(&self) -> f64 {
        self.delta + self.lambda
    }

    pub fn dominating_rate(&self) -> f64 {
        self.lambda
    }

    /// Uniform site at hierarchical distance exactly `k >= 1` from the origin.
    #[inline]
    pub fn random_offset(&self, k: usize, rng: &mut Rng) -> usize {
        let base = self.lattice.base() as usize;
        if base == 2 {
            let low = if k > 1 { rng.random_range(0..1usize << (k - 1)) } else { 0 };
            return low | 1 << (k - 1);
        }
        let below = base.pow(k as u32 - 1);
        let low = rng.random_range(0..below);
        low + rng.random_range(1..base) * below
    }

    /// Target of an infection attempt from `source`.
    #[inline]
    pub fn infection_target(&self, source: usize, rng: &mut Rng) -> usize {
        let k = self.distance.as_ref().expect("infection attempted with zero rates").sample(rng) + 1;
        self.lattice.add(source, self.random_offset(k, rng))
    }

    /// Samples which clock rang at an infected `source`: recovery, or an infection target.
    #[inline]
    pub fn propose(&self, source: usize, rng: &mut Rng) -> (EventKind, usize) {
        if self.lambda == 0.0 || rng.random::<f64>() * (self.delta + self.lambda) < self.delta {
            (EventKind::Recovery, source)
        } else {
            (EventKind::Infection, self.infection_target(source, rng))
        }
    }
}

fn check_init(init: &SparseConfig, model: &RateModel, n: usize) -> Result<()> {
    let lat = init.lattice();
    if lat.base() != model.base || lat.depth() != n {
        return Err(invalid(format!(
            "initial configuration lives on base {} depth {}, model wants base {} depth {n}",
            lat.base(),
            lat.depth(),
            model.base
        )));
    }
    Ok(())
}

/// Runs one trajectory up to `t_max`, leaving the final configuration in `state`.
pub fn run_in_place(
    sampler: &Sampler,
    state: &mut SparseConfig,
    t_max: f64,
    rng: &mut Rng,
    mut observe: impl FnMut(&Event),
) -> (Option<f64>, u64) {
    let mut t = 0.0;
    let mut events = 0u64;
    let rate = sampler.site_rate();
    loop {
        if state.is_empty() {
            return (Some(t), events);
        }
        if rate == 0.0 {
            return (None, events);
        }
        let dt: f64 = rng.sample::<f64, _>(Exp1) / (rate * state.count() as f64);
        if t + dt > t_max {
            return (None, events);
        }
        t += dt;
        let source = state.sites()[rng.random_range(0..state.count())];
        let (kind, site) = sampler.propose(source, rng);
        let changed = match kind {
            EventKind::Recovery => state.remove(site),
            EventKind::Infection => state.insert(site),
        };
        if changed {
            events += 1;
            observe(&Event { t, event_type: kind, site_index: site, infected_count: state.count() });
        }
    }
}

fn validate_run(model: &RateModel, n: usize, init: &SparseConfig, t_max: f64) -> Result<Sampler> {
    if !(t_max >= 0.0) {
        return Err(invalid(format!("t_max must be >= 0, got {t_max}")));
    }
    check_init(init, model, n)?;
    Sampler::new(model, n)
}

/// Trajectory of replica `replica` under `seed`, with its final configuration.
pub fn run_replica(
    model: &RateModel,
    n: usize,
    init: &SparseConfig,
    t_max: f64,
    seed: u64,
    replica: u64,
    observe: impl FnMut(&Event),
) -> Result<(SimResult, SparseConfig)> {
    let sampler = validate_run(model, n, init, t_max)?;
    Ok(replica_with(&sampler, init, t_max, seed, replica, observe))
}

pub(crate) fn replica_with(
    sampler: &Sampler,
    init: &SparseConfig,
    t_max: f64,
    seed: u64,
    replica: u64,
    observe: impl FnMut(&Event),
) -> (SimResult, SparseConfig) {
    let clock = Instant::now();
    let mut rng = replica_rng(seed, replica);
    let mut state = init.clone();
    let (ext, events) = run_in_place(sampler, &mut state, t_max, &mut rng, observe);
    let result = SimResult {
        replica,
        seed,
        survived_to_t: ext.is_none(),
        extinction_time: ext,
        final_infected_count: state.count(),
        event_count: events,
        wall_time: clock.elapsed().as_secs_f64(),
    };
    (result, state)
}

/// One trajectory (replica 0 of `seed`).
pub fn run_trajectory(model: &RateModel, n: usize, init: &SparseConfig, t_max: f64, seed: u64) -> Result<SimResult> {
    Ok(run_replica(model, n, init, t_max, seed, 0, |_| {})?.0)
}

/// Exact rate of a single transition out of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub kind: EventKind,
    pub site: usize,
    pub rate: f64,
}

/// All transitions out of `config` with their rates, by direct summation over pairs.
pub fn first_jump_distribution(model: &RateModel, n: usize, config: &SparseConfig) -> Result<Vec<Transition>> {
    check_init(config, model, n)?;
    let lat = config.lattice();
    if lat.size() > FIRST_JUMP_CAP {
        return Err(Error::TooLarge { n, cap: FIRST_JUMP_CAP });
    }
    let mut out = Vec::new();
    for i in 0..lat.size() {
        if config.contains(i) {
            out.push(Transition { kind: EventKind::Recovery, site: i, rate: model.delta });
        } else {
            let rate: f64 = (0..lat.size())
                .filter(|&j| config.contains(j))
                .map(|j| model.rate_at_distance(lat.hdist(i, j)))
                .sum();
            if rate > 0.0 {
                out.push(Transition { kind: EventKind::Infection, site: i, rate });
            }
        }
    }
    Ok(out)
}

/// Draws the first effective transition out of `config` with the thinning sampler.
pub fn sample_first_jump(sampler: &Sampler, config: &SparseConfig, rng: &mut Rng) -> Option<(EventKind, usize)> {
    if config.is_empty() || sampler.site_rate() == 0.0 {
        return None;
    }
    loop {
        let source = config.sites()[rng.random_range(0..config.count())];
        let (kind, site) = sampler.propose(source, rng);
        let effective = match kind {
            EventKind::Recovery => true,
            EventKind::Infection => !config.contains(site),
        };
        if effective {
            return Some((kind, site));
        }
    }
}
