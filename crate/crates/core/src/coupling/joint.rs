use rand::Rng as _;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::dynamics::{bit, check_level, pick, Pair, PairParams};
use crate::error::{Error, Result};
use crate::lattice::RateModel;
use crate::rng::{replica_rng, Rng};
use crate::simulate::SparseConfig;

/// Snapshot of a coupled pair: `X` on `Ω^n`, `Ỹ ⊇ Y` on `Ω^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingState {
    pub x: SparseConfig,
    pub ytilde: SparseConfig,
    pub y: SparseConfig,
}

/// The same snapshot as bit masks (site `i` is bit `i`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairBits {
    pub x: u64,
    pub ytilde: u64,
    pub y: u64,
}

impl PairBits {
    pub fn to_state(self, n: u32) -> Result<CouplingState> {
        Ok(CouplingState {
            x: SparseConfig::from_bits(2, n as usize, self.x)?,
            ytilde: SparseConfig::from_bits(2, n as usize - 1, self.ytilde)?,
            y: SparseConfig::from_bits(2, n as usize - 1, self.y)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoupledEventKind {
    /// `X` moves alone at its `t`-rate.
    X,
    /// `Ỹ` moves; `forced` if `X` had to jump with it.
    Ytilde { forced: bool },
    /// `Y`'s own infection clock where `ỹ(i) = 1`.
    YOwn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledEvent {
    pub t: f64,
    pub kind: CoupledEventKind,
    pub site: usize,
    pub state: PairBits,
}

/// Test switches for [`run_pair`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoupledOptions {
    /// Holds `X` fixed and lets `Ỹ` move without forced jumps or kernel checks.
    pub frozen_x: bool,
    /// Stops at the first change of `Y`.
    pub stop_on_y_jump: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledRun {
    pub state: PairBits,
    /// Time of the last event, or `t_max`.
    pub t: f64,
    pub events: u64,
    pub absorbed: bool,
}

enum Move {
    X(usize),
    Yt(usize),
    YOwn(usize),
}

fn check(pair: &Pair, s: PairBits, frozen: bool) -> Result<()> {
    if s.y & !s.ytilde != 0 {
        return Err(Error::InvariantViolated(format!("y {:#b} not below ytilde {:#b}", s.y, s.ytilde)));
    }
    if !frozen && !pair.kernel_positive(s.x, s.ytilde) {
        return Err(Error::InvariantViolated(format!("P(x, ytilde) = 0 at x {:#b}, ytilde {:#b}", s.x, s.ytilde)));
    }
    Ok(())
}

/// Simulates the joint chain with the dominated `Y` from `start` up to `t_max`.
pub(crate) fn run_pair(
    pair: &Pair,
    start: PairBits,
    t_max: f64,
    opts: CoupledOptions,
    rng: &mut Rng,
    mut observe: impl FnMut(&CoupledEvent),
) -> Result<CoupledRun> {
    let mut s = start;
    check(pair, s, opts.frozen_x)?;
    let mut t = 0.0;
    let mut events = 0u64;
    let mut moves: Vec<(Move, f64)> = Vec::new();
    loop {
        moves.clear();
        if !opts.frozen_x {
            for site in 0..pair.x_sites() {
                moves.push((Move::X(site), pair.t_rate(s.x, s.ytilde, site)));
            }
        }
        for i in 0..pair.y_sites() {
            moves.push((Move::Yt(i), pair.yt_rate(s.x, s.ytilde, i)));
            if bit(s.ytilde, i) && !bit(s.y, i) {
                moves.push((Move::YOwn(i), pair.y_own_rate(s.y, i)));
            }
        }
        let total: f64 = moves.iter().map(|m| m.1).sum();
        if total == 0.0 {
            return Ok(CoupledRun { state: s, t, events, absorbed: true });
        }
        t += rng.sample::<f64, _>(Exp1) / total;
        if t > t_max {
            return Ok(CoupledRun { state: s, t: t_max, events, absorbed: false });
        }
        let weights: Vec<(usize, f64)> = moves.iter().enumerate().map(|(k, m)| (k, m.1)).collect();
        let k = pick(&weights, rng).expect("positive total rate");
        let y_before = s.y;
        let (kind, site) = match moves[k].0 {
            Move::X(site) => {
                s.x ^= 1 << site;
                (CoupledEventKind::X, site)
            }
            Move::YOwn(i) => {
                s.y |= 1 << i;
                (CoupledEventKind::YOwn, i)
            }
            Move::Yt(i) => {
                let infection = !bit(s.ytilde, i);
                let accept = if infection {
                    let j = pair.pick_source(s.x, s.ytilde, i, rng).expect("positive infection rate");
                    pair.y_accepts(s.x, s.ytilde, s.y, i, j, rng)
                } else {
                    false
                };
                let yt_new = s.ytilde ^ 1 << i;
                let mut forced = false;
                if !opts.frozen_x && pair.block_factor(s.x, i, bit(yt_new, i)) == 0.0 {
                    forced = true;
                    if let Some(site) = pair.forced_flip(s.x, yt_new, i, rng) {
                        s.x ^= 1 << site;
                    }
                }
                s.ytilde = yt_new;
                if infection {
                    if accept {
                        s.y |= 1 << i;
                    }
                } else {
                    s.y &= !(1 << i);
                }
                (CoupledEventKind::Ytilde { forced }, i)
            }
        };
        events += 1;
        check(pair, s, opts.frozen_x)?;
        observe(&CoupledEvent { t, kind, site, state: s });
        if opts.stop_on_y_jump && s.y != y_before {
            return Ok(CoupledRun { state: s, t, events, absorbed: false });
        }
    }
}

/// `Ỹ_0` drawn from `P(x0, ·)` for the pair `(δ, α_1..α_n)` at level `n`, with
/// `ξ = f(α_1/δ)`.
pub fn init_conditional(model: &RateModel, n: u32, x0: &SparseConfig, rng: &mut Rng) -> Result<SparseConfig> {
    check_level(n)?;
    let pair = Pair::new(PairParams::from_model(model, n)?);
    check_config(x0, n)?;
    SparseConfig::from_bits(2, n as usize - 1, pair.init_conditional(x0.to_bits(), rng))
}

pub(crate) fn check_config(c: &SparseConfig, n: u32) -> Result<()> {
    let lat = c.lattice();
    if lat.base() != 2 {
        return Err(Error::BaseMismatch(lat.base(), 2));
    }
    if lat.depth() != n as usize {
        return Err(crate::error::invalid(format!("configuration lives on level {}, expected {n}", lat.depth())));
    }
    Ok(())
}

/// One replica of the coupled pair from `X_0 = x0`, `Ỹ_0 = Y_0 ~ P(x0, ·)`.
pub fn run_coupled(
    model: &RateModel,
    n: u32,
    x0: &SparseConfig,
    t_max: f64,
    seed: u64,
    replica: u64,
    observe: impl FnMut(&CoupledEvent),
) -> Result<CoupledRun> {
    check_level(n)?;
    check_config(x0, n)?;
    if !(t_max >= 0.0) {
        return Err(crate::error::invalid(format!("t_max must be >= 0, got {t_max}")));
    }
    let pair = Pair::new(PairParams::from_model(model, n)?);
    let mut rng = replica_rng(seed, replica);
    let x = x0.to_bits();
    let yt = pair.init_conditional(x, &mut rng);
    run_pair(&pair, PairBits { x, ytilde: yt, y: yt }, t_max, CoupledOptions::default(), &mut rng, observe)
}

/// Runs the pair from an explicit snapshot with the given parameters.
pub fn run_coupled_from(
    params: &PairParams,
    start: PairBits,
    t_max: f64,
    opts: CoupledOptions,
    seed: u64,
    replica: u64,
    observe: impl FnMut(&CoupledEvent),
) -> Result<CoupledRun> {
    let pair = Pair::new(params.clone());
    let mut rng = replica_rng(seed, replica);
    run_pair(&pair, start, t_max, opts, &mut rng, observe)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(delta: f64, alpha: &[f64]) -> RateModel {
        RateModel::new(2, delta, crate::lattice::AlphaSeq::explicit(alpha.to_vec())).unwrap()
    }

    #[test]
    fn domination_holds_along_paths() {
        let m = model(0.6, &[2.0, 1.5, 1.0]);
        let x0 = SparseConfig::single(2, 3, 0).unwrap();
        for r in 0..200 {
            let mut count = 0;
            run_coupled(&m, 3, &x0, 3.0, 11, r, |e| {
                assert_eq!(e.state.y & !e.state.ytilde, 0);
                count += 1;
            })
            .unwrap();
        }
    }

    #[test]
    fn all_zero_is_a_trap() {
        let m = model(1.0, &[2.0, 1.0]);
        let x0 = SparseConfig::empty(2, 2).unwrap();
        let run = run_coupled(&m, 2, &x0, 5.0, 1, 0, |_| {}).unwrap();
        assert!(run.absorbed);
        assert_eq!(run.events, 0);
        assert_eq!(run.state, PairBits { x: 0, ytilde: 0, y: 0 });
    }

    #[test]
    fn frozen_full_x_keeps_y_equal_to_ytilde() {
        let params = PairParams::from_rates(3, 1.0, &[1.0, 2.0, 3.0]).unwrap();
        let start = PairBits { x: 0xff, ytilde: 0b0101, y: 0b0101 };
        let opts = CoupledOptions { frozen_x: true, stop_on_y_jump: false };
        for r in 0..50 {
            run_coupled_from(&params, start, 5.0, opts, 4, r, |e| assert_eq!(e.state.y, e.state.ytilde)).unwrap();
        }
    }

    #[test]
    fn rejects_wrong_lattice() {
        let m = model(1.0, &[1.0]);
        let x0 = SparseConfig::single(2, 3, 0).unwrap();
        assert!(run_coupled(&m, 2, &x0, 1.0, 0, 0, |_| {}).is_err());
        let m3 = RateModel::new(3, 1.0, crate::lattice::AlphaSeq::explicit(vec![1.0])).unwrap();
        let x3 = SparseConfig::single(3, 1, 0).unwrap();
        assert!(run_coupled(&m3, 1, &x3, 1.0, 0, 0, |_| {}).is_err());
    }
}
