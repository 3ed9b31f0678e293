//! The tower `X^{(n)}, (X̃^{(n-1)}, X^{(n-1)}), ..., (X̃^{(0)}, X^{(0)})`.
//!
//! Levels are glued one at a time: given the whole path of the parent
//! `X^{(L)}` on `[0, T]`, the child `X̃^{(L-1)}` is drawn from its exact
//! conditional law under the joint chain, and `X^{(L-1)}` is then built
//! beneath it forward in time. Each pair is therefore conditionally
//! independent of the levels above given its parent's path.
//!
//! The conditional law of `Ỹ` given the parent path is sampled backwards.
//! The filter `P[Ỹ_t = · | X_{[0,t]}]` is `P(X_t, ·)`, so `Ỹ_T ~ P(X_T, ·)`,
//! and on a stretch where `X ≡ x` the reversed chain jumps `y' → y` at rate
//! `P(x, y) r'_x(y, y') / P(x, y')`. At a parent jump `x → x'` the value just
//! before is `Ỹ` itself if `P(x, Ỹ) > 0`, and otherwise the unique flip of
//! the block that `x'` changed (a forced jump).

use rand::Rng as _;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::dynamics::{bit, pick, Pair, PairParams, MAX_COUPLING_LEVEL};
use crate::bounds::{ln_level_alpha, recursion};
use crate::error::{invalid, Error, Result};
use crate::lattice::RateModel;
use crate::rng::{replica_rng, Rng};

/// Piecewise-constant path on `[0, t_max]`: `init`, then `(time, new state)` jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub level: u32,
    pub init: u64,
    pub jumps: Vec<(f64, u64)>,
}

impl Path {
    pub fn last(&self) -> u64 {
        self.jumps.last().map_or(self.init, |j| j.1)
    }

    pub fn at(&self, t: f64) -> u64 {
        self.jumps.iter().take_while(|j| j.0 <= t).last().map_or(self.init, |j| j.1)
    }
}

/// Parameters of level `m` of the recursion, as used by the cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    pub m: usize,
    pub delta: f64,
    /// `α_k(m)` for `k = 1..=n-m`.
    pub alpha: Vec<f64>,
    /// `ξ(m)`; absent at the bottom level.
    pub xi: Option<f64>,
}

/// One sampled tower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeRun {
    pub n: u32,
    pub t_max: f64,
    pub params: Vec<LevelParams>,
    /// `X^{(n-m)}` for `m = 0..=n`.
    pub x: Vec<Path>,
    /// `X̃^{(n-m)}` for `m = 1..=n`, stored at index `m - 1`.
    pub xtilde: Vec<Path>,
}

impl CascadeRun {
    /// Whether `X^{(n-m)}_{t_max} ≠ 0`, for `m = 0..=n`.
    pub fn alive(&self) -> Vec<bool> {
        self.x.iter().map(|p| p.last() != 0).collect()
    }

    /// Whether `X^{(n-m)}_0 = δ_0`, for `m = 0..=n`.
    pub fn starts_at_origin(&self) -> Vec<bool> {
        self.x.iter().map(|p| p.init == 1).collect()
    }
}

/// Level parameters `δ(m)`, `α_k(m)`, `ξ(m)` taken from the recursion trace.
pub fn cascade_params(model: &RateModel, n: u32) -> Result<Vec<LevelParams>> {
    if model.base != 2 {
        return Err(Error::BaseMismatch(model.base, 2));
    }
    if n > MAX_COUPLING_LEVEL {
        return Err(Error::TooLarge { n: n as usize, cap: MAX_COUPLING_LEVEL as usize });
    }
    let n = n as usize;
    let trace = recursion(model.delta, &model.alpha, n)?;
    Ok((0..=n)
        .map(|m| LevelParams {
            m,
            delta: trace.delta_seq[m],
            alpha: (1..=n - m).map(|k| ln_level_alpha(&model.alpha, m, k).exp()).collect(),
            xi: trace.xi_seq.get(m).copied(),
        })
        .collect())
}

/// Forward path of the contact process at `level` with the given rates.
pub(crate) fn contact_path(level: u32, delta: f64, alpha: &[f64], init: u64, t_max: f64, rng: &mut Rng) -> Path {
    let sites = 1usize << level;
    let w: Vec<f64> =
        (0..=level as usize).map(|d| if d == 0 { 0.0 } else { alpha.get(d - 1).copied().unwrap_or(0.0) * 0.5f64.powi(d as i32) }).collect();
    let mut x = init;
    let mut t = 0.0;
    let mut jumps = Vec::new();
    let mut rates = vec![(0usize, 0.0f64); sites];
    loop {
        for (s, r) in rates.iter_mut().enumerate() {
            *r = (
                s,
                if bit(x, s) {
                    delta
                } else {
                    (0..sites).filter(|&u| bit(x, u)).map(|u| w[crate::exactgen::dist(s, u) as usize]).sum()
                },
            );
        }
        let total: f64 = rates.iter().map(|r| r.1).sum();
        if total == 0.0 {
            break;
        }
        t += rng.sample::<f64, _>(Exp1) / total;
        if t > t_max {
            break;
        }
        x ^= 1 << pick(&rates, rng).expect("positive total rate");
        jumps.push((t, x));
    }
    Path { level, init, jumps }
}

/// A jump of `Ỹ` in forward time.
#[derive(Debug, Clone, Copy)]
struct YtJump {
    t: f64,
    site: usize,
    /// `Ỹ` just before the jump.
    before: u64,
}

/// Samples `Ỹ` on `[0, t_max]` from its conditional law given the parent path.
fn sample_ytilde(pair: &Pair, parent: &Path, t_max: f64, rng: &mut Rng) -> Result<(u64, Vec<YtJump>)> {
    let mut states = vec![parent.init];
    let mut times = vec![0.0];
    for &(t, x) in &parent.jumps {
        times.push(t);
        states.push(x);
    }
    let mut yt = pair.init_conditional(*states.last().unwrap(), rng);
    let mut jumps = Vec::new();
    let mut cands: Vec<(usize, f64)> = Vec::with_capacity(pair.y_sites());
    for k in (0..states.len()).rev() {
        let x = states[k];
        let lo = times[k];
        let mut s = if k + 1 < times.len() { times[k + 1] } else { t_max };
        loop {
            cands.clear();
            for i in 0..pair.y_sites() {
                let y = yt ^ 1 << i;
                let num = pair.block_factor(x, i, bit(y, i));
                if num == 0.0 {
                    continue;
                }
                let rate = num * pair.yt_rate(x, y, i) / pair.block_factor(x, i, bit(yt, i));
                cands.push((i, rate));
            }
            let total: f64 = cands.iter().map(|c| c.1).sum();
            if total == 0.0 {
                break;
            }
            s -= rng.sample::<f64, _>(Exp1) / total;
            if s <= lo {
                break;
            }
            let i = pick(&cands, rng).expect("positive total rate");
            yt ^= 1 << i;
            jumps.push(YtJump { t: s, site: i, before: yt });
        }
        if k == 0 {
            break;
        }
        let x_prev = states[k - 1];
        if !pair.kernel_positive(x_prev, yt) {
            let b = (x_prev ^ x).trailing_zeros() as usize / 2;
            let y = yt ^ 1 << b;
            if !pair.kernel_positive(x_prev, y) || pair.yt_rate(x_prev, y, b) == 0.0 {
                return Err(Error::InvariantViolated(format!(
                    "no forced jump explains parent {x_prev:#b} -> {x:#b} with ytilde {yt:#b}"
                )));
            }
            yt = y;
            jumps.push(YtJump { t: times[k], site: b, before: yt });
        }
    }
    jumps.reverse();
    Ok((yt, jumps))
}

/// Builds `Y` beneath `Ỹ` given the parent path and the `Ỹ` path.
fn build_y(pair: &Pair, parent: &Path, yt0: u64, yt_jumps: &[YtJump], t_max: f64, rng: &mut Rng) -> Result<Path> {
    let mut y = yt0;
    let mut yt = yt0;
    let mut x = parent.init;
    let mut t = 0.0;
    let mut out = Vec::new();
    let (mut pi, mut yi) = (0usize, 0usize);
    let mut own: Vec<(usize, f64)> = Vec::with_capacity(pair.y_sites());
    loop {
        // Ỹ jumps at a parent jump time use the parent state before it.
        let next_parent = parent.jumps.get(pi).map_or(f64::INFINITY, |j| j.0);
        let next_yt = yt_jumps.get(yi).map_or(f64::INFINITY, |j| j.t);
        let scheduled = next_parent.min(next_yt);
        let next = scheduled.min(t_max);
        own.clear();
        for i in 0..pair.y_sites() {
            if bit(yt, i) && !bit(y, i) {
                own.push((i, pair.y_own_rate(y, i)));
            }
        }
        let total: f64 = own.iter().map(|o| o.1).sum();
        if total > 0.0 {
            let dt = rng.sample::<f64, _>(Exp1) / total;
            if t + dt < next {
                t += dt;
                y |= 1 << pick(&own, rng).expect("positive total rate");
                out.push((t, y));
                continue;
            }
        }
        if scheduled > t_max {
            break;
        }
        t = next;
        if next_yt <= next_parent {
            let jump = yt_jumps[yi];
            yi += 1;
            if jump.before != yt {
                return Err(Error::InvariantViolated("ytilde path out of sync".into()));
            }
            let i = jump.site;
            let y_old = y;
            if bit(yt, i) {
                y &= !(1 << i);
            } else if let Some(j) = pair.pick_source(x, yt, i, rng) {
                if pair.y_accepts(x, yt, y, i, j, rng) {
                    y |= 1 << i;
                }
            }
            yt ^= 1 << i;
            if y != y_old {
                out.push((t, y));
            }
        } else {
            x = parent.jumps[pi].1;
            pi += 1;
        }
        if y & !yt != 0 {
            return Err(Error::InvariantViolated(format!("y {y:#b} not below ytilde {yt:#b}")));
        }
    }
    Ok(Path { level: pair.p.level - 1, init: yt0, jumps: out })
}

/// Samples the full tower for `N = 2` from `X^{(n)}_0 = δ_0`.
pub fn cascade(model: &RateModel, n: u32, t_max: f64, seed: u64, replica: u64) -> Result<CascadeRun> {
    if n == 0 {
        return Err(invalid("the cascade needs n >= 1"));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(invalid(format!("t_max must be finite and >= 0, got {t_max}")));
    }
    let params = cascade_params(model, n)?;
    let mut rng = replica_rng(seed, replica);
    let top = &params[0];
    let mut x = vec![contact_path(n, top.delta, &top.alpha, 1, t_max, &mut rng)];
    let mut xtilde = Vec::new();
    for m in 0..n as usize {
        let lp = &params[m];
        let pair = Pair::new(PairParams::new(
            n - m as u32,
            lp.delta,
            lp.alpha.clone(),
            lp.xi.expect("xi below the bottom level"),
            params[m + 1].delta,
        )?);
        let parent = &x[m];
        let (yt0, jumps) = sample_ytilde(&pair, parent, t_max, &mut rng)?;
        let y = build_y(&pair, parent, yt0, &jumps, t_max, &mut rng)?;
        let mut yt = yt0;
        let yt_path = Path {
            level: pair.p.level - 1,
            init: yt0,
            jumps: jumps
                .iter()
                .map(|j| {
                    yt = j.before ^ 1 << j.site;
                    (j.t, yt)
                })
                .collect(),
        };
        xtilde.push(yt_path);
        x.push(y);
    }
    Ok(CascadeRun { n, t_max, params, x, xtilde })
}
