use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{invalid, Error, Result};
use crate::exactgen::{a_entry, b_entry, block_row, dist, pattern, BlockClass, StarConvention};
use crate::lattice::RateModel;
use crate::rng::Rng;

/// Largest level whose configurations fit in a `u64`.
pub const MAX_COUPLING_LEVEL: u32 = 6;

/// Parameters of one coupled pair: an `m`-level contact process `X` and the
/// `(m-1)`-level processes `Ỹ ⊇ Y` attached to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    /// Level `m >= 1` of `X`.
    pub level: u32,
    pub delta: f64,
    /// `α_1..α_m`.
    pub alpha: Vec<f64>,
    pub xi: f64,
    /// Recovery rate of `Ỹ` and `Y`.
    pub delta_prime: f64,
}

impl PairParams {
    /// `ξ = f(α_1/δ)`, `δ' = 2ξδ`.
    pub fn from_rates(level: u32, delta: f64, alpha: &[f64]) -> Result<Self> {
        let a1 = alpha.first().copied().unwrap_or(0.0);
        let xi = bounds::f(a1 / delta)?;
        Self::new(level, delta, alpha.to_vec(), xi, 2.0 * xi * delta)
    }

    pub fn from_model(model: &RateModel, level: u32) -> Result<Self> {
        if model.base != 2 {
            return Err(Error::BaseMismatch(model.base, 2));
        }
        let alpha: Vec<f64> = (1..=level as usize).map(|k| model.alpha.value(k)).collect();
        Self::from_rates(level, model.delta, &alpha)
    }

    pub fn new(level: u32, delta: f64, alpha: Vec<f64>, xi: f64, delta_prime: f64) -> Result<Self> {
        if level == 0 || level > MAX_COUPLING_LEVEL {
            return Err(invalid(format!("coupling level must lie in 1..={MAX_COUPLING_LEVEL}, got {level}")));
        }
        if !(delta > 0.0 && delta.is_finite()) || !(delta_prime > 0.0 && delta_prime.is_finite()) {
            return Err(invalid(format!("recovery rates must be positive, got {delta} and {delta_prime}")));
        }
        if !(xi > 0.0 && xi <= 0.5) {
            return Err(invalid(format!("xi must lie in (0, 1/2], got {xi}")));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(invalid("alpha entries must be finite and >= 0"));
        }
        Ok(Self { level, delta, alpha, xi, delta_prime })
    }
}

/// Rate tables of a pair, with the star convention fixed to `a* = 1/2, b* = 0`.
#[derive(Debug, Clone)]
pub(crate) struct Pair {
    pub p: PairParams,
    /// `α_d 2^{-d}` at distance `d` in `Ω^m`.
    wx: Vec<f64>,
    /// `α_{k+1} 2^{-k}` at distance `k` in `Ω^{m-1}`.
    wy: Vec<f64>,
}

pub(crate) fn bit(x: u64, i: usize) -> bool {
    x >> i & 1 == 1
}

impl Pair {
    pub fn new(p: PairParams) -> Self {
        let m = p.level as usize;
        let a = |k: usize| p.alpha.get(k.wrapping_sub(1)).copied().unwrap_or(0.0);
        let wx = (0..=m).map(|d| if d == 0 { 0.0 } else { a(d) * 0.5f64.powi(d as i32) }).collect();
        let wy = (0..m).map(|k| if k == 0 { 0.0 } else { a(k + 1) * 0.5f64.powi(k as i32) }).collect();
        Self { p, wx, wy }
    }

    pub fn x_sites(&self) -> usize {
        1 << self.p.level
    }

    pub fn y_sites(&self) -> usize {
        1 << (self.p.level - 1)
    }

    /// Rate at which site `s` of `X` flips under the contact dynamics.
    pub fn x_rate(&self, x: u64, s: usize) -> f64 {
        if bit(x, s) {
            self.p.delta
        } else {
            (0..self.x_sites()).filter(|&u| bit(x, u)).map(|u| self.wx[dist(s, u) as usize]).sum()
        }
    }

    /// `p(x_b, y(b))`.
    pub fn block_factor(&self, x: u64, b: usize, yb: bool) -> f64 {
        block_row(pattern(x as usize, b), self.p.xi)[yb as usize]
    }

    pub fn kernel_positive(&self, x: u64, y: u64) -> bool {
        (0..self.y_sites()).all(|b| self.block_factor(x, b, bit(y, b)) > 0.0)
    }

    fn class(&self, x: u64, b: usize) -> BlockClass {
        BlockClass::of(pattern(x as usize, b))
    }

    pub fn a(&self, x: u64, i: usize, j: usize) -> f64 {
        a_entry(self.class(x, i), self.class(x, j), self.p.xi, StarConvention::A)
    }

    /// Contribution of source `j` to the `Ỹ`-infection rate at `i`.
    pub fn y_term(&self, x: u64, yt: u64, i: usize, j: usize) -> f64 {
        let w = self.wy[dist(i, j) as usize];
        if w == 0.0 {
            return 0.0;
        }
        let coeff = if bit(yt, j) {
            self.a(x, i, j)
        } else {
            b_entry(self.class(x, i), self.class(x, j), self.p.xi, StarConvention::A)
        };
        w * coeff
    }

    /// Rate at which site `i` of `Ỹ` flips under `G'_x`.
    pub fn yt_rate(&self, x: u64, yt: u64, i: usize) -> f64 {
        if bit(yt, i) {
            self.p.delta_prime
        } else {
            (0..self.y_sites()).filter(|&j| j != i).map(|j| self.y_term(x, yt, i, j)).sum()
        }
    }

    /// Rate of `Y`'s own infection clock at `i`, used where `ỹ(i) = 1`, `y(i) = 0`.
    pub fn y_own_rate(&self, y: u64, i: usize) -> f64 {
        (0..self.y_sites()).filter(|&j| bit(y, j)).map(|j| 0.5 * self.wy[dist(i, j) as usize]).sum()
    }

    /// Rate at which `Y`, as a `(δ', α')` contact process, flips site `i`.
    pub fn y_contact_rate(&self, y: u64, i: usize) -> f64 {
        if bit(y, i) {
            self.p.delta_prime
        } else {
            self.y_own_rate(y, i)
        }
    }

    /// `X`-move rate `t_y(x, x^s) = r(x, x^s) P(x^s, y) / P(x, y)`.
    pub fn t_rate(&self, x: u64, yt: u64, s: usize) -> f64 {
        let b = s / 2;
        let yb = bit(yt, b);
        let before = self.block_factor(x, b, yb);
        if before == 0.0 {
            return 0.0;
        }
        self.x_rate(x, s) * self.block_factor(x ^ 1 << s, b, yb) / before
    }

    /// Draws the forced `X`-jump after `Ỹ` moves to `yt_new` with `P(x, yt_new) = 0`:
    /// the flip `s` in the offending block `b` with probability `∝ r(x, x^s) P(x^s, yt_new)`,
    /// or no flip if all weights vanish.
    pub fn forced_flip(&self, x: u64, yt_new: u64, b: usize, rng: &mut Rng) -> Option<usize> {
        let yb = bit(yt_new, b);
        let w: Vec<(usize, f64)> = [2 * b, 2 * b + 1]
            .into_iter()
            .map(|s| (s, self.x_rate(x, s) * self.block_factor(x ^ 1 << s, b, yb)))
            .collect();
        pick(&w, rng)
    }

    /// Source of a `Ỹ` infection at `i`, drawn proportionally to its term.
    pub fn pick_source(&self, x: u64, yt: u64, i: usize, rng: &mut Rng) -> Option<usize> {
        let w: Vec<(usize, f64)> =
            (0..self.y_sites()).filter(|&j| j != i).map(|j| (j, self.y_term(x, yt, i, j))).collect();
        pick(&w, rng)
    }

    /// Whether `Y` follows a `Ỹ` infection at `i` from `j` (state before the jump).
    pub fn y_accepts(&self, x: u64, yt: u64, y: u64, i: usize, j: usize, rng: &mut Rng) -> bool {
        if !bit(yt, j) || !bit(y, j) || bit(y, i) {
            return false;
        }
        let a = self.a(x, i, j);
        debug_assert!(a >= 0.5);
        rng.random::<f64>() * a < 0.5
    }

    /// `Ỹ_0` given `X_0 = x`: each block independently per `p(x_b, ·)`.
    pub fn init_conditional(&self, x: u64, rng: &mut Rng) -> u64 {
        let mut y = 0;
        for b in 0..self.y_sites() {
            let p1 = self.block_factor(x, b, true);
            let on = if p1 == 1.0 {
                true
            } else if p1 == 0.0 {
                false
            } else {
                rng.random::<f64>() < p1
            };
            y |= (on as u64) << b;
        }
        y
    }
}

/// Index drawn proportionally to nonnegative weights; `None` if they sum to zero.
pub(crate) fn pick(w: &[(usize, f64)], rng: &mut Rng) -> Option<usize> {
    let total: f64 = w.iter().map(|e| e.1).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    for &(s, v) in w {
        if u < v {
            return Some(s);
        }
        u -= v;
    }
    w.iter().rev().find(|e| e.1 > 0.0).map(|e| e.0)
}

pub(crate) fn check_level(n: u32) -> Result<()> {
    if n == 0 || n > MAX_COUPLING_LEVEL {
        return Err(invalid(format!("coupling needs 1 <= n <= {MAX_COUPLING_LEVEL}, got {n}")));
    }
    Ok(())
}
