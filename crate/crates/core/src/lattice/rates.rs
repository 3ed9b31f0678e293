use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Address;
use crate::error::{invalid, Error, Result};

/// Terms below this fraction of the running sum end a truncated tail sum.
const TAIL_REL_CUTOFF: f64 = 1e-18;
const MAX_TAIL_TERMS: usize = 100_000;

fn default_base() -> u32 {
    2
}

/// The level weights `α_1, α_2, ...` of the infection rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AlphaSeq {
    /// `α_k = values[k-1]` for `k <= values.len()`, zero beyond.
    Explicit { values: Vec<f64> },
    /// `α_k = exp(-θ^k)`.
    DoubleExp { theta: f64 },
    /// `α_k = N^{-2k/d}`.
    EffectiveDim {
        d: f64,
        #[serde(rename = "N", default = "default_base")]
        base: u32,
    },
    /// `α_k = q^k`.
    Geometric { q: f64 },
    /// Base-2 sequence `α''_k = 2^k γ''_k` obtained from a base-`source_base`
    /// sequence by taking minima of `γ_k = α_k N^{-k}` over blocks of `m`
    /// levels and repeating each minimum over `n` levels.
    Reduced {
        source: Box<AlphaSeq>,
        source_base: u32,
        m: usize,
        n: usize,
    },
}

impl AlphaSeq {
    pub fn explicit(values: impl Into<Vec<f64>>) -> Self {
        AlphaSeq::Explicit { values: values.into() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlphaSeq::Explicit { values } => {
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(invalid(format!("explicit rates must be finite and >= 0, got {v}")));
                }
            }
            AlphaSeq::DoubleExp { theta } => {
                if !theta.is_finite() {
                    return Err(invalid(format!("theta must be finite, got {theta}")));
                }
                if *theta <= 1.0 {
                    return Err(Error::Divergent(format!("exp(-theta^k) with theta = {theta} <= 1")));
                }
            }
            AlphaSeq::EffectiveDim { d, base } => {
                if !(d.is_finite() && *d > 0.0) {
                    return Err(invalid(format!("d must be positive, got {d}")));
                }
                if *base < 2 {
                    return Err(invalid(format!("base must be >= 2, got {base}")));
                }
            }
            AlphaSeq::Geometric { q } => {
                if !(q.is_finite() && *q >= 0.0) {
                    return Err(invalid(format!("q must be >= 0, got {q}")));
                }
                if *q >= 1.0 {
                    return Err(Error::Divergent(format!("q^k with q = {q} >= 1")));
                }
            }
            AlphaSeq::Reduced { source, source_base, m, n } => {
                source.validate()?;
                if *source_base < 2 || *m == 0 || *n == 0 {
                    return Err(invalid("reduced sequence needs base >= 2 and m, n >= 1"));
                }
            }
        }
        Ok(())
    }

    /// `ln α_k` for `k >= 1`; `-inf` where `α_k = 0`.
    pub fn ln_value(&self, k: usize) -> f64 {
        assert!(k >= 1, "rate levels start at 1");
        match self {
            AlphaSeq::Explicit { values } => match values.get(k - 1) {
                Some(&v) => v.ln(),
                None => f64::NEG_INFINITY,
            },
            AlphaSeq::DoubleExp { theta } => -theta.powi(k as i32),
            AlphaSeq::EffectiveDim { d, base } => -(2.0 * k as f64 / d) * (*base as f64).ln(),
            AlphaSeq::Geometric { q } => k as f64 * q.ln(),
            AlphaSeq::Reduced { source, source_base, m, n } => {
                let block = (k - 1) / n;
                k as f64 * LN_2 + reduced_block_min(source, *source_base, *m, block)
            }
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        self.ln_value(k).exp()
    }

    /// First `len` weights `α_1..α_len`.
    pub fn prefix(&self, len: usize) -> Vec<f64> {
        (1..=len).map(|k| self.value(k)).collect()
    }

    /// Largest `k` with `α_k > 0` when the support is finite; `None` otherwise.
    pub fn support(&self) -> Option<usize> {
        match self {
            AlphaSeq::Explicit { values } => Some(values.iter().rposition(|&v| v > 0.0).map_or(0, |p| p + 1)),
            AlphaSeq::Geometric { q } if *q == 0.0 => Some(0),
            AlphaSeq::Reduced { source, source_base, m, n } => {
                let top = source.support()?;
                let last_block = (0..top / m)
                    .rev()
                    .find(|&l| reduced_block_min(source, *source_base, *m, l) > f64::NEG_INFINITY);
                Some(last_block.map_or(0, |l| (l + 1) * n))
            }
            _ => None,
        }
    }

    /// `ln β_k` where `β_k = Σ_{j >= k} α_j`.
    pub fn ln_beta_tail(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(invalid("tail sums start at k = 1"));
        }
        self.validate()?;
        match self {
            AlphaSeq::Explicit { values } => {
                let tail: f64 = values.iter().skip(k - 1).sum();
                Ok(tail.ln())
            }
            AlphaSeq::Geometric { q } => Ok(k as f64 * q.ln() - (1.0 - q).ln()),
            AlphaSeq::EffectiveDim { d, base } => {
                let ln_r = -(2.0 / d) * (*base as f64).ln();
                Ok(k as f64 * ln_r - (-ln_r.exp_m1()).ln())
            }
            AlphaSeq::DoubleExp { theta } => Ok(double_exp_ln_tail(*theta, k)),
            AlphaSeq::Reduced { .. } => self.ln_tail_by_summation(k),
        }
    }

    pub fn beta_tail(&self, k: usize) -> Result<f64> {
        Ok(self.ln_beta_tail(k)?.exp())
    }

    /// `Σ_k α_k`.
    pub fn total(&self) -> Result<f64> {
        self.beta_tail(1)
    }

    /// `Σ_{k <= n} α_k`.
    pub fn partial_sum(&self, n: usize) -> f64 {
        (1..=n).map(|k| self.value(k)).sum()
    }

    /// Generic log-domain tail summation; stops once a full stretch of
    /// `stride` consecutive terms is negligible against the running sum.
    fn ln_tail_by_summation(&self, k: usize) -> Result<f64> {
        let stride = match self {
            AlphaSeq::Reduced { n, .. } => 2 * n,
            _ => 2,
        };
        if let Some(top) = self.support() {
            let s: f64 = (k..=top.max(k)).map(|j| self.value(j)).sum();
            return Ok(s.ln());
        }
        let mut acc = f64::NEG_INFINITY;
        let mut quiet = 0usize;
        for j in k..k + MAX_TAIL_TERMS {
            let t = self.ln_value(j);
            if t.is_finite() && t > acc + TAIL_REL_CUTOFF.ln() {
                quiet = 0;
            } else {
                quiet += 1;
            }
            acc = log_add(acc, t);
            if quiet >= stride && acc > f64::NEG_INFINITY {
                return Ok(acc);
            }
        }
        Err(Error::Divergent(format!("tail from level {k} did not settle in {MAX_TAIL_TERMS} terms")))
    }
}

/// `ln min{γ_{lm+1}, ..., γ_{lm+m}}` with `γ_k = α_k N^{-k}`.
fn reduced_block_min(source: &AlphaSeq, base: u32, m: usize, block: usize) -> f64 {
    let ln_n = (base as f64).ln();
    (block * m + 1..=block * m + m)
        .map(|i| source.ln_value(i) - i as f64 * ln_n)
        .fold(f64::INFINITY, f64::min)
}

/// `ln(e^a + e^b)` without overflow.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ_{j >= k} exp(-θ^j)`, factored as `-θ^k + ln(1 + Σ_{m>=1} e^{-(θ^{k+m} - θ^k)})`.
///
/// Successive term ratios decrease, so once the ratio `ρ` drops below one the
/// remainder after a term `t` is at most `t ρ / (1 - ρ)`; that bound is added
/// to the partial sum so the result is never an underestimate by more than
/// rounding.
fn double_exp_ln_tail(theta: f64, k: usize) -> f64 {
    let lead = theta.powi(k as i32);
    if !lead.is_finite() {
        return f64::NEG_INFINITY;
    }
    let mut rest = 0.0f64;
    let mut prev_exponent = 0.0f64;
    for m in 1..MAX_TAIL_TERMS {
        let exponent = theta.powi((k + m) as i32) - lead;
        if !exponent.is_finite() {
            break;
        }
        let term = (-exponent).exp();
        rest += term;
        let ratio = (-(exponent - prev_exponent)).exp();
        if term < TAIL_REL_CUTOFF * (1.0 + rest) && ratio < 1.0 {
            rest += term * ratio / (1.0 - ratio);
            break;
        }
        prev_exponent = exponent;
    }
    -lead + rest.ln_1p()
}

impl fmt::Display for AlphaSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSeq::Explicit { values } => {
                let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, "explicit:{}", parts.join(","))
            }
            AlphaSeq::DoubleExp { theta } => write!(f, "double_exp:{theta}"),
            AlphaSeq::EffectiveDim { d, .. } => write!(f, "effective_dim:{d}"),
            AlphaSeq::Geometric { q } => write!(f, "geometric:{q}"),
            AlphaSeq::Reduced { source, source_base, m, n } => {
                write!(f, "reduced({source};N={source_base},m={m},n={n})")
            }
        }
    }
}

/// Parses the inline forms `geometric:q`, `double_exp:θ`, `effective_dim:d`
/// and `explicit:a1,a2,...`. `effective_dim` gets base 2 here; callers that
/// know `N` should go through [`RateModel::new`], which rebinds it.
impl FromStr for AlphaSeq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, arg) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("expected family:value, got {s:?}")))?;
        let num = |a: &str| -> Result<f64> {
            a.trim().parse::<f64>().map_err(|_| invalid(format!("not a number: {a:?}")))
        };
        let seq = match family.trim() {
            "geometric" => AlphaSeq::Geometric { q: num(arg)? },
            "double_exp" => AlphaSeq::DoubleExp { theta: num(arg)? },
            "effective_dim" => AlphaSeq::EffectiveDim { d: num(arg)?, base: 2 },
            "explicit" => AlphaSeq::Explicit {
                values: arg.split(',').map(num).collect::<Result<Vec<_>>>()?,
            },
            other => return Err(invalid(format!("unknown rate family {other:?}"))),
        };
        seq.validate()?;
        Ok(seq)
    }
}

/// Base `N`, recovery rate `δ` and level weights of a contact process on `Ω_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    #[serde(rename = "N")]
    pub base: u32,
    pub delta: f64,
    pub alpha: AlphaSeq,
}

impl RateModel {
    pub fn new(base: u32, delta: f64, alpha: AlphaSeq) -> Result<Self> {
        let alpha = match alpha {
            AlphaSeq::EffectiveDim { d, .. } => AlphaSeq::EffectiveDim { d, base },
            other => other,
        };
        let model = Self { base, delta, alpha };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base < 2 {
            return Err(invalid(format!("N must be >= 2, got {}", self.base)));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(invalid(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        self.alpha.validate()
    }

    /// Rate `α_k N^{-k}` of a single ordered pair at distance `k >= 1`.
    pub fn rate_at_distance(&self, k: usize) -> f64 {
        (self.alpha.ln_value(k) - k as f64 * (self.base as f64).ln()).exp()
    }

    pub fn infection_rate(&self, i: &Address, j: &Address) -> Result<f64> {
        let k = super::hdist(i, j)?;
        if k == 0 {
            return Err(Error::SameSite);
        }
        if i.base() != self.base {
            return Err(Error::BaseMismatch(i.base(), self.base));
        }
        Ok(self.rate_at_distance(k))
    }

    /// Per-site outgoing infection rate on `Ω^n`: `(1 - 1/N) Σ_{k<=n} α_k`.
    pub fn total_rate(&self, n: usize) -> f64 {
        (1.0 - 1.0 / self.base as f64) * self.alpha.partial_sum(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::FiniteLattice;
    use approx::assert_relative_eq;

    #[test]
    fn infection_rate_examples() {
        let m = RateModel::new(2, 1.0, AlphaSeq::explicit([2.0, 1.0])).unwrap();
        let o = Address::origin(2);
        let far = Address::new(2, vec![0, 1]).unwrap();
        assert_relative_eq!(m.infection_rate(&o, &far).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(m.infection_rate(&o, &o), Err(Error::SameSite));
        let past = Address::new(2, vec![0, 0, 1]).unwrap();
        assert_eq!(m.infection_rate(&o, &past).unwrap(), 0.0);

        let m = RateModel::new(2, 1.0, AlphaSeq::EffectiveDim { d: 2.0, base: 7 }).unwrap();
        assert_relative_eq!(m.infection_rate(&o, &past).unwrap(), 1.0 / 64.0, epsilon = 1e-15);
    }

    #[test]
    fn rate_totals_match_brute_force() {
        let families = [
            AlphaSeq::explicit([2.0, 1.0, 0.5]),
            AlphaSeq::Geometric { q: 0.5 },
            AlphaSeq::DoubleExp { theta: 1.5 },
            AlphaSeq::EffectiveDim { d: 3.0, base: 2 },
        ];
        for base in [2u32, 3, 5] {
            for alpha in &families {
                let model = RateModel::new(base, 1.0, alpha.clone()).unwrap();
                for n in 1..=3 {
                    let lat = FiniteLattice::new(base, n).unwrap();
                    let closed = model.total_rate(n);
                    for i in 0..lat.size() {
                        let ia = lat.address(i).unwrap();
                        let brute: f64 = (0..lat.size())
                            .filter(|&j| j != i)
                            .map(|j| model.infection_rate(&ia, &lat.address(j).unwrap()).unwrap())
                            .sum();
                        assert!((brute - closed).abs() < 1e-12, "N={base} n={n} {alpha}");
                    }
                }
            }
        }
    }

    #[test]
    fn beta_tail_examples() {
        let a = AlphaSeq::explicit([1.0, 2.0]);
        assert_eq!(a.beta_tail(3).unwrap(), 0.0);
        assert_relative_eq!(a.beta_tail(1).unwrap(), 3.0);

        let ed = AlphaSeq::EffectiveDim { d: 2.0, base: 2 };
        for k in 1..20 {
            assert_relative_eq!(ed.beta_tail(k).unwrap(), 2f64.powi(1 - k as i32), max_relative = 1e-14);
        }

        let de = AlphaSeq::DoubleExp { theta: 2.0 };
        let direct: f64 = (3..63).map(|j| (-(2f64.powi(j))).exp()).sum();
        let got = de.beta_tail(3).unwrap();
        assert!(((got - direct) / direct).abs() < 1e-12);

        let g = AlphaSeq::Geometric { q: 0.25 };
        let direct: f64 = (4..200).map(|j| 0.25f64.powi(j)).sum();
        assert_relative_eq!(g.beta_tail(4).unwrap(), direct, max_relative = 1e-13);
    }

    #[test]
    fn double_exp_tail_near_one() {
        let de = AlphaSeq::DoubleExp { theta: 1.05 };
        for k in [1usize, 5, 40] {
            let direct: f64 = (k..5000).map(|j| (-(1.05f64.powi(j as i32))).exp()).sum();
            assert_relative_eq!(de.beta_tail(k).unwrap(), direct, max_relative = 1e-12);
        }
        assert_eq!(AlphaSeq::DoubleExp { theta: 3.0 }.ln_beta_tail(800).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn divergent_families_rejected() {
        assert!(matches!(AlphaSeq::DoubleExp { theta: 1.0 }.total(), Err(Error::Divergent(_))));
        assert!(matches!(AlphaSeq::Geometric { q: 1.0 }.total(), Err(Error::Divergent(_))));
        assert!(AlphaSeq::explicit([1.0, -1.0]).validate().is_err());
    }

    #[test]
    fn reduced_sequence_is_blockwise_minimum() {
        let src = AlphaSeq::Geometric { q: 0.5 };
        let red = AlphaSeq::Reduced { source: Box::new(src.clone()), source_base: 3, m: 2, n: 3 };
        for l in 0..5usize {
            let gamma_min = (l * 2 + 1..=l * 2 + 2)
                .map(|i| src.value(i) * 3f64.powi(-(i as i32)))
                .fold(f64::INFINITY, f64::min);
            for r in 1..=3 {
                let k = l * 3 + r;
                assert_relative_eq!(red.value(k) * 2f64.powi(-(k as i32)), gamma_min, max_relative = 1e-12);
            }
        }
        let direct: f64 = (1..400).map(|k| red.value(k)).sum();
        assert_relative_eq!(red.total().unwrap(), direct, max_relative = 1e-12);
    }

    #[test]
    fn reduced_support_follows_source() {
        let src = AlphaSeq::explicit([1.0, 1.0, 1.0, 0.0, 1.0]);
        let red = AlphaSeq::Reduced { source: Box::new(src), source_base: 3, m: 2, n: 3 };
        assert_eq!(red.support(), Some(3));
        assert!(red.value(4) == 0.0 && red.value(3) > 0.0);
    }

    #[test]
    fn json_round_trip() {
        let seqs = [
            AlphaSeq::explicit([1.0, 0.5]),
            AlphaSeq::DoubleExp { theta: 1.5 },
            AlphaSeq::EffectiveDim { d: 2.0, base: 3 },
            AlphaSeq::Geometric { q: 0.5 },
        ];
        for s in seqs {
            let js = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<AlphaSeq>(&js).unwrap(), s);
        }
        let parsed: AlphaSeq = serde_json::from_str(r#"{"family":"effective_dim","d":2}"#).unwrap();
        assert_eq!(parsed, AlphaSeq::EffectiveDim { d: 2.0, base: 2 });
        let parsed: AlphaSeq = serde_json::from_str(r#"{"family":"explicit","values":[2,1]}"#).unwrap();
        assert_eq!(parsed.prefix(3), vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn inline_forms_parse() {
        assert_eq!("geometric:0.5".parse::<AlphaSeq>().unwrap(), AlphaSeq::Geometric { q: 0.5 });
        assert_eq!("explicit:2,1".parse::<AlphaSeq>().unwrap(), AlphaSeq::explicit([2.0, 1.0]));
        assert!("double_exp:0.5".parse::<AlphaSeq>().is_err());
        assert!("banana:1".parse::<AlphaSeq>().is_err());
        let m = RateModel::new(3, 1.0, "effective_dim:2".parse().unwrap()).unwrap();
        assert_eq!(m.alpha, AlphaSeq::EffectiveDim { d: 2.0, base: 3 });
    }
}
