use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

use super::kernel::KernelMatrix;
use super::matrix::GeneratorMatrix;
use super::state::{check_level, dist, pattern, space_size, BlockClass};

/// Values given to the entries of the `a`, `b` tables that never influence the
/// intertwining relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StarConvention {
    /// `a* = 1/2`, `b* = 0`: keeps `a >= 1/2` and `b >= 0` everywhere.
    #[default]
    A,
    /// `a* = 1`, `b* = 1`.
    B,
}

impl StarConvention {
    fn values(self) -> (f64, f64) {
        match self {
            StarConvention::A => (0.5, 0.0),
            StarConvention::B => (1.0, 1.0),
        }
    }
}

/// Infection weight `a(x̄_i, x̄_j)` used when `y(j) = 1`.
pub fn a_entry(ci: BlockClass, cj: BlockClass, xi: f64, star: StarConvention) -> f64 {
    use BlockClass::*;
    match (ci, cj) {
        (Empty, Mixed) => 1.0 - xi,
        (Empty, Full) => 2.0 * (1.0 - xi),
        (Mixed, Mixed) => 0.5,
        (Mixed, Full) => 1.0,
        _ => star.values().0,
    }
}

/// Infection weight `b(x̄_i, x̄_j)` used when `y(j) = 0`.
pub fn b_entry(ci: BlockClass, cj: BlockClass, xi: f64, star: StarConvention) -> f64 {
    use BlockClass::*;
    match (ci, cj) {
        (Empty, Empty) | (Mixed, Empty) => 0.0,
        (Empty, Mixed) => 1.0 - xi,
        (Mixed, Mixed) => 0.5,
        _ => star.values().1,
    }
}

fn check_rates(delta: f64, alpha: &[f64]) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be positive and finite, got {delta}")));
    }
    if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(invalid(format!("alpha entries must be finite and >= 0, got {a}")));
    }
    Ok(())
}

/// Generator of the `(δ, α_1..α_n)` contact process on `S_n`.
///
/// `alpha[k-1]` is `α_k`; entries beyond `n` are ignored, missing ones count as 0.
pub fn build_contact_generator(n: u32, delta: f64, alpha: &[f64]) -> Result<GeneratorMatrix> {
    check_level(n)?;
    check_rates(delta, alpha)?;
    let sites = 1usize << n;
    // w[k] = α_k 2^{-k}
    let w: Vec<f64> = (0..=n as usize)
        .map(|k| if k == 0 { 0.0 } else { alpha.get(k - 1).copied().unwrap_or(0.0) * 0.5f64.powi(k as i32) })
        .collect();
    let mut b = GeneratorMatrix::builder(space_size(n));
    for x in 0..space_size(n) {
        for i in 0..sites {
            if x >> i & 1 == 1 {
                b.add(x, x ^ 1 << i, delta);
            } else {
                let rate: f64 = (0..sites).filter(|&j| x >> j & 1 == 1).map(|j| w[dist(i, j) as usize]).sum();
                b.add(x, x | 1 << i, rate);
            }
        }
    }
    let g = b.build();
    g.check()?;
    Ok(g)
}

/// Generator `G'_x` on `S_{n-1}` attached to `x ∈ S_n`.
///
/// `alpha_shift[k-1]` is the rate `α_{k+1}` used at renormalized distance `k`.
pub fn build_addon_generator(
    n: u32,
    x: usize,
    delta_prime: f64,
    alpha_shift: &[f64],
    xi: f64,
    star: StarConvention,
) -> Result<GeneratorMatrix> {
    check_level(n)?;
    if n == 0 {
        return Err(invalid("the added-on generator needs n >= 1"));
    }
    check_rates(delta_prime, alpha_shift)?;
    if x >= space_size(n) {
        return Err(crate::Error::IndexOutOfRange { index: x, size: space_size(n) });
    }
    let m = n - 1;
    let sites = 1usize << m;
    let class: Vec<BlockClass> = (0..sites).map(|i| BlockClass::of(pattern(x, i))).collect();
    let mut b = GeneratorMatrix::builder(space_size(m));
    for y in 0..space_size(m) {
        for i in 0..sites {
            if y >> i & 1 == 1 {
                b.add(y, y ^ 1 << i, delta_prime);
                continue;
            }
            let mut rate = 0.0;
            for j in (0..sites).filter(|&j| j != i) {
                let k = dist(i, j) as usize;
                let w = alpha_shift.get(k - 1).copied().unwrap_or(0.0) * 0.5f64.powi(k as i32);
                let coeff = if y >> j & 1 == 1 {
                    a_entry(class[i], class[j], xi, star)
                } else {
                    b_entry(class[i], class[j], xi, star)
                };
                rate += w * coeff;
            }
            b.add(y, y | 1 << i, rate);
        }
    }
    let g = b.build();
    g.check()?;
    Ok(g)
}

/// Everything needed to run or verify the joint chain `(X, Ỹ)` at level `n`.
#[derive(Debug, Clone)]
pub struct JointSystem {
    pub n: u32,
    pub delta: f64,
    pub alpha: Vec<f64>,
    pub xi: f64,
    pub delta_prime: f64,
    pub star: StarConvention,
    pub g: GeneratorMatrix,
    pub kernel: KernelMatrix,
    /// `G'_x` for every `x ∈ S_n`.
    pub addon: Vec<GeneratorMatrix>,
}

impl JointSystem {
    /// Builds the contact generator, kernel and added-on generators. `ξ` defaults
    /// to `f(α_1/δ)` and `δ' = 2ξδ`.
    pub fn new(n: u32, delta: f64, alpha: &[f64], xi: Option<f64>, star: StarConvention) -> Result<Self> {
        if n == 0 {
            return Err(invalid("the joint chain needs n >= 1"));
        }
        let g = build_contact_generator(n, delta, alpha)?;
        let a1 = alpha.first().copied().unwrap_or(0.0);
        let xi = match xi {
            Some(v) => v,
            None => crate::bounds::f(a1 / delta)?,
        };
        let kernel = super::kernel::build_kernel(n, xi)?;
        let delta_prime = 2.0 * xi * delta;
        let shift: &[f64] = if alpha.len() > 1 { &alpha[1..] } else { &[] };
        let addon = (0..space_size(n))
            .map(|x| build_addon_generator(n, x, delta_prime, shift, xi, star))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, delta, alpha: alpha.to_vec(), xi, delta_prime, star, g, kernel, addon })
    }

    pub fn ny(&self) -> usize {
        space_size(self.n - 1)
    }

    pub fn joint_index(&self, x: usize, y: usize) -> usize {
        x * self.ny() + y
    }

    /// Law of `X` after an `Ỹ`-jump to `y'` that leaves `P(x, y') = 0`:
    /// `q(x') ∝ r(x, x') P(x', y')`, or a point mass at `x` if that vanishes.
    pub fn forced_jump_law(&self, x: usize, y_new: usize) -> Vec<(usize, f64)> {
        let weights: Vec<(usize, f64)> = self
            .g
            .row(x)
            .iter()
            .map(|&(x2, r)| (x2, r * self.kernel.entry(x2, y_new)))
            .filter(|e| e.1 > 0.0)
            .collect();
        let total: f64 = weights.iter().map(|e| e.1).sum();
        if total > 0.0 {
            weights.into_iter().map(|(x2, w)| (x2, w / total)).collect()
        } else {
            vec![(x, 1.0)]
        }
    }

    /// Joint generator on `S_n × S_{n-1}`, state index `x |S_{n-1}| + y`.
    pub fn joint_generator(&self) -> Result<GeneratorMatrix> {
        let ny = self.ny();
        let mut b = GeneratorMatrix::builder(self.g.dim() * ny);
        for x in 0..self.g.dim() {
            for y in 0..ny {
                let from = self.joint_index(x, y);
                let pxy = self.kernel.entry(x, y);
                if pxy > 0.0 {
                    for &(x2, r) in self.g.row(x) {
                        b.add(from, self.joint_index(x2, y), r * self.kernel.entry(x2, y) / pxy);
                    }
                }
                for &(y2, r) in self.addon[x].row(y) {
                    if self.kernel.entry(x, y2) > 0.0 {
                        b.add(from, self.joint_index(x, y2), r);
                    } else {
                        for (x2, q) in self.forced_jump_law(x, y2) {
                            b.add(from, self.joint_index(x2, y2), r * q);
                        }
                    }
                }
            }
        }
        let g = b.build();
        g.check()?;
        Ok(g)
    }
}

/// Joint generator for the `(δ, α)` contact process at level `n` with `ξ = f(α_1/δ)`.
pub fn build_joint_generator(n: u32, delta: f64, alpha: &[f64]) -> Result<GeneratorMatrix> {
    check_level(n)?;
    if n > 3 {
        return Err(crate::Error::TooLarge { n: n as usize, cap: 3 });
    }
    JointSystem::new(n, delta, alpha, None, StarConvention::A)?.joint_generator()
}

/// The cross-block infection part of the two-level system: sites 0, 1 are
/// infected from infected sites 2, 3 at rate 1/2 per pair.
pub fn build_two_level_coupling_generator() -> GeneratorMatrix {
    let mut b = GeneratorMatrix::builder(16);
    for x in 0..16usize {
        for i in 0..2 {
            if x >> i & 1 == 0 {
                let sources = (x >> 2 & 3).count_ones() as f64;
                b.add(x, x | 1 << i, 0.5 * sources);
            }
        }
    }
    b.build()
}
