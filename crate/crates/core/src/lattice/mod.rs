//! Hierarchical-group arithmetic.
//!
//! A site of `Ω_N` is a finitely supported digit sequence `(i_0, i_1, ...)`
//! with `i_k ∈ [0, N)`; index `k` is hierarchical level `k`, so digits are
//! stored little-endian. The group law is componentwise addition mod `N`
//! without carries, and the norm `|i|` is one past the highest nonzero
//! digit. Two sites are at hierarchical distance `|i - j|`.
//!
//! On the finite lattice `Ω^n` a site is identified with the integer
//! `Σ i_k N^k ∈ [0, N^n)`. Under this numbering the `m`-block `B_m(j)` is the
//! contiguous index range `[j N^m, (j+1) N^m)`, which is what makes block
//! restriction and the kernel factorization cheap.

mod diagnostics;
mod rates;

pub use diagnostics::{condition_diagnostics, ConditionReport, ConditionVerdict};
pub use rates::{AlphaSeq, RateModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A site of the hierarchical group, in canonical (trailing-zero-stripped) form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Address {
    base: u32,
    digits: Vec<u32>,
}

impl Address {
    pub fn new(base: u32, digits: impl Into<Vec<u32>>) -> Result<Self> {
        if base < 2 {
            return Err(crate::error::invalid(format!("base must be >= 2, got {base}")));
        }
        let mut digits = digits.into();
        for (level, &digit) in digits.iter().enumerate() {
            if digit >= base {
                return Err(Error::DigitOutOfRange { digit, level, base });
            }
        }
        while digits.last() == Some(&0) {
            digits.pop();
        }
        Ok(Self { base, digits })
    }

    pub fn origin(base: u32) -> Self {
        Self { base, digits: Vec::new() }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    /// Nonzero prefix of the digit sequence; digits past its end are zero.
    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn digit(&self, level: usize) -> u32 {
        self.digits.get(level).copied().unwrap_or(0)
    }

    /// `|i| = inf{k : i_m = 0 for all m >= k}`.
    pub fn norm(&self) -> usize {
        self.digits.len()
    }

    pub fn is_origin(&self) -> bool {
        self.digits.is_empty()
    }

    fn check_base(&self, other: &Address) -> Result<()> {
        if self.base != other.base {
            return Err(Error::BaseMismatch(self.base, other.base));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Address, op: impl Fn(u32, u32) -> u32) -> Result<Address> {
        self.check_base(other)?;
        let len = self.digits.len().max(other.digits.len());
        let digits: Vec<u32> = (0..len).map(|k| op(self.digit(k), other.digit(k))).collect();
        Address::new(self.base, digits)
    }

    pub fn add_mod(&self, other: &Address) -> Result<Address> {
        let n = self.base;
        self.zip_with(other, |a, b| (a + b) % n)
    }

    pub fn sub_mod(&self, other: &Address) -> Result<Address> {
        let n = self.base;
        self.zip_with(other, |a, b| (a + n - b) % n)
    }

    pub fn neg(&self) -> Address {
        let n = self.base;
        let digits: Vec<u32> = self.digits.iter().map(|&d| (n - d) % n).collect();
        Address { base: n, digits }
    }

    /// Concatenation `self ∘ suffix`, where `self` is read as an element of `Ω^m`.
    pub fn concat(&self, m: usize, suffix: &Address) -> Result<Address> {
        self.check_base(suffix)?;
        if self.norm() > m {
            return Err(Error::AddressTooLong { levels: m });
        }
        let mut digits: Vec<u32> = (0..m).map(|k| self.digit(k)).collect();
        digits.extend_from_slice(&suffix.digits);
        Address::new(self.base, digits)
    }

    /// Integer label `Σ i_k N^k` of this site in `Ω^n`.
    pub fn site_index(&self, n: usize) -> Result<usize> {
        if self.norm() > n {
            return Err(Error::AddressTooLong { levels: n });
        }
        let base = self.base as usize;
        Ok(self.digits.iter().rev().fold(0usize, |acc, &d| acc * base + d as usize))
    }

    pub fn from_site_index(base: u32, n: usize, index: usize) -> Result<Address> {
        let lattice = FiniteLattice::new(base, n)?;
        if index >= lattice.size() {
            return Err(Error::IndexOutOfRange { index, size: lattice.size() });
        }
        let mut digits = Vec::with_capacity(n);
        let mut rest = index;
        for _ in 0..n {
            digits.push((rest % base as usize) as u32);
            rest /= base as usize;
        }
        Address::new(base, digits)
    }
}

/// Hierarchical distance `|i - j|`.
pub fn hdist(i: &Address, j: &Address) -> Result<usize> {
    Ok(i.sub_mod(j)?.norm())
}

pub fn add_mod(i: &Address, j: &Address) -> Result<Address> {
    i.add_mod(j)
}

/// Sites of the `m`-block `B_m(j) = {i ∘ j : i ∈ Ω^m}` inside `Ω^n`.
pub fn block_members(m: usize, j: &Address, n: usize) -> Result<Vec<Address>> {
    if m > n {
        return Err(Error::BlockTooLarge { m, n });
    }
    if j.norm() > n - m {
        return Err(Error::AddressTooLong { levels: n - m });
    }
    let inner = FiniteLattice::new(j.base(), m)?;
    (0..inner.size())
        .map(|idx| Address::from_site_index(j.base(), m, idx)?.concat(m, j))
        .collect()
}

/// Block restriction `x_i(j) = x(j ∘ i)`: the configuration `x` on `Ω^n` seen
/// on the `m`-block with index `i ∈ Ω^{n-m}`.
pub fn restrict(x: &[bool], base: u32, n: usize, i: &Address, m: usize) -> Result<Vec<bool>> {
    if m > n {
        return Err(Error::BlockTooLarge { m, n });
    }
    if i.base() != base {
        return Err(Error::BaseMismatch(i.base(), base));
    }
    let lattice = FiniteLattice::new(base, n)?;
    if x.len() != lattice.size() {
        return Err(crate::error::invalid(format!(
            "configuration has {} entries, lattice has {}",
            x.len(),
            lattice.size()
        )));
    }
    let block = i.site_index(n - m)?;
    Ok(x[lattice.block_range(m, block)].to_vec())
}

/// The finite lattice `Ω^n` with integer-labelled sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteLattice {
    base: u32,
    depth: usize,
    size: usize,
}

impl FiniteLattice {
    pub fn new(base: u32, depth: usize) -> Result<Self> {
        if base < 2 {
            return Err(crate::error::invalid(format!("base must be >= 2, got {base}")));
        }
        let size = (base as usize)
            .checked_pow(depth as u32)
            .ok_or_else(|| crate::error::invalid(format!("{base}^{depth} sites overflow")))?;
        Ok(Self { base, depth, size })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Hierarchical distance between two site labels.
    #[inline]
    pub fn hdist(&self, mut a: usize, mut b: usize) -> usize {
        if self.base == 2 {
            return (usize::BITS - (a ^ b).leading_zeros()) as usize;
        }
        let n = self.base as usize;
        let mut k = 0;
        while a != b {
            a /= n;
            b /= n;
            k += 1;
        }
        k
    }

    /// Digitwise addition mod `N` of two site labels.
    #[inline]
    pub fn add(&self, mut a: usize, mut b: usize) -> usize {
        if self.base == 2 {
            return a ^ b;
        }
        let n = self.base as usize;
        let (mut out, mut scale) = (0usize, 1usize);
        while a != 0 || b != 0 {
            out += ((a % n + b % n) % n) * scale;
            a /= n;
            b /= n;
            scale *= n;
        }
        out
    }

    /// Label range of the block `B_m(j)`.
    pub fn block_range(&self, m: usize, j: usize) -> std::ops::Range<usize> {
        let width = (self.base as usize).pow(m as u32);
        j * width..(j + 1) * width
    }

    /// Number of sites at distance exactly `k >= 1` from any given site.
    pub fn shell_size(&self, k: usize) -> usize {
        let n = self.base as usize;
        n.pow(k as u32 - 1) * (n - 1)
    }

    pub fn address(&self, index: usize) -> Result<Address> {
        Address::from_site_index(self.base, self.depth, index)
    }
}
