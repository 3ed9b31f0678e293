use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::FiniteLattice;

const ABSENT: u32 = u32::MAX;

/// Infected set on `Ω^n` with O(1) insert, remove, membership and uniform pick.
#[derive(Debug, Clone)]
pub struct SparseConfig {
    lattice: FiniteLattice,
    infected: Vec<usize>,
    slot: Vec<u32>,
}

impl SparseConfig {
    pub fn empty(base: u32, n: usize) -> Result<Self> {
        let lattice = FiniteLattice::new(base, n)?;
        if lattice.size() >= ABSENT as usize {
            return Err(invalid(format!("{} sites is too many for a sparse configuration", lattice.size())));
        }
        Ok(Self { lattice, infected: Vec::new(), slot: vec![ABSENT; lattice.size()] })
    }

    pub fn from_sites(base: u32, n: usize, sites: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut c = Self::empty(base, n)?;
        for s in sites {
            if s >= c.lattice.size() {
                return Err(Error::IndexOutOfRange { index: s, size: c.lattice.size() });
            }
            c.insert(s);
        }
        Ok(c)
    }

    /// A single infected site.
    pub fn single(base: u32, n: usize, site: usize) -> Result<Self> {
        Self::from_sites(base, n, [site])
    }

    pub fn full(base: u32, n: usize) -> Result<Self> {
        let size = FiniteLattice::new(base, n)?.size();
        Self::from_sites(base, n, 0..size)
    }

    /// Configuration whose bit `i` of `bits` is `x(i)`; needs `N^n <= 64`.
    pub fn from_bits(base: u32, n: usize, bits: u64) -> Result<Self> {
        let size = FiniteLattice::new(base, n)?.size();
        if size > 64 {
            return Err(invalid("bit encoding needs at most 64 sites"));
        }
        Self::from_sites(base, n, (0..size).filter(|i| bits >> i & 1 == 1))
    }

    pub fn to_bits(&self) -> u64 {
        assert!(self.lattice.size() <= 64);
        self.infected.iter().fold(0u64, |acc, &s| acc | 1 << s)
    }

    pub fn lattice(&self) -> FiniteLattice {
        self.lattice
    }

    #[inline]
    pub fn contains(&self, site: usize) -> bool {
        self.slot[site] != ABSENT
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.infected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infected.is_empty()
    }

    /// Infected sites in insertion-dependent order.
    pub fn sites(&self) -> &[usize] {
        &self.infected
    }

    pub fn sorted_sites(&self) -> Vec<usize> {
        let mut v = self.infected.clone();
        v.sort_unstable();
        v
    }

    /// Returns `true` if the site was healthy.
    #[inline]
    pub fn insert(&mut self, site: usize) -> bool {
        if self.contains(site) {
            return false;
        }
        self.slot[site] = self.infected.len() as u32;
        self.infected.push(site);
        true
    }

    /// Returns `true` if the site was infected.
    #[inline]
    pub fn remove(&mut self, site: usize) -> bool {
        let pos = self.slot[site];
        if pos == ABSENT {
            return false;
        }
        let last = self.infected.pop().expect("nonempty");
        if last != site {
            self.infected[pos as usize] = last;
            self.slot[last] = pos;
        }
        self.slot[site] = ABSENT;
        true
    }

    pub fn is_subset_of(&self, other: &SparseConfig) -> bool {
        self.infected.iter().all(|&s| other.contains(s))
    }
}

impl PartialEq for SparseConfig {
    fn eq(&self, other: &Self) -> bool {
        self.lattice == other.lattice && self.count() == other.count() && self.is_subset_of(other)
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigRepr {
    #[serde(rename = "N")]
    base: u32,
    n: usize,
    infected: Vec<usize>,
}

impl Serialize for SparseConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConfigRepr { base: self.lattice.base(), n: self.lattice.depth(), infected: self.sorted_sites() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparseConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ConfigRepr::deserialize(d)?;
        SparseConfig::from_sites(r.base, r.n, r.infected).map_err(serde::de::Error::custom)
    }
}
