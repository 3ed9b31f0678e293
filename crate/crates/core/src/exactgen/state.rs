use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest level handled by exact enumeration.
pub const MAX_EXACT_LEVEL: u32 = 4;

/// Configuration on `Ω^n` for `N = 2`: bit `i` holds `x(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitState {
    pub n: u32,
    pub bits: u64,
}

impl BitState {
    pub fn new(n: u32, bits: u64) -> Result<Self> {
        check_level(n)?;
        let size = space_size(n);
        if bits as usize >= size {
            return Err(Error::IndexOutOfRange { index: bits as usize, size });
        }
        Ok(Self { n, bits })
    }

    pub fn sites(self) -> usize {
        1 << self.n
    }

    pub fn get(self, i: usize) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn infected(self) -> impl Iterator<Item = usize> {
        (0..self.sites()).filter(move |&i| self.get(i))
    }

    pub fn count(self) -> u32 {
        self.bits.count_ones()
    }

    /// Pattern of block `i`: `x(2i) + 2 x(2i+1)`.
    pub fn block(self, i: usize) -> u8 {
        pattern(self.bits as usize, i)
    }

    /// `x̄_i` for every block `i` of `Ω^{n-1}`.
    pub fn classes(self) -> Vec<BlockClass> {
        (0..self.sites() / 2).map(|i| BlockClass::of(self.block(i))).collect()
    }
}

/// Pattern class of a two-site block up to swapping its sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockClass {
    #[serde(rename = "00")]
    Empty,
    #[serde(rename = "01")]
    Mixed,
    #[serde(rename = "11")]
    Full,
}

impl BlockClass {
    pub const ALL: [BlockClass; 3] = [BlockClass::Empty, BlockClass::Mixed, BlockClass::Full];

    pub fn of(pattern: u8) -> Self {
        match pattern & 3 {
            0 => BlockClass::Empty,
            3 => BlockClass::Full,
            _ => BlockClass::Mixed,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// A representative two-site pattern; `Mixed` is `x(0) = 0, x(1) = 1`.
    pub fn representative(self) -> u8 {
        match self {
            BlockClass::Empty => 0,
            BlockClass::Mixed => 2,
            BlockClass::Full => 3,
        }
    }
}

pub(crate) fn pattern(x: usize, i: usize) -> u8 {
    (x >> (2 * i) & 3) as u8
}

/// `|S_n| = 2^(2^n)`.
pub fn space_size(n: u32) -> usize {
    1usize << (1usize << n)
}

pub(crate) fn check_level(n: u32) -> Result<()> {
    if n > MAX_EXACT_LEVEL {
        return Err(Error::TooLarge { n: n as usize, cap: MAX_EXACT_LEVEL as usize });
    }
    Ok(())
}

/// Hierarchical distance between sites of `Ω^n` for `N = 2`.
pub(crate) fn dist(i: usize, j: usize) -> u32 {
    usize::BITS - (i ^ j).leading_zeros()
}
