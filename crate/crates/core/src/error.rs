use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("addresses live on different lattices (base {0} vs base {1})")]
    BaseMismatch(u32, u32),

    #[error("digit {digit} at level {level} is out of range for base {base}")]
    DigitOutOfRange { digit: u32, level: usize, base: u32 },

    #[error("site index {index} is out of range for a lattice of {size} sites")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("address does not fit in {levels} levels")]
    AddressTooLong { levels: usize },

    #[error("block level {m} exceeds lattice depth {n}")]
    BlockTooLarge { m: usize, n: usize },

    #[error("infection rate requested between a site and itself")]
    SameSite,

    #[error("rate sequence is not summable: {0}")]
    Divergent(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level {n} exceeds the exact-enumeration cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("coupling invariant violated: {0}")]
    InvariantViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
