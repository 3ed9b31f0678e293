//! Contact processes on the hierarchical group.
//!
//! The crate is split along the lines of the work it does:
//!
//! * [`lattice`]: hierarchical-group arithmetic on finite lattices `Ω^n`,
//!   infection-rate families and the finite-depth diagnostics for the
//!   extinction/survival conditions.
//! * [`exactgen`]: exact sparse generators on `{0,1}^{Ω^n}` for `N = 2`,
//!   the block kernel `P`, the added-on and joint generators, and residual
//!   checks of every intertwining identity.
//! * [`simulate`]: event-driven Monte Carlo of the contact process for any `N`.
//! * [`coupling`]: simulation of the renormalization coupling `(X, Ỹ, Y)`
//!   and of the full multi-level cascade, with statistical certification.
//! * [`bounds`]: the renormalization recursion, survival lower bounds,
//!   extinction certificates and critical-rate brackets.
//!
//! Only finite lattices are ever materialized. A contact process on `Ω^n`
//! started inside `Ω^n` is dominated by the same process on the infinite
//! group (suppressing infections that leave the box can only remove
//! infected sites), so finite-lattice survival is a lower bound for the
//! infinite one.

pub mod bounds;
pub mod coupling;
pub mod error;
pub mod exactgen;
pub mod lattice;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};

/// Version tag written into every serialized report.
pub const SCHEMA_VERSION: u32 = 1;
