//! The coupled pair `(X, Ỹ, Y)` for `N = 2` and the tower of such pairs.
//!
//! `X` is an `n`-level contact process, `Ỹ` an `(n-1)`-level process whose
//! conditional law given the path of `X` is `P(X_t, ·)`, and `Y ⊆ Ỹ` a
//! `(δ', α')` contact process with `δ' = 2ξδ`, `α'_k = α_{k+1}/2`.
//!
//! `Y` shares every recovery of `Ỹ`, follows a `Ỹ` infection of `i` from `j`
//! with probability `1/(2a)` when `y(j) = 1`, ignores infections driven by the
//! `b` table, and runs its own clocks at sites where `Ỹ` is already infected.

mod cascade;
mod certify;
mod dynamics;
mod joint;

pub use cascade::{cascade, cascade_params, CascadeRun, LevelParams, Path};
pub use certify::{
    cascade_stats, conditional_law_test, marginal_test, y_first_jump_test, CascadeStats, CouplingReport, Stratum,
    MIN_EXPECTED, SIGNIFICANCE,
};
pub use dynamics::{PairParams, MAX_COUPLING_LEVEL};
pub use joint::{
    init_conditional, run_coupled, run_coupled_from, CoupledEvent, CoupledEventKind, CoupledOptions, CoupledRun,
    CouplingState, PairBits,
};
