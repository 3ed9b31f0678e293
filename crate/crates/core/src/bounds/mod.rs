//! Closed-form bounds: `f` and `g`, the renormalization recursion, survival
//! lower bounds, extinction certificates, `δ_c` brackets, and the reduction of
//! general `N` to `N = 2`.

mod bracket;
mod compare;
mod extinction;
mod functions;
mod majorant;
mod recursion;

pub use bracket::{bracket_delta_c, Bracket, BracketOptions, McOptions};
pub use compare::{compare_reduce, sandwich_holds, smallest_sandwich, BlockMin, Reduction};
pub use extinction::{certify_extinction, ln_offspring, ExtinctionCertificate};
pub use functions::{f, g, g_ratio, smallness_constants, xi_from_eps, Smallness};
pub use majorant::{
    eps_domination, eps_tilde_bounds, ln_f_eta, summability_scan, EpsDomination, EpsTilde, SummabilityScan, F_eta,
};
pub use recursion::{
    finite_survival_bound, ln_level_alpha, recursion, survival_product, survival_product_with, RenormTrace,
    SurvivalProduct, SurvivalVerdict, TailOptions,
};
