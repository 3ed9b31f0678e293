//! Exact generators on the state spaces `S_n = {0,1}^{Ω^n}` for `N = 2` and
//! numerical checks of the intertwining identities between levels.

mod generators;
mod kernel;
mod matrix;
mod state;
mod verify;

pub use generators::{
    a_entry, b_entry, build_addon_generator, build_contact_generator, build_joint_generator,
    build_two_level_coupling_generator, JointSystem, StarConvention,
};
pub use kernel::{block_row, build_kernel, KernelMatrix};
pub use matrix::{evolve_law, GeneratorBuilder, GeneratorMatrix};
pub use state::{space_size, BitState, BlockClass, MAX_EXACT_LEVEL};
pub(crate) use state::{dist, pattern};
pub use verify::{
    closed_form_tables, commute_residuals, exact_joint_law, exact_law, intertwine_residual, one_level_spectrum,
    threshold_for, two_level_tables, verify_commute, verify_commute_with, verify_intertwine, verify_intertwine_with,
    verify_joint_marginal, verify_one_level_spectrum, verify_star_independence, verify_two_level_tables, ClassTable,
    OneLevelSpectrum, TwoLevelTables, VerificationReport, VerifyOptions,
};
