//! Structured adaptive mesh: nested levels of logically rectangular patches.

mod flux;
mod ghost;
mod hierarchy;
mod index_box;
pub mod snapshot;
mod transfer;

pub use flux::{match_fluxes, FaceLayout};
pub use ghost::{
    fill_all_neumann, fill_ghost, interior_padded, scatter_interior, Fragment, GhostEntry,
    GhostKind, GhostSchedule,
};
pub use hierarchy::{Domain, Level, Patch, PatchHierarchy, GHOST_WIDTH, REFINE_RATIO};
pub use index_box::IndexBox;
pub use transfer::{
    prolong_conservative, prolong_correction, prolong_correction_add, restrict_all, restrict_level,
};
