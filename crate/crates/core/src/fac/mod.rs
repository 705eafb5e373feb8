//! Multilevel preconditioning: frozen-coefficient level operators, FAC
//! cycles over the patch hierarchy and the physics-based splitting `P1 P2`.

mod composite;
mod cycle;
mod level;
mod precond;

pub use composite::{apply_composite, CompositeWorkspace};
pub use cycle::{fac_vcycle, FacConfig, FacOperator, FacWorkspace};
pub use level::{smooth_redblack, LevelOperator, LevelPattern};
pub use precond::{invert_p2_cell, FacPreconditioner, FrozenCoefficients};
