//! Finite-volume discretisation of the coupled radiation-energy and material
//! temperature equations on the composite grid.

mod material;
mod operator;
mod physics;

pub use material::{MaterialMap, MaterialRegion};
pub(crate) use operator::{for_each_cell_faces, for_each_face};
pub use operator::{Discretization, FaceCoefficients};
pub use physics::{
    boundary_diffusion_e, face_diffusion_e, face_diffusion_t, face_dr, limit, robin_ghost,
    robin_ghost_factor, sigma_a, PhysicsParams,
};
