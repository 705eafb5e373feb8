//! Fixtures shared by the benchmarks: a Marshak-like state on a two-level
//! hierarchy refined around the heated face.

use std::sync::Arc;

use raddiff_core::discretization::{Discretization, MaterialMap};
use raddiff_core::driver::presets::{marshak_regions, marshak_two_material};
use raddiff_core::mesh::{IndexBox, PatchHierarchy};
use raddiff_core::stepper::restrict_state;

/// `base^3` grid with the slab `x < 1/4` refined once.
pub fn front_hierarchy(base: i32) -> Arc<PatchHierarchy> {
    let refine = vec![vec![IndexBox::new(
        [0, 0, 0],
        [base / 4 - 1, base - 1, base - 1],
    )]];
    Arc::new(
        PatchHierarchy::build(marshak_two_material().problem.domain, [base; 3], &refine).unwrap(),
    )
}

/// Two-material Marshak discretisation on `h`.
pub fn discretization(h: &Arc<PatchHierarchy>) -> Discretization {
    let material = MaterialMap {
        regions: marshak_regions(),
        background: 1.0,
    };
    Discretization::new(Arc::clone(h), material, marshak_two_material().physics)
}

/// A heated layer near `x = 0` in radiative equilibrium with the material.
pub fn front_state(h: &PatchHierarchy) -> Vec<f64> {
    let n = h.ncells();
    let mut u = h.sample(|x| 1e-5 + (-(x[0] / 0.1).powi(2)).exp());
    u.extend_from_within(..);
    for v in &mut u[n..] {
        *v = v.powf(0.25);
    }
    restrict_state(h, &mut u);
    u
}
