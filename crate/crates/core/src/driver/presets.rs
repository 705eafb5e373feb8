//! Built-in problem set-ups.

use crate::discretization::{MaterialMap, MaterialRegion};
use crate::error::{Error, Result};
use crate::mesh::Domain;

use super::config::RunConfig;

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 4] = ["marshak", "marshak-single", "marshak-full", "slab"];

/// The three `z = 10` blocks of the two-material Marshak problem.
pub fn marshak_regions() -> Vec<MaterialRegion> {
    vec![
        MaterialRegion {
            lo: [0.0625, 0.375, 0.375],
            hi: [0.2, 0.625, 0.625],
            z: 10.0,
        },
        MaterialRegion {
            lo: [0.125, 0.0, 0.0],
            hi: [0.375, 1.0, 0.125],
            z: 10.0,
        },
        MaterialRegion {
            lo: [0.125, 0.0, 0.875],
            hi: [0.375, 1.0, 1.0],
            z: 10.0,
        },
    ]
}

/// Desk-scale two-material Marshak wave: 16^3 base, up to three levels,
/// heated through the x = 0 face, to t = 0.1.
pub fn marshak_two_material() -> RunConfig {
    let mut cfg = RunConfig {
        name: "marshak".into(),
        ..RunConfig::default()
    };
    cfg.material = MaterialMap {
        regions: marshak_regions(),
        background: 1.0,
    };
    cfg.physics.robin_left = 1.0;
    cfg.physics.robin_right = 0.0;
    cfg.problem.e0 = 1e-5;
    cfg.problem.base_resolution = [16, 16, 16];
    cfg.problem.max_levels = 3;
    cfg.time.t_final = 0.1;
    cfg.time.dump_interval = 0.025;
    cfg.output.snapshots = true;
    // Zero: derived from the finest resolution at run time.
    cfg.controller.eps_t = 0.0;
    cfg
}

/// The Marshak set-up with `z = 1` everywhere.
pub fn marshak_single_material() -> RunConfig {
    let mut cfg = marshak_two_material();
    cfg.name = "marshak-single".into();
    cfg.material = MaterialMap::uniform(1.0);
    cfg
}

/// Full-scale two-material run: 128^3-equivalent finest grid to t = 1.
pub fn marshak_full() -> RunConfig {
    let mut cfg = marshak_two_material();
    cfg.name = "marshak-full".into();
    cfg.problem.max_levels = 4;
    cfg.time.t_final = 1.0;
    cfg.time.dump_interval = 0.1;
    cfg
}

/// Single-material Marshak wave on a slab one base cell thick in y and z.
///
/// With z = 1 everywhere and heating through the x faces only, the solution
/// does not depend on y or z, so the slab carries exactly the solution of the
/// full cube at the same x resolution for a fraction of the cost. Cells stay
/// cubic: the slab is `1 / nx` thick.
pub fn slab(nx: i32, max_levels: usize) -> RunConfig {
    let mut cfg = marshak_single_material();
    cfg.name = format!("slab-{nx}b{max_levels}l");
    let w = 1.0 / nx as f64;
    cfg.problem.domain = Domain {
        lo: [0.0; 3],
        hi: [1.0, w, w],
    };
    cfg.problem.base_resolution = [nx, 1, 1];
    cfg.problem.max_levels = max_levels;
    cfg.output.snapshots = false;
    cfg.time.dump_interval = 0.0;
    cfg
}

pub fn preset(name: &str) -> Result<RunConfig> {
    match name {
        "marshak" => Ok(marshak_two_material()),
        "marshak-single" => Ok(marshak_single_material()),
        "marshak-full" => Ok(marshak_full()),
        "slab" => Ok(slab(16, 4)),
        other => Err(Error::Config(format!(
            "unknown preset `{other}` (known: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z10_blocks_contain_interior_points() {
        let m = marshak_two_material().material;
        let points = [
            [0.1, 0.5, 0.5],
            [0.15, 0.4, 0.6],
            [0.07, 0.6, 0.38],
            [0.2, 0.5, 0.05],
            [0.3, 0.1, 0.1],
            [0.13, 0.9, 0.02],
            [0.2, 0.5, 0.95],
            [0.3, 0.1, 0.9],
            [0.37, 0.95, 0.99],
        ];
        for p in points {
            assert_eq!(m.z_at(p), 10.0, "{p:?}");
        }
        assert_eq!(m.z_at([0.5, 0.5, 0.5]), 1.0);
    }

    #[test]
    fn geometry_is_symmetric_in_y_and_z() {
        let m = marshak_two_material().material;
        for i in 0..32 {
            for j in 0..32 {
                for k in 0..32 {
                    let x = [
                        (i as f64 + 0.5) / 32.0,
                        (j as f64 + 0.5) / 32.0,
                        (k as f64 + 0.5) / 32.0,
                    ];
                    let z = m.z_at(x);
                    assert_eq!(z, m.z_at([x[0], 1.0 - x[1], x[2]]));
                    assert_eq!(z, m.z_at([x[0], x[1], 1.0 - x[2]]));
                }
            }
        }
    }

    #[test]
    fn presets_are_valid() {
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("nope").is_err());
    }
}
