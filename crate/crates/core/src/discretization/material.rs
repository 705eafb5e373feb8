use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::PatchHierarchy;

/// Axis-aligned physical box carrying an atomic number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialRegion {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub z: f64,
}

impl MaterialRegion {
    /// Closed-box containment, so points on a region boundary belong to it.
    pub fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= x[a] && x[a] <= self.hi[a])
    }
}

/// Atomic number as a function of position: the first region containing the
/// point wins, otherwise the background value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialMap {
    pub regions: Vec<MaterialRegion>,
    pub background: f64,
}

impl Default for MaterialMap {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl MaterialMap {
    pub fn uniform(z: f64) -> Self {
        Self {
            regions: Vec::new(),
            background: z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.background > 0.0) {
            return Err(Error::Config(format!(
                "background atomic number must be positive, got {}",
                self.background
            )));
        }
        for r in &self.regions {
            if !(r.z > 0.0) || (0..3).any(|a| r.lo[a] > r.hi[a]) {
                return Err(Error::Config(format!("invalid material region {r:?}")));
            }
        }
        Ok(())
    }

    pub fn z_at(&self, x: [f64; 3]) -> f64 {
        self.regions
            .iter()
            .find(|r| r.contains(x))
            .map_or(self.background, |r| r.z)
    }

    /// Atomic number at every cell centre of the hierarchy.
    pub fn cell_z(&self, h: &PatchHierarchy) -> Vec<f64> {
        h.sample(|x| self.z_at(x))
    }

    /// Atomic number at every padded (interior and ghost) cell centre.
    pub fn padded_z(&self, h: &PatchHierarchy) -> Vec<f64> {
        let mut out = vec![0.0; h.npadded()];
        for p in h.patches() {
            for c in p.padded_box().cells() {
                out[p.padded_offset + p.padded_local(c)] = self.z_at(h.cell_center(p.level, c));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_region_wins() {
        let m = MaterialMap {
            regions: vec![
                MaterialRegion {
                    lo: [0.0; 3],
                    hi: [0.5; 3],
                    z: 10.0,
                },
                MaterialRegion {
                    lo: [0.25; 3],
                    hi: [1.0; 3],
                    z: 5.0,
                },
            ],
            background: 1.0,
        };
        assert_eq!(m.z_at([0.3; 3]), 10.0);
        assert_eq!(m.z_at([0.5; 3]), 10.0);
        assert_eq!(m.z_at([0.7; 3]), 5.0);
        assert_eq!(m.z_at([0.1, 0.9, 0.1]), 1.0);
    }
}
