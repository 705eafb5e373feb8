//! Face-centred data layout and coarse-fine flux matching.
//!
//! Every patch stores its own faces along each axis: a box with extent `n`
//! owns `n + e_a` faces along axis `a`, laid out x-fastest. Faces on a shared
//! same-level patch boundary are therefore stored twice and computed
//! identically from both sides.

use std::collections::BTreeMap;

use super::ghost::{Fragment, GhostKind};
use super::hierarchy::{PatchHierarchy, REFINE_RATIO};
use super::index_box::IndexBox;

/// Offsets of every patch's face arrays in the flat face vector.
#[derive(Clone, Debug, Default)]
pub struct FaceLayout {
    /// `offsets[level][patch][axis]`.
    offsets: Vec<Vec<[usize; 3]>>,
    nfaces: usize,
}

impl FaceLayout {
    pub(crate) fn build(h: &PatchHierarchy) -> Self {
        let mut offsets = Vec::with_capacity(h.nlevels());
        let mut n = 0;
        for level in h.levels() {
            let mut per_patch = Vec::with_capacity(level.patches.len());
            for p in &level.patches {
                let mut o = [0; 3];
                for (a, slot) in o.iter_mut().enumerate() {
                    *slot = n;
                    n += Self::face_box(&p.bx, a).volume();
                }
                per_patch.push(o);
            }
            offsets.push(per_patch);
        }
        Self { offsets, nfaces: n }
    }

    /// Face indices along `axis` of a box, as a box in "low-face" cell
    /// coordinates: face `c` separates cell `c - e_axis` from cell `c`.
    pub fn face_box(bx: &IndexBox, axis: usize) -> IndexBox {
        let mut f = *bx;
        f.hi[axis] += 1;
        f
    }

    pub fn nfaces(&self) -> usize {
        self.nfaces
    }

    /// First flat face index of `patch` on `level` along `axis`.
    #[inline]
    pub fn offset(&self, level: usize, patch: usize, axis: usize) -> usize {
        self.offsets[level][patch][axis]
    }

    /// Flat index of the face below cell `c` along `axis` in the given patch.
    #[inline]
    pub fn index(
        &self,
        h: &PatchHierarchy,
        level: usize,
        patch: usize,
        axis: usize,
        c: [i32; 3],
    ) -> usize {
        let bx = h.level(level).patches[patch].bx;
        self.offset(level, patch, axis) + Self::face_box(&bx, axis).offset(c)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct RefluxEntry {
    pub coarse: u32,
    pub fine: [u32; 4],
}

/// Coarse faces on the boundary of level `l` and the fine faces covering them.
#[derive(Clone, Debug, Default)]
pub(crate) struct RefluxSchedule {
    pub entries: Vec<RefluxEntry>,
}

impl RefluxSchedule {
    pub fn build(h: &PatchHierarchy, l: usize) -> Self {
        if l == 0 {
            return Self::default();
        }
        let faces = &h.faces;
        let coarse = h.level(l - 1);
        let fine = h.level(l);
        let mut groups: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for e in h.ghost_schedule(l).entries() {
            if e.kind != GhostKind::CoarseFine(Fragment::Face) {
                continue;
            }
            let a = (0..3).find(|&a| e.normal[a] != 0).unwrap();
            let side = e.normal[a] as i32;
            let p = e.patch as usize;
            // Fine face between the interior cell and the ghost.
            let mut fc = e.cell;
            if side < 0 {
                fc[a] += 1;
            }
            let fine_face = faces.index(h, l, p, a, fc);
            // Coarse face between the coarse cell behind the ghost and its
            // covered neighbour, stored on the patch owning the outside cell.
            let outside = e.cell.map(|v| v.div_euclid(REFINE_RATIO));
            let q = coarse
                .patches
                .iter()
                .position(|q| q.bx.contains(outside))
                .expect("nesting guarantees a coarse owner");
            let mut cc = outside;
            if side < 0 {
                cc[a] += 1;
            }
            let coarse_face = faces.index(h, l - 1, q, a, cc);
            groups
                .entry(coarse_face as u32)
                .or_default()
                .push(fine_face as u32);
        }
        debug_assert!(fine.patches.iter().all(|p| p.bx.is_aligned(REFINE_RATIO)));
        let entries = groups
            .into_iter()
            .map(|(coarse, f)| {
                assert_eq!(f.len(), 4, "coarse face must be covered by four fine faces");
                RefluxEntry {
                    coarse,
                    fine: [f[0], f[1], f[2], f[3]],
                }
            })
            .collect();
        Self { entries }
    }
}

/// Replaces each coarse flux on a coarse-fine interface by the mean of the
/// fine fluxes covering it, so that the composite divergence is conservative.
pub fn match_fluxes(h: &PatchHierarchy, flux: &mut [f64]) {
    for l in (1..h.nlevels()).rev() {
        for e in &h.reflux[l].entries {
            let s: f64 = e.fine.iter().map(|&f| flux[f as usize]).sum();
            flux[e.coarse as usize] = 0.25 * s;
        }
    }
}

impl PatchHierarchy {
    pub fn faces(&self) -> &FaceLayout {
        &self.faces
    }

    /// Number of coarse faces corrected by flux matching on level `l`'s boundary.
    pub fn reflux_count(&self, l: usize) -> usize {
        self.reflux[l].entries.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    #[test]
    fn face_counts() {
        let h = PatchHierarchy::uniform(Domain::unit_cube(), [4, 3, 2]).unwrap();
        assert_eq!(h.faces().nfaces(), 5 * 3 * 2 + 4 * 4 * 2 + 4 * 3 * 3);
    }

    #[test]
    fn every_interface_face_matched_once() {
        // Fine block covering coarse cells [2..5]^3 of an 8^3 base.
        let refine = vec![vec![IndexBox::new([2, 2, 2], [5, 5, 5])]];
        let h = PatchHierarchy::build(Domain::unit_cube(), [8, 8, 8], &refine).unwrap();
        // Six faces of a 4^3 coarse block.
        assert_eq!(h.reflux_count(1), 6 * 16);
        let mut flux = vec![0.0; h.faces().nfaces()];
        for e in &h.reflux[1].entries {
            for (n, &f) in e.fine.iter().enumerate() {
                flux[f as usize] = n as f64;
            }
        }
        match_fluxes(&h, &mut flux);
        for e in &h.reflux[1].entries {
            assert_eq!(flux[e.coarse as usize], 1.5);
        }
    }

    #[test]
    fn coarse_face_sits_between_outside_cell_and_fine_block() {
        let refine = vec![vec![IndexBox::new([2, 2, 2], [3, 3, 3])]];
        let h = PatchHierarchy::build(Domain::unit_cube(), [8, 8, 8], &refine).unwrap();
        let faces = h.faces();
        let mut expected: Vec<u32> = Vec::new();
        for a in 0..3 {
            for j in 2..=3 {
                for k in 2..=3 {
                    let mut lo = [0; 3];
                    let mut hi = [0; 3];
                    let (t0, t1) = ((a + 1) % 3, (a + 2) % 3);
                    lo[a] = 2;
                    hi[a] = 4;
                    lo[t0] = j;
                    hi[t0] = j;
                    lo[t1] = k;
                    hi[t1] = k;
                    expected.push(faces.index(&h, 0, 0, a, lo) as u32);
                    expected.push(faces.index(&h, 0, 0, a, hi) as u32);
                }
            }
        }
        expected.sort();
        let got: Vec<u32> = h.reflux[1].entries.iter().map(|e| e.coarse).collect();
        assert_eq!(got, expected);
    }
}
