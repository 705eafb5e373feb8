//! Ghost-cell classification and filling.
//!
//! Every ghost cell of every patch is assigned exactly one source when the
//! hierarchy is built:
//!
//! * a same-level interior cell of another patch (plain copy),
//! * a coarse-fine fragment, interpolated from coarse donors and the adjacent
//!   fine interior cell, or
//! * the physical boundary (delegated to the caller's boundary rule).
//!
//! Coarse-fine face ghosts use the two-stage scheme: bilinear interpolation of
//! four coarse values in the plane of the coarse cell behind the ghost, to the
//! tangential position of the fine interior neighbour, followed by linear
//! interpolation along the face normal between that value and the fine
//! interior neighbour. Edge and corner ghosts reuse the same construction with
//! the tangential stage reduced to linear and constant interpolation, and the
//! normal stage taken along the diagonal towards the interior. All three
//! fragment kinds reproduce linear fields exactly.

use super::hierarchy::{Patch, PatchHierarchy, GHOST_WIDTH, REFINE_RATIO};
use super::transfer::linear_weights_1d;
use crate::error::{Error, Result};

/// Kind of coarse-fine boundary fragment a ghost cell belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fragment {
    Face,
    Edge,
    Corner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GhostKind {
    /// Copy of an interior cell of another patch on the same level.
    SameLevel,
    /// Interpolated from the next coarser level.
    CoarseFine(Fragment),
    /// Outside the domain, adjacent through a face to an interior cell.
    PhysicalFace { axis: usize, side: i8 },
    /// Outside the domain along an edge or corner; copies the nearest interior cell.
    PhysicalOther,
}

#[derive(Clone, Debug)]
pub struct GhostEntry {
    /// Patch index within the level.
    pub patch: u32,
    pub cell: [i32; 3],
    /// Global padded index of the ghost.
    pub padded: u32,
    pub kind: GhostKind,
    /// Outward direction from the patch (-1, 0 or +1 per axis).
    pub normal: [i8; 3],
    /// Flat index of the interior cell the ghost is anchored to.
    pub interior: u32,
    terms: (u32, u32),
}

/// Precomputed ghost sources for one level.
#[derive(Clone, Debug, Default)]
pub struct GhostSchedule {
    entries: Vec<GhostEntry>,
    src: Vec<u32>,
    weight: Vec<f64>,
}

impl GhostSchedule {
    pub(crate) fn build(h: &PatchHierarchy, l: usize) -> Result<Self> {
        let level = h.level(l);
        let mut sched = GhostSchedule::default();
        for (pi, p) in level.patches.iter().enumerate() {
            for g in p.padded_box().cells() {
                if p.bx.contains(g) {
                    continue;
                }
                let mut normal = [0i8; 3];
                for a in 0..3 {
                    if g[a] < p.bx.lo[a] {
                        normal[a] = -1;
                    } else if g[a] > p.bx.hi[a] {
                        normal[a] = 1;
                    }
                }
                let clamped = [
                    g[0].clamp(p.bx.lo[0], p.bx.hi[0]),
                    g[1].clamp(p.bx.lo[1], p.bx.hi[1]),
                    g[2].clamp(p.bx.lo[2], p.bx.hi[2]),
                ];
                let interior = p.flat(clamped) as u32;
                let padded = (p.padded_offset + p.padded_local(g)) as u32;
                let start = sched.src.len() as u32;
                let kind = if let Some(src) = level.flat(g) {
                    sched.push_term(src, 1.0);
                    GhostKind::SameLevel
                } else if !level.domain_box.contains(g) {
                    let nnormal = normal.iter().filter(|&&n| n != 0).count();
                    let axis = (0..3).find(|&a| normal[a] != 0).unwrap();
                    let outside = g[axis] < 0 || g[axis] >= level.domain_box.extent()[axis];
                    if nnormal == 1 && outside {
                        GhostKind::PhysicalFace {
                            axis,
                            side: normal[axis],
                        }
                    } else {
                        sched.push_term(interior as usize, 1.0);
                        GhostKind::PhysicalOther
                    }
                } else {
                    if l == 0 {
                        return Err(Error::MissingDonor { level: l, cell: g });
                    }
                    let frag = sched.push_coarse_fine(h, l, p, g, normal)?;
                    GhostKind::CoarseFine(frag)
                };
                let end = sched.src.len() as u32;
                sched.entries.push(GhostEntry {
                    patch: pi as u32,
                    cell: g,
                    padded,
                    kind,
                    normal,
                    interior,
                    terms: (start, end - start),
                });
            }
        }
        Ok(sched)
    }

    fn push_term(&mut self, src: usize, w: f64) {
        self.src.push(src as u32);
        self.weight.push(w);
    }

    fn push_coarse_fine(
        &mut self,
        h: &PatchHierarchy,
        l: usize,
        p: &Patch,
        g: [i32; 3],
        normal: [i8; 3],
    ) -> Result<Fragment> {
        let coarse = h.level(l - 1);
        let parent = g.map(|v| v.div_euclid(REFINE_RATIO));
        let n_coarse = coarse.domain_box.extent();
        // Tangential donors: linear weights towards the fine cell's position.
        let mut per_axis: [Vec<(i32, f64)>; 3] = Default::default();
        for a in 0..3 {
            per_axis[a] = if normal[a] == 0 {
                linear_weights_1d(g[a], n_coarse[a])
            } else {
                vec![(parent[a], 1.0)]
            };
        }
        for &(i, wi) in &per_axis[0] {
            for &(j, wj) in &per_axis[1] {
                for &(k, wk) in &per_axis[2] {
                    let c = [i, j, k];
                    let src = coarse
                        .flat(c)
                        .ok_or(Error::MissingDonor { level: l, cell: g })?;
                    self.push_term(src, 2.0 / 3.0 * wi * wj * wk);
                }
            }
        }
        // Normal stage: the interior cell one step inwards along every normal axis.
        let f = [
            g[0] - normal[0] as i32,
            g[1] - normal[1] as i32,
            g[2] - normal[2] as i32,
        ];
        debug_assert!(p.bx.contains(f));
        self.push_term(p.flat(f), 1.0 / 3.0);
        Ok(match normal.iter().filter(|&&n| n != 0).count() {
            1 => Fragment::Face,
            2 => Fragment::Edge,
            _ => Fragment::Corner,
        })
    }

    pub fn entries(&self) -> &[GhostEntry] {
        &self.entries
    }

    /// Source flat indices and weights of a linearly filled ghost.
    pub fn terms(&self, e: &GhostEntry) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, n) = e.terms;
        let r = s as usize..(s + n) as usize;
        self.src[r.clone()]
            .iter()
            .zip(&self.weight[r])
            .map(|(&s, &w)| (s as usize, w))
    }

    #[inline]
    fn linear_value(&self, e: &GhostEntry, u: &[f64]) -> f64 {
        let (s, n) = e.terms;
        let mut v = 0.0;
        for t in s as usize..(s + n) as usize {
            v += self.weight[t] * u[self.src[t] as usize];
        }
        v
    }
}

/// Copies interior cells of every patch on `level` into the padded layout.
pub fn scatter_interior(h: &PatchHierarchy, level: usize, u: &[f64], padded: &mut [f64]) {
    for p in &h.level(level).patches {
        let n = p.bx.extent();
        let nx = n[0] as usize;
        for k in p.bx.lo[2]..=p.bx.hi[2] {
            for j in p.bx.lo[1]..=p.bx.hi[1] {
                let src = p.flat([p.bx.lo[0], j, k]);
                let dst = p.padded_offset + p.padded_local([p.bx.lo[0], j, k]);
                padded[dst..dst + nx].copy_from_slice(&u[src..src + nx]);
            }
        }
    }
}

/// Fills the ghost frame of every patch on `level`.
///
/// `u` must hold valid data on this level and on every covered cell of the
/// next coarser level (see [`crate::mesh::restrict_all`]). `physical` returns
/// the ghost value for a physical face ghost given its entry and the padded
/// array filled so far (interiors are already in place).
pub fn fill_ghost(
    h: &PatchHierarchy,
    level: usize,
    u: &[f64],
    padded: &mut [f64],
    mut physical: impl FnMut(&GhostEntry, &[f64]) -> f64,
) {
    scatter_interior(h, level, u, padded);
    let sched = &h.ghosts[level];
    for e in &sched.entries {
        let v = match e.kind {
            GhostKind::PhysicalFace { .. } => physical(e, padded),
            _ => sched.linear_value(e, u),
        };
        padded[e.padded as usize] = v;
    }
}

/// Fills ghosts on all levels with a zero-gradient physical boundary.
pub fn fill_all_neumann(h: &PatchHierarchy, u: &[f64], padded: &mut [f64]) {
    for l in 0..h.nlevels() {
        fill_ghost(h, l, u, padded, |e, _| u[e.interior as usize]);
    }
}

/// Padded index of the interior neighbour of a physical face ghost.
pub fn interior_padded(h: &PatchHierarchy, level: usize, e: &GhostEntry) -> usize {
    let p = &h.level(level).patches[e.patch as usize];
    let c = [
        e.cell[0] - e.normal[0] as i32,
        e.cell[1] - e.normal[1] as i32,
        e.cell[2] - e.normal[2] as i32,
    ];
    p.padded_offset + p.padded_local(c)
}

impl PatchHierarchy {
    pub fn ghost_schedule(&self, level: usize) -> &GhostSchedule {
        &self.ghosts[level]
    }
}

const _: () = assert!(GHOST_WIDTH == 1);
