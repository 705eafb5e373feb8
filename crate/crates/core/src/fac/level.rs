//! Per-level frozen-coefficient operators `I - beta div D grad` and the
//! red-black Gauss–Seidel smoother.

use std::sync::Arc;

use crate::discretization::robin_ghost_factor;
use crate::error::{Error, Result};
use crate::mesh::PatchHierarchy;

const NO_NEIGHBOUR: u32 = u32::MAX;

/// What lies across one face of a level cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Link {
    /// Another cell of the same level (global flat index).
    Cell(u32),
    /// A coarse-fine ghost: the coarse contribution is dropped on a level.
    CoarseFine,
    /// The physical boundary.
    Boundary,
}

/// Coefficient-independent stencil topology of one level.
///
/// Slots are ordered `(axis, side)` as `[-x, +x, -y, +y, -z, +z]`.
#[derive(Clone, Debug)]
pub struct LevelPattern {
    level: usize,
    offset: usize,
    spacing: [f64; 3],
    faces: Vec<[u32; 6]>,
    links: Vec<[Link; 6]>,
    /// Level-relative cell indices by parity of `i + j + k`.
    colors: [Vec<u32>; 2],
}

impl LevelPattern {
    pub fn build(h: &PatchHierarchy, l: usize) -> Self {
        let level = h.level(l);
        let faces_layout = h.faces();
        let n = level.ncells;
        let mut faces = vec![[0u32; 6]; n];
        let mut links = vec![[Link::Boundary; 6]; n];
        let mut colors: [Vec<u32>; 2] = Default::default();
        for (pi, p) in level.patches.iter().enumerate() {
            for c in p.bx.cells() {
                let i = p.flat(c) - level.offset;
                for a in 0..3 {
                    for (s, side) in [-1i32, 1].into_iter().enumerate() {
                        let mut fc = c;
                        if side > 0 {
                            fc[a] += 1;
                        }
                        faces[i][2 * a + s] = faces_layout.index(h, l, pi, a, fc) as u32;
                        let mut nc = c;
                        nc[a] += side;
                        links[i][2 * a + s] = if let Some(j) = level.flat(nc) {
                            Link::Cell(j as u32)
                        } else if !level.domain_box.contains(nc) {
                            Link::Boundary
                        } else {
                            Link::CoarseFine
                        };
                    }
                }
                colors[((c[0] + c[1] + c[2]).rem_euclid(2)) as usize].push(i as u32);
            }
        }
        Self {
            level: l,
            offset: level.offset,
            spacing: level.spacing,
            faces,
            links,
            colors,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn ncells(&self) -> usize {
        self.faces.len()
    }

    /// Assembles `I - beta div D grad` on every cell of the level with the
    /// face coefficients `d` (indexed by the hierarchy's face layout).
    ///
    /// Coarse-fine ghosts are taken as homogeneous (`1/3` of the interior
    /// value) and physical faces with a positive coefficient as the
    /// homogeneous Robin closure; faces with zero coefficient are insulated.
    pub fn assemble(self: &Arc<Self>, d: &[f64], beta: f64) -> Result<LevelOperator> {
        let n = self.ncells();
        let mut diag = vec![1.0; n];
        let mut off = vec![[0.0; 6]; n];
        let mut nbr = vec![[NO_NEIGHBOUR; 6]; n];
        for i in 0..n {
            for slot in 0..6 {
                let h = self.spacing[slot / 2];
                let coef = d[self.faces[i][slot] as usize];
                let w = beta * coef / (h * h);
                match self.links[i][slot] {
                    Link::Cell(j) => {
                        diag[i] += w;
                        off[i][slot] = -w;
                        nbr[i][slot] = j;
                    }
                    Link::CoarseFine => diag[i] += 2.0 / 3.0 * w,
                    Link::Boundary => {
                        if coef > 0.0 {
                            diag[i] += w * (1.0 - robin_ghost_factor(coef, h));
                        }
                    }
                }
            }
            if !(diag[i].is_finite() && diag[i] != 0.0) {
                return Err(Error::ZeroDiagonal(self.offset + i));
            }
        }
        Ok(LevelOperator {
            pattern: Arc::clone(self),
            diag,
            off,
            nbr,
        })
    }
}

/// Assembled 7-point operator of one level.
#[derive(Clone, Debug)]
pub struct LevelOperator {
    pattern: Arc<LevelPattern>,
    diag: Vec<f64>,
    off: Vec<[f64; 6]>,
    nbr: Vec<[u32; 6]>,
}

impl LevelOperator {
    pub fn level(&self) -> usize {
        self.pattern.level
    }

    /// Global flat range of the level's cells.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.pattern.offset..self.pattern.offset + self.pattern.ncells()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    #[inline]
    fn row(&self, i: usize, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for k in 0..6 {
            let j = self.nbr[i][k];
            if j != NO_NEIGHBOUR {
                s += self.off[i][k] * x[j as usize];
            }
        }
        s
    }

    /// `out = A x` on this level's cells (global flat layout).
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let o = self.pattern.offset;
        for i in 0..self.diag.len() {
            out[o + i] = self.diag[i] * x[o + i] + self.row(i, x);
        }
    }
}

/// `sweeps` red-black Gauss–Seidel sweeps on `A e = f` over the level's cells.
///
/// Cells of one colour only couple to cells of the other, so each half-sweep
/// is independent of visiting order.
pub fn smooth_redblack(op: &LevelOperator, e: &mut [f64], f: &[f64], sweeps: usize) {
    let o = op.pattern.offset;
    for _ in 0..sweeps {
        for color in &op.pattern.colors {
            for &i in color {
                let i = i as usize;
                e[o + i] = (f[o + i] - op.row(i, e)) / op.diag[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Domain, IndexBox};

    fn uniform(n: i32) -> PatchHierarchy {
        PatchHierarchy::uniform(Domain::unit_cube(), [n, n, n]).unwrap()
    }

    #[test]
    fn m_matrix_rows() {
        let h = uniform(4);
        let p = Arc::new(LevelPattern::build(&h, 0));
        let d = vec![1.0; h.faces().nfaces()];
        let op = p.assemble(&d, 0.1).unwrap();
        for i in 0..op.diag.len() {
            let offsum: f64 = op.off[i].iter().map(|v| v.abs()).sum();
            assert!(op.diag[i] >= offsum + 1.0 - 1e-12);
        }
    }

    #[test]
    fn two_cell_problem_solved_exactly() {
        // One cell thick in y and z: a 2x1x1 grid is a 2x2 system.
        let h = PatchHierarchy::uniform(Domain::unit_cube(), [2, 1, 1]).unwrap();
        let p = Arc::new(LevelPattern::build(&h, 0));
        let d = vec![1.0; h.faces().nfaces()];
        let mut d = d;
        // Insulate the physical faces.
        for (f, v) in d.iter_mut().enumerate() {
            let interior_x = f == 1;
            if !interior_x {
                *v = 0.0;
            }
        }
        let op = p.assemble(&d, 0.25).unwrap();
        // A = [[1 + w, -w], [-w, 1 + w]] with w = 0.25 / 0.25 = 1.
        let f = [1.0, 2.0];
        let mut e = vec![0.0; 2];
        smooth_redblack(&op, &mut e, &f, 30);
        let det: f64 = 2.0 * 2.0 - 1.0;
        let exact = [(2.0 * f[0] + f[1]) / det, (f[0] + 2.0 * f[1]) / det];
        for i in 0..2 {
            assert!((e[i] - exact[i]).abs() < 1e-12, "{e:?} {exact:?}");
        }
    }

    #[test]
    fn checkerboard_mode_decays() {
        let n = 32;
        let h = uniform(n);
        let p = Arc::new(LevelPattern::build(&h, 0));
        let d = vec![1.0; h.faces().nfaces()];
        let op = p.assemble(&d, 1.0).unwrap();
        let cb: Vec<f64> = h
            .cell_indices()
            .iter()
            .map(|(_, c)| {
                if (c[0] + c[1] + c[2]) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let amplitude =
            |v: &[f64]| v.iter().zip(&cb).map(|(a, b)| a * b).sum::<f64>() / cb.len() as f64;
        let mut e = cb.clone();
        let f = vec![0.0; e.len()];
        let before = amplitude(&e);
        smooth_redblack(&op, &mut e, &f, 1);
        assert!(amplitude(&e).abs() <= 0.5 * before.abs());
    }

    #[test]
    fn coarse_fine_faces_add_two_thirds() {
        let refine = vec![vec![IndexBox::new([1, 1, 1], [2, 2, 2])]];
        let h = PatchHierarchy::build(Domain::unit_cube(), [4, 4, 4], &refine).unwrap();
        let p = Arc::new(LevelPattern::build(&h, 1));
        let d = vec![1.0; h.faces().nfaces()];
        let op = p.assemble(&d, 1.0).unwrap();
        let hf: f64 = 1.0 / 8.0;
        let w = 1.0 / (hf * hf);
        // Fine corner cell: three same-level neighbours, three CF faces.
        let i = h.level(1).flat([2, 2, 2]).unwrap() - h.level(1).offset;
        assert!((op.diag[i] - (1.0 + 3.0 * w + 2.0 * w)).abs() < 1e-9);
    }
}
