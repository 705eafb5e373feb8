//! Composite-grid finite-volume right-hand side.

use std::sync::Arc;

use super::material::MaterialMap;
use super::physics::{
    boundary_diffusion_e, face_diffusion_t, face_dr, limit, robin_ghost, PhysicsParams,
};
use crate::error::{Error, Result};
use crate::mesh::{
    fill_ghost, match_fluxes, restrict_all, FaceLayout, GhostEntry, GhostKind, Patch,
    PatchHierarchy,
};

/// Visits every face of `p` along `axis` in face-layout order, passing the
/// padded indices of the cells on either side and the face's index along
/// `axis` in level coordinates.
#[inline]
pub(crate) fn for_each_face(p: &Patch, axis: usize, mut f: impl FnMut(usize, usize, i32)) {
    let fb = FaceLayout::face_box(&p.bx, axis);
    let s = p.padded_strides()[axis];
    for k in fb.lo[2]..=fb.hi[2] {
        for j in fb.lo[1]..=fb.hi[1] {
            let row = p.padded_offset + p.padded_local([fb.lo[0], j, k]);
            for (n, i) in (fb.lo[0]..=fb.hi[0]).enumerate() {
                let r = row + n;
                f(r - s, r, [i, j, k][axis]);
            }
        }
    }
}

/// Visits every interior cell of `p` in flat order, passing the flat index,
/// and for each axis the flat face index of the low face (the high face is
/// the returned index plus the face stride along that axis).
#[inline]
pub(crate) fn for_each_cell_faces(
    faces: &FaceLayout,
    level: usize,
    patch_index: usize,
    p: &Patch,
    mut f: impl FnMut(usize, [usize; 3], [usize; 3]),
) {
    let fbs = [0, 1, 2].map(|a| FaceLayout::face_box(&p.bx, a));
    let offs = [0, 1, 2].map(|a| faces.offset(level, patch_index, a));
    let strides = [0, 1, 2].map(|a| {
        let e = fbs[a].extent();
        [1usize, e[0] as usize, (e[0] * e[1]) as usize][a]
    });
    let mut flat = p.offset;
    for k in p.bx.lo[2]..=p.bx.hi[2] {
        for j in p.bx.lo[1]..=p.bx.hi[1] {
            let row = [0, 1, 2].map(|a| offs[a] + fbs[a].offset([p.bx.lo[0], j, k]));
            for n in 0..p.bx.extent()[0] as usize {
                f(flat, [row[0] + n, row[1] + n, row[2] + n], strides);
                flat += 1;
            }
        }
    }
}

/// Scratch buffers reused between residual evaluations.
#[derive(Clone, Debug, Default)]
struct Workspace {
    e: Vec<f64>,
    t: Vec<f64>,
    pe: Vec<f64>,
    pt: Vec<f64>,
    de: Vec<f64>,
    dt: Vec<f64>,
    ge: Vec<f64>,
    gt: Vec<f64>,
}

/// Frozen face coefficients of both diffusion operators.
#[derive(Clone, Debug)]
pub struct FaceCoefficients {
    /// Radiation coefficient per face (boundary value on Robin faces).
    pub de: Vec<f64>,
    /// Conduction coefficient per face.
    pub dt: Vec<f64>,
}

/// Spatial discretisation of the coupled system on one hierarchy.
///
/// State vectors hold `E` on all cells followed by `T` on all cells, in the
/// hierarchy's flat layout. Covered cells are carried along but are not part
/// of the composite solution.
#[derive(Clone, Debug)]
pub struct Discretization {
    h: Arc<PatchHierarchy>,
    material: MaterialMap,
    params: PhysicsParams,
    z3: Vec<f64>,
    z3_padded: Vec<f64>,
    ws: Workspace,
}

impl Discretization {
    pub fn new(h: Arc<PatchHierarchy>, material: MaterialMap, params: PhysicsParams) -> Self {
        let z3 = material.cell_z(&h).into_iter().map(|z| z * z * z).collect();
        let z3_padded = material
            .padded_z(&h)
            .into_iter()
            .map(|z| z * z * z)
            .collect();
        let ws = Workspace {
            e: vec![0.0; h.ncells()],
            t: vec![0.0; h.ncells()],
            pe: vec![0.0; h.npadded()],
            pt: vec![0.0; h.npadded()],
            de: vec![0.0; h.faces().nfaces()],
            dt: vec![0.0; h.faces().nfaces()],
            ge: vec![0.0; h.faces().nfaces()],
            gt: vec![0.0; h.faces().nfaces()],
        };
        Self {
            h,
            material,
            params,
            z3,
            z3_padded,
            ws,
        }
    }

    pub fn hierarchy(&self) -> &Arc<PatchHierarchy> {
        &self.h
    }

    pub fn material(&self) -> &MaterialMap {
        &self.material
    }

    pub fn params(&self) -> &PhysicsParams {
        &self.params
    }

    /// Number of cells; state vectors have twice this length.
    pub fn ncells(&self) -> usize {
        self.h.ncells()
    }

    /// `z^3` per cell.
    pub fn z3(&self) -> &[f64] {
        &self.z3
    }

    /// Rejects states with a non-positive `E` or `T` on any valid cell.
    pub fn check_positive(&self, u: &[f64]) -> Result<()> {
        let n = self.ncells();
        let valid = self.h.valid();
        for (field, part) in [("E", &u[..n]), ("T", &u[n..])] {
            if let Some(i) = (0..n).find(|&i| valid[i] && !(part[i] > 0.0)) {
                let (level, cell) = self.h.cell_indices()[i];
                return Err(Error::Positivity {
                    field,
                    value: part[i],
                    level,
                    cell,
                });
            }
        }
        Ok(())
    }

    /// Ghost value of `E` at a physical face ghost: the Robin ghost on the
    /// x faces (unless disabled), a zero-gradient copy elsewhere.
    pub fn fill_physical_boundary(
        &self,
        e: &GhostEntry,
        interior: usize,
        pe: &[f64],
        pt: &[f64],
        h_normal: f64,
    ) -> f64 {
        match e.kind {
            GhostKind::PhysicalFace { axis: 0, side } if self.params.robin => {
                let d = boundary_diffusion_e(pt[interior], self.z3_padded[interior]);
                robin_ghost(pe[interior], self.params.robin_value(side), d, h_normal)
            }
            _ => pe[interior],
        }
    }

    /// Synchronises covered cells and fills every ghost of `E` and `T`.
    fn prepare(&mut self, u: &[f64]) -> Result<()> {
        self.check_positive(u)?;
        let n = self.ncells();
        let h = Arc::clone(&self.h);
        let mut ws = std::mem::take(&mut self.ws);
        ws.e.copy_from_slice(&u[..n]);
        ws.t.copy_from_slice(&u[n..]);
        restrict_all(&h, &mut ws.e);
        restrict_all(&h, &mut ws.t);
        for l in 0..h.nlevels() {
            let t = &ws.t;
            fill_ghost(&h, l, t, &mut ws.pt, |e, _| t[e.interior as usize]);
        }
        for l in 0..h.nlevels() {
            let hx = h.level(l).spacing[0];
            let pt = &ws.pt;
            fill_ghost(&h, l, &ws.e, &mut ws.pe, |e, pe| {
                let ip = crate::mesh::interior_padded(&h, l, e);
                self.fill_physical_boundary(e, ip, pe, pt, hx)
            });
        }
        self.ws = ws;
        Ok(())
    }

    /// Face coefficients and gradient fluxes `D du/dn` from the filled fields.
    fn compute_fluxes(&mut self) {
        let h = &self.h;
        let faces = h.faces();
        let ws = &mut self.ws;
        let z3p = &self.z3_padded;
        let params = self.params;
        for (l, level) in h.levels().iter().enumerate() {
            let n = level.domain_box.extent();
            for (pi, p) in level.patches.iter().enumerate() {
                for a in 0..3 {
                    let hn = level.spacing[a];
                    let mut f = faces.offset(l, pi, a);
                    for_each_face(p, a, |il, ir, ia| {
                        let (el, er, tl, tr) = (ws.pe[il], ws.pe[ir], ws.pt[il], ws.pt[ir]);
                        let boundary = ia == 0 || ia == n[a];
                        let de = if boundary {
                            if a == 0 && params.robin {
                                let ii = if ia == 0 { ir } else { il };
                                boundary_diffusion_e(ws.pt[ii], z3p[ii])
                            } else {
                                0.0
                            }
                        } else {
                            let dr = face_dr(tl, tr, z3p[il], z3p[ir]);
                            if params.flux_limiter {
                                limit(dr, el, er, hn)
                            } else {
                                2.0 * dr
                            }
                        };
                        let dt = if boundary {
                            0.0
                        } else {
                            face_diffusion_t(tl, tr, params.k_conduction)
                        };
                        ws.de[f] = de;
                        ws.dt[f] = dt;
                        ws.ge[f] = de * (er - el) / hn;
                        ws.gt[f] = dt * (tr - tl) / hn;
                        f += 1;
                    });
                }
            }
        }
        match_fluxes(h, &mut ws.ge);
        match_fluxes(h, &mut ws.gt);
    }

    /// Evaluates `f(u) = (div D_E grad E + s, div D_T grad T - s)` with
    /// `s = sigma_a (T^4 - E)` on every valid cell; covered cells get zero.
    pub fn spatial_rhs(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.prepare(u)?;
        self.compute_fluxes();
        let n = self.ncells();
        let h = &self.h;
        let valid = h.valid();
        let ws = &self.ws;
        let z3 = &self.z3;
        let (out_e, out_t) = out.split_at_mut(n);
        for (l, level) in h.levels().iter().enumerate() {
            let inv_h = level.spacing.map(|s| 1.0 / s);
            for (pi, p) in level.patches.iter().enumerate() {
                for_each_cell_faces(h.faces(), l, pi, p, |i, lo, st| {
                    if !valid[i] {
                        out_e[i] = 0.0;
                        out_t[i] = 0.0;
                        return;
                    }
                    let mut div_e = 0.0;
                    let mut div_t = 0.0;
                    for a in 0..3 {
                        div_e += (ws.ge[lo[a] + st[a]] - ws.ge[lo[a]]) * inv_h[a];
                        div_t += (ws.gt[lo[a] + st[a]] - ws.gt[lo[a]]) * inv_h[a];
                    }
                    let (e, t) = (ws.e[i], ws.t[i]);
                    let s = z3[i] * (t - e / (t * t * t));
                    out_e[i] = div_e + s;
                    out_t[i] = div_t - s;
                });
            }
        }
        Ok(())
    }

    /// Face coefficients frozen at `u`, for the preconditioner.
    pub fn face_coefficients(&mut self, u: &[f64]) -> Result<FaceCoefficients> {
        self.prepare(u)?;
        self.compute_fluxes();
        Ok(FaceCoefficients {
            de: self.ws.de.clone(),
            dt: self.ws.dt.clone(),
        })
    }

    /// Per-cell `sigma_a` at the (synchronised) temperature of `u`.
    pub fn cell_sigma(&self, u: &[f64]) -> Vec<f64> {
        let n = self.ncells();
        let mut t = u[n..].to_vec();
        restrict_all(&self.h, &mut t);
        t.iter()
            .zip(&self.z3)
            .map(|(&t, &z3)| z3 / (t * t * t))
            .collect()
    }

    /// Padded `E` with all ghosts filled, as used by the last evaluation.
    pub fn padded_e(&mut self, u: &[f64]) -> Result<&[f64]> {
        self.prepare(u)?;
        Ok(&self.ws.pe)
    }

    /// Boundary fluxes are needed by energy-balance diagnostics: returns the
    /// net radiation energy flowing in through the x faces per unit time.
    pub fn boundary_inflow(&mut self, u: &[f64]) -> Result<f64> {
        self.prepare(u)?;
        self.compute_fluxes();
        let h = &self.h;
        let mut total = 0.0;
        for (l, level) in h.levels().iter().enumerate() {
            let n = level.domain_box.extent();
            let area = level.spacing[1] * level.spacing[2];
            for (pi, p) in level.patches.iter().enumerate() {
                let mut f = h.faces().offset(l, pi, 0);
                for_each_face(p, 0, |_, _, ia| {
                    if ia == 0 {
                        total -= self.ws.ge[f] * area;
                    } else if ia == n[0] {
                        total += self.ws.ge[f] * area;
                    }
                    f += 1;
                });
            }
        }
        Ok(total)
    }
}
