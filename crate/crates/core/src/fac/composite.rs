//! Matrix-free composite-grid operator `I - beta div D grad` with frozen face
//! coefficients.

use crate::discretization::{for_each_cell_faces, for_each_face, robin_ghost_factor};
use crate::mesh::{fill_ghost, match_fluxes, restrict_all, PatchHierarchy};

/// Scratch space for composite operator applications.
#[derive(Clone, Debug, Default)]
pub struct CompositeWorkspace {
    x: Vec<f64>,
    padded: Vec<f64>,
    flux: Vec<f64>,
}

impl CompositeWorkspace {
    pub fn new(h: &PatchHierarchy) -> Self {
        Self {
            x: vec![0.0; h.ncells()],
            padded: vec![0.0; h.npadded()],
            flux: vec![0.0; h.faces().nfaces()],
        }
    }
}

/// `out = x - beta div(D grad x)` on valid cells, zero on covered cells.
///
/// Ghosts use the same coarse-fine interpolation and flux matching as the
/// nonlinear operator. Physical faces with a positive coefficient close with
/// the homogeneous Robin ghost; the rest are insulated.
pub fn apply_composite(
    h: &PatchHierarchy,
    d: &[f64],
    beta: f64,
    x: &[f64],
    out: &mut [f64],
    ws: &mut CompositeWorkspace,
) {
    ws.x.copy_from_slice(x);
    restrict_all(h, &mut ws.x);
    for l in 0..h.nlevels() {
        let xs = &ws.x;
        fill_ghost(h, l, xs, &mut ws.padded, |e, _| xs[e.interior as usize]);
    }
    let faces = h.faces();
    for (l, level) in h.levels().iter().enumerate() {
        let n = level.domain_box.extent();
        for (pi, p) in level.patches.iter().enumerate() {
            for a in 0..3 {
                let hn = level.spacing[a];
                let mut f = faces.offset(l, pi, a);
                let (padded, flux) = (&ws.padded, &mut ws.flux);
                for_each_face(p, a, |il, ir, ia| {
                    let coef = d[f];
                    flux[f] = if ia == 0 || ia == n[a] {
                        if coef > 0.0 {
                            let k = coef * (1.0 - robin_ghost_factor(coef, hn)) / hn;
                            if ia == 0 {
                                k * padded[ir]
                            } else {
                                -k * padded[il]
                            }
                        } else {
                            0.0
                        }
                    } else {
                        coef * (padded[ir] - padded[il]) / hn
                    };
                    f += 1;
                });
            }
        }
    }
    match_fluxes(h, &mut ws.flux);
    let valid = h.valid();
    for (l, level) in h.levels().iter().enumerate() {
        let inv_h = level.spacing.map(|s| 1.0 / s);
        for (pi, p) in level.patches.iter().enumerate() {
            for_each_cell_faces(faces, l, pi, p, |i, lo, st| {
                if !valid[i] {
                    out[i] = 0.0;
                    return;
                }
                let mut div = 0.0;
                for a in 0..3 {
                    div += (ws.flux[lo[a] + st[a]] - ws.flux[lo[a]]) * inv_h[a];
                }
                out[i] = ws.x[i] - beta * div;
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{Discretization, MaterialMap, MaterialRegion, PhysicsParams};
    use crate::mesh::{Domain, IndexBox};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    /// With the limiter off, `D_E` depends on `T` only, so the change of the
    /// `E` right-hand side under a perturbation of `E` alone is exactly the
    /// frozen diffusion operator plus the linear source term.
    #[test]
    fn matches_nonlinear_operator_increment() {
        let refine = vec![
            vec![IndexBox::new([2, 2, 2], [5, 5, 5])],
            vec![IndexBox::new([6, 6, 6], [9, 9, 9])],
        ];
        let h = Arc::new(PatchHierarchy::build(Domain::unit_cube(), [8, 8, 8], &refine).unwrap());
        let material = MaterialMap {
            regions: vec![MaterialRegion {
                lo: [0.0, 0.0, 0.0],
                hi: [0.4, 1.0, 1.0],
                z: 3.0,
            }],
            background: 1.0,
        };
        let params = PhysicsParams {
            flux_limiter: false,
            ..Default::default()
        };
        let mut disc = Discretization::new(Arc::clone(&h), material, params);
        let n = h.ncells();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut u: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.5..1.5)).collect();
        restrict_all(&h, &mut u[..n]);
        restrict_all(&h, &mut u[n..]);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) * 1e-3).collect();
        let coeffs = disc.face_coefficients(&u).unwrap();
        let sigma = disc.cell_sigma(&u);
        let mut f0 = vec![0.0; 2 * n];
        let mut f1 = vec![0.0; 2 * n];
        disc.spatial_rhs(&u, &mut f0).unwrap();
        let mut up = u.clone();
        for i in 0..n {
            up[i] += x[i];
        }
        disc.spatial_rhs(&up, &mut f1).unwrap();
        let beta = 0.3;
        let mut out = vec![0.0; n];
        let mut ws = CompositeWorkspace::new(&h);
        apply_composite(&h, &coeffs.de, beta, &x, &mut out, &mut ws);
        let mut xs = x.clone();
        restrict_all(&h, &mut xs);
        let valid = h.valid();
        for i in 0..n {
            if !valid[i] {
                assert_eq!(out[i], 0.0);
                continue;
            }
            let expected = xs[i] - beta * (f1[i] - f0[i] + sigma[i] * x[i]);
            assert!(
                (out[i] - expected).abs() < 1e-9,
                "cell {i}: {} vs {expected}",
                out[i]
            );
        }
    }
}
