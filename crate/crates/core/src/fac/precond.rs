//! Physics-based preconditioner `P = P1 P2`: FAC cycles on the two diffusion
//! blocks of `P1`, then the cell-local 2x2 coupling blocks of `P2`.

use std::sync::Arc;

use super::cycle::{fac_vcycle, FacConfig, FacOperator, FacWorkspace};
use super::level::LevelPattern;
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::integrator::StepKind;
use crate::jfnk::Preconditioner;
use crate::mesh::restrict_all;

/// Solves `[[1 + sb, -sb t3], [-sb, 1 + sb t3]] y = rhs` with `sb = sigma beta`.
///
/// Returns `None` when the block is numerically singular.
pub fn invert_p2_cell(sigma_beta: f64, t_cubed: f64, rhs: (f64, f64)) -> Option<(f64, f64)> {
    let sb = sigma_beta;
    let (a, b, c, d) = (1.0 + sb, -sb * t_cubed, -sb, 1.0 + sb * t_cubed);
    let det = a * d - b * c;
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if !(det.abs() >= 1e-14 * scale * scale) {
        return None;
    }
    Some(((d * rhs.0 - b * rhs.1) / det, (a * rhs.1 - c * rhs.0) / det))
}

/// Coefficients frozen at one Newton iterate.
#[derive(Clone, Debug)]
pub struct FrozenCoefficients {
    pub e_block: FacOperator,
    pub t_block: FacOperator,
    /// `sigma_a beta` per cell.
    pub sigma_beta: Vec<f64>,
    /// `T^3` per cell.
    pub t_cubed: Vec<f64>,
    pub beta: f64,
}

/// Right preconditioner for the BDF residual `c0 u - ... - dt f(u)`, whose
/// Jacobian is `c0 (I - beta f'(u))`: applies `(1 / c0) P2^-1 P1^-1`.
#[derive(Clone, Debug)]
pub struct FacPreconditioner {
    disc: Discretization,
    cfg: FacConfig,
    patterns: Vec<Arc<LevelPattern>>,
    c0: f64,
    beta: f64,
    frozen: Option<FrozenCoefficients>,
    ws: FacWorkspace,
    z_e: Vec<f64>,
    z_t: Vec<f64>,
    applications: usize,
}

impl FacPreconditioner {
    pub fn new(disc: Discretization, cfg: FacConfig) -> Self {
        let h = Arc::clone(disc.hierarchy());
        let patterns = (0..h.nlevels())
            .map(|l| Arc::new(LevelPattern::build(&h, l)))
            .collect();
        let n = h.ncells();
        Self {
            ws: FacWorkspace::new(&h),
            disc,
            cfg,
            patterns,
            c0: 1.0,
            beta: 0.0,
            frozen: None,
            z_e: vec![0.0; n],
            z_t: vec![0.0; n],
            applications: 0,
        }
    }

    /// Sets the step formula and size of the system being solved.
    pub fn set_step(&mut self, kind: StepKind, dt: f64) {
        self.c0 = kind.coefficients().0;
        self.beta = kind.beta(dt);
        self.frozen = None;
    }

    pub fn frozen(&self) -> Option<&FrozenCoefficients> {
        self.frozen.as_ref()
    }

    pub fn applications(&self) -> usize {
        self.applications
    }

    /// Approximately solves `P1 z = w` with one FAC cycle per block.
    pub fn solve_p1(&mut self, w: &[f64], z: &mut [f64]) -> Result<()> {
        let frozen = self
            .frozen
            .as_ref()
            .ok_or_else(|| Error::Config("preconditioner used before setup".into()))?;
        let n = self.disc.ncells();
        if frozen.beta == 0.0 {
            // No diffusion: P1 is the identity.
            z.copy_from_slice(w);
            return Ok(());
        }
        self.z_e.fill(0.0);
        self.z_t.fill(0.0);
        fac_vcycle(
            &frozen.e_block,
            &w[..n],
            &mut self.z_e,
            &self.cfg,
            &mut self.ws,
        );
        fac_vcycle(
            &frozen.t_block,
            &w[n..],
            &mut self.z_t,
            &self.cfg,
            &mut self.ws,
        );
        z[..n].copy_from_slice(&self.z_e);
        z[n..].copy_from_slice(&self.z_t);
        Ok(())
    }
}

impl Preconditioner for FacPreconditioner {
    fn setup(&mut self, u: &[f64]) -> Result<()> {
        let coeffs = self.disc.face_coefficients(u)?;
        let h = Arc::clone(self.disc.hierarchy());
        let n = h.ncells();
        let sigma = self.disc.cell_sigma(u);
        let mut t = u[n..].to_vec();
        restrict_all(&h, &mut t);
        let beta = self.beta;
        let e_block = FacOperator::new(Arc::clone(&h), &self.patterns, coeffs.de, beta)?;
        let t_block = FacOperator::new(Arc::clone(&h), &self.patterns, coeffs.dt, beta)?;
        self.frozen = Some(FrozenCoefficients {
            e_block,
            t_block,
            sigma_beta: sigma.iter().map(|s| s * beta).collect(),
            t_cubed: t.iter().map(|t| t * t * t).collect(),
            beta,
        });
        Ok(())
    }

    fn apply(&mut self, w: &[f64], out: &mut [f64]) -> Result<()> {
        self.solve_p1(w, out)?;
        let frozen = self.frozen.as_ref().expect("set up by solve_p1");
        let h = self.disc.hierarchy();
        let n = h.ncells();
        let valid = h.valid();
        let inv_c0 = 1.0 / self.c0;
        for i in 0..n {
            if !valid[i] {
                out[i] = 0.0;
                out[n + i] = 0.0;
                continue;
            }
            let (ye, yt) = invert_p2_cell(
                frozen.sigma_beta[i],
                frozen.t_cubed[i],
                (out[i], out[n + i]),
            )
            .ok_or_else(|| {
                let (level, cell) = h.cell_indices()[i];
                let (sb, t3) = (frozen.sigma_beta[i], frozen.t_cubed[i]);
                Error::SingularBlock {
                    det: 1.0 + sb * (1.0 + t3),
                    level,
                    cell,
                }
            })?;
            out[i] = ye * inv_c0;
            out[n + i] = yt * inv_c0;
        }
        self.applications += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{MaterialMap, PhysicsParams};
    use crate::mesh::{Domain, IndexBox, PatchHierarchy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn p2_hand_solve() {
        assert_eq!(invert_p2_cell(0.0, 5.0, (1.5, -2.0)), Some((1.5, -2.0)));
        let (ye, yt) = invert_p2_cell(1.0, 1.0, (1.0, 0.0)).unwrap();
        assert!((ye - 2.0 / 3.0).abs() < 1e-15 && (yt - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn p2_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let sb = 10f64.powf(rng.random_range(-6.0..6.0));
            let t3 = 10f64.powf(rng.random_range(-6.0..3.0));
            let r = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (ye, yt) = invert_p2_cell(sb, t3, r).unwrap();
            let fe = (1.0 + sb) * ye - sb * t3 * yt;
            let ft = -sb * ye + (1.0 + sb * t3) * yt;
            let scale = 1.0 + sb * (1.0 + t3);
            assert!((fe - r.0).abs() <= 1e-13 * scale && (ft - r.1).abs() <= 1e-13 * scale);
        }
    }

    fn setup() -> (Arc<PatchHierarchy>, FacPreconditioner, Vec<f64>) {
        let refine = vec![vec![IndexBox::new([2, 2, 2], [5, 5, 5])]];
        let h = Arc::new(PatchHierarchy::build(Domain::unit_cube(), [8, 8, 8], &refine).unwrap());
        let disc = Discretization::new(
            Arc::clone(&h),
            MaterialMap::uniform(1.0),
            PhysicsParams::default(),
        );
        let mut pc = FacPreconditioner::new(disc, FacConfig::default());
        let n = h.ncells();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u: Vec<f64> = (0..2 * n).map(|_| rng.random_range(0.5..1.5)).collect();
        pc.set_step(StepKind::Bdf2 { alpha: 1.0 }, 1e-3);
        pc.setup(&u).unwrap();
        (h, pc, u)
    }

    #[test]
    fn zero_step_is_identity() {
        let (h, mut pc, u) = setup();
        pc.set_step(StepKind::Bdf1, 0.0);
        pc.setup(&u).unwrap();
        let n = h.ncells();
        let valid = h.valid();
        let w: Vec<f64> = (0..2 * n)
            .map(|i| if valid[i % n] { (i as f64).sin() } else { 0.0 })
            .collect();
        let mut y = vec![0.0; 2 * n];
        pc.apply(&w, &mut y).unwrap();
        for i in 0..2 * n {
            assert!((y[i] - w[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn application_is_linear() {
        let (h, mut pc, _) = setup();
        let n = h.ncells();
        let valid = h.valid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rand_vec = || -> Vec<f64> {
            (0..2 * n)
                .map(|i| {
                    if valid[i % n] {
                        rng.random_range(-1.0..1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let (w1, w2) = (rand_vec(), rand_vec());
        let (a, b) = (0.7, -1.3);
        let w: Vec<f64> = (0..2 * n).map(|i| a * w1[i] + b * w2[i]).collect();
        let mut y1 = vec![0.0; 2 * n];
        let mut y2 = vec![0.0; 2 * n];
        let mut y = vec![0.0; 2 * n];
        pc.apply(&w1, &mut y1).unwrap();
        pc.apply(&w2, &mut y2).unwrap();
        pc.apply(&w, &mut y).unwrap();
        for i in 0..2 * n {
            assert!((y[i] - (a * y1[i] + b * y2[i])).abs() < 1e-12);
        }
    }
}
