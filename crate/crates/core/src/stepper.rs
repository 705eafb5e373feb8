//! One implicit step: the BDF residual of the discretised system as a
//! nonlinear system, solved by preconditioned JFNK.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::error::Result;
use crate::fac::{FacConfig, FacPreconditioner};
use crate::integrator::{bdf_residual, StepKind};
use crate::jfnk::{
    newton_solve, IdentityPreconditioner, NewtonConfig, NonlinearSystem, SolverReport,
};
use crate::mesh::{restrict_all, PatchHierarchy};

/// Mask over a two-field state: valid cells of `E`, then of `T`.
pub fn state_mask(h: &PatchHierarchy) -> Vec<bool> {
    let v = h.valid();
    v.iter().chain(v.iter()).copied().collect()
}

/// Synchronises covered cells of both fields with the finer data above them.
pub fn restrict_state(h: &PatchHierarchy, u: &mut [f64]) {
    let n = h.ncells();
    let (e, t) = u.split_at_mut(n);
    restrict_all(h, e);
    restrict_all(h, t);
}

/// `F(u) = c0 u - c1 u_n + c2 u_{n-1} - dt f(u)` on valid cells.
pub struct BdfSystem<'a> {
    disc: &'a mut Discretization,
    kind: StepKind,
    dt: f64,
    u_n: &'a [f64],
    u_nm1: Option<&'a [f64]>,
    mask: &'a [bool],
    f: Vec<f64>,
}

impl<'a> BdfSystem<'a> {
    pub fn new(
        disc: &'a mut Discretization,
        kind: StepKind,
        dt: f64,
        u_n: &'a [f64],
        u_nm1: Option<&'a [f64]>,
        mask: &'a [bool],
    ) -> Self {
        let n = 2 * disc.ncells();
        Self {
            disc,
            kind,
            dt,
            u_n,
            u_nm1,
            mask,
            f: vec![0.0; n],
        }
    }
}

impl NonlinearSystem for BdfSystem<'_> {
    fn len(&self) -> usize {
        self.f.len()
    }

    fn mask(&self) -> &[bool] {
        self.mask
    }

    fn residual(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.disc.spatial_rhs(u, &mut self.f)?;
        bdf_residual(self.kind, u, self.u_n, self.u_nm1, self.dt, &self.f, out);
        for (o, &m) in out.iter_mut().zip(self.mask) {
            if !m {
                *o = 0.0;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    /// `P1 P2` with FAC cycles on the diffusion blocks.
    #[default]
    Fac,
    /// No preconditioning.
    None,
}

/// Owns the discretisation and preconditioner of one hierarchy and solves
/// implicit steps on it.
#[derive(Clone, Debug)]
pub struct StepSolver {
    disc: Discretization,
    pc: FacPreconditioner,
    kind: PreconditionerKind,
    newton: NewtonConfig,
    mask: Vec<bool>,
}

impl StepSolver {
    pub fn new(
        disc: Discretization,
        fac: FacConfig,
        kind: PreconditionerKind,
        newton: NewtonConfig,
    ) -> Self {
        let mask = state_mask(disc.hierarchy());
        let pc = FacPreconditioner::new(disc.clone(), fac);
        Self {
            disc,
            pc,
            kind,
            newton,
            mask,
        }
    }

    pub fn hierarchy(&self) -> &Arc<PatchHierarchy> {
        self.disc.hierarchy()
    }

    pub fn discretization(&mut self) -> &mut Discretization {
        &mut self.disc
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn newton_config(&self) -> &NewtonConfig {
        &self.newton
    }

    /// Solves one step from `u_n` (and `u_nm1` for BDF2) starting at `guess`.
    /// The result has its covered cells synchronised.
    pub fn solve(
        &mut self,
        kind: StepKind,
        dt: f64,
        u_n: &[f64],
        u_nm1: Option<&[f64]>,
        mut guess: Vec<f64>,
    ) -> Result<(Vec<f64>, SolverReport)> {
        // An extrapolating predictor can undershoot ahead of a steep front;
        // start those entries from the previous state instead.
        for (g, &u) in guess.iter_mut().zip(u_n) {
            if !(*g > 0.0) {
                *g = u;
            }
        }
        let mut sys = BdfSystem::new(&mut self.disc, kind, dt, u_n, u_nm1, &self.mask);
        let (mut u, report) = match self.kind {
            PreconditionerKind::Fac => {
                self.pc.set_step(kind, dt);
                newton_solve(&mut sys, guess, &mut self.pc, &self.newton)?
            }
            PreconditionerKind::None => {
                newton_solve(&mut sys, guess, &mut IdentityPreconditioner, &self.newton)?
            }
        };
        restrict_state(self.disc.hierarchy(), &mut u);
        Ok((u, report))
    }

    /// `f(u)` of the semi-discrete system.
    pub fn rhs(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        let mut f = vec![0.0; u.len()];
        self.disc.spatial_rhs(u, &mut f)?;
        Ok(f)
    }
}
