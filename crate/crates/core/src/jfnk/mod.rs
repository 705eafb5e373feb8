//! Jacobian-free Newton–Krylov: inexact Newton with Eisenstat–Walker forcing,
//! finite-difference Jacobian-vector products and right-preconditioned GMRES.

mod gmres;
mod newton;
pub(crate) mod vec;

pub use gmres::{gmres_solve, GmresReport};
pub use newton::{
    choose_epsilon, enforce_positivity, jacobian_vector, newton_solve, EpsilonBranch, Forcing,
    NewtonConfig, SolverReport,
};

use crate::error::Result;

/// A nonlinear residual `F(u) = 0` on a masked vector space.
///
/// Entries with `mask() == false` (covered cells) are not unknowns: they are
/// excluded from every norm and inner product and stay zero in every Krylov
/// vector.
pub trait NonlinearSystem {
    fn len(&self) -> usize;

    fn mask(&self) -> &[bool];

    /// Evaluates `F(u)`; fails if `u` is outside the residual's domain
    /// (e.g. non-positive energy or temperature).
    fn residual(&mut self, u: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Right preconditioner `P^{-1}` for the Newton systems.
pub trait Preconditioner {
    /// Rebuilds frozen data at the Newton iterate `u`.
    fn setup(&mut self, u: &[f64]) -> Result<()>;

    /// `out = P^{-1} w`.
    fn apply(&mut self, w: &[f64], out: &mut [f64]) -> Result<()>;
}

/// `P = I`.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn setup(&mut self, _u: &[f64]) -> Result<()> {
        Ok(())
    }

    fn apply(&mut self, w: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(w);
        Ok(())
    }
}

impl<P: Preconditioner + ?Sized> Preconditioner for &mut P {
    fn setup(&mut self, u: &[f64]) -> Result<()> {
        (**self).setup(u)
    }

    fn apply(&mut self, w: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).apply(w, out)
    }
}
