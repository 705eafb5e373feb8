use serde::{Deserialize, Serialize};

use super::gmres::gmres_solve;
use super::vec::{dot, norm1, norm2};
use super::{NonlinearSystem, Preconditioner};
use crate::error::{Error, Result};

/// Inner linear tolerance policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    /// Eisenstat–Walker "choice 2" with the usual safeguards.
    EisenstatWalker {
        gamma: f64,
        exponent: f64,
        eta_max: f64,
        /// Tolerance of the first linear solve.
        eta_0: f64,
    },
    Fixed(f64),
}

impl Default for Forcing {
    fn default() -> Self {
        Forcing::EisenstatWalker {
            gamma: 0.9,
            exponent: 2.0,
            eta_max: 0.9,
            eta_0: 0.3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_newton_iters: usize,
    pub max_krylov_dim: usize,
    pub forcing: Forcing,
    /// Floor `u_min` of the differencing-parameter formula.
    pub u_min: f64,
    /// Branch guard `b` of the differencing-parameter formula.
    pub b: f64,
    /// Fraction of each component an update may remove (`u + v >= theta u`).
    pub theta: f64,
    /// Damping factors below this count as a failed solve.
    pub lambda_min: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-10,
            max_newton_iters: 20,
            max_krylov_dim: 50,
            forcing: Forcing::default(),
            u_min: 1e-6,
            b: 1.0,
            theta: 0.01,
            lambda_min: 1e-4,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_newton_iters >= 1
            && self.max_krylov_dim >= 1
            && self.u_min > 0.0
            && (0.0..1.0).contains(&self.theta);
        if !ok {
            return Err(Error::Config(format!(
                "invalid nonlinear solver settings {self:?}"
            )));
        }
        Ok(())
    }
}

/// Diagnostics of one nonlinear solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverReport {
    pub newton_iters: usize,
    pub gmres_iters: usize,
    /// `|F|` before the first and after every Newton iteration.
    pub residual_norms: Vec<f64>,
    pub forcing_terms: Vec<f64>,
    /// Newton updates shortened to keep the state positive.
    pub damping_events: usize,
    pub min_lambda: f64,
    /// GMRES solves that hit the Krylov dimension limit.
    pub krylov_exhausted: usize,
    /// Differencing parameters taken from the floor branch.
    pub floor_epsilons: usize,
}

/// Which branch of the differencing-parameter formula was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpsilonBranch {
    /// `sqrt(eps_mach) <u,v> / |v|^2`.
    Projection,
    /// `sqrt(eps_mach) u_min sign(<u,v>) |v|_1 / |v|^2`.
    Floor,
}

/// Differencing parameter for `F'(u) v`.
///
/// The projection branch is taken when `|<u,v>|` clears the floor, so Krylov
/// directions pointing against `u` keep a differencing step of the natural
/// size instead of collapsing onto the `u_min` floor.
pub fn choose_epsilon(
    mask: &[bool],
    u: &[f64],
    v: &[f64],
    u_min: f64,
    b: f64,
) -> (f64, EpsilonBranch) {
    let sqrt_eps = f64::EPSILON.sqrt();
    let uv = dot(mask, u, v);
    let v1 = norm1(mask, v);
    let v2 = dot(mask, v, v);
    if uv.abs() > b * u_min * v1 {
        (sqrt_eps * uv / v2, EpsilonBranch::Projection)
    } else {
        let sign = if uv < 0.0 { -1.0 } else { 1.0 };
        (sqrt_eps * u_min * sign * v1 / v2, EpsilonBranch::Floor)
    }
}

/// Largest `lambda` in (0, 1] with `u + lambda v >= theta u` on every masked
/// component.
pub fn enforce_positivity(mask: &[bool], u: &[f64], v: &[f64], theta: f64) -> f64 {
    let mut lambda: f64 = 1.0;
    for i in 0..u.len() {
        if mask[i] && v[i] < 0.0 {
            lambda = lambda.min((1.0 - theta) * u[i] / -v[i]);
        }
    }
    lambda
}

/// Finite-difference directional derivative `(F(u + eps v) - F(u)) / eps`,
/// with `f_u = F(u)` supplied by the caller.
pub fn jacobian_vector<S: NonlinearSystem + ?Sized>(
    sys: &mut S,
    u: &[f64],
    v: &[f64],
    f_u: &[f64],
    cfg: &NewtonConfig,
    out: &mut [f64],
) -> Result<EpsilonBranch> {
    let mask = sys.mask();
    if norm2(mask, v) == 0.0 {
        out.fill(0.0);
        return Ok(EpsilonBranch::Projection);
    }
    let (eps, branch) = choose_epsilon(mask, u, v, cfg.u_min, cfg.b);
    let up: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + eps * b).collect();
    sys.residual(&up, out).map_err(|e| Error::Perturbation {
        eps,
        branch,
        source: Box::new(e),
    })?;
    for (o, f) in out.iter_mut().zip(f_u) {
        *o = (*o - f) / eps;
    }
    Ok(branch)
}

fn forcing_term(
    forcing: Forcing,
    k: usize,
    fnrm: f64,
    fnrm_prev: f64,
    eta_prev: f64,
    target: f64,
) -> f64 {
    match forcing {
        Forcing::Fixed(eta) => eta,
        Forcing::EisenstatWalker {
            gamma,
            exponent,
            eta_max,
            eta_0,
        } => {
            if k == 0 {
                return eta_0.min(eta_max);
            }
            let mut eta = gamma * (fnrm / fnrm_prev).powf(exponent);
            let guard = gamma * eta_prev.powf(exponent);
            if guard > 0.1 {
                eta = eta.max(guard);
            }
            eta = eta.min(eta_max);
            eta.max(0.5 * target / fnrm).min(eta_max)
        }
    }
}

/// Inexact Newton iteration for `F(u) = 0` from `u0`.
///
/// Converges when `|F(u)| <= max(rel_tol |F(u0)|, abs_tol)`. Each update is
/// scaled to keep every masked component positive.
pub fn newton_solve<S: NonlinearSystem + ?Sized, P: Preconditioner + ?Sized>(
    sys: &mut S,
    u0: Vec<f64>,
    pc: &mut P,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, SolverReport)> {
    let n = sys.len();
    let mut u = u0;
    let mut f = vec![0.0; n];
    sys.residual(&u, &mut f)?;
    let mask = sys.mask().to_vec();
    let mut fnrm = norm2(&mask, &f);
    let target = (cfg.rel_tol * fnrm).max(cfg.abs_tol);
    let mut report = SolverReport {
        residual_norms: vec![fnrm],
        min_lambda: 1.0,
        ..Default::default()
    };
    let mut fnrm_prev = fnrm;
    let mut eta_prev = 0.0;
    for k in 0..cfg.max_newton_iters {
        if fnrm <= target {
            return Ok((u, report));
        }
        let eta = forcing_term(cfg.forcing, k, fnrm, fnrm_prev, eta_prev, target);
        report.forcing_terms.push(eta);
        pc.setup(&u)?;
        let b: Vec<f64> = f.iter().map(|v| -v).collect();
        let mut floors = 0;
        let (v, grep) = {
            let u_ref = &u;
            let f_ref = &f;
            gmres_solve(
                &mask,
                |z, out| {
                    if jacobian_vector(&mut *sys, u_ref, z, f_ref, cfg, out)?
                        == EpsilonBranch::Floor
                    {
                        floors += 1;
                    }
                    Ok(())
                },
                |w, out| pc.apply(w, out),
                &b,
                eta,
                cfg.max_krylov_dim,
            )?
        };
        report.floor_epsilons += floors;
        report.gmres_iters += grep.iterations;
        if !grep.converged {
            report.krylov_exhausted += 1;
        }
        let lambda = enforce_positivity(&mask, &u, &v, cfg.theta);
        if lambda < cfg.lambda_min {
            return Err(Error::DampingCollapse(lambda));
        }
        if lambda < 1.0 {
            report.damping_events += 1;
            report.min_lambda = report.min_lambda.min(lambda);
        }
        for i in 0..n {
            if mask[i] {
                u[i] += lambda * v[i];
            }
        }
        sys.residual(&u, &mut f)?;
        fnrm_prev = fnrm;
        fnrm = norm2(&mask, &f);
        eta_prev = eta;
        report.newton_iters = k + 1;
        report.residual_norms.push(fnrm);
        if !fnrm.is_finite() {
            break;
        }
    }
    if fnrm <= target {
        return Ok((u, report));
    }
    Err(Error::NewtonDiverged {
        iters: report.newton_iters,
        residual: fnrm,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jfnk::IdentityPreconditioner;

    /// F(u) = A u - b with a fixed nonsymmetric A.
    struct Affine {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        mask: Vec<bool>,
    }

    impl NonlinearSystem for Affine {
        fn len(&self) -> usize {
            self.b.len()
        }
        fn mask(&self) -> &[bool] {
            &self.mask
        }
        fn residual(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
            for i in 0..self.b.len() {
                out[i] = self.a[i].iter().zip(u).map(|(a, x)| a * x).sum::<f64>() - self.b[i];
            }
            Ok(())
        }
    }

    /// F(u) = u^2 - c elementwise; evaluation fails outside (0, cap].
    struct Squares {
        c: Vec<f64>,
        mask: Vec<bool>,
        cap: f64,
    }

    impl NonlinearSystem for Squares {
        fn len(&self) -> usize {
            self.c.len()
        }
        fn mask(&self) -> &[bool] {
            &self.mask
        }
        fn residual(&mut self, u: &[f64], out: &mut [f64]) -> Result<()> {
            for i in 0..u.len() {
                if u[i] <= 0.0 || u[i] > self.cap {
                    return Err(Error::Domain(u[i]));
                }
                out[i] = u[i] * u[i] - self.c[i];
            }
            Ok(())
        }
    }

    #[test]
    fn epsilon_branches() {
        let mask = vec![true; 4];
        let u = vec![2.0; 4];
        let v = vec![0.5; 4];
        let (eps, br) = choose_epsilon(&mask, &u, &v, 1e-6, 1.0);
        assert_eq!(br, EpsilonBranch::Projection);
        assert!((eps - f64::EPSILON.sqrt() * 4.0 / 1.0).abs() < 1e-20);
        assert!(eps > 1e-9 && eps < 1e-6);
        let v = vec![1.0, -1.0, 1.0, -1.0];
        let (eps, br) = choose_epsilon(&mask, &u, &v, 1e-6, 1.0);
        assert_eq!(br, EpsilonBranch::Floor);
        assert!((eps - f64::EPSILON.sqrt() * 1e-6 * 4.0 / 4.0).abs() < 1e-25);
        assert!(eps > 0.0);
        let v = vec![-0.5; 4];
        let (eps, br) = choose_epsilon(&mask, &u, &v, 1e-6, 1.0);
        assert_eq!(br, EpsilonBranch::Projection);
        assert!(eps < 0.0 && eps.abs() > 1e-9);
    }

    #[test]
    fn positivity_damping() {
        let mask = vec![true; 3];
        assert_eq!(
            enforce_positivity(&mask, &[1.0; 3], &[0.5, -0.2, 0.0], 0.01),
            1.0
        );
        let l = enforce_positivity(&mask, &[1.0; 3], &[-2.0; 3], 0.01);
        assert!((l - 0.495).abs() < 1e-15);
    }

    #[test]
    fn affine_solved_to_differencing_accuracy_in_one_step() {
        let a = vec![
            vec![4.0, 1.0, 0.0, 0.5],
            vec![-1.0, 3.0, 1.0, 0.0],
            vec![0.0, 0.5, 5.0, 1.0],
            vec![0.2, 0.0, -1.0, 2.0],
        ];
        let mut sys = Affine {
            a,
            b: vec![0.0; 4],
            mask: vec![true; 4],
        };
        // A positive solution so no damping intervenes.
        let x_star = [0.5, 1.0, 1.5, 2.0];
        let mut b = vec![0.0; 4];
        sys.residual(&x_star, &mut b).unwrap();
        sys.b = b;
        let cfg = NewtonConfig {
            forcing: Forcing::Fixed(1e-14),
            ..Default::default()
        };
        let (u, rep) =
            newton_solve(&mut sys, vec![1.0; 4], &mut IdentityPreconditioner, &cfg).unwrap();
        // Only differencing round-off separates one step from the solution.
        let r = &rep.residual_norms;
        assert!(r[1] < 1e-6 * r[0], "{r:?}");
        assert!(rep.newton_iters <= 3);
        let mut r = vec![0.0; 4];
        sys.residual(&u, &mut r).unwrap();
        assert!(norm2(&sys.mask, &r) <= 1e-10);
    }

    #[test]
    fn jacobian_vector_of_squares() {
        let mut sys = Squares {
            c: vec![0.0],
            mask: vec![true],
            cap: f64::INFINITY,
        };
        let mut out = [0.0];
        let f = [1.0];
        jacobian_vector(
            &mut sys,
            &[1.0],
            &[1.0],
            &f,
            &NewtonConfig::default(),
            &mut out,
        )
        .unwrap();
        assert!((out[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn superlinear_convergence_with_ew() {
        let c: Vec<f64> = (1..=6).map(|i| 1.0 + i as f64).collect();
        let mut sys = Squares {
            c: c.clone(),
            mask: vec![true; 6],
            cap: f64::INFINITY,
        };
        let cfg = NewtonConfig {
            abs_tol: 1e-13,
            ..Default::default()
        };
        let (u, rep) =
            newton_solve(&mut sys, vec![3.0; 6], &mut IdentityPreconditioner, &cfg).unwrap();
        for i in 0..6 {
            assert!((u[i] - c[i].sqrt()).abs() < 1e-11);
        }
        // Contraction factors shrink as the forcing terms tighten.
        let r = &rep.residual_norms;
        let ratios: Vec<f64> = r.windows(2).map(|w| w[1] / w[0]).collect();
        let best_late = ratios[3..].iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(best_late < 0.1 * ratios[0], "ratios {ratios:?}");
    }

    #[test]
    fn perturbation_failure_is_reported() {
        let mut sys = Squares {
            c: vec![1.0],
            mask: vec![true],
            cap: 1.0,
        };
        let mut out = [0.0];
        // The perturbed state leaves the admissible region.
        let err = jacobian_vector(
            &mut sys,
            &[1.0],
            &[1.0],
            &[0.0],
            &NewtonConfig::default(),
            &mut out,
        )
        .unwrap_err();
        match err {
            Error::Perturbation {
                eps,
                branch,
                source,
            } => {
                assert_eq!(branch, EpsilonBranch::Projection);
                assert!(eps > 0.0);
                assert!(matches!(*source, Error::Domain(_)));
            }
            e => panic!("unexpected {e}"),
        }
    }
}
