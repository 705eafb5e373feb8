//! Variable-step BDF2 time discretisation with a BDF1 start, the generalised
//! leapfrog predictor, the local error estimate and its scaled max norm.

use serde::{Deserialize, Serialize};

/// Which backward differentiation formula a step uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepKind {
    /// Backward Euler: `u - u_n - dt f(u)`.
    Bdf1,
    /// Variable-step BDF2 with step ratio `alpha = dt_n / dt_{n-1}`.
    Bdf2 { alpha: f64 },
}

impl StepKind {
    /// Coefficients `(c0, c1, c2)` of `c0 u - c1 u_n + c2 u_{n-1} = dt f(u)`.
    pub fn coefficients(self) -> (f64, f64, f64) {
        match self {
            StepKind::Bdf1 => (1.0, 1.0, 0.0),
            StepKind::Bdf2 { alpha } => {
                let a = alpha;
                ((1.0 + 2.0 * a) / (1.0 + a), 1.0 + a, a * a / (1.0 + a))
            }
        }
    }

    /// Effective implicit step `beta = dt / c0` of the scaled Jacobian
    /// `I - beta f'(u)`.
    pub fn beta(self, dt: f64) -> f64 {
        dt / self.coefficients().0
    }

    pub fn order(self) -> usize {
        match self {
            StepKind::Bdf1 => 1,
            StepKind::Bdf2 { .. } => 2,
        }
    }
}

/// Floor scalings of the error norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormScaling {
    pub eta_e: f64,
    pub eta_t: f64,
}

impl Default for NormScaling {
    fn default() -> Self {
        Self {
            eta_e: 1e-2,
            eta_t: 1e-2,
        }
    }
}

/// Residual of the step from `u_n` (and `u_nm1` for BDF2) given `f(u)`:
/// `c0 u - c1 u_n + c2 u_{n-1} - dt f(u)`.
pub fn bdf_residual(
    kind: StepKind,
    u: &[f64],
    u_n: &[f64],
    u_nm1: Option<&[f64]>,
    dt: f64,
    f_u: &[f64],
    out: &mut [f64],
) {
    let (c0, c1, c2) = kind.coefficients();
    match (kind, u_nm1) {
        (StepKind::Bdf2 { .. }, Some(u_nm1)) => {
            for i in 0..u.len() {
                out[i] = c0 * u[i] - c1 * u_n[i] + c2 * u_nm1[i] - dt * f_u[i];
            }
        }
        (StepKind::Bdf2 { .. }, None) => panic!("BDF2 needs two previous states"),
        (StepKind::Bdf1, _) => {
            for i in 0..u.len() {
                out[i] = u[i] - u_n[i] - dt * f_u[i];
            }
        }
    }
}

/// BDF2 residual (convenience wrapper with the step ratio).
pub fn bdf2_residual(
    u: &[f64],
    u_n: &[f64],
    u_nm1: &[f64],
    alpha: f64,
    dt: f64,
    f_u: &[f64],
    out: &mut [f64],
) {
    bdf_residual(StepKind::Bdf2 { alpha }, u, u_n, Some(u_nm1), dt, f_u, out);
}

/// Backward Euler residual.
pub fn bdf1_residual(u: &[f64], u_n: &[f64], dt: f64, f_u: &[f64], out: &mut [f64]) {
    bdf_residual(StepKind::Bdf1, u, u_n, None, dt, f_u, out);
}

/// Generalised leapfrog predictor
/// `u_n + (1 + alpha) dt u'_n - alpha^2 (u_n - u_{n-1})`, with `dt` the step
/// about to be taken and `alpha` its ratio to the previous step.
pub fn predict(u_n: &[f64], u_nm1: &[f64], udot_n: &[f64], dt: f64, alpha: f64) -> Vec<f64> {
    let a2 = alpha * alpha;
    (0..u_n.len())
        .map(|i| u_n[i] + (1.0 + alpha) * dt * udot_n[i] - a2 * (u_n[i] - u_nm1[i]))
        .collect()
}

/// Local error estimate `(alpha + 1) / (3 alpha + 2) (u - u_pred)`.
pub fn estimate_local_error(u: &[f64], u_pred: &[f64], alpha: f64) -> Vec<f64> {
    let c = (alpha + 1.0) / (3.0 * alpha + 2.0);
    u.iter().zip(u_pred).map(|(a, b)| c * (a - b)).collect()
}

/// Scaled max norm over valid cells of both fields:
/// `max(|e_E| / (|E| + eta_E), |e_T| / (|T| + eta_T))`.
pub fn error_norm(e: &[f64], u: &[f64], valid: &[bool], scaling: NormScaling) -> f64 {
    let n = valid.len();
    let mut m: f64 = 0.0;
    for i in (0..n).filter(|&i| valid[i]) {
        m = m.max(e[i].abs() / (u[i].abs() + scaling.eta_e));
        m = m.max(e[n + i].abs() / (u[n + i].abs() + scaling.eta_t));
    }
    m
}

/// Time derivative after a step: the left-hand side of the step formula
/// divided by `dt`.
pub fn update_derivative(
    kind: StepKind,
    u_new: &[f64],
    u_n: &[f64],
    u_nm1: Option<&[f64]>,
    dt: f64,
) -> Vec<f64> {
    let (c0, c1, c2) = kind.coefficients();
    (0..u_new.len())
        .map(|i| {
            let back = match u_nm1 {
                Some(p) if c2 != 0.0 => c2 * p[i],
                _ => 0.0,
            };
            (c0 * u_new[i] - c1 * u_n[i] + back) / dt
        })
        .collect()
}

/// Solution history needed by the predictor, the BDF2 formula and the
/// re-solve of the latest step after a regrid.
#[derive(Clone, Debug)]
pub struct TimeHistory {
    /// Current time `t_n`.
    pub t: f64,
    pub u_n: Vec<f64>,
    pub u_nm1: Option<Vec<f64>>,
    /// State before `u_nm1`, kept so the latest step can be re-solved.
    pub u_nm2: Option<Vec<f64>>,
    pub udot_n: Vec<f64>,
    /// Size of the latest completed step (`t_n - t_{n-1}`).
    pub dt_n: f64,
    /// Size of the step before it.
    pub dt_nm1: f64,
    /// Formula used by the latest completed step.
    pub last_kind: Option<StepKind>,
    /// Accepted steps since the start.
    pub steps: usize,
}

impl TimeHistory {
    pub fn new(t0: f64, u0: Vec<f64>, udot0: Vec<f64>) -> Self {
        Self {
            t: t0,
            u_n: u0,
            u_nm1: None,
            u_nm2: None,
            udot_n: udot0,
            dt_n: 0.0,
            dt_nm1: 0.0,
            last_kind: None,
            steps: 0,
        }
    }

    /// Formula for the next step of size `dt`: BDF1 until two states exist.
    pub fn next_kind(&self, dt: f64) -> StepKind {
        if self.u_nm1.is_some() && self.dt_n > 0.0 {
            StepKind::Bdf2 {
                alpha: dt / self.dt_n,
            }
        } else {
            StepKind::Bdf1
        }
    }

    /// Predicted state for a step of size `dt`, or `u_n` for a BDF1 step.
    pub fn predict(&self, dt: f64) -> Vec<f64> {
        match (self.next_kind(dt), &self.u_nm1) {
            (StepKind::Bdf2 { alpha }, Some(u_nm1)) => {
                predict(&self.u_n, u_nm1, &self.udot_n, dt, alpha)
            }
            _ => self.u_n.clone(),
        }
    }

    /// Records an accepted step and updates the time derivative.
    pub fn accept(&mut self, u_new: Vec<f64>, dt: f64, kind: StepKind) {
        self.udot_n = update_derivative(kind, &u_new, &self.u_n, self.u_nm1.as_deref(), dt);
        let old = std::mem::replace(&mut self.u_n, u_new);
        self.u_nm2 = self.u_nm1.replace(old);
        self.dt_nm1 = self.dt_n;
        self.dt_n = dt;
        self.t += dt;
        self.last_kind = Some(kind);
        self.steps += 1;
    }

    /// Replaces the latest state by a re-solved one, recomputing the derivative.
    pub fn replace_latest(&mut self, u_new: Vec<f64>) {
        if let (Some(kind), Some(u_prev)) = (self.last_kind, &self.u_nm1) {
            self.udot_n = update_derivative(kind, &u_new, u_prev, self.u_nm2.as_deref(), self.dt_n);
        }
        self.u_n = u_new;
    }

    /// Forgets the multistep history so the next step is BDF1.
    pub fn cold_restart(&mut self) {
        self.u_nm1 = None;
        self.u_nm2 = None;
        self.last_kind = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_step_coefficients() {
        let (c0, c1, c2) = StepKind::Bdf2 { alpha: 1.0 }.coefficients();
        assert_eq!((c0, c1, c2), (1.5, 2.0, 0.5));
    }

    /// Scalar BDF1 + BDF2 on u' = -u with an independent closed-form solve.
    #[test]
    fn scalar_decay_matches_hand_rolled_oracle() {
        let dt = 0.1;
        // Oracle: u1 = u0 / (1 + dt); 1.5 u2 - 2 u1 + 0.5 u0 = -dt u2.
        let u0 = 1.0;
        let u1 = u0 / (1.0 + dt);
        let u2 = (2.0 * u1 - 0.5 * u0) / (1.5 + dt);
        let u3 = (2.0 * u2 - 0.5 * u1) / (1.5 + dt);
        // Same steps through the residual functions (linear, so one secant solve).
        let solve = |kind: StepKind, un: f64, unm1: Option<f64>| {
            let r = |u: f64| {
                let mut out = [0.0];
                let back = unm1.map(|v| [v]);
                bdf_residual(
                    kind,
                    &[u],
                    &[un],
                    back.as_ref().map(|b| &b[..]),
                    dt,
                    &[-u],
                    &mut out,
                );
                out[0]
            };
            let (r0, r1) = (r(0.0), r(1.0));
            -r0 / (r1 - r0)
        };
        let v1 = solve(StepKind::Bdf1, u0, None);
        let v2 = solve(StepKind::Bdf2 { alpha: 1.0 }, v1, Some(u0));
        let v3 = solve(StepKind::Bdf2 { alpha: 1.0 }, v2, Some(v1));
        assert!((v1 - u1).abs() < 1e-14);
        assert!((v2 - u2).abs() < 1e-14);
        assert!((v3 - u3).abs() < 1e-14);
        assert!((v1 - 1.0 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn bdf2_exact_on_quadratics_with_variable_steps() {
        // u(t) = 1 + 2t - 3t^2, f(t) = u'(t) = 2 - 6t (explicit in t).
        let u = |t: f64| 1.0 + 2.0 * t - 3.0 * t * t;
        let du = |t: f64| 2.0 - 6.0 * t;
        let ts = [0.0, 0.1, 0.13, 0.2, 0.21, 0.4];
        for w in ts.windows(3) {
            let (dtp, dt) = (w[1] - w[0], w[2] - w[1]);
            let (c0, c1, c2) = StepKind::Bdf2 { alpha: dt / dtp }.coefficients();
            let un1 = (c1 * u(w[1]) - c2 * u(w[0]) + dt * du(w[2])) / c0;
            assert!((un1 - u(w[2])).abs() < 1e-14);
        }
    }

    #[test]
    fn bdf1_on_explicit_source() {
        // u' = t from u(0) = 0 with dt = 0.5: u1 = dt * t1 = 0.25.
        let mut out = [0.0];
        bdf1_residual(&[0.25], &[0.0], 0.5, &[0.5], &mut out);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn predictor_is_exact_on_quadratics() {
        let u = |t: f64| 0.5 - t + 4.0 * t * t;
        let du = |t: f64| -1.0 + 8.0 * t;
        for alpha in [0.5, 1.0, 1.7] {
            let (tm, tn) = (0.3, 0.42);
            let dt = alpha * (tn - tm);
            let p = predict(&[u(tn)], &[u(tm)], &[du(tn)], dt, alpha)[0];
            assert!((p - u(tn + dt)).abs() < 1e-13, "alpha {alpha}");
        }
        // Classical leapfrog at alpha = 1.
        let p = predict(&[2.0], &[1.0], &[3.0], 0.1, 1.0)[0];
        assert!((p - (1.0 + 2.0 * 0.1 * 3.0)).abs() < 1e-15);
    }

    #[test]
    fn error_estimate_coefficient_and_cubic_check() {
        let e = estimate_local_error(&[1.0], &[0.0], 1.0);
        assert!((e[0] - 0.4).abs() < 1e-16);
        // u = t^3, exact history and derivative, fixed step: compare with the
        // analytic leading term of the BDF2 local error.
        let u = |t: f64| t * t * t;
        let du = |t: f64| 3.0 * t * t;
        let (tn, dt) = (1.0, 1e-3);
        let (c0, c1, c2) = StepKind::Bdf2 { alpha: 1.0 }.coefficients();
        // Solve c0 u - c1 u_n + c2 u_nm1 = dt u'(t_{n+1}) (f explicit in t).
        let un1 = (c1 * u(tn) - c2 * u(tn - dt) + dt * du(tn + dt)) / c0;
        let p = predict(&[u(tn)], &[u(tn - dt)], &[du(tn)], dt, 1.0)[0];
        let est = estimate_local_error(&[un1], &[p], 1.0)[0];
        let actual = un1 - u(tn + dt);
        // Leading term (dt_n + dt_nm1)^2 / (dt_n (2 dt_n + dt_nm1)) dt^3/6 u''' at alpha = 1.
        let analytic = 4.0 / 3.0 * dt.powi(3) / 6.0 * 6.0;
        assert!(
            (actual - analytic).abs() < 0.1 * analytic.abs(),
            "{actual} vs {analytic}"
        );
        assert!(
            (est - analytic).abs() < 0.1 * analytic.abs(),
            "{est} vs {analytic}"
        );
    }

    #[test]
    fn scaled_max_norm() {
        let valid = [true];
        let e = [1e-4, 0.0];
        let u = [1.0, 1.0];
        let n = error_norm(&e, &u, &valid, NormScaling::default());
        assert!((n - 1e-4 / 1.01).abs() < 1e-18);
        assert_eq!(
            error_norm(&[0.0, 0.0], &u, &valid, NormScaling::default()),
            0.0
        );
        // Covered cells do not count.
        let n = error_norm(
            &[5.0, 1e-4, 0.0, 0.0],
            &[1.0, 1.0, 1.0, 1.0],
            &[false, true],
            NormScaling::default(),
        );
        assert!((n - 1e-4 / 1.01).abs() < 1e-18);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let d = update_derivative(
            StepKind::Bdf2 { alpha: 1.0 },
            &[3.0],
            &[3.0],
            Some(&[3.0]),
            0.1,
        );
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn derivative_of_quadratic_is_second_order() {
        let u = |t: f64| t * t;
        let mut errs = Vec::new();
        for dt in [0.1, 0.05, 0.025] {
            let alpha = 1.3;
            let t1 = 1.0;
            let t0 = t1 - dt / alpha;
            let d = update_derivative(
                StepKind::Bdf2 { alpha },
                &[u(t1 + dt)],
                &[u(t1)],
                Some(&[u(t0)]),
                dt,
            )[0];
            errs.push((d - 2.0 * (t1 + dt)).abs());
        }
        // BDF2 differentiates quadratics exactly.
        assert!(errs.iter().all(|&e| e < 1e-12), "{errs:?}");
    }

    #[test]
    fn a_stable_on_stiff_decay() {
        let (lambda, dt) = (-1e6, 0.1);
        let mut hist = TimeHistory::new(0.0, vec![1.0], vec![lambda]);
        let mut prev = 1.0f64;
        for _ in 0..20 {
            let kind = hist.next_kind(dt);
            let (c0, c1, c2) = kind.coefficients();
            let back = hist.u_nm1.as_ref().map_or(0.0, |v| v[0]);
            let u = (c1 * hist.u_n[0] - c2 * back) / (c0 - dt * lambda);
            assert!(u.is_finite() && u.abs() <= prev.abs());
            prev = u;
            hist.accept(vec![u], dt, kind);
        }
        assert!(prev.abs() < 1e-20);
    }

    #[test]
    fn history_shifts_and_restarts() {
        let mut h = TimeHistory::new(0.0, vec![1.0], vec![0.0]);
        assert_eq!(h.next_kind(0.1), StepKind::Bdf1);
        h.accept(vec![2.0], 0.1, StepKind::Bdf1);
        assert!((h.udot_n[0] - 10.0).abs() < 1e-12);
        assert_eq!(h.next_kind(0.2), StepKind::Bdf2 { alpha: 2.0 });
        h.accept(vec![3.0], 0.2, StepKind::Bdf2 { alpha: 2.0 });
        assert_eq!(h.u_nm2.as_deref(), Some(&[1.0][..]));
        assert!((h.t - 0.3).abs() < 1e-15);
        h.cold_restart();
        assert_eq!(h.next_kind(0.1), StepKind::Bdf1);
    }
}
