//! Step-size selection: the elementary EPS controller and the PC.4.7
//! proportional-integral controller, with rejection and regrid handling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::NormScaling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Eps,
    Pi47,
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ControllerKind::Eps => "eps",
            ControllerKind::Pi47 => "pi47",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Target tolerance. Zero means "derive from the finest resolution".
    pub eps_t: f64,
    pub kind: ControllerKind,
    /// Error order exponent `k` (3 for BDF2).
    pub k_order: f64,
    /// Integral gain `k_I` (already divided by `k`).
    pub k_i: f64,
    /// Proportional gain `k_P` (already divided by `k`).
    pub k_p: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Accept when the error norm is at most this multiple of `eps_t`.
    pub reject_factor: f64,
    pub initial_dt: f64,
    /// Floor applied to error norms before exponentiation.
    pub err_floor: f64,
    /// Step-size factor after a nonlinear solver failure.
    pub failure_factor: f64,
    pub norm: NormScaling,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            eps_t: 0.0,
            kind: ControllerKind::Pi47,
            k_order: 3.0,
            k_i: 0.4 / 3.0,
            k_p: 0.7 / 3.0,
            dt_min: 1e-12,
            dt_max: 0.1,
            ratio_min: 0.2,
            ratio_max: 2.5,
            reject_factor: 2.0,
            initial_dt: 1e-6,
            err_floor: 1e-14,
            failure_factor: 0.5,
            norm: NormScaling::default(),
        }
    }
}

/// Tolerance `5e-4` at a 32-cell-equivalent finest resolution, halved per
/// doubling of resolution.
pub fn scaled_tolerance(finest_cells_x: i32) -> f64 {
    5e-4 * 32.0 / finest_cells_x as f64
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.eps_t >= 0.0) {
            return bad("eps_t must be non-negative");
        }
        if !(0.0 < self.ratio_min && self.ratio_min < 1.0 && self.ratio_max > 1.0) {
            return bad("ratio clamps must satisfy 0 < ratio_min < 1 < ratio_max");
        }
        if !(0.0 < self.dt_min && self.dt_min <= self.initial_dt && self.initial_dt <= self.dt_max)
        {
            return bad("step sizes must satisfy 0 < dt_min <= initial_dt <= dt_max");
        }
        if !(self.reject_factor >= 1.0 && self.k_order > 0.0) {
            return bad("reject_factor must be >= 1 and k_order positive");
        }
        if !(self.norm.eta_e > 0.0 && self.norm.eta_t > 0.0) {
            return bad("norm scalings must be positive");
        }
        if !(0.0 < self.failure_factor && self.failure_factor < 1.0) {
            return bad("failure_factor must lie in (0, 1)");
        }
        Ok(())
    }

    fn clamp(&self, dt_new: f64, dt: f64) -> f64 {
        dt_new
            .clamp(self.ratio_min * dt, self.ratio_max * dt)
            .clamp(self.dt_min, self.dt_max)
    }
}

/// Elementary controller `dt (eps_t / |e|)^{1/k}`, clamped.
pub fn eps_next_dt(err_norm: f64, dt: f64, cfg: &ControllerConfig) -> f64 {
    let e = err_norm.max(cfg.err_floor);
    cfg.clamp(dt * (cfg.eps_t / e).powf(1.0 / cfg.k_order), dt)
}

/// PC.4.7 update of the step ratio, clamped to `[ratio_min, ratio_max]`.
pub fn pi47_next_ratio(err_norm: f64, err_prev: f64, alpha_n: f64, cfg: &ControllerConfig) -> f64 {
    let e = err_norm.max(cfg.err_floor);
    let ep = err_prev.max(cfg.err_floor);
    let a = (cfg.eps_t / e).powf(cfg.k_i) * (ep / e).powf(cfg.k_p) * alpha_n;
    a.clamp(cfg.ratio_min, cfg.ratio_max)
}

/// Outcome of a completed nonlinear solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decision {
    Accept { next_dt: f64 },
    Reject { retry_dt: f64 },
}

/// Per-step controller record, for the step history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecisionInfo {
    pub decision: Decision,
    /// Whether the error estimate influenced the decision.
    pub estimate_used: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ControllerState {
    pub err_prev: Option<f64>,
    pub err_curr: Option<f64>,
    /// Set after a regrid: the next estimate is discarded and dt held.
    pub hold_next: bool,
    pub steps_since_regrid: usize,
    /// Number of estimates discarded because of regrids.
    pub discarded: usize,
}

#[derive(Clone, Debug)]
pub struct Controller {
    pub cfg: ControllerConfig,
    pub state: ControllerState,
}

impl Controller {
    pub fn new(cfg: ControllerConfig) -> Self {
        Self {
            cfg,
            state: ControllerState::default(),
        }
    }

    /// Records that the hierarchy changed: the next step keeps its size and
    /// its error estimate is not used.
    pub fn notify_regrid(&mut self) {
        self.state.hold_next = true;
        self.state.steps_since_regrid = 0;
    }

    /// Forgets the error history, e.g. after a cold restart.
    pub fn reset_history(&mut self) {
        self.state.err_prev = None;
        self.state.err_curr = None;
    }

    /// Decides on a solved step of size `dt` with ratio `alpha_n` to the
    /// previous step. `err_norm` is `None` when no estimate exists (BDF1).
    pub fn decide(
        &mut self,
        err_norm: Option<f64>,
        dt: f64,
        alpha_n: f64,
        t: f64,
    ) -> Result<DecisionInfo> {
        let cfg = self.cfg;
        if self.state.hold_next {
            self.state.hold_next = false;
            self.state.discarded += 1;
            self.state.steps_since_regrid += 1;
            self.reset_history();
            return Ok(DecisionInfo {
                decision: Decision::Accept {
                    next_dt: dt.clamp(cfg.dt_min, cfg.dt_max),
                },
                estimate_used: false,
            });
        }
        let Some(err) = err_norm else {
            self.state.steps_since_regrid += 1;
            return Ok(DecisionInfo {
                decision: Decision::Accept {
                    next_dt: dt.clamp(cfg.dt_min, cfg.dt_max),
                },
                estimate_used: false,
            });
        };
        let e = err.max(cfg.err_floor);
        if e > cfg.reject_factor * cfg.eps_t {
            let retry_dt = eps_next_dt(e, dt, &cfg);
            if retry_dt <= cfg.dt_min && dt <= cfg.dt_min {
                return Err(Error::StepCollapse {
                    dt: retry_dt,
                    dt_min: cfg.dt_min,
                    t,
                });
            }
            return Ok(DecisionInfo {
                decision: Decision::Reject { retry_dt },
                estimate_used: true,
            });
        }
        let next_dt = match cfg.kind {
            ControllerKind::Eps => eps_next_dt(e, dt, &cfg),
            ControllerKind::Pi47 => {
                let prev = self.state.err_prev.unwrap_or(e);
                let ratio = pi47_next_ratio(e, prev, alpha_n, &cfg);
                (ratio * dt).clamp(cfg.dt_min, cfg.dt_max)
            }
        };
        self.state.err_prev = Some(e);
        self.state.err_curr = Some(e);
        self.state.steps_since_regrid += 1;
        Ok(DecisionInfo {
            decision: Decision::Accept { next_dt },
            estimate_used: true,
        })
    }

    /// Step size to retry with after the nonlinear solver failed.
    pub fn on_solver_failure(&self, dt: f64, t: f64) -> Result<f64> {
        let retry = dt * self.cfg.failure_factor;
        if retry < self.cfg.dt_min {
            return Err(Error::StepCollapse {
                dt: retry,
                dt_min: self.cfg.dt_min,
                t,
            });
        }
        Ok(retry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps: f64) -> ControllerConfig {
        ControllerConfig {
            eps_t: eps,
            ..Default::default()
        }
    }

    #[test]
    fn eps_examples() {
        let c = cfg(1e-3);
        assert!((eps_next_dt(1e-3, 0.01, &c) - 0.01).abs() < 1e-15);
        assert!((eps_next_dt(1e-3 / 8.0, 0.01, &c) - 0.02).abs() < 1e-14);
        assert!((eps_next_dt(8e-3, 0.01, &c) - 0.005).abs() < 1e-14);
    }

    #[test]
    fn pi_examples() {
        let c = cfg(1e-3);
        assert_eq!(pi47_next_ratio(1e-3, 1e-3, 1.3, &c), 1.3);
        let a = pi47_next_ratio(1e-3 / 8.0, 1e-3 / 8.0, 1.0, &c);
        assert!((a - 2f64.powf(0.4)).abs() < 1e-14);
        assert!((a - 1.31951).abs() < 1e-5);
    }

    #[test]
    fn rejection_rule() {
        let mut c = Controller::new(cfg(1e-3));
        let d = c.decide(Some(0.5e-3), 0.01, 1.0, 0.0).unwrap();
        assert!(matches!(d.decision, Decision::Accept { .. }));
        let d = c.decide(Some(2e-3), 0.01, 1.0, 0.0).unwrap();
        assert!(matches!(d.decision, Decision::Accept { .. }));
        let d = c.decide(Some(3e-3), 0.01, 1.0, 0.0).unwrap();
        match d.decision {
            Decision::Reject { retry_dt } => {
                assert!((retry_dt - 0.01 * (1.0f64 / 3.0).powf(1.0 / 3.0)).abs() < 1e-15);
                assert!((retry_dt / 0.01 - 0.693).abs() < 1e-3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn collapse_is_fatal() {
        let mut c = Controller::new(cfg(1e-3));
        let err = c.decide(Some(1.0), c.cfg.dt_min, 1.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::StepCollapse { .. }));
    }

    #[test]
    fn regrid_holds_dt_and_discards_estimate() {
        let mut c = Controller::new(cfg(1e-3));
        c.decide(Some(1e-4), 0.01, 1.0, 0.0).unwrap();
        c.notify_regrid();
        let d = c.decide(Some(1.9e-3), 0.02, 1.0, 0.0).unwrap();
        assert_eq!(d.decision, Decision::Accept { next_dt: 0.02 });
        assert!(!d.estimate_used);
        assert_eq!(c.state.err_prev, None);
        // Next step re-primes with its own norm: the proportional factor is 1.
        let d = c.decide(Some(1e-3 / 8.0), 0.02, 1.0, 0.0).unwrap();
        assert!(d.estimate_used);
        match d.decision {
            Decision::Accept { next_dt } => {
                assert!((next_dt - 0.02 * 2f64.powf(0.4)).abs() < 1e-14)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn clamps_hold() {
        let c = cfg(1e-3);
        for e in [1e-30, 1e-9, 1e-3, 1.0, 1e9] {
            for dt in [1e-12, 1e-6, 0.05, 0.1] {
                let n = eps_next_dt(e, dt, &c);
                assert!(n >= c.dt_min && n <= c.dt_max);
                let r = n / dt;
                if n > c.dt_min && n < c.dt_max {
                    assert!(r >= c.ratio_min - 1e-12 && r <= c.ratio_max + 1e-12);
                }
            }
        }
    }

    #[test]
    fn scale_equivariance() {
        let a = cfg(1e-3);
        let b = cfg(7.0e-3);
        for (e, ep, al) in [(2e-4, 5e-4, 1.1), (1.5e-3, 1e-3, 0.7)] {
            let ra = pi47_next_ratio(e, ep, al, &a);
            let rb = pi47_next_ratio(7.0 * e, 7.0 * ep, al, &b);
            assert!((ra - rb).abs() < 1e-14);
        }
    }

    #[test]
    fn resolution_scaled_tolerance() {
        assert_eq!(scaled_tolerance(32), 5e-4);
        assert_eq!(scaled_tolerance(64), 2.5e-4);
        assert_eq!(scaled_tolerance(128), 1.25e-4);
    }
}
