//! The time loop: predict, solve, estimate, control, and periodically regrid.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::controller::{scaled_tolerance, Controller, ControllerConfig, Decision};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::integrator::{error_norm, estimate_local_error, StepKind, TimeHistory};
use crate::mesh::PatchHierarchy;
use crate::regrid::{
    regrid, transfer_history, uniform_equivalent_cells, warm_restart, RestartOutcome,
};
use crate::stepper::StepSolver;

use super::config::RunConfig;
use super::output::OutputSink;

/// What happened to one attempted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepDecision {
    Accepted,
    /// Error estimate too large; retried with a smaller step.
    Rejected,
    /// The nonlinear solve failed; retried with a smaller step.
    SolverFailure,
}

impl StepDecision {
    pub fn accepted(self) -> bool {
        self == StepDecision::Accepted
    }

    pub fn label(self) -> &'static str {
        match self {
            StepDecision::Accepted => "accept",
            StepDecision::Rejected => "reject",
            StepDecision::SolverFailure => "solver_failure",
        }
    }
}

/// One attempted step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// Index of the step being attempted (1 for the first step).
    pub step: usize,
    /// Time at the end of the attempted step.
    pub t: f64,
    pub dt: f64,
    pub order: usize,
    pub err_norm: Option<f64>,
    pub newton_iters: usize,
    pub gmres_iters: usize,
    /// Valid unknowns (both fields) of the hierarchy the step was solved on.
    pub valid_dofs: usize,
    pub levels: usize,
    /// The hierarchy changed right after this (accepted) step.
    pub regrid_flag: bool,
    pub decision: StepDecision,
    /// The error estimate was used by the step-size controller.
    pub estimate_used: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RestartKind {
    /// The hierarchy did not change.
    None,
    Warm,
    Cold,
}

impl RestartKind {
    pub fn label(self) -> &'static str {
        match self {
            RestartKind::None => "none",
            RestartKind::Warm => "warm",
            RestartKind::Cold => "cold",
        }
    }
}

/// One regrid evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct RegridRecord {
    pub step: usize,
    pub t: f64,
    pub levels: usize,
    pub valid_dofs: usize,
    /// Valid cells relative to a uniform grid at the finest permitted
    /// resolution.
    pub dof_fraction: f64,
    pub changed: bool,
    pub restart: RestartKind,
    pub restart_newton_iters: usize,
}

/// Solution at a requested time.
#[derive(Clone, Debug)]
pub struct Sample {
    pub t: f64,
    pub hierarchy: Arc<PatchHierarchy>,
    pub u: Vec<f64>,
}

impl Sample {
    pub fn energy(&self) -> &[f64] {
        &self.u[..self.hierarchy.ncells()]
    }

    pub fn temperature(&self) -> &[f64] {
        &self.u[self.hierarchy.ncells()..]
    }
}

/// Totals of a run, averaged the way iteration tables report them: per
/// accepted step, counting the solve that produced the accepted state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub completed: bool,
    pub t: f64,
    pub eps_t: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub solver_failures: usize,
    pub newton_iters: usize,
    pub gmres_iters: usize,
    /// Regrids that changed the hierarchy.
    pub regrids: usize,
    pub cold_restarts: usize,
    pub final_levels: usize,
    pub final_valid_cells: usize,
    pub final_dof_fraction: f64,
}

impl RunSummary {
    pub fn avg_newton(&self) -> f64 {
        self.newton_iters as f64 / self.accepted_steps.max(1) as f64
    }

    pub fn avg_gmres(&self) -> f64 {
        self.gmres_iters as f64 / self.accepted_steps.max(1) as f64
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name = {}", self.name)?;
        writeln!(
            f,
            "status = {}",
            if self.completed {
                "completed"
            } else {
                "failed"
            }
        )?;
        writeln!(f, "t = {}", self.t)?;
        writeln!(f, "eps_t = {:e}", self.eps_t)?;
        writeln!(f, "accepted_steps = {}", self.accepted_steps)?;
        writeln!(f, "rejected_steps = {}", self.rejected_steps)?;
        writeln!(f, "solver_failures = {}", self.solver_failures)?;
        writeln!(f, "newton_iters = {}", self.newton_iters)?;
        writeln!(f, "gmres_iters = {}", self.gmres_iters)?;
        writeln!(f, "avg_newton_per_step = {:.3}", self.avg_newton())?;
        writeln!(f, "avg_gmres_per_step = {:.3}", self.avg_gmres())?;
        writeln!(f, "regrids = {}", self.regrids)?;
        writeln!(f, "cold_restarts = {}", self.cold_restarts)?;
        writeln!(f, "final_levels = {}", self.final_levels)?;
        writeln!(f, "final_valid_cells = {}", self.final_valid_cells)?;
        writeln!(f, "final_dof_fraction = {:.4}", self.final_dof_fraction)
    }
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub summary: RunSummary,
    pub steps: Vec<StepRecord>,
    pub regrids: Vec<RegridRecord>,
    /// States at the configured sample times, in order.
    pub samples: Vec<Sample>,
    pub final_state: Sample,
}

impl RunResult {
    /// Sizes of the accepted steps, in order.
    pub fn accepted_dts(&self) -> Vec<f64> {
        self.steps
            .iter()
            .filter(|s| s.decision.accepted())
            .map(|s| s.dt)
            .collect()
    }

    pub fn sample_at(&self, t: f64) -> Option<&Sample> {
        self.samples
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-9 * t.abs().max(1e-12))
    }
}

/// `E = E0`, `T = E0^(1/4)` on every cell.
pub fn initial_state(h: &PatchHierarchy, e0: f64) -> Vec<f64> {
    let n = h.ncells();
    let mut u = vec![e0; 2 * n];
    u[n..].fill(e0.powf(0.25));
    u
}

/// Errors the loop recovers from by retrying with a smaller step.
fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NewtonDiverged { .. }
            | Error::DampingCollapse(_)
            | Error::Perturbation { .. }
            | Error::Positivity { .. }
            | Error::Domain(_)
            | Error::SingularBlock { .. }
            | Error::ZeroDiagonal(_)
    )
}

#[derive(Clone, Copy, Debug)]
enum StepMode<'a> {
    Controlled,
    Fixed(f64),
    Schedule(&'a [f64]),
}

struct Simulation<'a> {
    cfg: &'a RunConfig,
    h: Arc<PatchHierarchy>,
    solver: StepSolver,
    hist: TimeHistory,
    controller: Controller,
    sink: Option<OutputSink>,
    steps: Vec<StepRecord>,
    regrids: Vec<RegridRecord>,
    samples: Vec<Sample>,
    summary: RunSummary,
    /// Regrid during the run.
    adapt: bool,
    /// Stop after this many accepted steps.
    step_limit: Option<usize>,
}

impl<'a> Simulation<'a> {
    fn make_solver(cfg: &RunConfig, h: &Arc<PatchHierarchy>) -> StepSolver {
        let disc = Discretization::new(Arc::clone(h), cfg.material.clone(), cfg.physics);
        StepSolver::new(disc, cfg.fac, cfg.solver.preconditioner, cfg.newton)
    }

    /// Starting hierarchy: the configured one, adapted to the initial state
    /// and then to the state a few steps later.
    fn initial_hierarchy(cfg: &RunConfig) -> Result<Arc<PatchHierarchy>> {
        let p = &cfg.problem;
        let mut h = Arc::new(
            PatchHierarchy::build(p.domain, p.base_resolution, &p.refine_boxes)?
                .with_max_levels(p.max_levels),
        );
        if !cfg.regrid.enabled {
            return Ok(h);
        }
        // Adapt to the initial condition, re-sampling it on each new hierarchy.
        for _ in 0..p.max_levels {
            let u0 = initial_state(&h, p.e0);
            let (new_h, report) = regrid(&h, &u0[..h.ncells()], &cfg.regrid.policy);
            if !report.changed {
                break;
            }
            h = new_h;
        }
        // A uniform initial state tags nothing, although the boundary drive
        // steepens it at once. Run up to the first regrid without adapting,
        // and restart from the initial state on the hierarchy fitted to that
        // state, so the forming front is never computed on a coarse grid.
        for _ in 0..p.max_levels {
            let mut ahead = Simulation::on_hierarchy(
                cfg,
                Arc::clone(&h),
                None,
                false,
                Some(cfg.regrid.policy.interval),
            )?;
            if let Err(e) = ahead.run() {
                log::warn!("initial look-ahead failed: {e}");
                break;
            }
            let n = h.ncells();
            let (new_h, report) = regrid(&h, &ahead.hist.u_n[..n], &cfg.regrid.policy);
            if !report.changed {
                break;
            }
            h = new_h;
        }
        Ok(h)
    }

    fn new(cfg: &'a RunConfig, out: Option<&Path>) -> Result<Self> {
        let h = Self::initial_hierarchy(cfg)?;
        Self::on_hierarchy(cfg, h, out, cfg.regrid.enabled, None)
    }

    fn on_hierarchy(
        cfg: &'a RunConfig,
        h: Arc<PatchHierarchy>,
        out: Option<&Path>,
        adapt: bool,
        step_limit: Option<usize>,
    ) -> Result<Self> {
        let u0 = initial_state(&h, cfg.problem.e0);
        let mut solver = Self::make_solver(cfg, &h);
        let udot0 = solver.rhs(&u0)?;
        let mut ctl_cfg: ControllerConfig = cfg.controller;
        if ctl_cfg.eps_t == 0.0 {
            ctl_cfg.eps_t = scaled_tolerance(cfg.finest_cells_x());
        }
        let sink = match out {
            Some(dir) => Some(OutputSink::create(dir, cfg.output.snapshots)?),
            None => None,
        };
        let summary = RunSummary {
            name: cfg.name.clone(),
            eps_t: ctl_cfg.eps_t,
            ..RunSummary::default()
        };
        Ok(Self {
            cfg,
            solver,
            hist: TimeHistory::new(0.0, u0, udot0),
            controller: Controller::new(ctl_cfg),
            h,
            sink,
            steps: Vec::new(),
            regrids: Vec::new(),
            samples: Vec::new(),
            summary,
            adapt,
            step_limit,
        })
    }

    fn record_step(&mut self, r: StepRecord) -> Result<()> {
        if let Some(s) = &mut self.sink {
            s.step(&r)?;
        }
        self.steps.push(r);
        Ok(())
    }

    fn record_regrid(&mut self, r: RegridRecord) -> Result<()> {
        if let Some(s) = &mut self.sink {
            s.regrid(&r)?;
        }
        self.regrids.push(r);
        Ok(())
    }

    fn snapshot(&mut self) -> Result<()> {
        if let Some(s) = &mut self.sink {
            s.snapshot(self.hist.steps, self.hist.t, &self.h, &self.hist.u_n)?;
        }
        Ok(())
    }

    fn dof_fraction(&self) -> f64 {
        self.h.valid_count() as f64 / uniform_equivalent_cells(&self.h) as f64
    }

    /// Re-evaluates the hierarchy after an accepted step; returns whether it
    /// changed.
    fn maybe_regrid(&mut self) -> Result<bool> {
        let n = self.h.ncells();
        let (new_h, report) = regrid(&self.h, &self.hist.u_n[..n], &self.cfg.regrid.policy);
        let mut restart = RestartKind::None;
        let mut restart_iters = 0;
        if report.changed {
            log::info!(
                "regrid at t = {:.6e}: {} -> {} levels, {} -> {} valid cells",
                self.hist.t,
                report.levels_before,
                report.levels,
                report.valid_before,
                report.valid
            );
            transfer_history(&self.h, &new_h, &mut self.hist);
            self.h = new_h;
            self.solver = Self::make_solver(self.cfg, &self.h);
            restart = match warm_restart(&mut self.solver, &mut self.hist, &mut self.controller) {
                RestartOutcome::Resolved(r) => {
                    restart_iters = r.newton_iters;
                    RestartKind::Warm
                }
                RestartOutcome::Cold(_) | RestartOutcome::NoHistory => {
                    self.summary.cold_restarts += 1;
                    RestartKind::Cold
                }
            };
            self.summary.regrids += 1;
        }
        self.record_regrid(RegridRecord {
            step: self.hist.steps,
            t: self.hist.t,
            levels: self.h.nlevels(),
            valid_dofs: 2 * self.h.valid_count(),
            dof_fraction: self.dof_fraction(),
            changed: report.changed,
            restart,
            restart_newton_iters: restart_iters,
        })?;
        Ok(report.changed)
    }

    fn run(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let t_end = cfg.time.t_final;
        let tiny = 1e-10 * t_end.max(f64::MIN_POSITIVE);
        let mut stops: Vec<f64> = cfg.time.sample_times.clone();
        stops.push(t_end);
        stops.sort_by(f64::total_cmp);
        stops.dedup_by(|a, b| (*a - *b).abs() <= tiny);
        let mode = if !cfg.time.dt_schedule.is_empty() {
            StepMode::Schedule(&cfg.time.dt_schedule)
        } else if let Some(dt) = cfg.time.fixed_dt {
            StepMode::Fixed(dt)
        } else {
            StepMode::Controlled
        };
        let dump = cfg.time.dump_interval;
        let mut next_dump = dump;

        self.record_regrid(RegridRecord {
            step: 0,
            t: 0.0,
            levels: self.h.nlevels(),
            valid_dofs: 2 * self.h.valid_count(),
            dof_fraction: self.dof_fraction(),
            changed: false,
            restart: RestartKind::None,
            restart_newton_iters: 0,
        })?;
        self.snapshot()?;
        let mut dt = self.controller.cfg.initial_dt;
        let mut last_dump_step = 0;

        while self.hist.t < t_end - tiny && self.step_limit.is_none_or(|n| self.hist.steps < n) {
            let t = self.hist.t;
            let next_stop = stops
                .iter()
                .copied()
                .find(|&s| s > t + tiny)
                .unwrap_or(t_end);
            let dt_base = match mode {
                StepMode::Controlled => dt,
                StepMode::Fixed(d) => d,
                StepMode::Schedule(s) => *s.get(self.hist.steps).ok_or_else(|| {
                    Error::Config(format!(
                        "step schedule ended at t = {t} before t_final = {t_end}"
                    ))
                })?,
            };
            let remaining = next_stop - t;
            let dt_try = if dt_base >= remaining * (1.0 - 1e-9) {
                remaining
            } else if matches!(mode, StepMode::Controlled) && dt_base > 0.5 * remaining {
                // Two even steps instead of a full one and a sliver.
                0.5 * remaining
            } else {
                dt_base
            };

            let kind = self.hist.next_kind(dt_try);
            let pred = self.hist.predict(dt_try);
            let step = self.hist.steps + 1;
            let levels = self.h.nlevels();
            let valid_dofs = 2 * self.h.valid_count();
            let solved = self.solver.solve(
                kind,
                dt_try,
                &self.hist.u_n,
                self.hist.u_nm1.as_deref(),
                pred.clone(),
            );
            let (u, report) = match solved {
                Ok(ok) => ok,
                Err(e) if recoverable(&e) && matches!(mode, StepMode::Controlled) => {
                    log::warn!("step {step} failed at t = {t:.6e}, dt = {dt_try:.3e}: {e}");
                    self.summary.solver_failures += 1;
                    self.record_step(StepRecord {
                        step,
                        t: t + dt_try,
                        dt: dt_try,
                        order: kind.order(),
                        err_norm: None,
                        newton_iters: 0,
                        gmres_iters: 0,
                        valid_dofs,
                        levels,
                        regrid_flag: false,
                        decision: StepDecision::SolverFailure,
                        estimate_used: false,
                    })?;
                    dt = self.controller.on_solver_failure(dt_try, t)?;
                    continue;
                }
                Err(e) => return Err(e),
            };

            log::debug!(
                "step {step}: t = {t:.6e}, dt = {dt_try:.3e}, |F| = [{}], gmres = {}",
                report
                    .residual_norms
                    .iter()
                    .map(|r| format!("{r:.2e}"))
                    .collect::<Vec<_>>()
                    .join(", "),
                report.gmres_iters
            );
            let err = match kind {
                StepKind::Bdf2 { alpha } => Some(error_norm(
                    &estimate_local_error(&u, &pred, alpha),
                    &u,
                    self.h.valid(),
                    self.controller.cfg.norm,
                )),
                StepKind::Bdf1 => None,
            };
            let alpha = match kind {
                StepKind::Bdf2 { alpha } => alpha,
                StepKind::Bdf1 => 1.0,
            };
            let (decision, estimate_used, next_dt) = match mode {
                StepMode::Controlled => {
                    let info = self.controller.decide(err, dt_try, alpha, t)?;
                    match info.decision {
                        Decision::Accept { next_dt } => {
                            (StepDecision::Accepted, info.estimate_used, next_dt)
                        }
                        Decision::Reject { retry_dt } => {
                            (StepDecision::Rejected, info.estimate_used, retry_dt)
                        }
                    }
                }
                _ => (StepDecision::Accepted, false, dt_base),
            };
            let mut record = StepRecord {
                step,
                t: t + dt_try,
                dt: dt_try,
                order: kind.order(),
                err_norm: err,
                newton_iters: report.newton_iters,
                gmres_iters: report.gmres_iters,
                valid_dofs,
                levels,
                regrid_flag: false,
                decision,
                estimate_used,
            };
            dt = next_dt;
            if decision != StepDecision::Accepted {
                self.summary.rejected_steps += 1;
                self.record_step(record)?;
                continue;
            }

            self.solver.discretization().check_positive(&u)?;
            self.hist.accept(u, dt_try, kind);
            self.summary.accepted_steps += 1;
            self.summary.newton_iters += report.newton_iters;
            self.summary.gmres_iters += report.gmres_iters;
            if cfg
                .time
                .sample_times
                .iter()
                .any(|&s| (s - self.hist.t).abs() <= tiny)
            {
                self.samples.push(Sample {
                    t: self.hist.t,
                    hierarchy: Arc::clone(&self.h),
                    u: self.hist.u_n.clone(),
                });
            }
            if self.adapt
                && self.hist.steps.is_multiple_of(cfg.regrid.policy.interval)
                && self.hist.t < t_end - tiny
            {
                record.regrid_flag = self.maybe_regrid()?;
            }
            self.record_step(record)?;
            if dump > 0.0 && self.hist.t >= next_dump - tiny {
                self.snapshot()?;
                last_dump_step = self.hist.steps;
                while next_dump <= self.hist.t + tiny {
                    next_dump += dump;
                }
            }
        }
        if self.hist.steps > last_dump_step && self.hist.t >= t_end - tiny {
            self.snapshot()?;
        }
        Ok(())
    }

    fn finish(mut self, completed: bool) -> Result<RunResult> {
        self.summary.completed = completed;
        self.summary.t = self.hist.t;
        self.summary.final_levels = self.h.nlevels();
        self.summary.final_valid_cells = self.h.valid_count();
        self.summary.final_dof_fraction = self.dof_fraction();
        if let Some(s) = &mut self.sink {
            s.summary(&self.summary)?;
        }
        Ok(RunResult {
            summary: self.summary,
            steps: self.steps,
            regrids: self.regrids,
            samples: self.samples,
            final_state: Sample {
                t: self.hist.t,
                hierarchy: self.h,
                u: self.hist.u_n,
            },
        })
    }
}

/// Runs `cfg` to its final time. With `out`, writes `steps.csv`,
/// `regrid.csv`, `summary.txt` and (if enabled) `snapshots/` there; on a
/// fatal error the last good state is written as a snapshot before the
/// error is returned.
pub fn run_simulation(cfg: &RunConfig, out: Option<&Path>) -> Result<RunResult> {
    cfg.validate()?;
    let mut sim = Simulation::new(cfg, out)?;
    match sim.run() {
        Ok(()) => sim.finish(true),
        Err(e) => {
            log::error!("run failed at t = {:.6e}: {e}", sim.hist.t);
            if let Some(s) = &mut sim.sink {
                // Best effort: the original error is what matters.
                let _ = s.snapshot(sim.hist.steps, sim.hist.t, &sim.h, &sim.hist.u_n);
            }
            let _ = sim.finish(false);
            Err(e)
        }
    }
}
