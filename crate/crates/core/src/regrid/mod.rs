//! Adaptive regridding: indicator tagging of `E`, Berger–Rigoutsos
//! clustering, reconstruction of a properly nested hierarchy, conservative
//! transfer of the time history and the warm restart of the latest step.

mod cluster;
mod indicators;
mod transfer;

pub use cluster::{cluster_tags, fit_to_region, ClusterParams, TagGrid};
pub use indicators::{
    compute_indicators, dense_levels, level_max_abs, DenseLevel, LevelIndicators,
};
pub use transfer::{transfer_field, transfer_state};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controller::Controller;
use crate::error::{Error, Result};
use crate::integrator::TimeHistory;
use crate::jfnk::SolverReport;
use crate::mesh::{IndexBox, PatchHierarchy, REFINE_RATIO};
use crate::stepper::StepSolver;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegridPolicy {
    /// Accepted steps between indicator evaluations.
    pub interval: usize,
    /// Curvature threshold `tau_c*`.
    pub tau_c: f64,
    /// Gradient threshold `tau_g*`.
    pub tau_g: f64,
    /// Clustering efficiency (tagged / total cells per box).
    pub efficiency: f64,
    /// Smallest patch extent a clustering cut may produce, in cells of the
    /// level being created.
    pub min_patch_size: i32,
    /// Cells added around every tag before clustering.
    pub buffer_cells: i32,
}

impl Default for RegridPolicy {
    fn default() -> Self {
        Self {
            interval: 10,
            tau_c: 0.25,
            tau_g: 0.25,
            efficiency: 0.8,
            min_patch_size: 4,
            buffer_cells: 1,
        }
    }
}

impl RegridPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.interval < 1 {
            return Err(Error::Config("regrid interval must be at least 1".into()));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::Config(format!(
                "clustering efficiency must lie in (0, 1], got {}",
                self.efficiency
            )));
        }
        if !(self.tau_c > 0.0 && self.tau_g > 0.0) {
            return Err(Error::Config(
                "indicator thresholds must be positive".into(),
            ));
        }
        if self.min_patch_size < 1 || self.buffer_cells < 0 {
            return Err(Error::Config(
                "min_patch_size >= 1 and buffer_cells >= 0 required".into(),
            ));
        }
        Ok(())
    }

    fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            efficiency: self.efficiency,
            min_size: (self.min_patch_size + REFINE_RATIO - 1) / REFINE_RATIO,
        }
    }
}

/// Cells of `h`'s level `l` as a grid over the level's domain box.
fn footprint(domain_box: IndexBox, boxes: &[IndexBox]) -> TagGrid {
    let mut g = TagGrid::new(domain_box);
    for b in boxes {
        for c in b.cells() {
            g.set(c, true);
        }
    }
    g
}

/// Cells `c` of a level whose one-cell neighbourhood (clipped to the domain)
/// lies inside `region`: the cells a finer level may refine.
fn nesting_region(region: &TagGrid) -> TagGrid {
    let mut out = TagGrid::new(region.bx);
    for c in region.tagged() {
        let nb = IndexBox::new(c, c)
            .grow(1)
            .intersect(&region.bx)
            .expect("cell inside its box");
        if nb.cells().all(|x| region.get(x)) {
            out.set(c, true);
        }
    }
    out
}

/// Cells of level `l` flagged by the indicators of `E`, restricted to `region`.
pub fn tag_cells(
    dense: &DenseLevel,
    max_abs: f64,
    region: &TagGrid,
    policy: &RegridPolicy,
) -> TagGrid {
    let ind = compute_indicators(dense, max_abs);
    let mut tags = TagGrid::new(dense.bx);
    for (k, c) in dense.bx.cells().enumerate() {
        if region.get(c) && (ind.tau_c[k] > policy.tau_c || ind.tau_g[k] > policy.tau_g) {
            tags.set(c, true);
        }
    }
    tags
}

/// Builds a hierarchy adapted to `e` (the `E` field on `h`), level by level
/// from the base: tag inside the new level `l`, buffer, restrict to cells
/// whose refinement is properly nested, cluster, and refine the boxes into
/// level `l + 1`. At most `h.max_levels` levels are created.
pub fn plan_hierarchy(
    h: &PatchHierarchy,
    e: &[f64],
    policy: &RegridPolicy,
) -> Result<PatchHierarchy> {
    let max_levels = h.max_levels.max(1);
    let dense = dense_levels(h, e, max_levels - 1);
    let params = policy.cluster_params();
    let base_box = h.level(0).domain_box;
    let mut level_boxes: Vec<Vec<IndexBox>> = vec![vec![base_box]];
    for (l, d) in dense.iter().enumerate() {
        let region = footprint(d.bx, &level_boxes[l]);
        let allowed = if l == 0 {
            region.clone()
        } else {
            nesting_region(&region)
        };
        let tags = tag_cells(d, level_max_abs(h, e, d), &region, policy)
            .dilate(policy.buffer_cells)
            .and(&allowed);
        if tags.is_empty() {
            break;
        }
        let mut boxes = fit_to_region(cluster_tags(&tags, &params), &tags, &allowed);
        boxes.sort();
        level_boxes.push(boxes.iter().map(|b| b.refine(REFINE_RATIO)).collect());
    }
    Ok(
        PatchHierarchy::from_level_boxes(h.domain, h.base_resolution(), level_boxes)?
            .with_max_levels(max_levels),
    )
}

/// True when both hierarchies own exactly the same cells on every level.
pub fn same_footprint(a: &PatchHierarchy, b: &PatchHierarchy) -> bool {
    a.nlevels() == b.nlevels()
        && (0..a.nlevels()).all(|l| {
            let (la, lb) = (a.level(l), b.level(l));
            la.ncells == lb.ncells
                && la
                    .patches
                    .iter()
                    .all(|p| p.bx.cells().all(|c| lb.flat(c).is_some()))
        })
}

/// Degrees-of-freedom summary of one regrid.
#[derive(Clone, Debug, PartialEq)]
pub struct RegridReport {
    pub changed: bool,
    pub levels_before: usize,
    pub levels: usize,
    /// Valid cells per field before and after.
    pub valid_before: usize,
    pub valid: usize,
    /// Cells of a uniform grid at the finest permitted resolution.
    pub uniform_cells: usize,
}

impl RegridReport {
    /// Valid cells relative to the finest-resolution uniform grid.
    pub fn dof_fraction(&self) -> f64 {
        self.valid as f64 / self.uniform_cells as f64
    }
}

/// Cells of a uniform grid at the finest resolution `h` may reach.
pub fn uniform_equivalent_cells(h: &PatchHierarchy) -> usize {
    let scale = REFINE_RATIO.pow(h.max_levels.max(1) as u32 - 1) as usize;
    h.base_resolution()
        .iter()
        .map(|&n| n as usize * scale)
        .product()
}

/// Plans a new hierarchy for `e`; returns it only when its footprint differs
/// from `h`'s. A plan that fails to build is logged and skipped.
pub fn regrid(
    h: &Arc<PatchHierarchy>,
    e: &[f64],
    policy: &RegridPolicy,
) -> (Arc<PatchHierarchy>, RegridReport) {
    let planned = match plan_hierarchy(h, e, policy) {
        Ok(p) => Some(p),
        Err(err) => {
            log::warn!("regrid skipped: planned hierarchy is invalid: {err}");
            None
        }
    };
    let new = match planned {
        Some(p) if !same_footprint(h, &p) => Arc::new(p),
        _ => Arc::clone(h),
    };
    let report = RegridReport {
        changed: !Arc::ptr_eq(h, &new),
        levels_before: h.nlevels(),
        levels: new.nlevels(),
        valid_before: h.valid_count(),
        valid: new.valid_count(),
        uniform_cells: uniform_equivalent_cells(&new),
    };
    (new, report)
}

/// Moves every stored state of the history onto `new`.
pub fn transfer_history(old: &PatchHierarchy, new: &PatchHierarchy, hist: &mut TimeHistory) {
    hist.u_n = transfer_state(old, new, &hist.u_n);
    hist.udot_n = transfer_state(old, new, &hist.udot_n);
    for u in [&mut hist.u_nm1, &mut hist.u_nm2].into_iter().flatten() {
        *u = transfer_state(old, new, u);
    }
}

/// Result of re-solving the latest step after a regrid.
#[derive(Clone, Debug, PartialEq)]
pub enum RestartOutcome {
    /// The latest step was re-solved on the new hierarchy.
    Resolved(SolverReport),
    /// The re-solve failed; the history was dropped and the next step is BDF1.
    Cold(String),
    /// No completed step to re-solve.
    NoHistory,
}

/// Re-solves the latest completed step on `solver`'s (new) hierarchy from
/// the transferred history, with the transferred state as initial guess, and
/// replaces the latest state by the result. The controller keeps the next
/// step size and ignores the next error estimate.
pub fn warm_restart(
    solver: &mut StepSolver,
    hist: &mut TimeHistory,
    controller: &mut Controller,
) -> RestartOutcome {
    controller.notify_regrid();
    let (Some(kind), Some(u_prev)) = (hist.last_kind, hist.u_nm1.clone()) else {
        return RestartOutcome::NoHistory;
    };
    if kind.order() == 2 && hist.u_nm2.is_none() {
        hist.cold_restart();
        controller.reset_history();
        return RestartOutcome::Cold("second-order step without its back state".into());
    }
    match solver.solve(
        kind,
        hist.dt_n,
        &u_prev,
        hist.u_nm2.as_deref(),
        hist.u_n.clone(),
    ) {
        Ok((u, report)) => {
            hist.replace_latest(u);
            RestartOutcome::Resolved(report)
        }
        Err(err) => {
            log::warn!("warm restart failed, falling back to a cold restart: {err}");
            hist.cold_restart();
            controller.reset_history();
            RestartOutcome::Cold(err.to_string())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::ControllerConfig;
    use crate::discretization::{Discretization, MaterialMap, PhysicsParams};
    use crate::fac::FacConfig;
    use crate::integrator::StepKind;
    use crate::jfnk::NewtonConfig;
    use crate::mesh::Domain;
    use crate::stepper::{restrict_state, PreconditionerKind};

    /// A front in `x` at 0.3: a steep tanh profile.
    fn front(x: [f64; 3]) -> f64 {
        1e-3 + 0.5 * (1.0 - ((x[0] - 0.3) / 0.03).tanh())
    }

    fn base(n: i32, max_levels: usize) -> Arc<PatchHierarchy> {
        Arc::new(
            PatchHierarchy::uniform(Domain::unit_cube(), [n, n, n])
                .unwrap()
                .with_max_levels(max_levels),
        )
    }

    fn nested_cells(h: &PatchHierarchy) {
        for l in 1..h.nlevels() {
            for p in &h.level(l).patches {
                let g =
                    p.bx.coarsen(REFINE_RATIO)
                        .grow(1)
                        .intersect(&h.level(l - 1).domain_box)
                        .unwrap();
                assert!(g.cells().all(|c| h.level(l - 1).flat(c).is_some()));
            }
        }
    }

    #[test]
    fn front_is_refined_and_nested() {
        let h = base(16, 3);
        let e = h.sample(front);
        let (new, report) = regrid(&h, &e, &RegridPolicy::default());
        assert!(report.changed);
        assert_eq!(new.nlevels(), 3);
        nested_cells(&new);
        // The refined region straddles the front and not the far field.
        let fine = new.level(2);
        let x = |c: [i32; 3]| new.cell_center(2, c)[0];
        assert!(fine
            .patches
            .iter()
            .any(|p| p.bx.cells().any(|c| (x(c) - 0.3).abs() < 0.02)));
        assert!(fine
            .patches
            .iter()
            .all(|p| p.bx.cells().all(|c| (x(c) - 0.3).abs() < 0.25)));
        assert!(report.dof_fraction() < 0.5);
    }

    #[test]
    fn regrid_is_deterministic_and_idempotent() {
        let h = base(16, 3);
        let e = h.sample(front);
        let policy = RegridPolicy::default();
        let (a, _) = regrid(&h, &e, &policy);
        let (b, _) = regrid(&h, &e, &policy);
        assert_eq!(a.level_boxes(), b.level_boxes());
        // The same level data on the adapted hierarchy reproduces its own
        // footprint: no regrid, and the transfer is a pure copy.
        let dense = dense_levels(&h, &e, a.nlevels());
        let mut e2 = vec![0.0; a.ncells()];
        for p in a.patches() {
            for c in p.bx.cells() {
                e2[p.flat(c)] = dense[p.level].get(c);
            }
        }
        let (c, report) = regrid(&a, &e2, &policy);
        assert!(
            !report.changed,
            "{:?} vs {:?}",
            a.level_boxes(),
            c.level_boxes()
        );
        assert!(Arc::ptr_eq(&a, &c));
        crate::mesh::restrict_all(&a, &mut e2);
        assert_eq!(transfer_field(&a, &c, &e2), e2);
    }

    #[test]
    fn smooth_field_is_not_refined() {
        let h = base(8, 3);
        let e = h.sample(|x| 1.0 + 0.01 * x[0]);
        let (new, report) = regrid(&h, &e, &RegridPolicy::default());
        assert!(!report.changed);
        assert_eq!(new.nlevels(), 1);
    }

    #[test]
    fn transfer_conserves_and_stays_positive() {
        let h = base(16, 3);
        let e = h.sample(front);
        let (new, _) = regrid(&h, &e, &RegridPolicy::default());
        let t: Vec<f64> = h.sample(|x| 0.2 + x[1] * x[2]);
        let state: Vec<f64> = e.iter().chain(&t).copied().collect();
        let moved = transfer_state(&h, &new, &state);
        let n = new.ncells();
        for (old_f, new_f) in [(&e[..], &moved[..n]), (&t[..], &moved[n..])] {
            let (a, b) = (h.integrate(old_f), new.integrate(new_f));
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        assert!(moved.iter().all(|&v| v > 0.0));
    }

    fn solver(h: &Arc<PatchHierarchy>) -> StepSolver {
        let disc = Discretization::new(
            Arc::clone(h),
            MaterialMap::uniform(1.0),
            PhysicsParams::default(),
        );
        StepSolver::new(
            disc,
            FacConfig::default(),
            PreconditionerKind::Fac,
            NewtonConfig::default(),
        )
    }

    /// Two BDF steps on `h` from a front-shaped state.
    fn history(h: &Arc<PatchHierarchy>) -> TimeHistory {
        let mut s = solver(h);
        let e = h.sample(front);
        let t: Vec<f64> = e.iter().map(|v| v.powf(0.25)).collect();
        let mut u0: Vec<f64> = e.iter().chain(&t).copied().collect();
        restrict_state(h, &mut u0);
        let udot = s.rhs(&u0).unwrap();
        let mut hist = TimeHistory::new(0.0, u0, udot);
        let dt = 1e-4;
        for _ in 0..2 {
            let kind = hist.next_kind(dt);
            let guess = hist.predict(dt);
            let (u, _) = s
                .solve(kind, dt, &hist.u_n, hist.u_nm1.as_deref(), guess)
                .unwrap();
            hist.accept(u, dt, kind);
        }
        assert!(matches!(hist.last_kind, Some(StepKind::Bdf2 { .. })));
        hist
    }

    fn latest_residual(s: &mut StepSolver, hist: &TimeHistory) -> f64 {
        let kind = hist.last_kind.unwrap();
        let mask = s.mask().to_vec();
        let prev = hist.u_nm1.clone().unwrap();
        let mut sys = crate::stepper::BdfSystem::new(
            s.discretization(),
            kind,
            hist.dt_n,
            &prev,
            hist.u_nm2.as_deref(),
            &mask,
        );
        let mut r = vec![0.0; hist.u_n.len()];
        crate::jfnk::NonlinearSystem::residual(&mut sys, &hist.u_n, &mut r).unwrap();
        crate::jfnk::vec::norm2(&mask, &r)
    }

    #[test]
    fn warm_restart_on_identical_hierarchy_needs_at_most_one_iteration() {
        let h = base(8, 2);
        let mut hist = history(&h);
        let mut s = solver(&h);
        let mut ctl = Controller::new(ControllerConfig::default());
        match warm_restart(&mut s, &mut hist, &mut ctl) {
            RestartOutcome::Resolved(r) => assert!(r.newton_iters <= 1, "{r:?}"),
            other => panic!("{other:?}"),
        }
        assert!(ctl.state.hold_next);
    }

    #[test]
    fn warm_restart_removes_the_residual_jump_of_a_new_level() {
        let h = base(8, 2);
        let mut hist = history(&h);
        let e = hist.u_n[..h.ncells()].to_vec();
        let (new, report) = regrid(&h, &e, &RegridPolicy::default());
        assert!(report.changed && new.nlevels() == 2);
        transfer_history(&h, &new, &mut hist);
        let mut s = solver(&new);
        let jump = latest_residual(&mut s, &hist);
        let mut ctl = Controller::new(ControllerConfig::default());
        let outcome = warm_restart(&mut s, &mut hist, &mut ctl);
        let RestartOutcome::Resolved(r) = outcome else {
            panic!("{outcome:?}");
        };
        let after = latest_residual(&mut s, &hist);
        let tol = NewtonConfig::default();
        assert!(jump > tol.abs_tol, "no residual jump: {jump:e}");
        assert!(
            after <= (tol.rel_tol * r.residual_norms[0]).max(tol.abs_tol),
            "{jump:e} -> {after:e}"
        );
    }
}
