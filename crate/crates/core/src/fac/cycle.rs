//! One FAC V(m, n) cycle on the composite grid.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::composite::{apply_composite, CompositeWorkspace};
use super::level::{smooth_redblack, LevelOperator, LevelPattern};
use crate::error::{Error, Result};
use crate::mesh::{prolong_correction, restrict_all, PatchHierarchy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FacConfig {
    /// Smoothing sweeps per level on the way down (`m`).
    pub pre_sweeps: usize,
    /// Smoothing sweeps per level on the way up (`n`).
    pub post_sweeps: usize,
    /// Red-black sweeps standing in for the coarsest-level solve.
    pub coarse_sweeps: usize,
}

impl Default for FacConfig {
    fn default() -> Self {
        Self {
            pre_sweeps: 1,
            post_sweeps: 0,
            coarse_sweeps: 1,
        }
    }
}

impl FacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_sweeps == 0 && self.pre_sweeps == 0 && self.post_sweeps == 0 {
            return Err(Error::Config("FAC cycle performs no smoothing".into()));
        }
        Ok(())
    }
}

/// A scalar composite operator `I - beta div D grad` with its level
/// approximations, all with the same frozen face coefficients.
#[derive(Clone, Debug)]
pub struct FacOperator {
    h: Arc<PatchHierarchy>,
    d: Vec<f64>,
    beta: f64,
    levels: Vec<LevelOperator>,
}

impl FacOperator {
    pub fn new(
        h: Arc<PatchHierarchy>,
        patterns: &[Arc<LevelPattern>],
        d: Vec<f64>,
        beta: f64,
    ) -> Result<Self> {
        let levels = patterns
            .iter()
            .map(|p| p.assemble(&d, beta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { h, d, beta, levels })
    }

    pub fn hierarchy(&self) -> &Arc<PatchHierarchy> {
        &self.h
    }

    pub fn level_operator(&self, l: usize) -> &LevelOperator {
        &self.levels[l]
    }

    /// Composite operator application.
    pub fn apply(&self, x: &[f64], out: &mut [f64], ws: &mut CompositeWorkspace) {
        apply_composite(&self.h, &self.d, self.beta, x, out, ws);
    }

    /// `r = f - L u` on valid cells, zero on covered cells.
    pub fn residual(&self, f: &[f64], u: &[f64], r: &mut [f64], ws: &mut CompositeWorkspace) {
        self.apply(u, r, ws);
        let valid = self.h.valid();
        for i in 0..r.len() {
            r[i] = if valid[i] { f[i] - r[i] } else { 0.0 };
        }
    }
}

/// Scratch vectors for [`fac_vcycle`].
#[derive(Clone, Debug, Default)]
pub struct FacWorkspace {
    r: Vec<f64>,
    level_rhs: Vec<f64>,
    e: Vec<f64>,
    composite: CompositeWorkspace,
}

impl FacWorkspace {
    pub fn new(h: &PatchHierarchy) -> Self {
        let n = h.ncells();
        Self {
            r: vec![0.0; n],
            level_rhs: vec![0.0; n],
            e: vec![0.0; n],
            composite: CompositeWorkspace::new(h),
        }
    }

    pub fn composite(&mut self) -> &mut CompositeWorkspace {
        &mut self.composite
    }
}

/// Restricts the composite residual to every level: valid cells keep their
/// residual, covered cells take the mean over their children.
fn restrict_residual(h: &PatchHierarchy, r: &[f64], out: &mut [f64]) {
    out.copy_from_slice(r);
    restrict_all(h, out);
}

/// Smooths `A_l e = f_l` from a zero guess and adds the interpolated
/// correction to `u` on level `l` and every finer level.
fn level_correction(
    op: &FacOperator,
    l: usize,
    sweeps: usize,
    u: &mut [f64],
    ws: &mut FacWorkspace,
) {
    let h = &op.h;
    ws.e.fill(0.0);
    smooth_redblack(&op.levels[l], &mut ws.e, &ws.level_rhs, sweeps);
    for k in l + 1..h.nlevels() {
        prolong_correction(h, k, &mut ws.e);
    }
    let start = h.level(l).offset;
    for i in start..u.len() {
        u[i] += ws.e[i];
    }
}

/// One FAC V(m, n) cycle for `L u = f`, improving `u` in place.
///
/// Descends from the finest level smoothing `m` times per level, correcting
/// the composite solution and updating the composite residual after each
/// level; the coarsest level is treated with `coarse_sweeps` sweeps; the
/// ascent smooths `n` times per level against a freshly restricted residual.
pub fn fac_vcycle(
    op: &FacOperator,
    f: &[f64],
    u: &mut [f64],
    cfg: &FacConfig,
    ws: &mut FacWorkspace,
) {
    let h = Arc::clone(&op.h);
    let nl = h.nlevels();
    let valid = h.valid();
    if u.iter().all(|&v| v == 0.0) {
        for i in 0..f.len() {
            ws.r[i] = if valid[i] { f[i] } else { 0.0 };
        }
    } else {
        op.residual(f, u, &mut ws.r, &mut ws.composite);
    }
    for l in (1..nl).rev() {
        restrict_residual(&h, &ws.r, &mut ws.level_rhs);
        level_correction(op, l, cfg.pre_sweeps, u, ws);
        op.residual(f, u, &mut ws.r, &mut ws.composite);
    }
    restrict_residual(&h, &ws.r, &mut ws.level_rhs);
    level_correction(op, 0, cfg.coarse_sweeps, u, ws);
    if cfg.post_sweeps > 0 {
        for l in 1..nl {
            op.residual(f, u, &mut ws.r, &mut ws.composite);
            restrict_residual(&h, &ws.r, &mut ws.level_rhs);
            level_correction(op, l, cfg.post_sweeps, u, ws);
        }
    }
}
