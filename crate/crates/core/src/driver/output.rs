//! Run artefacts: step history, regrid history, snapshots and summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::mesh::snapshot::write_snapshot;
use crate::mesh::PatchHierarchy;

use super::run::{RegridRecord, RunSummary, StepRecord};

/// One row of `steps.csv`.
#[derive(Serialize)]
struct StepRow {
    step: usize,
    t: f64,
    dt: f64,
    err_norm: Option<f64>,
    newton_iters: usize,
    gmres_iters: usize,
    valid_dofs: usize,
    levels: usize,
    regrid_flag: u8,
    accepted: u8,
    decision: &'static str,
    estimate_used: u8,
}

/// One row of `regrid.csv`.
#[derive(Serialize)]
struct RegridRow {
    step: usize,
    t: f64,
    levels: usize,
    valid_dofs: usize,
    dof_fraction: f64,
    changed: u8,
    restart: &'static str,
    restart_newton_iters: usize,
}

/// Writes artefacts into one directory as the run progresses, so that a run
/// that fails still leaves its history behind.
pub struct OutputSink {
    dir: PathBuf,
    steps: csv::Writer<BufWriter<File>>,
    regrids: csv::Writer<BufWriter<File>>,
    snapshots: bool,
}

impl OutputSink {
    pub fn create(dir: &Path, snapshots: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        if snapshots {
            fs::create_dir_all(dir.join("snapshots"))?;
        }
        let open = |name: &str| -> Result<csv::Writer<BufWriter<File>>> {
            Ok(csv::Writer::from_writer(BufWriter::new(File::create(
                dir.join(name),
            )?)))
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            steps: open("steps.csv")?,
            regrids: open("regrid.csv")?,
            snapshots,
        })
    }

    pub fn step(&mut self, r: &StepRecord) -> Result<()> {
        self.steps.serialize(StepRow {
            step: r.step,
            t: r.t,
            dt: r.dt,
            err_norm: r.err_norm,
            newton_iters: r.newton_iters,
            gmres_iters: r.gmres_iters,
            valid_dofs: r.valid_dofs,
            levels: r.levels,
            regrid_flag: r.regrid_flag as u8,
            accepted: r.decision.accepted() as u8,
            decision: r.decision.label(),
            estimate_used: r.estimate_used as u8,
        })?;
        Ok(())
    }

    pub fn regrid(&mut self, r: &RegridRecord) -> Result<()> {
        self.regrids.serialize(RegridRow {
            step: r.step,
            t: r.t,
            levels: r.levels,
            valid_dofs: r.valid_dofs,
            dof_fraction: r.dof_fraction,
            changed: r.changed as u8,
            restart: r.restart.label(),
            restart_newton_iters: r.restart_newton_iters,
        })?;
        Ok(())
    }

    /// Writes `snapshots/step_XXXXXX.amr` when snapshots are enabled.
    pub fn snapshot(&mut self, step: usize, t: f64, h: &PatchHierarchy, u: &[f64]) -> Result<()> {
        if !self.snapshots {
            return Ok(());
        }
        let n = h.ncells();
        let path = self
            .dir
            .join("snapshots")
            .join(format!("step_{step:06}.amr"));
        let mut w = BufWriter::new(File::create(path)?);
        write_snapshot(&mut w, h, t, &[("E", &u[..n]), ("T", &u[n..])])?;
        w.flush()?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.steps.flush()?;
        self.regrids.flush()?;
        Ok(())
    }

    pub fn summary(&mut self, s: &RunSummary) -> Result<()> {
        self.flush()?;
        fs::write(self.dir.join("summary.txt"), s.to_string())?;
        Ok(())
    }
}
