//! Convergence and efficiency studies.
//!
//! * temporal: fixed-step runs on one static hierarchy against a run with a
//!   much smaller step, on the same hierarchy;
//! * spatial: AMR and uniform runs replaying the step sequence of a fine
//!   uniform reference, compared with the reference x-profile;
//! * efficiency: solver iteration counts and step counts of controller-driven
//!   Marshak runs across base resolutions and level counts.
//!
//! The accuracy studies run on the single-material slab, whose solution does
//! not depend on y or z; errors are volume-weighted L2 norms over the valid
//! cells of the whole domain.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{IndexBox, PatchHierarchy};
use crate::regrid::RegridPolicy;

use super::config::RunConfig;
use super::presets::{marshak_two_material, slab};
use super::run::{run_simulation, RunResult, RunSummary, Sample};

/// A hierarchy shape written `<base>b<levels>l`, e.g. `16b3l`: a `base`-cell
/// coarse grid with up to `levels` levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridSpec {
    pub base: i32,
    pub levels: usize,
}

impl GridSpec {
    pub fn new(base: i32, levels: usize) -> Self {
        Self { base, levels }
    }

    /// Finest cells per unit length.
    pub fn finest(&self) -> i32 {
        self.base << (self.levels - 1)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}b{}l", self.base, self.levels)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("grid `{s}` is not of the form <base>b<levels>l"));
        let (base, rest) = s.split_once('b').ok_or_else(bad)?;
        let levels = rest.strip_suffix('l').ok_or_else(bad)?;
        let spec = GridSpec {
            base: base.parse().map_err(|_| bad())?,
            levels: levels.parse().map_err(|_| bad())?,
        };
        if spec.base < 1 || spec.levels < 1 {
            return Err(bad());
        }
        Ok(spec)
    }
}

impl Serialize for GridSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyMode {
    Temporal,
    Spatial,
    Efficiency,
}

impl FromStr for StudyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(StudyMode::Temporal),
            "spatial" => Ok(StudyMode::Spatial),
            "efficiency" => Ok(StudyMode::Efficiency),
            other => Err(Error::Config(format!(
                "unknown study mode `{other}` (known: temporal, spatial, efficiency)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemporalStudy {
    /// Static hierarchy shared by every run.
    pub grid: GridSpec,
    /// Fraction of the x extent refined by each finer level, compounding:
    /// level `l` covers `x < refine_fraction^l`.
    pub refine_fraction: f64,
    pub dts: Vec<f64>,
    pub reference_dt: f64,
    pub sample_times: Vec<f64>,
}

impl Default for TemporalStudy {
    fn default() -> Self {
        Self {
            grid: GridSpec::new(16, 2),
            refine_fraction: 0.5,
            dts: vec![2e-4, 1e-4, 5e-5],
            reference_dt: 2.5e-5,
            sample_times: vec![0.02, 0.05],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpatialStudy {
    /// Cells of the uniform reference slab.
    pub reference_cells: i32,
    /// Adaptive runs.
    pub amr: Vec<GridSpec>,
    /// Uniform runs.
    pub uniform: Vec<i32>,
    pub sample_times: Vec<f64>,
    /// Regridding of the adaptive runs.
    pub regrid: RegridPolicy,
}

impl Default for SpatialStudy {
    fn default() -> Self {
        Self {
            reference_cells: 256,
            amr: (1..=4).map(|l| GridSpec::new(16, l)).collect(),
            uniform: vec![16, 32, 64, 128],
            sample_times: vec![0.02, 0.05],
            regrid: RegridPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EfficiencyStudy {
    pub grids: Vec<GridSpec>,
    pub t_final: f64,
    /// The two-material problem (otherwise z = 1 everywhere).
    pub two_material: bool,
}

impl Default for EfficiencyStudy {
    fn default() -> Self {
        Self {
            grids: vec![
                GridSpec::new(16, 1),
                GridSpec::new(16, 2),
                GridSpec::new(32, 1),
            ],
            t_final: 0.02,
            two_material: true,
        }
    }
}

/// Parameters of every study mode; one TOML document can hold all three.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub temporal: TemporalStudy,
    pub spatial: SpatialStudy,
    pub efficiency: EfficiencyStudy,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Volume-weighted L2 norm of `a - b` over the valid cells, normalised by the
/// domain volume. Both vectors hold one field on `h`.
pub fn l2_difference(h: &PatchHierarchy, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    (h.integrate(&d) / h.domain.volume()).sqrt()
}

/// Cell averages along x of a y,z-independent solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl Profile {
    /// x-profile of one field of a single-level sample, averaged over y and z.
    pub fn from_uniform(h: &PatchHierarchy, field: &[f64]) -> Result<Self> {
        if h.nlevels() != 1 {
            return Err(Error::Config(
                "reference profile needs a single-level run".into(),
            ));
        }
        let n = h.base_resolution();
        let mut sum = vec![0.0; n[0] as usize];
        for (flat, (_, c)) in h.cell_indices().into_iter().enumerate() {
            sum[c[0] as usize] += field[flat];
        }
        let per_column = (n[1] * n[2]) as f64;
        Ok(Self {
            x0: h.domain.lo[0],
            dx: h.level(0).spacing[0],
            values: sum.into_iter().map(|s| s / per_column).collect(),
        })
    }

    /// Average over `[a, a + w)`; the interval must be a whole number of
    /// profile cells.
    pub fn average(&self, a: f64, w: f64) -> Result<f64> {
        let start = (a - self.x0) / self.dx;
        let count = w / self.dx;
        let (i0, n) = (start.round(), count.round());
        if (start - i0).abs() > 1e-6 || (count - n).abs() > 1e-6 || n < 1.0 {
            return Err(Error::Config(format!(
                "cell [{a}, {}) does not align with the reference cells of width {}",
                a + w,
                self.dx
            )));
        }
        let (i0, n) = (i0 as usize, n as usize);
        Ok(self.values[i0..i0 + n].iter().sum::<f64>() / n as f64)
    }
}

/// L2 error of one field of a sample against a reference x-profile.
pub fn l2_error_vs_profile(h: &PatchHierarchy, field: &[f64], reference: &Profile) -> Result<f64> {
    let mut sq = vec![0.0; h.ncells()];
    for (flat, (l, c)) in h.cell_indices().into_iter().enumerate() {
        if !h.valid()[flat] {
            continue;
        }
        let w = h.level(l).spacing[0];
        let a = h.domain.lo[0] + c[0] as f64 * w;
        let d = field[flat] - reference.average(a, w)?;
        sq[flat] = d * d;
    }
    Ok((h.integrate(&sq) / h.domain.volume()).sqrt())
}

/// One row of an error table: errors in E and T at each sample time.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub label: String,
    pub e: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTable {
    pub title: String,
    pub times: Vec<f64>,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn row(&self, label: &str) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Error ratios between consecutive rows, per time, as `(E, T)`.
    pub fn ratios(&self) -> Vec<Vec<(f64, f64)>> {
        self.rows
            .windows(2)
            .map(|w| {
                (0..self.times.len())
                    .map(|k| (w[0].e[k] / w[1].e[k], w[0].t[k] / w[1].t[k]))
                    .collect()
            })
            .collect()
    }
}

impl fmt::Display for ErrorTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.title)?;
        write!(f, "{:>10}", "")?;
        for t in &self.times {
            write!(f, " {:>11} {:>11}", format!("E t={t}"), format!("T t={t}"))?;
        }
        writeln!(f)?;
        for r in &self.rows {
            write!(f, "{:>10}", r.label)?;
            for k in 0..self.times.len() {
                write!(f, " {:>11.3e} {:>11.3e}", r.e[k], r.t[k])?;
            }
            writeln!(f)?;
        }
        let ratios = self.ratios();
        if !ratios.is_empty() {
            writeln!(f, "ratios between consecutive rows (E, T):")?;
            for (w, r) in self.rows.windows(2).zip(&ratios) {
                write!(f, "{:>10}", format!("{}/{}", w[0].label, w[1].label))?;
                for (e, t) in r {
                    write!(f, " {e:>11.3} {t:>11.3}")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// A quantity per (levels, base) pair, laid out with levels down and base
/// resolutions across.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTable {
    pub title: String,
    pub values: BTreeMap<GridSpec, f64>,
}

impl GridTable {
    pub fn get(&self, g: GridSpec) -> Option<f64> {
        self.values.get(&g).copied()
    }
}

impl fmt::Display for GridTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut bases: Vec<i32> = self.values.keys().map(|g| g.base).collect();
        let mut levels: Vec<usize> = self.values.keys().map(|g| g.levels).collect();
        bases.sort_unstable();
        bases.dedup();
        levels.sort_unstable();
        levels.dedup();
        writeln!(f, "{}", self.title)?;
        write!(f, "{:>8}", "levels")?;
        for b in &bases {
            write!(f, " {:>9}", format!("{b}^3"))?;
        }
        writeln!(f)?;
        for l in &levels {
            write!(f, "{l:>8}")?;
            for b in &bases {
                match self.get(GridSpec::new(*b, *l)) {
                    Some(v) if v.fract() == 0.0 => write!(f, " {v:>9}")?,
                    Some(v) => write!(f, " {v:>9.2}")?,
                    None => write!(f, " {:>9}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TemporalResult {
    pub table: ErrorTable,
}

#[derive(Clone, Debug)]
pub struct SpatialResult {
    pub amr: ErrorTable,
    pub uniform: ErrorTable,
    /// Accepted step sizes of the reference, replayed by every other run.
    pub schedule: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EfficiencyResult {
    pub gmres: GridTable,
    pub newton: GridTable,
    pub steps: GridTable,
    pub summaries: Vec<(GridSpec, RunSummary)>,
}

#[derive(Clone, Debug)]
pub enum StudyReport {
    Temporal(TemporalResult),
    Spatial(SpatialResult),
    Efficiency(EfficiencyResult),
}

impl fmt::Display for StudyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StudyReport::Temporal(r) => write!(f, "{}", r.table),
            StudyReport::Spatial(r) => write!(f, "{}\n{}", r.amr, r.uniform),
            StudyReport::Efficiency(r) => {
                write!(f, "{}\n{}\n{}", r.gmres, r.newton, r.steps)?;
                writeln!(f, "\nper run:")?;
                for (g, s) in &r.summaries {
                    writeln!(
                        f,
                        "{:>8}: steps {:>5}  rejected {:>3}  newton {:.3}  gmres {:.3}  final dof fraction {:.4}",
                        g.to_string(),
                        s.accepted_steps,
                        s.rejected_steps,
                        s.avg_newton(),
                        s.avg_gmres(),
                        s.final_dof_fraction
                    )?;
                }
                Ok(())
            }
        }
    }
}

fn sample<'a>(r: &'a RunResult, t: f64, label: &str) -> Result<&'a Sample> {
    r.sample_at(t)
        .ok_or_else(|| Error::Config(format!("run {label} has no sample at t = {t}")))
}

/// Static refinement of the slab: level `l` covers `x < fraction^l`.
fn static_refinement(grid: GridSpec, fraction: f64) -> Result<Vec<Vec<IndexBox>>> {
    let mut boxes = Vec::new();
    for l in 0..grid.levels - 1 {
        // Cells of level l (1 thick at the base, doubling per level in y, z).
        let nx = grid.base << l;
        let nyz = 1 << l;
        let cells = (fraction.powi(l as i32 + 1) * nx as f64).round() as i32;
        if cells < 1 {
            return Err(Error::Config(format!(
                "refine fraction {fraction} leaves level {} empty",
                l + 1
            )));
        }
        boxes.push(vec![IndexBox::new(
            [0, 0, 0],
            [cells - 1, nyz - 1, nyz - 1],
        )]);
    }
    Ok(boxes)
}

fn temporal_config(study: &TemporalStudy, dt: f64) -> Result<RunConfig> {
    let mut cfg = slab(study.grid.base, study.grid.levels);
    cfg.problem.refine_boxes = static_refinement(study.grid, study.refine_fraction)?;
    cfg.regrid.enabled = false;
    cfg.time.fixed_dt = Some(dt);
    cfg.time.t_final = study.sample_times.iter().copied().fold(0.0, f64::max);
    cfg.time.sample_times = study.sample_times.clone();
    cfg.name = format!("{}-dt{dt:e}", study.grid);
    Ok(cfg)
}

pub fn temporal_study(study: &TemporalStudy) -> Result<TemporalResult> {
    if study.sample_times.is_empty() || study.dts.is_empty() {
        return Err(Error::Config(
            "temporal study needs step sizes and sample times".into(),
        ));
    }
    let mut dts = vec![study.reference_dt];
    dts.extend(&study.dts);
    let runs: Vec<RunResult> = dts
        .par_iter()
        .map(|&dt| run_simulation(&temporal_config(study, dt)?, None))
        .collect::<Result<_>>()?;
    let (reference, rest) = runs.split_first().expect("reference run");
    let mut rows = Vec::new();
    for (dt, run) in study.dts.iter().zip(rest) {
        let label = format!("{dt:e}");
        let mut row = ErrorRow {
            label: label.clone(),
            e: Vec::new(),
            t: Vec::new(),
        };
        for &t in &study.sample_times {
            let (s, r) = (sample(run, t, &label)?, sample(reference, t, "reference")?);
            let h = &s.hierarchy;
            row.e.push(l2_difference(h, s.energy(), r.energy()));
            row.t
                .push(l2_difference(h, s.temperature(), r.temperature()));
        }
        rows.push(row);
    }
    Ok(TemporalResult {
        table: ErrorTable {
            title: format!(
                "temporal L2 errors, {} static slab, reference dt = {:e}",
                study.grid, study.reference_dt
            ),
            times: study.sample_times.clone(),
            rows,
        },
    })
}

fn spatial_row(
    run: &RunResult,
    label: String,
    times: &[f64],
    reference: &[(Profile, Profile)],
) -> Result<ErrorRow> {
    let mut row = ErrorRow {
        label,
        e: Vec::new(),
        t: Vec::new(),
    };
    for (&t, (pe, pt)) in times.iter().zip(reference) {
        let s = sample(run, t, &row.label)?;
        row.e
            .push(l2_error_vs_profile(&s.hierarchy, s.energy(), pe)?);
        row.t
            .push(l2_error_vs_profile(&s.hierarchy, s.temperature(), pt)?);
    }
    Ok(row)
}

pub fn spatial_study(study: &SpatialStudy) -> Result<SpatialResult> {
    if study.sample_times.is_empty() {
        return Err(Error::Config("spatial study needs sample times".into()));
    }
    let t_final = study.sample_times.iter().copied().fold(0.0, f64::max);
    let mut cfg = slab(study.reference_cells, 1);
    cfg.name = format!("reference-{}", study.reference_cells);
    cfg.time.t_final = t_final;
    cfg.time.sample_times = study.sample_times.clone();
    let reference = run_simulation(&cfg, None)?;
    let profiles: Vec<(Profile, Profile)> = study
        .sample_times
        .iter()
        .map(|&t| {
            let s = sample(&reference, t, "reference")?;
            Ok((
                Profile::from_uniform(&s.hierarchy, s.energy())?,
                Profile::from_uniform(&s.hierarchy, s.temperature())?,
            ))
        })
        .collect::<Result<_>>()?;
    let schedule = reference.accepted_dts();

    let replay = |grid: GridSpec| -> Result<RunResult> {
        let mut cfg = slab(grid.base, grid.levels);
        cfg.time.t_final = t_final;
        cfg.time.sample_times = study.sample_times.clone();
        cfg.time.dt_schedule = schedule.clone();
        cfg.regrid.policy = study.regrid;
        run_simulation(&cfg, None)
    };
    let mut grids: Vec<GridSpec> = study.amr.clone();
    grids.extend(study.uniform.iter().map(|&n| GridSpec::new(n, 1)));
    let runs: Vec<RunResult> = grids
        .par_iter()
        .map(|&g| replay(g))
        .collect::<Result<_>>()?;
    let (amr_runs, uniform_runs) = runs.split_at(study.amr.len());

    let table = |title: String, specs: &[GridSpec], runs: &[RunResult]| -> Result<ErrorTable> {
        Ok(ErrorTable {
            title,
            times: study.sample_times.clone(),
            rows: specs
                .iter()
                .zip(runs)
                .map(|(g, r)| spatial_row(r, g.to_string(), &study.sample_times, &profiles))
                .collect::<Result<_>>()?,
        })
    };
    Ok(SpatialResult {
        amr: table(
            format!(
                "spatial L2 errors, adaptive slabs vs {}-cell reference",
                study.reference_cells
            ),
            &study.amr,
            amr_runs,
        )?,
        uniform: table(
            format!(
                "spatial L2 errors, uniform slabs vs {}-cell reference",
                study.reference_cells
            ),
            &grids[study.amr.len()..],
            uniform_runs,
        )?,
        schedule,
    })
}

/// The Marshak configuration used for `grid` by the efficiency study.
pub fn efficiency_config(study: &EfficiencyStudy, grid: GridSpec) -> RunConfig {
    let mut cfg = marshak_two_material();
    if !study.two_material {
        cfg.material = crate::discretization::MaterialMap::uniform(1.0);
    }
    cfg.name = grid.to_string();
    cfg.problem.base_resolution = [grid.base; 3];
    cfg.problem.max_levels = grid.levels;
    cfg.time.t_final = study.t_final;
    cfg.time.dump_interval = 0.0;
    cfg.output.snapshots = false;
    cfg
}

pub fn efficiency_study(study: &EfficiencyStudy) -> Result<EfficiencyResult> {
    let summaries: Vec<(GridSpec, RunSummary)> = study
        .grids
        .par_iter()
        .map(|&g| {
            Ok((
                g,
                run_simulation(&efficiency_config(study, g), None)?.summary,
            ))
        })
        .collect::<Result<_>>()?;
    let table = |title: &str, f: &dyn Fn(&RunSummary) -> f64| GridTable {
        title: format!("{title} (t = {})", study.t_final),
        values: summaries.iter().map(|(g, s)| (*g, f(s))).collect(),
    };
    Ok(EfficiencyResult {
        gmres: table("average linear iterations per step", &|s| s.avg_gmres()),
        newton: table("average nonlinear iterations per step", &|s| s.avg_newton()),
        steps: table("total number of timesteps", &|s| s.accepted_steps as f64),
        summaries,
    })
}

pub fn run_study(mode: StudyMode, cfg: &StudyConfig) -> Result<StudyReport> {
    Ok(match mode {
        StudyMode::Temporal => StudyReport::Temporal(temporal_study(&cfg.temporal)?),
        StudyMode::Spatial => StudyReport::Spatial(spatial_study(&cfg.spatial)?),
        StudyMode::Efficiency => StudyReport::Efficiency(efficiency_study(&cfg.efficiency)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    #[test]
    fn grid_specs_parse_and_print() {
        let g: GridSpec = "16b3l".parse().unwrap();
        assert_eq!(g, GridSpec::new(16, 3));
        assert_eq!(g.finest(), 64);
        assert_eq!(g.to_string(), "16b3l");
        for bad in ["16", "b3l", "16b3", "0b1l", "16b0l", "xb2l"] {
            assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn study_config_reads_grid_lists() {
        let cfg = StudyConfig::from_toml(
            "[efficiency]\ngrids = [\"16b2l\", \"32b1l\"]\nt_final = 0.01\n",
        )
        .unwrap();
        assert_eq!(
            cfg.efficiency.grids,
            vec![GridSpec::new(16, 2), GridSpec::new(32, 1)]
        );
        assert_eq!(cfg.temporal, TemporalStudy::default());
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(StudyConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn profile_error_of_an_exact_linear_field_is_zero() {
        // A linear profile averaged onto coarser cells is its cell-center value.
        let fine = PatchHierarchy::uniform(Domain::unit_cube(), [64, 1, 1]).unwrap();
        let p = Profile::from_uniform(&fine, &fine.sample(|x| 1.0 + 2.0 * x[0])).unwrap();
        let boxes = vec![vec![IndexBox::new([4, 0, 0], [9, 1, 1])]];
        let h = PatchHierarchy::build(Domain::unit_cube(), [16, 2, 2], &boxes).unwrap();
        let u = h.sample(|x| 1.0 + 2.0 * x[0]);
        assert!(l2_error_vs_profile(&h, &u, &p).unwrap() < 1e-14);
        // A constant offset of 0.1 has L2 norm 0.1.
        let v: Vec<f64> = u.iter().map(|x| x + 0.1).collect();
        assert!((l2_error_vs_profile(&h, &v, &p).unwrap() - 0.1).abs() < 1e-14);
        // Misaligned reference cells are refused.
        let odd = PatchHierarchy::uniform(Domain::unit_cube(), [48, 1, 1]).unwrap();
        let q = Profile::from_uniform(&odd, &odd.sample(|x| x[0])).unwrap();
        assert!(l2_error_vs_profile(&h, &u, &q).is_err());
    }

    #[test]
    fn l2_difference_weights_by_volume() {
        let boxes = vec![vec![IndexBox::new([0, 0, 0], [3, 7, 7])]];
        let h = PatchHierarchy::build(Domain::unit_cube(), [8, 8, 8], &boxes).unwrap();
        let zero = vec![0.0; h.ncells()];
        // Unit difference on the refined half only: norm sqrt(1/2).
        let d = h.sample(|x| if x[0] < 0.5 { 1.0 } else { 0.0 });
        assert!((l2_difference(&h, &d, &zero) - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn static_refinement_nests() {
        let boxes = static_refinement(GridSpec::new(16, 3), 0.5).unwrap();
        assert_eq!(boxes[0], vec![IndexBox::new([0, 0, 0], [7, 0, 0])]);
        assert_eq!(boxes[1], vec![IndexBox::new([0, 0, 0], [7, 1, 1])]);
        let cfg = slab(16, 3);
        PatchHierarchy::build(cfg.problem.domain, cfg.problem.base_resolution, &boxes).unwrap();
    }
}
