use thiserror::Error;

use crate::mesh::IndexBox;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("refine box {bx} on level {level} is not properly nested in level {}", level - 1)]
    NotNested { level: usize, bx: IndexBox },

    #[error("refine box {bx} on level {level} is not aligned to the refinement ratio")]
    Misaligned { level: usize, bx: IndexBox },

    #[error("patches {a} and {b} overlap on level {level}")]
    Overlap {
        level: usize,
        a: IndexBox,
        b: IndexBox,
    },

    #[error("ghost cell {cell:?} on level {level} has no donor data")]
    MissingDonor { level: usize, cell: [i32; 3] },

    #[error("non-positive {field} = {value:e} at cell {cell:?} on level {level}")]
    Positivity {
        field: &'static str,
        value: f64,
        level: usize,
        cell: [i32; 3],
    },

    #[error("non-positive temperature {0:e} passed to the opacity law")]
    Domain(f64),

    #[error("singular 2x2 block (det = {det:e}) at cell {cell:?} on level {level}")]
    SingularBlock {
        det: f64,
        level: usize,
        cell: [i32; 3],
    },

    #[error("zero diagonal in level operator at level-local cell {0}")]
    ZeroDiagonal(usize),

    #[error(
        "residual evaluation failed at the perturbed point (eps = {eps:e}, branch = {branch:?}): {source}"
    )]
    Perturbation {
        eps: f64,
        branch: crate::jfnk::EpsilonBranch,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "Newton did not converge in {iters} iterations (|F| = {residual:e}, target {target:e})"
    )]
    NewtonDiverged {
        iters: usize,
        residual: f64,
        target: f64,
    },

    #[error("positivity damping collapsed (lambda = {0:e})")]
    DampingCollapse(f64),

    #[error("step-size collapse: dt = {dt:e} below dt_min = {dt_min:e} at t = {t}")]
    StepCollapse { dt: f64, dt_min: f64, t: f64 },

    #[error("reference data missing: {0}")]
    MissingReference(String),

    #[error("snapshot parse error at line {line}: {msg}")]
    Snapshot { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
