//! Simulation driver: configuration, presets, the time loop, artefacts and
//! convergence studies.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;
pub mod study;

pub use config::{OutputConfig, ProblemConfig, RegridConfig, RunConfig, SolverConfig, TimeConfig};
pub use output::OutputSink;
pub use presets::{preset, PRESET_NAMES};
pub use run::{
    initial_state, run_simulation, RegridRecord, RestartKind, RunResult, RunSummary, Sample,
    StepDecision, StepRecord,
};
pub use study::{
    efficiency_study, run_study, spatial_study, temporal_study, EfficiencyStudy, ErrorTable,
    GridSpec, GridTable, SpatialStudy, StudyConfig, StudyMode, StudyReport, TemporalStudy,
};
