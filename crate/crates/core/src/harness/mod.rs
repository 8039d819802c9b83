//! Experiment configuration, sweeps and CSV/SVG output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod sweep;

pub use config::{ExperimentConfig, HyperMode, ResolvedExperiment};
pub use experiment::{
    comm_rounds_to_target, iterations_to_target, run_and_write, run_experiment, run_resolved,
    ExperimentResult, SeedRun,
};
pub use output::{emit_svg_lines, svg_lines, ChartOptions, Series, SummaryRow, TraceMeta};
pub use sweep::{communication_sweep, speedup_sweep, Stat, SweepAxis, SweepCell, SweepResult};
