//! Monte-Carlo experiment runner: paired trials over all methods, sweeps
//! over UE power or pilot length, and CSV/SVG emission.

mod config;
mod output;
mod sweep;
mod trial;

pub use config::{ExperimentConfig, Method, SweepKind, SweepSpec, TrialOptions};
pub use output::{
    emit_svg_plot, read_csv, render_svg, write_csv, write_diagnostics, write_per_ue, write_trace,
};
pub use sweep::{run_sweep, Diagnostics, PerUeRecord, SweepOutput, SweepRecord};
pub use trial::{run_trial, run_trial_with, MethodOutcome, TrialBlocks, TrialOutcome, MAX_ATTEMPTS};
