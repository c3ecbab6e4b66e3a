//! The experiment harness: configuration, execution, and rendering.
//!
//! A run goes through three stages:
//!
//! 1. [`config`] resolves an [`ExperimentConfig`]
//!    from a preset, an optional flat key=value config file, and CLI
//!    overrides (`preset < file < CLI`).
//! 2. [`runner`] executes every replication and agent, producing a
//!    [`RunResult`] that is a pure function of the
//!    configuration.
//! 3. [`output`] renders the table (CSV or JSON), the aggregate summary,
//!    and the metadata sidecar.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{
    parse_agent_list, AgentChoice, ExperimentConfig, ExperimentId, OutputFormat, Overrides,
    DEFAULT_SEED, SENSITIVITY_GRID,
};
pub use output::{fmt_sig, render_summary, summarize, to_csv, to_json, AgentSummary, CSV_HEADER};
pub use runner::{run_experiment, PdProjection, RunMetadata, RunResult, StepRow};
