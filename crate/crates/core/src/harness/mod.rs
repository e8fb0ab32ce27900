//! Experiment driver: configs and fault plans in, waste breakdowns and CSV
//! rows out.

mod compare;
mod config;
mod plan;
mod report;
mod run;

pub use compare::{compare_strategies, render_comparison, StrategyComparison};
pub use config::{ExperimentConfig, PlanSpec, ProblemSpec};
pub use plan::{load_fault_plan, random_ranks, worst_case_shrink, worst_case_substitute, PlanPreset, PresetSpec};
pub use report::{
    compute_waste, csv_string, emit_csv, parse_csv, write_csv, OverheadBreakdown, ResultRow, RunStatus, CSV_HEADER,
};
pub use run::{execute, load_configs, run_baseline, run_detailed, run_experiment, run_sweep, RunRecord};
