//! Experiment harness: sweep configuration, runs, diagnostics, CSV records
//! and SVG reports.

mod config;
mod diagnostics;
mod records;
mod report;
mod run;

pub use config::{default_pgd_for, parse_lambda_grid, SweepConfig, DEFAULT_LAMBDAS, INNER_PRODUCT_CAP};
pub use diagnostics::{
    gradient_check, gradient_check_detailed, sharpness_certificate, GradientCheck, GRADCHECK_RELATIVE_FLOOR,
};
pub use records::{read_records, records_to_csv, write_records, RunRecord, RunStatus, CSV_HEADER};
pub use report::{
    prob_lowrank_svg, rank_traces_svg, render_report, LambdaSummary, RankTrace, ReportSummary, TRACE_SEEDS,
};
pub use run::{replicate_seed, run_single, run_single_detailed, scenario_id, splitmix64, sweep, RunOutcome};
