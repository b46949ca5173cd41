//! Experiment orchestration: multi-seed runs, controlled comparisons, the
//! theory baseline and report files.

pub mod config;
pub mod experiment;
pub mod report;
pub mod stats;

pub use config::{ExperimentConfig, Method, PreExploreSettings};
pub use experiment::{
    load_or_generate, run_ablations, run_experiment, run_methods, theory_baseline, ExperimentReport,
    MethodOutcome, MethodSummary, RunSeeds, ReferenceValues, RunRecord, RunRmse, Stage1Metrics, Stage1Summary,
    TheoryBaseline, REFERENCE_LABEL,
};
pub use report::{emit_report, load_report, summary_table, BOXPLOT_CSV, REPORT_JSON, RMSE_RUNS_CSV};
pub use stats::{median, quantile_sorted, BoxStats};
