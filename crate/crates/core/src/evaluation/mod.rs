//! Nested leave-one-out evaluation, balanced accuracy and report tables.

mod experiment;
mod loocv;
mod metrics;
mod report;

pub use experiment::{
    build_features, read_index, run_experiment_matrix, write_index, Cell, CellAudit, CellResult,
    Dataset, ExperimentConfig, ExperimentOutput, FeatureSource, IndexEntry, ModelSpec,
};
pub use loocv::{
    nested_loocv, AuditRecord, EvalReport, HyperGrid, Learner, LoocvRun, OuterPrediction,
    ReportFingerprint, Stage, TieBreak, C_GRID,
};
pub use metrics::{balanced_accuracy, Confusion};
pub use report::{read_results, render_csv, render_text, write_audit_jsonl, write_reports};
