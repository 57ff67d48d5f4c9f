//! Benchmark campaigns: scenario configs, seeded trial runs, reports and
//! the establishment-time ordering check.

mod config;
mod report;
mod runner;

pub use config::{
    load_config, preset, preset_names, preset_source, CostPreset, CostSpec, LinkOverride, ScenarioConfig, SCHEMA_VERSION,
};
pub use report::{
    check_ordering, check_reference_ordering, emit_report, summarize, OrderingCheck, ProtocolSummary, ReferenceRow,
    ReportFormat, CSV_COLUMNS, REFERENCE_ROWS,
};
pub use runner::{
    datagram_transmissions, run_benchmark, run_campaign, run_trial, testbed_ids, transcripts_json_lines, MeasurementRecord,
    TrialRun,
};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("summary lacks {}", .0.join(", "))]
    IncompleteSummary(Vec<String>),
    #[error("report: {0}")]
    Report(String),
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Report(e.to_string())
    }
}

#[cfg(test)]
mod tests;
