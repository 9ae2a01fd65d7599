//! Click-correlation evaluation: URL datasets, outlier removal, accumulated
//! scores, audience correction and Pearson correlation with weekly averaging.

mod dataset;
mod iqr;
mod report;
mod stats;

pub use dataset::{build_url_datasets, load_clicks, DatasetStats, UrlDatasets, UrlRecord};
pub use iqr::{iqr_filter, quartiles, Grouping, IqrOutcome, QuartileRule};
pub use report::{
    accumulate, audience_confound_report, audience_correct, correlate_corrected, correlate_uncorrected,
    correlate_weekly, flavor_boundary, write_report_table, write_report_tsv, CorrelationReport,
    ReportSection, VelocityFlavor, WeekCorrelation,
};
pub use stats::{average_weekly_r, pearson, p_value, Correlation, WeeklyAverage};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("need at least {need} paired samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("week {week}: |r| = 1 has no finite Fisher z")]
    InfiniteZ { week: usize },
    #[error("no weeks to average")]
    NoWeeks,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("clicks table line {line}: {reason}")]
    ClicksFormat { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e.to_string())
    }
}
