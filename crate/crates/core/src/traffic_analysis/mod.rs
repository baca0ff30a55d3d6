//! Measurement artifacts over DNS capture logs: per-selection domain sets,
//! when they stop growing, how much they overlap across locations, and how
//! domain and address counts grow over time.

mod capture;
mod metrics;
mod pools;

use thiserror::Error;

use crate::geo_zone::RegionCode;

pub use capture::{ingest_log, parse_log, CaptureLog, CaptureRecord};
pub use metrics::{
    cumulative_counts, domain_set, ipbs, jaccard, jaccard_sets, matrix_csv, ratio_to_decimal,
    series_csv, similarity_matrix, stabilization_time, uds, Analyzer, CumulativePoint,
    Similarity,
};
pub use pools::{collapse_pools, DomainSet, Member, DEFAULT_POOL_THRESHOLD};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("device {0:?} does not appear in the log")]
    UnknownDevice(String),
    #[error("no records for device {device:?} at ip location {ip_location}, user location {user_location}")]
    EmptySelection {
        device: String,
        ip_location: RegionCode,
        user_location: RegionCode,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0}")]
    Io(String),
}
