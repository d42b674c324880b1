//! Investigative computations over immutable evidence.
//!
//! Everything here is a pure function of its arguments. List outputs have a
//! total order so that two runs over the same evidence produce byte-identical
//! reports.

mod correlate;
mod stops;
mod wifi;

use thiserror::Error;

use crate::evidence::Timestamp;

pub use correlate::{co_occur, correlate_bt_anpr, AssociationScore, CorrelationParams};
pub use stops::{detect_stops, timeline_slice, StopParams, StopSegment};
pub use wifi::{diff_scans, parse_bssid_query, presence_report, search_bssid, PresenceEvidence, ScanDiff, SightedObservation, SsidChange};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("malformed query {0:?}: expected a MAC address or a 3-octet prefix")]
    MalformedQuery(String),
}

impl AnalysisError {
    pub fn code(&self) -> &'static str {
        match self {
            AnalysisError::InvalidParameters(_) => "InvalidParameters",
            AnalysisError::MalformedQuery(_) => "MalformedQuery",
        }
    }
}

/// Signed `a - b` in seconds, with sub-second precision.
pub(crate) fn seconds_between(a: Timestamp, b: Timestamp) -> f64 {
    (a.timestamp() - b.timestamp()) as f64
        + (a.timestamp_subsec_nanos() as f64 - b.timestamp_subsec_nanos() as f64) * 1e-9
}
