//! Exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | findings or rejected input (tile violations, unparseable evidence) |
//! | 2 | invalid arguments or configuration |
//! | 3 | referenced entity or file not found |
//! | 4 | storage failure |

use fgis_core::analysis::AnalysisError;
use fgis_core::importer::{ImportError, UnknownFormat};
use fgis_core::ingest::IngestError;
use fgis_core::spatial::SpatialError;
use fgis_core::store::StoreError;
use fgis_core::synthetic::SyntheticError;
use fgis_core::tiles::TileError;
use fgis_server::{ConfigError, ServeError};

pub const FINDINGS: u8 = 1;
pub const INVALID: u8 = 2;
pub const NOT_FOUND: u8 = 3;
pub const STORAGE: u8 = 4;

/// An error that already knows its exit code.
#[derive(Debug)]
pub struct Coded(pub u8, pub String);

impl std::fmt::Display for Coded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Coded {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Coded(INVALID, msg.into()).into()
}

fn store(e: &StoreError) -> u8 {
    match e {
        _ if e.is_not_found() => NOT_FOUND,
        StoreError::InvalidId(_) | StoreError::InvalidRecord(_) => INVALID,
        StoreError::DuplicateId { .. } => FINDINGS,
        StoreError::Corrupt { .. } | StoreError::Io { .. } => STORAGE,
        _ => STORAGE,
    }
}

fn tiles(e: &TileError) -> u8 {
    match e {
        TileError::MissingManifest | TileError::CorruptManifest(_) | TileError::ZoomOutOfRange { .. } => INVALID,
        TileError::NotFound(_) => NOT_FOUND,
        TileError::Io(_) => STORAGE,
    }
}

pub fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<Coded>() {
            return c.0;
        }
        if let Some(e) = cause.downcast_ref::<StoreError>() {
            return store(e);
        }
        if let Some(e) = cause.downcast_ref::<ImportError>() {
            return match e {
                ImportError::Ingest(_) => FINDINGS,
                ImportError::Store(e) => store(e),
            };
        }
        if cause.is::<IngestError>() {
            return FINDINGS;
        }
        if let Some(e) = cause.downcast_ref::<TileError>() {
            return tiles(e);
        }
        if let Some(e) = cause.downcast_ref::<ServeError>() {
            return match e {
                ServeError::Config(_) => INVALID,
                ServeError::Tiles(e) => tiles(e),
                ServeError::Store(e) => store(e),
                ServeError::Bind { .. } | ServeError::Io(_) => STORAGE,
            };
        }
        if let Some(e) = cause.downcast_ref::<ConfigError>() {
            return match e {
                ConfigError::Read { source, .. } if source.kind() == std::io::ErrorKind::NotFound => NOT_FOUND,
                _ => INVALID,
            };
        }
        if let Some(e) = cause.downcast_ref::<SyntheticError>() {
            return match e {
                SyntheticError::InvalidSpec(_) => INVALID,
                _ => STORAGE,
            };
        }
        if cause.is::<AnalysisError>() || cause.is::<UnknownFormat>() || cause.is::<SpatialError>() {
            return INVALID;
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            return if e.kind() == std::io::ErrorKind::NotFound { NOT_FOUND } else { STORAGE };
        }
    }
    FINDINGS
}
