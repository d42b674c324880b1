//! JSON error bodies. Every failure becomes `{code, message}`; storage
//! failures are logged in full and reported without detail.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use fgis_core::analysis::AnalysisError;
use fgis_core::importer::{ImportError, UnknownFormat};
use fgis_core::ingest::IngestError;
use fgis_core::spatial::SpatialError;
use fgis_core::store::StoreError;
use fgis_core::tiles::TileError;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", message)
    }

    fn internal(code: &'static str, detail: &dyn std::fmt::Display) -> Self {
        tracing::error!(code, "{detail}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, code, "internal storage failure; see the server log")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body { code: self.code, message: &self.message };
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            _ if e.is_not_found() => ApiError::new(StatusCode::NOT_FOUND, e.code(), e.to_string()),
            StoreError::DuplicateId { .. } => ApiError::new(StatusCode::CONFLICT, e.code(), e.to_string()),
            StoreError::InvalidId(_) | StoreError::InvalidRecord(_) => ApiError::bad_request(e.code(), e.to_string()),
            _ => ApiError::internal(e.code(), &e),
        }
    }
}

impl From<TileError> for ApiError {
    fn from(e: TileError) -> Self {
        match &e {
            TileError::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, e.code(), e.to_string()),
            TileError::ZoomOutOfRange { .. } => ApiError::bad_request(e.code(), e.to_string()),
            _ => ApiError::internal(e.code(), &e),
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        ApiError::bad_request(e.code(), e.to_string())
    }
}

impl From<ImportError> for ApiError {
    fn from(e: ImportError) -> Self {
        match e {
            ImportError::Ingest(e) => e.into(),
            ImportError::Store(e) => e.into(),
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        ApiError::bad_request(e.code(), e.to_string())
    }
}

impl From<SpatialError> for ApiError {
    fn from(e: SpatialError) -> Self {
        ApiError::bad_request("InvalidCoordinate", e.to_string())
    }
}

impl From<UnknownFormat> for ApiError {
    fn from(e: UnknownFormat) -> Self {
        ApiError::bad_request(
            "UnknownFormat",
            format!("{e}; expected one of gpx, kml, gml, geojson, wifi, anpr, bt, camera"),
        )
    }
}
