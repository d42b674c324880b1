use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use fgis_core::analysis::{
    correlate_bt_anpr, detect_stops, diff_scans, parse_bssid_query, presence_report, search_bssid, timeline_slice,
    AssociationScore, CorrelationParams, PresenceEvidence, ScanDiff, SightedObservation, StopParams, StopSegment,
};
use fgis_core::evidence::{CameraCategory, CameraRecord, GpsTrack, Timestamp, WifiScan};
use fgis_core::importer::{import_bytes, ImportFormat, ImportRequest, ImportSummary};
use fgis_core::ingest::{export_geojson, parse_utc, ImportMode, MacAddress};
use fgis_core::spatial::{GeoPoint, TileCoord};
use fgis_core::store::{CameraHit, CaseRecord, LayerInfo};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::extract::{Json, Path, Query};
use crate::AppState;

type ApiResult<T> = Result<T, ApiError>;
type JsonOut<T> = axum::Json<T>;

fn strip_ext<'a>(segment: &'a str, ext: &str) -> &'a str {
    segment.strip_suffix(ext).unwrap_or(segment)
}

fn parse_tile_part<N: std::str::FromStr>(name: &str, s: &str) -> ApiResult<N> {
    s.parse().map_err(|_| ApiError::bad_request("InvalidParameters", format!("tile {name} {s:?} is not a non-negative integer")))
}

pub async fn tile(State(st): State<AppState>, Path((z, x, y)): Path<(String, String, String)>) -> ApiResult<Response> {
    let Some(y) = y.strip_suffix(".png") else {
        return Err(ApiError::not_found(format!("no route for tile {z}/{x}/{y}")));
    };
    let z: u8 = parse_tile_part("z", &z)?;
    let x: u32 = parse_tile_part("x", &x)?;
    let y: u32 = parse_tile_part("y", y)?;
    let m = st.tiles.manifest();
    if z < m.min_zoom || z > m.max_zoom {
        return Err(fgis_core::tiles::TileError::ZoomOutOfRange { z, min: m.min_zoom, max: m.max_zoom }.into());
    }
    let t = TileCoord::new(z, x, y)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "NotFound", e.to_string()))?;
    let bytes = st.tiles.get_tile(t)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], Bytes::from_owner(bytes)).into_response())
}

#[derive(Serialize)]
pub struct Health {
    status: &'static str,
    tile_count: u64,
    case_count: usize,
    version: &'static str,
}

pub async fn health(State(st): State<AppState>) -> JsonOut<Health> {
    axum::Json(Health {
        status: "ok",
        tile_count: st.tiles.manifest().tile_count,
        case_count: st.store.snapshot().case_count(),
        version: env!("CARGO_PKG_VERSION"),
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", format!("worker failed: {e}")))?
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewCase {
    name: String,
}

pub async fn create_case(State(st): State<AppState>, Json(req): Json<NewCase>) -> ApiResult<(StatusCode, JsonOut<CaseRecord>)> {
    let rec = blocking(move || Ok(st.store.create_case(&req.name)?)).await?;
    Ok((StatusCode::CREATED, axum::Json(rec)))
}

pub async fn list_cases(State(st): State<AppState>) -> JsonOut<Vec<CaseRecord>> {
    axum::Json(st.store.snapshot().cases())
}

pub async fn get_case(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<JsonOut<CaseRecord>> {
    Ok(axum::Json(st.store.snapshot().case(&id)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportParams {
    format: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    lenient: Option<bool>,
    /// Original file name, kept as provenance.
    #[serde(default)]
    filename: Option<String>,
}

pub async fn import(
    State(st): State<AppState>,
    Path(case_id): Path<String>,
    Query(p): Query<ImportParams>,
    body: Bytes,
) -> ApiResult<(StatusCode, JsonOut<ImportSummary>)> {
    let format: ImportFormat = p.format.parse()?;
    let mode = if p.lenient.unwrap_or(st.lenient_import) { ImportMode::Lenient } else { ImportMode::Strict };
    let label = p.label.unwrap_or_else(|| format.to_string());
    let source_name = p.filename.unwrap_or_else(|| label.clone());
    let summary = blocking(move || {
        let req = ImportRequest { case_id: &case_id, format, label: &label, source_name: &source_name, mode };
        Ok(import_bytes(&st.store, &req, &body)?)
    })
    .await?;
    Ok((StatusCode::CREATED, axum::Json(summary)))
}

pub async fn list_layers(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<JsonOut<Vec<LayerInfo>>> {
    Ok(axum::Json(st.store.snapshot().list_layers(&id)?))
}

pub async fn get_layer(State(st): State<AppState>, Path((id, lid)): Path<(String, String)>) -> ApiResult<Response> {
    let layer = st.store.snapshot().get_layer(&id, strip_ext(&lid, ".geojson"))?;
    Ok(([(header::CONTENT_TYPE, "application/geo+json")], export_geojson(&layer)).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraQuery {
    lat: f64,
    lon: f64,
    radius_m: f64,
    #[serde(default)]
    exclude: Option<String>,
}

pub async fn query_cameras(State(st): State<AppState>, Query(q): Query<CameraQuery>) -> ApiResult<JsonOut<Vec<CameraHit>>> {
    let center = GeoPoint::new(q.lat, q.lon)?;
    if !(q.radius_m.is_finite() && q.radius_m >= 0.0) {
        return Err(ApiError::bad_request("InvalidParameters", format!("radius_m must be a finite number >= 0, got {}", q.radius_m)));
    }
    let excluded = q
        .exclude
        .iter()
        .flat_map(|s| s.split(','))
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<CameraCategory>())
        .collect::<Result<BTreeSet<_>, _>>()
        .map_err(|e| ApiError::bad_request("InvalidParameters", e))?;
    Ok(axum::Json(st.store.snapshot().query_cameras(center, q.radius_m, &excluded)))
}

pub async fn get_camera(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<JsonOut<CameraRecord>> {
    Ok(axum::Json(st.store.snapshot().get_camera(&id)?.clone()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFilter {
    #[serde(default)]
    case: Option<String>,
}

#[derive(Serialize)]
pub struct ScanSummary {
    scan_id: String,
    label: String,
    captured_from: Option<Timestamp>,
    captured_to: Option<Timestamp>,
    observation_count: usize,
}

pub async fn list_scans(State(st): State<AppState>, Query(f): Query<CaseFilter>) -> ApiResult<JsonOut<Vec<ScanSummary>>> {
    let scans = st.store.snapshot().list_scans(f.case.as_deref())?;
    Ok(axum::Json(
        scans
            .iter()
            .map(|s| ScanSummary {
                scan_id: s.scan_id.clone(),
                label: s.label.clone(),
                captured_from: s.captured_from,
                captured_to: s.captured_to,
                observation_count: s.observations.len(),
            })
            .collect(),
    ))
}

pub async fn get_scan(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let scan: Arc<WifiScan> = st.store.snapshot().get_scan(&id)?;
    Ok(axum::Json(&*scan).into_response())
}

#[derive(Serialize)]
pub struct TrackSummary {
    track_id: String,
    label: String,
    start: Option<Timestamp>,
    end: Option<Timestamp>,
    point_count: usize,
}

pub async fn list_tracks(State(st): State<AppState>, Query(f): Query<CaseFilter>) -> ApiResult<JsonOut<Vec<TrackSummary>>> {
    let tracks = st.store.snapshot().list_tracks(f.case.as_deref())?;
    Ok(axum::Json(
        tracks
            .iter()
            .map(|t| TrackSummary {
                track_id: t.track_id.clone(),
                label: t.label.clone(),
                start: t.points.first().map(|p| p.timestamp),
                end: t.points.last().map(|p| p.timestamp),
                point_count: t.points.len(),
            })
            .collect(),
    ))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceParams {
    #[serde(default)]
    from: Option<String>,
    #[serde(default)]
    to: Option<String>,
}

fn parse_bound(name: &str, v: Option<&str>) -> ApiResult<Option<Timestamp>> {
    v.map(|s| {
        parse_utc(s).map_err(|_| {
            ApiError::bad_request("InvalidTimestamp", format!("{name} {s:?} is not an RFC 3339 timestamp with a UTC offset"))
        })
    })
    .transpose()
}

pub async fn get_track(State(st): State<AppState>, Path(id): Path<String>, Query(p): Query<SliceParams>) -> ApiResult<JsonOut<GpsTrack>> {
    let from = parse_bound("from", p.from.as_deref())?;
    let to = parse_bound("to", p.to.as_deref())?;
    let track = st.store.snapshot().get_track(&id)?;
    Ok(axum::Json(timeline_slice(&track, from, to)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanDiffRequest {
    scan_a: String,
    scan_b: String,
}

pub async fn scan_diff(State(st): State<AppState>, Json(r): Json<ScanDiffRequest>) -> ApiResult<JsonOut<ScanDiff>> {
    let snap = st.store.snapshot();
    let a = snap.get_scan(&r.scan_a)?;
    let b = snap.get_scan(&r.scan_b)?;
    Ok(axum::Json(diff_scans(&a, &b)))
}

pub async fn bssid_search(
    State(st): State<AppState>,
    Path(query): Path<String>,
    Query(f): Query<CaseFilter>,
) -> ApiResult<JsonOut<Vec<SightedObservation>>> {
    let q = parse_bssid_query(&query)?;
    let scans = st.store.snapshot().list_scans(f.case.as_deref())?;
    Ok(axum::Json(search_bssid(&q, scans.iter().map(|s| s.as_ref()))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresenceRequest {
    bssids: Vec<String>,
    #[serde(default)]
    case: Option<String>,
}

pub async fn presence(State(st): State<AppState>, Json(r): Json<PresenceRequest>) -> ApiResult<JsonOut<Vec<PresenceEvidence>>> {
    let known = r
        .bssids
        .iter()
        .map(|s| s.parse::<MacAddress>().map_err(|e| ApiError::bad_request("InvalidParameters", format!("bssid {s:?}: {e}"))))
        .collect::<ApiResult<BTreeSet<_>>>()?;
    let scans = st.store.snapshot().list_scans(r.case.as_deref())?;
    Ok(axum::Json(presence_report(&known, scans.iter().map(|s| s.as_ref()))?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateRequest {
    #[serde(default, alias = "delta_t_s", alias = "Δt_s")]
    dt_s: Option<f64>,
    #[serde(default)]
    d_m: Option<f64>,
    #[serde(default)]
    case: Option<String>,
}

pub async fn correlate(State(st): State<AppState>, Json(r): Json<CorrelateRequest>) -> ApiResult<JsonOut<Vec<AssociationScore>>> {
    let d = CorrelationParams::default();
    let params = CorrelationParams { dt_s: r.dt_s.unwrap_or(d.dt_s), d_m: r.d_m.unwrap_or(d.d_m) };
    params.validate()?;
    let snap = st.store.snapshot();
    let bt = snap.bt_detections(r.case.as_deref())?;
    let anpr = snap.anpr_detections(r.case.as_deref())?;
    let scores = blocking(move || Ok(correlate_bt_anpr(&bt, &anpr, params)?)).await?;
    Ok(axum::Json(scores))
}

#[derive(Deserialize)]
pub struct StopsRequest {
    track_id: String,
    #[serde(flatten)]
    params: StopParams,
}

pub async fn stops(State(st): State<AppState>, Json(r): Json<StopsRequest>) -> ApiResult<JsonOut<Vec<StopSegment>>> {
    let track = st.store.snapshot().get_track(&r.track_id)?;
    Ok(axum::Json(detect_stops(&track, r.params)?))
}

const PLACEHOLDER: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>fgis</title></head>\n<body><h1>fgis</h1><p>No web UI is installed. Set <code>static_dir</code> to serve one. The JSON API is available under this origin.</p></body></html>\n";

pub async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER)
}

pub async fn no_route() -> ApiError {
    ApiError::not_found("no such route")
}

pub async fn wrong_method() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", "method not allowed for this route")
}
