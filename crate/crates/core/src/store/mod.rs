//! Case-scoped evidence persistence.
//!
//! On-disk layout under the store root:
//!
//! ```text
//! cameras.jsonl                      camera registry, upserts replayed in order
//! cases/<case_id>/manifest.json      case record, layer list, scan/track ids, import log
//! cases/<case_id>/layers/<id>.geojson
//! cases/<case_id>/scans/<id>.jsonl   header line, then one observation per line
//! cases/<case_id>/tracks/<id>.jsonl  header line, then one fix per line
//! cases/<case_id>/detections_bt.jsonl
//! cases/<case_id>/detections_anpr.jsonl
//! ```
//!
//! Every file is replaced by write-temp-then-rename. Entity files are
//! written before the manifest that references them, so the manifest rename
//! is the commit point and an interrupted write leaves the previous state.
//! Writers are serialized; readers take an immutable [`Snapshot`].

mod fsio;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidence::{
    AnprDetection, BtDetection, CameraCategory, CameraRecord, GpsTrack, Timestamp, TrackPoint,
    WifiObservation, WifiScan,
};
use crate::ingest::{
    export_geojson_with, parse_geojson_with_provenance, CoordinatePrecision, FeatureSet,
    Provenance, SourceFormat,
};
use crate::spatial::{haversine_distance, GeoPoint, GridIndex, DEFAULT_CELL_SIZE_DEG};

use fsio::{display_name, parse_jsonl, read_optional, to_jsonl, write_atomic, TMP_MARKER};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown case {0:?}")]
    UnknownCase(String),
    #[error("unknown layer {0:?}")]
    UnknownLayer(String),
    #[error("unknown camera {0:?}")]
    UnknownCamera(String),
    #[error("unknown scan {0:?}")]
    UnknownScan(String),
    #[error("unknown track {0:?}")]
    UnknownTrack(String),
    #[error("{kind} id {id:?} already exists")]
    DuplicateId { kind: &'static str, id: String },
    #[error("invalid id {0:?}: use letters, digits, '-' or '_' (at most 64)")]
    InvalidId(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("corrupt store file {file}: {message}")]
    Corrupt { file: String, message: String },
    #[error("storage I/O failure during {context}: {source}")]
    Io {
        context: &'static str,
        #[source]
        source: std::io::Error,
    },
}

impl StoreError {
    fn io(context: &'static str, source: std::io::Error) -> Self {
        StoreError::Io { context, source }
    }

    pub fn code(&self) -> &'static str {
        match self {
            StoreError::UnknownCase(_) => "UnknownCase",
            StoreError::UnknownLayer(_) => "UnknownLayer",
            StoreError::UnknownCamera(_) => "UnknownCamera",
            StoreError::UnknownScan(_) => "UnknownScan",
            StoreError::UnknownTrack(_) => "UnknownTrack",
            StoreError::DuplicateId { .. } => "DuplicateId",
            StoreError::InvalidId(_) => "InvalidId",
            StoreError::InvalidRecord(_) => "InvalidRecord",
            StoreError::Corrupt { .. } => "CorruptStore",
            StoreError::Io { .. } => "StorageError",
        }
    }

    pub fn is_not_found(&self) -> bool {
        matches!(
            self,
            StoreError::UnknownCase(_)
                | StoreError::UnknownLayer(_)
                | StoreError::UnknownCamera(_)
                | StoreError::UnknownScan(_)
                | StoreError::UnknownTrack(_)
        )
    }
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub name: String,
    pub created_at: Timestamp,
    pub layer_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerInfo {
    pub layer_id: String,
    pub label: String,
    pub source_name: String,
    pub source_format: SourceFormat,
    pub feature_count: usize,
    pub skipped_count: usize,
    pub content_sha256: String,
    pub import_time: Timestamp,
}

/// One entry of a case's import log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportRecord {
    pub format: String,
    pub label: String,
    pub content_sha256: String,
    pub imported_at: Timestamp,
    pub records: usize,
    pub skipped_rows: usize,
    #[serde(default)]
    pub created_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CaseManifest {
    case_id: String,
    name: String,
    created_at: Timestamp,
    layers: Vec<LayerInfo>,
    scan_ids: Vec<String>,
    track_ids: Vec<String>,
    #[serde(default)]
    imports: Vec<ImportRecord>,
}

#[derive(Serialize, Deserialize)]
struct ScanHeader {
    scan_id: String,
    label: String,
    captured_from: Option<Timestamp>,
    captured_to: Option<Timestamp>,
}

#[derive(Serialize, Deserialize)]
struct TrackHeader {
    track_id: String,
    label: String,
}

#[derive(Debug, Clone)]
struct CaseData {
    manifest: CaseManifest,
    layers: BTreeMap<String, Arc<FeatureSet>>,
    scans: BTreeMap<String, Arc<WifiScan>>,
    tracks: BTreeMap<String, Arc<GpsTrack>>,
    bt: Arc<Vec<BtDetection>>,
    anpr: Arc<Vec<AnprDetection>>,
}

impl CaseData {
    fn record(&self) -> CaseRecord {
        CaseRecord {
            case_id: self.manifest.case_id.clone(),
            name: self.manifest.name.clone(),
            created_at: self.manifest.created_at,
            layer_ids: self.manifest.layers.iter().map(|l| l.layer_id.clone()).collect(),
        }
    }
}

/// A camera inside a radius query, with its distance to the query center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CameraHit {
    pub camera: CameraRecord,
    pub distance_m: f64,
}

#[derive(Debug)]
struct CameraIndex {
    grid: GridIndex,
    ids: Vec<String>,
}

/// Immutable view of the whole store at one instant.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    cases: Vec<Arc<CaseData>>,
    cameras: Arc<BTreeMap<String, CameraRecord>>,
    camera_index: Arc<OnceLock<CameraIndex>>,
}

impl Snapshot {
    fn case_data(&self, case_id: &str) -> Result<&Arc<CaseData>> {
        self.cases
            .iter()
            .find(|c| c.manifest.case_id == case_id)
            .ok_or_else(|| StoreError::UnknownCase(case_id.to_string()))
    }

    fn scoped(&self, case_id: Option<&str>) -> Result<Vec<&Arc<CaseData>>> {
        match case_id {
            Some(id) => Ok(vec![self.case_data(id)?]),
            None => Ok(self.cases.iter().collect()),
        }
    }

    /// Cases in creation order.
    pub fn cases(&self) -> Vec<CaseRecord> {
        self.cases.iter().map(|c| c.record()).collect()
    }

    pub fn case(&self, case_id: &str) -> Result<CaseRecord> {
        self.case_data(case_id).map(|c| c.record())
    }

    pub fn case_count(&self) -> usize {
        self.cases.len()
    }

    /// Layers of a case in insertion order.
    pub fn list_layers(&self, case_id: &str) -> Result<Vec<LayerInfo>> {
        Ok(self.case_data(case_id)?.manifest.layers.clone())
    }

    pub fn get_layer(&self, case_id: &str, layer_id: &str) -> Result<Arc<FeatureSet>> {
        self.case_data(case_id)?
            .layers
            .get(layer_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownLayer(layer_id.to_string()))
    }

    pub fn imports(&self, case_id: &str) -> Result<Vec<ImportRecord>> {
        Ok(self.case_data(case_id)?.manifest.imports.clone())
    }

    pub fn get_camera(&self, camera_id: &str) -> Result<&CameraRecord> {
        self.cameras
            .get(camera_id)
            .ok_or_else(|| StoreError::UnknownCamera(camera_id.to_string()))
    }

    /// All cameras ordered by id.
    pub fn cameras(&self) -> impl Iterator<Item = &CameraRecord> {
        self.cameras.values()
    }

    pub fn camera_count(&self) -> usize {
        self.cameras.len()
    }

    fn camera_index(&self) -> &CameraIndex {
        self.camera_index.get_or_init(|| {
            let ids: Vec<String> = self.cameras.keys().cloned().collect();
            let grid = GridIndex::build(
                DEFAULT_CELL_SIZE_DEG,
                self.cameras.values().enumerate().map(|(i, c)| (i as u64, c.position)),
            );
            CameraIndex { grid, ids }
        })
    }

    /// Cameras within `radius_m` (inclusive) whose category is not excluded,
    /// nearest first, ties by camera id.
    pub fn query_cameras(
        &self,
        center: GeoPoint,
        radius_m: f64,
        excluded: &BTreeSet<CameraCategory>,
    ) -> Vec<CameraHit> {
        let index = self.camera_index();
        let mut hits: Vec<CameraHit> = index
            .grid
            .query_radius(center, radius_m)
            .into_iter()
            .map(|i| &self.cameras[&index.ids[i as usize]])
            .filter(|c| !excluded.contains(&c.category))
            .map(|c| CameraHit {
                camera: c.clone(),
                distance_m: haversine_distance(center, c.position),
            })
            .collect();
        hits.sort_by(|a, b| {
            a.distance_m
                .total_cmp(&b.distance_m)
                .then_with(|| a.camera.camera_id.cmp(&b.camera.camera_id))
        });
        hits
    }

    pub fn get_scan(&self, scan_id: &str) -> Result<Arc<WifiScan>> {
        self.cases
            .iter()
            .find_map(|c| c.scans.get(scan_id).cloned())
            .ok_or_else(|| StoreError::UnknownScan(scan_id.to_string()))
    }

    /// Scans in case order, then insertion order. `None` spans all cases.
    pub fn list_scans(&self, case_id: Option<&str>) -> Result<Vec<Arc<WifiScan>>> {
        Ok(self
            .scoped(case_id)?
            .into_iter()
            .flat_map(|c| c.manifest.scan_ids.iter().map(|id| c.scans[id].clone()))
            .collect())
    }

    pub fn get_track(&self, track_id: &str) -> Result<Arc<GpsTrack>> {
        self.cases
            .iter()
            .find_map(|c| c.tracks.get(track_id).cloned())
            .ok_or_else(|| StoreError::UnknownTrack(track_id.to_string()))
    }

    pub fn list_tracks(&self, case_id: Option<&str>) -> Result<Vec<Arc<GpsTrack>>> {
        Ok(self
            .scoped(case_id)?
            .into_iter()
            .flat_map(|c| c.manifest.track_ids.iter().map(|id| c.tracks[id].clone()))
            .collect())
    }

    pub fn bt_detections(&self, case_id: Option<&str>) -> Result<Vec<BtDetection>> {
        Ok(self.scoped(case_id)?.into_iter().flat_map(|c| c.bt.iter().cloned()).collect())
    }

    pub fn anpr_detections(&self, case_id: Option<&str>) -> Result<Vec<AnprDetection>> {
        Ok(self.scoped(case_id)?.into_iter().flat_map(|c| c.anpr.iter().cloned()).collect())
    }

    fn scan_id_taken(&self, id: &str) -> bool {
        self.cases.iter().any(|c| c.scans.contains_key(id))
    }

    fn track_id_taken(&self, id: &str) -> bool {
        self.cases.iter().any(|c| c.tracks.contains_key(id))
    }
}

/// Ids become file names, so they are restricted to a safe alphabet.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
        && !id.starts_with('-')
}

fn check_id(id: &str) -> Result<()> {
    if is_valid_id(id) {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

fn next_id(prefix: &str, start: usize, taken: impl Fn(&str) -> bool) -> String {
    (start + 1..)
        .map(|n| format!("{prefix}-{n:04}"))
        .find(|id| !taken(id))
        .expect("id space is unbounded")
}

fn to_json(value: &impl Serialize) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("manifest serialization cannot fail");
    v.push(b'\n');
    v
}

/// Case-scoped evidence store rooted at one directory.
pub struct EvidenceStore {
    root: PathBuf,
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
}

impl std::fmt::Debug for EvidenceStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EvidenceStore").field("root", &self.root).finish_non_exhaustive()
    }
}

impl EvidenceStore {
    /// Opens (or initialises) a store, loading every committed record.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("cases")).map_err(|e| StoreError::io("create store", e))?;
        let snapshot = load_snapshot(&root)?;
        Ok(EvidenceStore {
            root,
            current: RwLock::new(Arc::new(snapshot)),
            writer: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// The state as of now. Later writes do not affect the returned value.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn publish(&self, next: Snapshot) {
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
    }

    fn case_dir(&self, case_id: &str) -> PathBuf {
        self.root.join("cases").join(case_id)
    }

    pub fn create_case(&self, name: &str) -> Result<CaseRecord> {
        let _w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let snap = self.snapshot();
        let case_id = next_id("case", snap.cases.len(), |id| {
            snap.case_data(id).is_ok() || self.case_dir(id).exists()
        });
        let manifest = CaseManifest {
            case_id: case_id.clone(),
            name: name.to_string(),
            created_at: Utc::now(),
            layers: Vec::new(),
            scan_ids: Vec::new(),
            track_ids: Vec::new(),
            imports: Vec::new(),
        };
        write_atomic(&self.case_dir(&case_id).join("manifest.json"), &to_json(&manifest))?;
        let data = CaseData {
            manifest,
            layers: BTreeMap::new(),
            scans: BTreeMap::new(),
            tracks: BTreeMap::new(),
            bt: Arc::default(),
            anpr: Arc::default(),
        };
        let record = data.record();
        let mut next = (*snap).clone();
        next.cases.push(Arc::new(data));
        self.publish(next);
        Ok(record)
    }

    /// Applies one serialized change to a case. `change` writes entity files
    /// and edits the in-memory copy; it returns whether the manifest must be
    /// rewritten. The new state is published only after all writes succeed.
    fn update_case<R>(
        &self,
        case_id: &str,
        change: impl FnOnce(&Snapshot, &mut CaseData, &Path) -> Result<(R, bool)>,
    ) -> Result<R> {
        let _w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let snap = self.snapshot();
        let pos = snap
            .cases
            .iter()
            .position(|c| c.manifest.case_id == case_id)
            .ok_or_else(|| StoreError::UnknownCase(case_id.to_string()))?;
        let mut data = (*snap.cases[pos]).clone();
        let dir = self.case_dir(case_id);
        let (out, manifest_changed) = change(&snap, &mut data, &dir)?;
        if manifest_changed {
            write_atomic(&dir.join("manifest.json"), &to_json(&data.manifest))?;
        }
        let mut next = (*snap).clone();
        next.cases[pos] = Arc::new(data);
        self.publish(next);
        Ok(out)
    }

    pub fn add_layer(&self, case_id: &str, layer: FeatureSet, label: &str) -> Result<String> {
        Ok(self.add_layer_with_tracks(case_id, layer, label, Vec::new())?.0)
    }

    /// Stores a layer and the timed tracks extracted from it in one commit.
    /// Empty track ids are assigned.
    pub fn add_layer_with_tracks(
        &self,
        case_id: &str,
        layer: FeatureSet,
        label: &str,
        tracks: Vec<GpsTrack>,
    ) -> Result<(String, Vec<String>)> {
        for t in &tracks {
            t.validate().map_err(|e| StoreError::InvalidRecord(e.to_string()))?;
            if !t.track_id.is_empty() {
                check_id(&t.track_id)?;
            }
        }
        self.update_case(case_id, |snap, data, dir| {
            let layer_id = next_id("layer", data.manifest.layers.len(), |id| {
                data.layers.contains_key(id)
            });
            let bytes = export_geojson_with(&layer, CoordinatePrecision::Full);
            write_atomic(&dir.join("layers").join(format!("{layer_id}.geojson")), &bytes)?;

            let mut track_ids = Vec::new();
            for mut t in tracks {
                if t.track_id.is_empty() {
                    let taken = |id: &str| snap.track_id_taken(id) || data.tracks.contains_key(id) || track_ids.iter().any(|x: &String| x == id);
                    t.track_id = next_id("track", total_tracks(snap) + track_ids.len(), taken);
                } else if snap.track_id_taken(&t.track_id) || track_ids.contains(&t.track_id) {
                    return Err(StoreError::DuplicateId { kind: "track", id: t.track_id });
                }
                write_track_file(dir, &t)?;
                track_ids.push(t.track_id.clone());
                data.manifest.track_ids.push(t.track_id.clone());
                data.tracks.insert(t.track_id.clone(), Arc::new(t));
            }

            data.manifest.layers.push(LayerInfo {
                layer_id: layer_id.clone(),
                label: label.to_string(),
                source_name: layer.provenance.source_name.clone(),
                source_format: layer.provenance.source_format,
                feature_count: layer.features.len(),
                skipped_count: layer.provenance.skipped_count,
                content_sha256: layer.provenance.content_sha256.clone(),
                import_time: layer.provenance.import_time,
            });
            data.layers.insert(layer_id.clone(), Arc::new(layer));
            Ok(((layer_id, track_ids), true))
        })
    }

    /// Inserts or replaces cameras by id (last write wins). Returns the
    /// number of records written.
    pub fn upsert_cameras(&self, records: Vec<CameraRecord>) -> Result<usize> {
        let _w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        if records.is_empty() {
            return Ok(0);
        }
        if let Some(bad) = records.iter().find(|r| r.camera_id.trim().is_empty()) {
            return Err(StoreError::InvalidRecord(format!("camera with empty id at {}", bad.position)));
        }
        let path = self.root.join("cameras.jsonl");
        append_jsonl(&path, &records)?;

        let snap = self.snapshot();
        let mut next = (*snap).clone();
        let cameras = Arc::make_mut(&mut next.cameras);
        let count = records.len();
        for r in records {
            cameras.insert(r.camera_id.clone(), r);
        }
        next.camera_index = Arc::new(OnceLock::new());
        self.publish(next);
        Ok(count)
    }

    /// Stores a scan under `case_id`. An empty `scan_id` is assigned; the
    /// capture range is re-derived from the observations.
    pub fn store_scan(&self, case_id: &str, mut scan: WifiScan) -> Result<String> {
        if !scan.scan_id.is_empty() {
            check_id(&scan.scan_id)?;
        }
        scan.derive_range();
        self.update_case(case_id, |snap, data, dir| {
            if scan.scan_id.is_empty() {
                scan.scan_id = next_id("scan", snap.cases.iter().map(|c| c.scans.len()).sum(), |id| snap.scan_id_taken(id));
            } else if snap.scan_id_taken(&scan.scan_id) {
                return Err(StoreError::DuplicateId { kind: "scan", id: scan.scan_id.clone() });
            }
            let header = ScanHeader {
                scan_id: scan.scan_id.clone(),
                label: scan.label.clone(),
                captured_from: scan.captured_from,
                captured_to: scan.captured_to,
            };
            let mut bytes = to_jsonl([&header]);
            bytes.extend(to_jsonl(&scan.observations));
            write_atomic(&dir.join("scans").join(format!("{}.jsonl", scan.scan_id)), &bytes)?;
            let id = scan.scan_id.clone();
            data.manifest.scan_ids.push(id.clone());
            data.scans.insert(id.clone(), Arc::new(scan));
            Ok((id, true))
        })
    }

    pub fn store_track(&self, case_id: &str, mut track: GpsTrack) -> Result<String> {
        track.validate().map_err(|e| StoreError::InvalidRecord(e.to_string()))?;
        if !track.track_id.is_empty() {
            check_id(&track.track_id)?;
        }
        self.update_case(case_id, |snap, data, dir| {
            if track.track_id.is_empty() {
                track.track_id = next_id("track", total_tracks(snap), |id| snap.track_id_taken(id));
            } else if snap.track_id_taken(&track.track_id) {
                return Err(StoreError::DuplicateId { kind: "track", id: track.track_id.clone() });
            }
            write_track_file(dir, &track)?;
            let id = track.track_id.clone();
            data.manifest.track_ids.push(id.clone());
            data.tracks.insert(id.clone(), Arc::new(track));
            Ok((id, true))
        })
    }

    pub fn store_bt_detections(&self, case_id: &str, detections: Vec<BtDetection>) -> Result<usize> {
        self.update_case(case_id, |_, data, dir| {
            append_jsonl(&dir.join("detections_bt.jsonl"), &detections)?;
            let n = detections.len();
            Arc::make_mut(&mut data.bt).extend(detections);
            Ok((n, false))
        })
    }

    pub fn store_anpr_detections(&self, case_id: &str, detections: Vec<AnprDetection>) -> Result<usize> {
        self.update_case(case_id, |_, data, dir| {
            append_jsonl(&dir.join("detections_anpr.jsonl"), &detections)?;
            let n = detections.len();
            Arc::make_mut(&mut data.anpr).extend(detections);
            Ok((n, false))
        })
    }

    pub fn record_import(&self, case_id: &str, record: ImportRecord) -> Result<()> {
        self.update_case(case_id, |_, data, _| {
            data.manifest.imports.push(record);
            Ok(((), true))
        })
    }
}

fn total_tracks(snap: &Snapshot) -> usize {
    snap.cases.iter().map(|c| c.tracks.len()).sum()
}

fn write_track_file(dir: &Path, track: &GpsTrack) -> Result<()> {
    let header = TrackHeader {
        track_id: track.track_id.clone(),
        label: track.label.clone(),
    };
    let mut bytes = to_jsonl([&header]);
    bytes.extend(to_jsonl(&track.points));
    write_atomic(&dir.join("tracks").join(format!("{}.jsonl", track.track_id)), &bytes)
}

/// Appends records to a JSON-lines file through an atomic replace. A torn
/// tail left by a foreign writer is discarded first.
fn append_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut bytes = read_optional(path)?.unwrap_or_default();
    match bytes.iter().rposition(|b| *b == b'\n') {
        Some(i) => bytes.truncate(i + 1),
        None => bytes.clear(),
    }
    bytes.extend(to_jsonl(records));
    write_atomic(path, &bytes)
}

fn corrupt(path: &Path, message: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        file: display_name(path),
        message: message.into(),
    }
}

fn load_snapshot(root: &Path) -> Result<Snapshot> {
    let mut cameras = BTreeMap::new();
    let cam_path = root.join("cameras.jsonl");
    if let Some(bytes) = read_optional(&cam_path)? {
        for c in parse_jsonl::<CameraRecord>(&cam_path, &bytes)? {
            cameras.insert(c.camera_id.clone(), c);
        }
    }

    let mut cases = Vec::new();
    let entries = fs::read_dir(root.join("cases")).map_err(|e| StoreError::io("list cases", e))?;
    for entry in entries {
        let entry = entry.map_err(|e| StoreError::io("list cases", e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !entry.path().is_dir() || name.contains(TMP_MARKER) || !is_valid_id(&name) {
            continue;
        }
        match load_case(&entry.path())? {
            Some(c) => cases.push(Arc::new(c)),
            None => tracing::warn!(case = %name, "case directory without manifest ignored"),
        }
    }
    cases.sort_by(|a, b| {
        (a.manifest.created_at, &a.manifest.case_id).cmp(&(b.manifest.created_at, &b.manifest.case_id))
    });

    Ok(Snapshot {
        cases,
        cameras: Arc::new(cameras),
        camera_index: Arc::new(OnceLock::new()),
    })
}

fn load_case(dir: &Path) -> Result<Option<CaseData>> {
    let manifest_path = dir.join("manifest.json");
    let Some(bytes) = read_optional(&manifest_path)? else {
        return Ok(None);
    };
    let manifest: CaseManifest =
        serde_json::from_slice(&bytes).map_err(|e| corrupt(&manifest_path, e.to_string()))?;

    let mut layers = BTreeMap::new();
    for info in &manifest.layers {
        let path = dir.join("layers").join(format!("{}.geojson", info.layer_id));
        let bytes = read_optional(&path)?.ok_or_else(|| corrupt(&path, "referenced layer file is missing"))?;
        let (mut fs, prov) = parse_geojson_with_provenance(&bytes).map_err(|e| corrupt(&path, e.to_string()))?;
        let prov = prov.ok_or_else(|| corrupt(&path, "layer file has no provenance"))?;
        fs.provenance = serde_json::from_value::<Provenance>(prov).map_err(|e| corrupt(&path, e.to_string()))?;
        layers.insert(info.layer_id.clone(), Arc::new(fs));
    }

    let mut scans = BTreeMap::new();
    for id in &manifest.scan_ids {
        let path = dir.join("scans").join(format!("{id}.jsonl"));
        let bytes = read_optional(&path)?.ok_or_else(|| corrupt(&path, "referenced scan file is missing"))?;
        let (header, observations) = split_header::<ScanHeader>(&path, &bytes)?;
        let observations = observations
            .into_iter()
            .map(serde_json::from_value::<WifiObservation>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| corrupt(&path, e.to_string()))?;
        scans.insert(
            id.clone(),
            Arc::new(WifiScan {
                scan_id: header.scan_id,
                label: header.label,
                captured_from: header.captured_from,
                captured_to: header.captured_to,
                observations,
            }),
        );
    }

    let mut tracks = BTreeMap::new();
    for id in &manifest.track_ids {
        let path = dir.join("tracks").join(format!("{id}.jsonl"));
        let bytes = read_optional(&path)?.ok_or_else(|| corrupt(&path, "referenced track file is missing"))?;
        let (header, points) = split_header::<TrackHeader>(&path, &bytes)?;
        let points = points
            .into_iter()
            .map(serde_json::from_value::<TrackPoint>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| corrupt(&path, e.to_string()))?;
        tracks.insert(
            id.clone(),
            Arc::new(GpsTrack {
                track_id: header.track_id,
                label: header.label,
                points,
            }),
        );
    }

    let bt_path = dir.join("detections_bt.jsonl");
    let bt = match read_optional(&bt_path)? {
        Some(b) => parse_jsonl(&bt_path, &b)?,
        None => Vec::new(),
    };
    let anpr_path = dir.join("detections_anpr.jsonl");
    let anpr = match read_optional(&anpr_path)? {
        Some(b) => parse_jsonl(&anpr_path, &b)?,
        None => Vec::new(),
    };

    Ok(Some(CaseData {
        manifest,
        layers,
        scans,
        tracks,
        bt: Arc::new(bt),
        anpr: Arc::new(anpr),
    }))
}

fn split_header<H: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<(H, Vec<serde_json::Value>)> {
    let mut lines: Vec<serde_json::Value> = parse_jsonl(path, bytes)?;
    if lines.is_empty() {
        return Err(corrupt(path, "missing header line"));
    }
    let header = serde_json::from_value(lines.remove(0)).map_err(|e| corrupt(path, e.to_string()))?;
    Ok((header, lines))
}
