//! Read-only archive of pre-rendered raster tiles.
//!
//! An archive is a directory holding `manifest.json` and one file per tile
//! at `{z}/{x}/{y}.png`. Bytes are served exactly as stored.

use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::spatial::{tile_to_bbox, BoundingBox, TileCoord, MAX_ZOOM};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_CACHE_CAPACITY: usize = 1024;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TileFormat {
    Png,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileManifest {
    pub name: String,
    pub attribution: String,
    pub min_zoom: u8,
    pub max_zoom: u8,
    pub bounds: BoundingBox,
    pub tile_format: TileFormat,
    pub tile_count: u64,
}

#[derive(Debug, Error)]
pub enum TileError {
    #[error("tile archive has no {MANIFEST_FILE}")]
    MissingManifest,
    #[error("corrupt tile manifest: {0}")]
    CorruptManifest(String),
    #[error("tile {0} not found")]
    NotFound(TileCoord),
    #[error("zoom {z} outside archive range {min}..={max}")]
    ZoomOutOfRange { z: u8, min: u8, max: u8 },
    #[error("tile archive I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

impl TileError {
    pub fn code(&self) -> &'static str {
        match self {
            TileError::MissingManifest => "MissingManifest",
            TileError::CorruptManifest(_) => "CorruptManifest",
            TileError::NotFound(_) => "NotFound",
            TileError::ZoomOutOfRange { .. } => "ZoomOutOfRange",
            TileError::Io(_) => "StorageError",
        }
    }
}

pub struct TileArchive {
    root: PathBuf,
    manifest: TileManifest,
    cache: Option<Mutex<LruCache<TileCoord, Arc<[u8]>>>>,
}

impl std::fmt::Debug for TileArchive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TileArchive")
            .field("root", &self.root)
            .field("manifest", &self.manifest)
            .finish_non_exhaustive()
    }
}

pub fn read_manifest(root: &Path) -> Result<TileManifest, TileError> {
    let bytes = match fs::read(root.join(MANIFEST_FILE)) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(TileError::MissingManifest),
        Err(e) => return Err(e.into()),
    };
    let m: TileManifest = serde_json::from_slice(&bytes).map_err(|e| TileError::CorruptManifest(e.to_string()))?;
    if m.min_zoom > m.max_zoom {
        return Err(TileError::CorruptManifest(format!(
            "min_zoom ({}) is greater than max_zoom ({})",
            m.min_zoom, m.max_zoom
        )));
    }
    if m.max_zoom > MAX_ZOOM {
        return Err(TileError::CorruptManifest(format!("max_zoom ({}) exceeds {MAX_ZOOM}", m.max_zoom)));
    }
    Ok(m)
}

/// Opens an archive with an LRU cache of `cache_capacity` tiles; 0 disables
/// caching.
pub fn open_archive(root: impl Into<PathBuf>, cache_capacity: usize) -> Result<TileArchive, TileError> {
    let root = root.into();
    let manifest = read_manifest(&root)?;
    Ok(TileArchive {
        root,
        manifest,
        cache: NonZeroUsize::new(cache_capacity).map(|c| Mutex::new(LruCache::new(c))),
    })
}

impl TileArchive {
    pub fn manifest(&self) -> &TileManifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn tile_path(&self, t: TileCoord) -> PathBuf {
        self.root.join(t.z.to_string()).join(t.x.to_string()).join(format!("{}.png", t.y))
    }

    /// Tiles currently held in memory.
    pub fn cached_tiles(&self) -> usize {
        self.cache.as_ref().map_or(0, |c| c.lock().unwrap_or_else(|e| e.into_inner()).len())
    }

    pub fn get_tile(&self, t: TileCoord) -> Result<Arc<[u8]>, TileError> {
        let (min, max) = (self.manifest.min_zoom, self.manifest.max_zoom);
        if t.z < min || t.z > max {
            return Err(TileError::ZoomOutOfRange { z: t.z, min, max });
        }
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&t) {
                return Ok(hit.clone());
            }
        }
        let bytes: Arc<[u8]> = match fs::read(self.tile_path(t)) {
            Ok(b) => b.into(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(TileError::NotFound(t)),
            Err(e) => return Err(e.into()),
        };
        if let Some(cache) = &self.cache {
            cache.lock().unwrap_or_else(|e| e.into_inner()).put(t, bytes.clone());
        }
        Ok(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    OutsideZoom { path: String },
    OutsideBounds { path: String },
    NotPng { path: String },
    /// A file that does not follow the `{z}/{x}/{y}.png` layout.
    UnexpectedFile { path: String },
    CountMismatch { declared: u64, found: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub tiles_found: u64,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn parse_tile_path(rel: &Path) -> Option<(TileCoord, bool)> {
    let parts: Vec<&str> = rel.iter().map(|p| p.to_str()).collect::<Option<_>>()?;
    let [z, x, file] = parts.as_slice() else {
        return None;
    };
    let (y, ext) = file.split_once('.')?;
    let num = |s: &str| (!s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())).then(|| s.parse::<u32>().ok()).flatten();
    let z = u8::try_from(num(z)?).ok()?;
    let t = TileCoord { z, x: num(x)?, y: num(y)? };
    Some((t, ext == "png"))
}

/// Checks every file against the manifest: zoom range, bounds, PNG
/// signature, layout and the declared tile count.
pub fn verify_archive(archive: &TileArchive) -> VerifyReport {
    let m = &archive.manifest;
    let mut report = VerifyReport::default();
    let mut files: Vec<PathBuf> = WalkDir::new(&archive.root)
        .min_depth(1)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| !e.file_type().is_dir())
        .map(|e| e.into_path())
        .collect();
    files.sort();
    for path in files {
        let rel = path.strip_prefix(&archive.root).expect("walked below root");
        if rel == Path::new(MANIFEST_FILE) {
            continue;
        }
        let shown = rel.to_string_lossy().replace('\\', "/");
        let Some((t, is_png_name)) = parse_tile_path(rel) else {
            report.violations.push(Violation::UnexpectedFile { path: shown });
            continue;
        };
        let Ok(t) = TileCoord::new(t.z, t.x, t.y) else {
            report.violations.push(Violation::UnexpectedFile { path: shown });
            continue;
        };
        report.tiles_found += 1;
        let signature_ok = fs::File::open(&path)
            .and_then(|mut f| {
                let mut head = [0u8; 8];
                std::io::Read::read_exact(&mut f, &mut head).map(|_| head)
            })
            .is_ok_and(|head| head == PNG_SIGNATURE);
        if !is_png_name || !signature_ok {
            report.violations.push(Violation::NotPng { path: shown.clone() });
        }
        if t.z < m.min_zoom || t.z > m.max_zoom {
            report.violations.push(Violation::OutsideZoom { path: shown });
        } else if !tile_to_bbox(t).intersects(&m.bounds) {
            report.violations.push(Violation::OutsideBounds { path: shown });
        }
    }
    if report.tiles_found != m.tile_count {
        report.violations.push(Violation::CountMismatch {
            declared: m.tile_count,
            found: report.tiles_found,
        });
    }
    report
}
