use std::collections::BTreeSet;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fgis_core::analysis::{
    correlate_bt_anpr, detect_stops, parse_bssid_query, search_bssid, CorrelationParams, StopParams,
};
use fgis_core::evidence::CameraCategory;
use fgis_core::importer::{import_bytes, ImportFormat, ImportRequest};
use fgis_core::ingest::{parse_anpr_csv, parse_bt_csv, parse_gpx, ImportMode};
use fgis_core::spatial::GeoPoint;
use fgis_core::store::EvidenceStore;
use fgis_core::synthetic::{write_dataset, SyntheticSpec};
use fgis_core::tiles::{open_archive, verify_archive};
use fgis_server::ServiceConfig;

use crate::exit::{invalid, Coded, FINDINGS, NOT_FOUND};

/// Offline forensic GIS workbench.
#[derive(Parser)]
#[command(name = "fgis", version)]
pub struct Cli {
    /// Log filter for stderr, overridden by FGIS_LOG.
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Import evidence files into a case.
    Import(ImportArgs),
    /// Check a tile archive against its manifest.
    VerifyTiles {
        path: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write a seeded synthetic dataset with a ground-truth sidecar.
    GenSynthetic {
        /// Generator settings, JSON or TOML. Defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Overrides the seed in the settings file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an analysis without the server and print JSON.
    #[command(subcommand)]
    Query(Query),
}

#[derive(Args)]
struct StoreArgs {
    /// Evidence store directory.
    #[arg(long, conflicts_with = "config")]
    cases: Option<PathBuf>,
    /// Take the store directory from a service config file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl StoreArgs {
    fn open(&self) -> Result<EvidenceStore> {
        let root = match (&self.cases, &self.config) {
            (Some(dir), _) => dir.clone(),
            (None, Some(cfg)) => ServiceConfig::load(cfg)?.case_root_path,
            (None, None) => return Err(invalid("pass --cases <dir> or --config <file>")),
        };
        Ok(EvidenceStore::open(&root)?)
    }
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bind: Option<IpAddr>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    tiles: Option<PathBuf>,
    #[arg(long)]
    cases: Option<PathBuf>,
    #[arg(long)]
    cache_capacity: Option<usize>,
    #[arg(long)]
    static_dir: Option<PathBuf>,
    #[arg(long)]
    lenient_import: bool,
    /// Permit binding an address outside the loopback and private ranges.
    #[arg(long)]
    allow_public_bind: bool,
}

impl ServeArgs {
    fn config(self) -> Result<ServiceConfig> {
        let mut c = match &self.config {
            Some(path) => ServiceConfig::load(path)?,
            None => match (&self.tiles, &self.cases) {
                (Some(t), Some(c)) => ServiceConfig::new(t, c),
                _ => return Err(invalid("pass --config <file>, or both --tiles and --cases")),
            },
        };
        if let Some(v) = self.bind {
            c.bind_address = v;
        }
        if let Some(v) = self.port {
            c.port = v;
        }
        if let Some(v) = self.tiles {
            c.tile_archive_path = v;
        }
        if let Some(v) = self.cases {
            c.case_root_path = v;
        }
        if let Some(v) = self.cache_capacity {
            c.cache_capacity = v;
        }
        if let Some(v) = self.static_dir {
            c.static_dir = Some(v);
        }
        c.lenient_import |= self.lenient_import;
        c.allow_public_bind |= self.allow_public_bind;
        Ok(c)
    }
}

#[derive(Args)]
struct ImportArgs {
    #[command(flatten)]
    store: StoreArgs,
    /// Existing case id.
    #[arg(long, required_unless_present = "new_case")]
    case: Option<String>,
    /// Create a case with this name and import into it.
    #[arg(long, conflicts_with = "case")]
    new_case: Option<String>,
    /// gpx, kml, gml, geojson, wifi, anpr, bt or camera. Guessed from the
    /// extension for the document formats.
    #[arg(long)]
    format: Option<String>,
    /// Layer or scan label; defaults to the file name.
    #[arg(long)]
    label: Option<String>,
    /// Skip bad CSV rows instead of refusing the file.
    #[arg(long)]
    lenient: bool,
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Query {
    /// Cameras within a radius of a point.
    Cameras {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, allow_negative_numbers = true)]
        lat: f64,
        #[arg(long, allow_negative_numbers = true)]
        lon: f64,
        #[arg(long)]
        radius_m: f64,
        /// Comma-separated categories to leave out.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
    },
    /// Observations of a MAC address or vendor prefix in stored scans.
    Bssid {
        #[command(flatten)]
        store: StoreArgs,
        query: String,
        #[arg(long)]
        case: Option<String>,
    },
    /// Stops in a stored track or a GPX file.
    Stops {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, required_unless_present = "gpx")]
        track: Option<String>,
        #[arg(long, conflicts_with = "track")]
        gpx: Option<PathBuf>,
        #[arg(long, default_value_t = 50.0)]
        epsilon_m: f64,
        #[arg(long, default_value_t = 300.0)]
        tau_s: f64,
    },
    /// Rank Bluetooth MAC and licence plate pairs by co-occurrence.
    Correlate {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        case: Option<String>,
        /// Bluetooth detections CSV, used instead of the store.
        #[arg(long, requires = "anpr")]
        bt: Option<PathBuf>,
        /// ANPR detections CSV, used instead of the store.
        #[arg(long, requires = "bt")]
        anpr: Option<PathBuf>,
        #[arg(long, default_value_t = 60.0)]
        dt_s: f64,
        #[arg(long, default_value_t = 100.0)]
        d_m: f64,
        /// Print only the first N pairs.
        #[arg(long)]
        top: Option<usize>,
    },
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve(args) => serve(args.config()?),
        Command::Import(args) => import(args),
        Command::VerifyTiles { path, json } => verify_tiles(&path, json),
        Command::GenSynthetic { spec, seed, out } => gen_synthetic(spec.as_deref(), seed, &out),
        Command::Query(q) => query(q),
    }
}

fn serve(config: ServiceConfig) -> Result<ExitCode> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(fgis_server::serve(&config))?;
    Ok(ExitCode::SUCCESS)
}

fn import(args: ImportArgs) -> Result<ExitCode> {
    let store = args.store.open()?;
    let case_id = match (&args.case, &args.new_case) {
        (Some(id), _) => id.clone(),
        (None, Some(name)) => {
            let rec = store.create_case(name)?;
            println!("created case {}", rec.case_id);
            rec.case_id
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    let mode = if args.lenient { ImportMode::Lenient } else { ImportMode::Strict };
    for file in &args.files {
        let name = file.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
        let format = match &args.format {
            Some(f) => f.parse::<ImportFormat>()?,
            None => ImportFormat::from_extension(&name)
                .ok_or_else(|| invalid(format!("{name}: cannot infer the format, pass --format")))?,
        };
        let bytes = read(file)?;
        let label = args.label.clone().unwrap_or_else(|| name.clone());
        let req = ImportRequest { case_id: &case_id, format, label: &label, source_name: &name, mode };
        let s = import_bytes(&store, &req, &bytes).with_context(|| format!("{name} rejected"))?;
        let what = match (&s.layer_id, &s.scan_id) {
            (Some(id), _) => {
                let n = s.feature_count.unwrap_or(0);
                format!("1 layer, {n} feature{} ({id})", if n == 1 { "" } else { "s" })
            }
            (None, Some(id)) => format!("1 scan, {} observations ({id})", s.records),
            (None, None) => format!("{} {format} records", s.records),
        };
        println!("{name}: {what}");
        for t in &s.track_ids {
            println!("  track {t}");
        }
        if !s.skipped_rows.is_empty() {
            println!("  skipped {} row(s):", s.skipped_rows.len());
            for r in &s.skipped_rows {
                println!("    {r}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verify_tiles(path: &Path, json: bool) -> Result<ExitCode> {
    let archive = open_archive(path, 0)?;
    let report = verify_archive(&archive);
    if json {
        print_json(&report)?;
    } else {
        println!("{} tile(s) found, {} declared", report.tiles_found, archive.manifest().tile_count);
        for v in &report.violations {
            println!("violation: {}", serde_json::to_string(v)?);
        }
        println!("{}", if report.is_clean() { "clean" } else { "NOT CLEAN" });
    }
    Ok(if report.is_clean() { ExitCode::SUCCESS } else { ExitCode::from(FINDINGS) })
}

fn load_spec(path: &Path) -> Result<SyntheticSpec> {
    let text = String::from_utf8(read(path)?).map_err(|_| invalid(format!("{} is not UTF-8", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let spec = if is_toml {
        toml::from_str(&text).map_err(|e| invalid(format!("{}: {}", path.display(), e.message())))?
    } else {
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
    };
    Ok(spec)
}

fn gen_synthetic(spec: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<ExitCode> {
    let mut spec = match spec {
        Some(p) => load_spec(p)?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let truth = write_dataset(&spec, out)?;
    println!(
        "wrote {} tracks, {} cameras, {} sites to {}",
        truth.tracks.len(),
        spec.n_cameras,
        truth.sites.len(),
        out.display()
    );
    if let Some(p) = &truth.planted_pair {
        println!("planted pair: {} / {}", p.mac, p.plate);
    }
    Ok(ExitCode::SUCCESS)
}

fn query(q: Query) -> Result<ExitCode> {
    match q {
        Query::Cameras { store, lat, lon, radius_m, exclude } => {
            let center = GeoPoint::new(lat, lon)?;
            if !(radius_m.is_finite() && radius_m >= 0.0) {
                return Err(invalid(format!("--radius-m must be a finite number >= 0, got {radius_m}")));
            }
            let excluded = exclude
                .iter()
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.parse::<CameraCategory>().map_err(invalid))
                .collect::<Result<BTreeSet<_>>>()?;
            print_json(&store.open()?.snapshot().query_cameras(center, radius_m, &excluded))?;
        }
        Query::Bssid { store, query, case } => {
            let q = parse_bssid_query(&query)?;
            let scans = store.open()?.snapshot().list_scans(case.as_deref())?;
            print_json(&search_bssid(&q, scans.iter().map(|s| s.as_ref())))?;
        }
        Query::Stops { store, track, gpx, epsilon_m, tau_s } => {
            let params = StopParams { epsilon_m, tau_s };
            let tracks = match (track, gpx) {
                (Some(id), _) => vec![(*store.open()?.snapshot().get_track(&id)?).clone()],
                (None, Some(path)) => {
                    let tracks = parse_gpx(&read(&path)?)?.tracks();
                    if tracks.is_empty() {
                        return Err(Coded(NOT_FOUND, format!("{} holds no timed track", path.display())).into());
                    }
                    tracks
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            let mut out = serde_json::Map::new();
            for t in &tracks {
                out.insert(t.track_id.clone(), serde_json::to_value(detect_stops(t, params)?)?);
            }
            print_json(&out)?;
        }
        Query::Correlate { store, case, bt, anpr, dt_s, d_m, top } => {
            let params = CorrelationParams { dt_s, d_m };
            let (bt, anpr) = match (bt, anpr) {
                (Some(b), Some(a)) => (
                    parse_bt_csv(&read(&b)?, ImportMode::Strict)?.records,
                    parse_anpr_csv(&read(&a)?, ImportMode::Strict)?.records,
                ),
                _ => {
                    let snap = store.open()?.snapshot();
                    (snap.bt_detections(case.as_deref())?, snap.anpr_detections(case.as_deref())?)
                }
            };
            let mut scores = correlate_bt_anpr(&bt, &anpr, params)?;
            if let Some(n) = top {
                scores.truncate(n);
            }
            print_json(&scores)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
