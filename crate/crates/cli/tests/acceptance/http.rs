use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::time::Instant;

use fgis_core::evidence::{CameraCategory, CameraRecord};
use fgis_core::ingest::{content_sha256, parse_camera_csv, ImportMode};
use fgis_core::spatial::{haversine_distance, GeoPoint};
use fgis_core::synthetic::camera_csv;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::support::{expect, fixtures, get, post, request};
use crate::Verdict;

pub const FIXTURE_TILES: [(&str, &str); 3] = [
    ("/tiles/0/0/0.png", "245aa13f647cf9ef4e6ad2903676497b4ad3c2e31d8b13d3601e55a8589a8f58"),
    ("/tiles/1/1/1.png", "407b69f11ef74e478c725119bbc1a31d29547c65b172ea91ada4893ce91b70cc"),
    ("/tiles/2/2/1.png", "c96e74a66862efadbc2edcb4698091c349e56eba8be5069a09265b2c0effe5f7"),
];

fn new_case(addr: SocketAddr) -> Result<String, String> {
    let r = post(addr, "/cases", json!({"name": "acceptance"}).to_string())?;
    expect(&r, 201, "create case")?;
    Ok(r.json()?["case_id"].as_str().ok_or("no case_id")?.to_string())
}

pub fn radius_oracle(addr: SocketAddr) -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xCA3);
    let cats = [CameraCategory::Public, CameraCategory::Private, CameraCategory::Unknown];
    let mut cameras: Vec<CameraRecord> = (0..10_000)
        .map(|i| CameraRecord {
            camera_id: format!("oracle-{i:05}"),
            position: GeoPoint::new(52.07 + rng.random_range(-0.08..0.08), 4.30 + rng.random_range(-0.12..0.12)).unwrap(),
            category: *cats.choose(&mut rng).unwrap(),
            owner_contact: String::new(),
            description: String::new(),
            source: String::new(),
            tags: Vec::new(),
        })
        .collect();
    // a few cameras sharing one position to exercise the id tie-break
    for i in 0..5 {
        cameras[i * 7 + 1].position = cameras[0].position;
    }
    let csv = camera_csv(&cameras);
    let stored = parse_camera_csv(&csv, ImportMode::Strict).map_err(|e| e.to_string())?.records;
    let case = new_case(addr)?;
    let r = post(addr, &format!("/cases/{case}/import?format=camera&label=oracle"), &csv)?;
    expect(&r, 201, "camera import")?;
    if r.json()?["records"] != 10_000 {
        return Err(format!("import stored {}", r.json()?["records"]));
    }

    let mut returned = 0;
    for q in 0..100 {
        let (center, radius) = match q {
            0 => (stored[0].position, 0.0),
            1 => (stored[0].position, 1e-9),
            _ => (
                GeoPoint::new(52.07 + rng.random_range(-0.1..0.1), 4.30 + rng.random_range(-0.15..0.15)).unwrap(),
                rng.random_range(0.0..2500.0),
            ),
        };
        let excluded: BTreeSet<CameraCategory> = cats.iter().copied().filter(|_| rng.random_bool(0.2)).collect();
        let exclude = excluded.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(",");
        let uri = format!("/cameras?lat={}&lon={}&radius_m={radius}&exclude={exclude}", center.lat(), center.lon());
        let r = get(addr, &uri)?;
        expect(&r, 200, &uri)?;
        let v = r.json()?;
        let got: Vec<(String, f64)> = v
            .as_array()
            .ok_or("not a list")?
            .iter()
            .map(|h| (h["camera"]["camera_id"].as_str().unwrap_or("").to_string(), h["distance_m"].as_f64().unwrap_or(f64::NAN)))
            .collect();
        let mut want: Vec<(String, f64)> = stored
            .iter()
            .filter(|c| !excluded.contains(&c.category))
            .map(|c| (c.camera_id.clone(), haversine_distance(center, c.position)))
            .filter(|(_, d)| *d <= radius)
            .collect();
        want.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if got != want {
            return Err(format!("query {q} ({uri}): {} results, brute force {}", got.len(), want.len()));
        }
        returned += got.len();
    }
    let secs = started.elapsed().as_secs_f64();
    if secs >= 10.0 {
        return Err(format!("took {secs:.2} s, budget 10 s"));
    }
    Ok(format!("10000 cameras, 100 queries, {returned} hits, 100% agreement in set and order, {secs:.2} s"))
}

pub fn tile_serving(cached: SocketAddr, uncached: SocketAddr) -> Verdict {
    for (uri, sha) in FIXTURE_TILES {
        let on_disk = std::fs::read(fixtures().join("tiles").join(uri.trim_start_matches("/tiles/"))).map_err(|e| e.to_string())?;
        if content_sha256(&on_disk) != sha {
            return Err(format!("fixture {uri} changed on disk"));
        }
        for addr in [cached, uncached] {
            let r = get(addr, uri)?;
            expect(&r, 200, uri)?;
            if content_sha256(&r.body) != sha || r.content_type.as_deref() != Some("image/png") {
                return Err(format!("{uri} from {addr}: body or content type differs"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x711E5);
    let mut statuses = BTreeSet::new();
    for i in 0..1000 {
        let uri = match rng.random_range(0..10) {
            0..=5 => FIXTURE_TILES.choose(&mut rng).unwrap().0.to_string(),
            6 | 7 => {
                let z = rng.random_range(0..=2u32);
                format!("/tiles/{z}/{}/{}.png", rng.random_range(0..1u32 << z), rng.random_range(0..1u32 << z))
            }
            8 => format!("/tiles/{}/0/0.png", rng.random_range(3..40)),
            _ => format!("/tiles/1/{}/x.png", rng.random_range(0..4)),
        };
        let a = get(cached, &uri)?;
        let b = get(uncached, &uri)?;
        if (a.status, &a.content_type, &a.body) != (b.status, &b.content_type, &b.body) {
            return Err(format!("request {i} {uri}: cache on and off differ ({} vs {})", a.status, b.status));
        }
        statuses.insert(a.status);
    }
    Ok(format!("3 fixture tiles hash-identical on both servers; 1000 randomized requests identical with cache on and off (statuses {statuses:?})"))
}

/// Drives every endpoint once; used under network monitoring.
pub fn api_sweep(addr: SocketAddr) -> Result<usize, String> {
    let mut n = 0;
    let mut call = |method: &str, path: &str, body: &[u8], status: u16| -> Result<serde_json::Value, String> {
        n += 1;
        let r = request(addr, method, path, body)?;
        expect(&r, status, &format!("{method} {path}"))?;
        Ok(if r.content_type.as_deref().is_some_and(|c| c.contains("json")) { r.json()? } else { serde_json::Value::Null })
    };
    let golden = |f: &str| std::fs::read(fixtures().join("golden").join(f)).map_err(|e| e.to_string());
    let case = call("POST", "/cases", br#"{"name":"sweep"}"#, 201)?["case_id"].as_str().ok_or("no case id")?.to_string();
    call("GET", "/cases", b"", 200)?;
    call("GET", &format!("/cases/{case}"), b"", 200)?;
    let gpx = call("POST", &format!("/cases/{case}/import?format=gpx&label=trip"), &golden("trip.gpx")?, 201)?;
    let layer = gpx["layer_id"].as_str().ok_or("no layer")?.to_string();
    for (fmt, f) in [("kml", "trip.kml"), ("gml", "trip.gml"), ("geojson", "trip.geojson"), ("camera", "cameras.csv")] {
        call("POST", &format!("/cases/{case}/import?format={fmt}"), &golden(f)?, 201)?;
    }
    let track = call("POST", &format!("/cases/{case}/import?format=gpx"), &golden("stationary.gpx")?, 201)?["track_ids"][0]
        .as_str()
        .ok_or("no track")?
        .to_string();
    let a = call("POST", &format!("/cases/{case}/import?format=wifi"), &golden("scan_a.csv")?, 201)?["scan_id"].clone();
    let b = call("POST", &format!("/cases/{case}/import?format=wifi"), &golden("scan_b.csv")?, 201)?["scan_id"].clone();
    let bt = b"timestamp,mac,sensor_id,lat,lon\n2016-05-01T09:00:00Z,aa:bb:cc:00:00:01,s1,52.08,4.325\n";
    let anpr = b"timestamp,plate,sensor_id,lat,lon\n2016-05-01T09:00:10Z,XX-11-YY,a1,52.0801,4.325\n";
    call("POST", &format!("/cases/{case}/import?format=bt"), bt, 201)?;
    call("POST", &format!("/cases/{case}/import?format=anpr"), anpr, 201)?;
    call("POST", &format!("/cases/{case}/import?format=gpx"), &golden("trip.kml")?, 400)?;
    call("GET", &format!("/cases/{case}/layers"), b"", 200)?;
    call("GET", &format!("/cases/{case}/layers/{layer}.geojson"), b"", 200)?;
    call("GET", "/cameras?lat=52.08&lon=4.325&radius_m=1000&exclude=private", b"", 200)?;
    call("GET", "/cameras/cam-001", b"", 200)?;
    call("GET", "/cameras?lat=x&lon=4&radius_m=1", b"", 400)?;
    call("GET", "/scans", b"", 200)?;
    call("GET", &format!("/scans/{}", a.as_str().unwrap_or("")), b"", 200)?;
    call("GET", "/tracks", b"", 200)?;
    call("GET", &format!("/tracks/{track}?from=2016-05-01T12:02:00Z&to=2016-05-01T12:05:00Z"), b"", 200)?;
    call("POST", "/analysis/scan-diff", json!({"scan_a": a, "scan_b": b}).to_string().as_bytes(), 200)?;
    call("GET", "/analysis/bssid/00:11:22", b"", 200)?;
    call("POST", "/analysis/presence", br#"{"bssids":["de:ad:be:ef:00:05"]}"#, 200)?;
    let top = call("POST", "/analysis/correlate", r#"{"Δt_s":60,"d_m":100}"#.as_bytes(), 200)?;
    if top[0]["plate"] != "XX-11-YY" {
        return Err(format!("unexpected correlation {top}"));
    }
    let stops = call("POST", "/analysis/stops", json!({"track_id": track, "epsilon_m": 50, "tau_s": 300}).to_string().as_bytes(), 200)?;
    if stops[0]["dwell"] != 600.0 {
        return Err(format!("unexpected stops {stops}"));
    }
    call("GET", "/health", b"", 200)?;
    call("GET", "/", b"", 200)?;
    call("GET", "/no/such/route", b"", 404)?;
    call("DELETE", "/cases", b"", 405)?;
    Ok(n)
}
