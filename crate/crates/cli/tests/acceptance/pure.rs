use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use chrono::{Duration, TimeZone, Utc};
use fgis_core::analysis::{correlate_bt_anpr, detect_stops, diff_scans, CorrelationParams, ScanDiff, SsidChange, StopParams};
use fgis_core::evidence::{AnprDetection, BtDetection, WifiObservation, WifiScan};
use fgis_core::ingest::{
    export_geojson, parse_anpr_csv, parse_bt_csv, parse_camera_csv, parse_geojson, parse_gml, parse_gpx, parse_kml,
    parse_wifi_csv, FeatureSet, ImportMode, MacAddress,
};
use fgis_core::spatial::{haversine_distance, point_to_tile, tile_to_bbox, GeoPoint};
use fgis_core::synthetic::{anpr_csv, bt_csv, generate_correlation, write_dataset, GroundTruth, PlantedSpec, SyntheticSpec};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::support::fixtures;
use crate::Verdict;

pub fn tile_math() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x711E);
    let mut failures = Vec::new();
    for _ in 0..10_000 {
        let p = GeoPoint::new(rng.random_range(-85.05..=85.05), rng.random_range(-180.0..180.0)).unwrap();
        let z = rng.random_range(0..=14u8);
        let t = point_to_tile(p, z).map_err(|e| e.to_string())?;
        if !tile_to_bbox(t).contains(p) {
            failures.push(format!("{p:?} z{z} -> {t:?}"));
        }
    }
    // frozen values: hand arithmetic for the first two, an independent
    // evaluation of the slippy-map formulas for the third
    let fixed = [((0.0, 0.0), 1, (1, 1)), ((10.0, 10.0), 0, (0, 0)), ((52.08, 4.325), 12, (2097, 1351))];
    for ((lat, lon), z, want) in fixed {
        let t = point_to_tile(GeoPoint::new(lat, lon).unwrap(), z).map_err(|e| e.to_string())?;
        if (t.x, t.y) != want {
            failures.push(format!("({lat}, {lon}) z{z}: got ({}, {}), want {want:?}", t.x, t.y));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    if !failures.is_empty() {
        return Err(format!("{} failures, first: {}", failures.len(), failures[0]));
    }
    if secs >= 5.0 {
        return Err(format!("took {secs:.2} s, budget 5 s"));
    }
    Ok(format!("10000 random cases and 3 fixtures, {secs:.2} s"))
}

fn read(rel: &str) -> Vec<u8> {
    std::fs::read(fixtures().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

type DocParser = fn(&[u8]) -> Result<FeatureSet, fgis_core::ingest::IngestError>;

const DOC_PARSERS: [(&str, DocParser); 4] = [("gpx", parse_gpx), ("kml", parse_kml), ("gml", parse_gml), ("geojson", parse_geojson)];

/// Largest latitude or longitude difference in degrees; longitudes are
/// compared around the circle, so 180 and -180 agree.
fn max_coord_error(a: &FeatureSet, b: &FeatureSet) -> Result<f64, String> {
    if a.features.len() != b.features.len() {
        return Err(format!("feature count {} vs {}", a.features.len(), b.features.len()));
    }
    let mut worst: f64 = 0.0;
    for (fa, fb) in a.features.iter().zip(&b.features) {
        let (pa, pb) = (fa.geometry.points(), fb.geometry.points());
        if pa.len() != pb.len() {
            return Err(format!("point count {} vs {}", pa.len(), pb.len()));
        }
        for (x, y) in pa.iter().zip(pb) {
            let dlon = (x.lon() - y.lon()).abs() % 360.0;
            worst = worst.max((x.lat() - y.lat()).abs()).max(dlon.min(360.0 - dlon));
        }
    }
    Ok(worst)
}

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8]) -> Vec<u8> {
    const TOKENS: &[&[u8]] = &[
        b"<", b">", b"\"", b"'", b"&", b"&amp;", b"]]>", b"<!DOCTYPE x [<!ENTITY a \"aaaa\">]>", b"<![CDATA[", b"-",
        b",", b"\n", b"NaN", b"inf", b"-0", b"1e999", b"99999999999999999999", b"\xff\xfe", b"\0", b"{", b"}", b"[", b"]",
        b"lat=\"", b"lon=\"", b"<trkpt lat=\"1\" lon=\"2\">", b"<coordinates>", b"<gml:posList>", b"\"coordinates\":",
        b"srsName=\"EPSG:3857\"", b"2016-13-45T25:61:61Z", b"<time>", b"FF:FF:FF:FF:FF:FF",
    ];
    let mut v = seed.to_vec();
    for _ in 0..rng.random_range(1..=8) {
        let len = v.len();
        match rng.random_range(0..7) {
            0 if len > 0 => {
                let i = rng.random_range(0..len);
                v[i] ^= 1 << rng.random_range(0..8);
            }
            1 if len > 0 => {
                let i = rng.random_range(0..len);
                v[i] = rng.random();
            }
            2 if len > 0 => {
                let a = rng.random_range(0..len);
                let b = rng.random_range(a..=len.min(a + 64));
                v.drain(a..b);
            }
            3 if len > 0 => {
                let a = rng.random_range(0..len);
                let b = rng.random_range(a..=len.min(a + 64));
                let chunk = v[a..b].to_vec();
                let at = rng.random_range(0..=v.len());
                v.splice(at..at, chunk);
            }
            4 => {
                let at = rng.random_range(0..=len);
                let t = TOKENS.choose(rng).unwrap();
                v.splice(at..at, t.iter().copied());
            }
            5 if len > 0 => {
                v.truncate(rng.random_range(0..len));
            }
            _ => {
                let at = rng.random_range(0..=len);
                let nest = rng.random_range(1..400);
                let open: &[u8] = if rng.random_bool(0.5) { b"[" } else { b"<a>" };
                let bytes: Vec<u8> = open.repeat(nest);
                v.splice(at..at, bytes);
            }
        }
    }
    v
}

pub fn parser_corpus() -> Verdict {
    // axis order: one point written four ways
    let want = GeoPoint::new(52.0799838, 4.3245142).unwrap();
    for (name, parse) in DOC_PARSERS {
        let fs = parse(&read(&format!("axis_order/point.{name}"))).map_err(|e| format!("{name}: {e}"))?;
        let got = fs.features.first().map(|f| f.geometry.points()[0]).ok_or(format!("{name}: no feature"))?;
        if got != want {
            return Err(format!("axis order: {name} gave {got:?}, want {want:?}"));
        }
    }

    // golden files: export and parse back
    let mut worst: f64 = 0.0;
    let reference = parse_gpx(&read("golden/trip.gpx")).map_err(|e| e.to_string())?;
    for (name, parse) in DOC_PARSERS {
        let fs = parse(&read(&format!("golden/trip.{name}"))).map_err(|e| format!("{name}: {e}"))?;
        let back = parse_geojson(&export_geojson(&fs)).map_err(|e| format!("{name} export: {e}"))?;
        worst = worst.max(max_coord_error(&fs, &back).map_err(|e| format!("{name} round trip: {e}"))?);
        let across = max_coord_error(&reference, &fs).map_err(|e| format!("{name} vs gpx: {e}"))?;
        if across != 0.0 {
            return Err(format!("golden {name} disagrees with gpx by {across:e} deg"));
        }
    }
    let precise = parse_geojson(&read("golden/precise.geojson")).map_err(|e| format!("precise: {e}"))?;
    let back = parse_geojson(&export_geojson(&precise)).map_err(|e| format!("precise export: {e}"))?;
    worst = worst.max(max_coord_error(&precise, &back).map_err(|e| format!("precise round trip: {e}"))?);
    if worst > 1e-7 {
        return Err(format!("round-trip error {worst:e} deg exceeds 1e-7"));
    }

    // mutation fuzzing of every parser
    let seeds: Vec<Vec<u8>> = [
        "golden/trip.gpx", "golden/trip.kml", "golden/trip.gml", "golden/trip.geojson", "golden/scan_a.csv",
        "golden/bad_rows.csv", "golden/cameras.csv", "golden/stationary.gpx", "axis_order/point.gml",
    ]
    .iter()
    .map(|p| read(p))
    .collect();
    let bt = b"timestamp,mac,sensor_id,lat,lon\n2016-05-01T09:00:00Z,aa:bb:cc:00:00:01,s1,52.08,4.325\n".to_vec();
    let anpr = b"timestamp,plate,sensor_id,lat,lon\n2016-05-01T09:00:10Z,XX-11-YY,a1,52.0801,4.325\n".to_vec();
    let seeds: Vec<Vec<u8>> = seeds.into_iter().chain([bt, anpr]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let previous = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut faults = Vec::new();
    let mut accepted = 0usize;
    for i in 0..10_000 {
        let seed = seeds.choose(&mut rng).unwrap();
        let input = mutate(&mut rng, seed);
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let mut ok = 0;
            for (_, parse) in DOC_PARSERS {
                ok += parse(&input).is_ok() as usize;
            }
            for mode in [ImportMode::Strict, ImportMode::Lenient] {
                ok += parse_wifi_csv(&input, mode).is_ok() as usize;
                ok += parse_bt_csv(&input, mode).is_ok() as usize;
                ok += parse_anpr_csv(&input, mode).is_ok() as usize;
                ok += parse_camera_csv(&input, mode).is_ok() as usize;
            }
            ok
        }));
        match outcome {
            Ok(n) => accepted += n,
            Err(_) => faults.push(i),
        }
    }
    std::panic::set_hook(previous);
    if !faults.is_empty() {
        return Err(format!("{} fuzz iterations panicked, first at {}", faults.len(), faults[0]));
    }
    Ok(format!(
        "axis order identical in 4 formats; round-trip error {worst:e} deg; 10000 fuzz iterations, 0 faults ({accepted} inputs accepted)"
    ))
}

fn t0() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2016, 5, 1, 9, 0, 0).unwrap()
}

fn obs(mac: u8, ssid: Option<&str>, t: i64) -> WifiObservation {
    WifiObservation {
        bssid: MacAddress::from_octets([0x00, 0x11, 0x22, 0x33, 0x44, mac]),
        ssid: ssid.map(str::to_string),
        position: GeoPoint::new(52.08, 4.325).unwrap(),
        timestamp: t0() + Duration::seconds(t),
        signal_dbm: None,
    }
}

/// Independent diff: the SSID of a BSSID is the one on its observation with
/// the greatest (timestamp, ssid).
fn oracle_diff(a: &WifiScan, b: &WifiScan) -> ScanDiff {
    let latest = |s: &WifiScan| {
        let mut by_mac: BTreeMap<MacAddress, Vec<&WifiObservation>> = BTreeMap::new();
        for o in &s.observations {
            by_mac.entry(o.bssid).or_default().push(o);
        }
        by_mac
            .into_iter()
            .map(|(m, mut v)| {
                v.sort_by(|x, y| (x.timestamp, &x.ssid).cmp(&(y.timestamp, &y.ssid)));
                (m, v.last().unwrap().ssid.clone())
            })
            .collect::<BTreeMap<_, _>>()
    };
    let (la, lb) = (latest(a), latest(b));
    let mut d = ScanDiff::default();
    let all: BTreeSet<MacAddress> = la.keys().chain(lb.keys()).copied().collect();
    for m in all {
        match (la.get(&m), lb.get(&m)) {
            (Some(_), None) => {
                d.removed.insert(m);
            }
            (None, Some(_)) => {
                d.added.insert(m);
            }
            (Some(x), Some(y)) if x == y => {
                d.unchanged.insert(m);
            }
            (Some(x), Some(y)) => {
                d.renamed.insert(m, SsidChange { old_ssid: x.clone(), new_ssid: y.clone() });
            }
            (None, None) => unreachable!(),
        }
    }
    d
}

fn check_diff(a: &WifiScan, b: &WifiScan) -> Result<(), String> {
    let ab = diff_scans(a, b);
    let ba = diff_scans(b, a);
    let union: BTreeSet<MacAddress> = a.observations.iter().chain(&b.observations).map(|o| o.bssid).collect();
    let parts = [&ab.added, &ab.removed, &ab.unchanged, &ab.renamed.keys().copied().collect()];
    let total: usize = parts.iter().map(|p| p.len()).sum();
    let joined: BTreeSet<MacAddress> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    if total != union.len() || joined != union {
        return Err("key sets do not partition the BSSID union".into());
    }
    let flipped: BTreeMap<_, _> = ab
        .renamed
        .iter()
        .map(|(m, c)| (*m, SsidChange { old_ssid: c.new_ssid.clone(), new_ssid: c.old_ssid.clone() }))
        .collect();
    if ab.added != ba.removed || ab.removed != ba.added || ab.unchanged != ba.unchanged || flipped != ba.renamed {
        return Err("diff is not antisymmetric".into());
    }
    if ab != oracle_diff(a, b) {
        return Err(format!("diff differs from oracle: {ab:?}"));
    }
    Ok(())
}

pub fn scan_diff() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5CA7);
    let ssids = [None, Some("Home"), Some("Cafe"), Some("Office"), Some("")];
    let random_scan = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(0..20);
        let o = (0..n)
            .map(|_| obs(rng.random_range(0..10), *ssids.choose(rng).unwrap(), rng.random_range(0..5)))
            .collect();
        WifiScan::new("s", "", o)
    };
    const TRIALS: usize = 2000;
    for trial in 0..TRIALS {
        let (a, b) = (random_scan(&mut rng), random_scan(&mut rng));
        check_diff(&a, &b).map_err(|e| format!("trial {trial}: {e}"))?;
    }

    // before/after comparisons at one location
    let a = parse_wifi_csv(&read("golden/scan_a.csv"), ImportMode::Strict).map_err(|e| e.to_string())?.records;
    let b = parse_wifi_csv(&read("golden/scan_b.csv"), ImportMode::Strict).map_err(|e| e.to_string())?.records;
    let renamed_inside = WifiScan::new(
        "c",
        "",
        vec![obs(1, Some("Home"), 0), obs(1, Some("Home-5G"), 30), obs(2, None, 0), obs(2, Some("Cafe"), 10), obs(3, Some("Gone"), 0)],
    );
    let fixtures = [("golden scans", &a, &b), ("scan against itself", &a, &a), ("renamed within a capture", &b, &renamed_inside)];
    for (name, x, y) in fixtures {
        check_diff(x, y).map_err(|e| format!("{name}: {e}"))?;
    }
    let d = diff_scans(&a, &b);
    let mac = |s: &str| s.parse::<MacAddress>().unwrap();
    let frozen = d.added == BTreeSet::from([mac("de:ad:be:ef:00:05")])
        && d.removed == BTreeSet::from([mac("66:77:88:99:aa:04")])
        && d.unchanged == BTreeSet::from([mac("00:11:22:33:44:01")])
        && d.renamed.keys().copied().collect::<Vec<_>>() == [mac("00:11:22:33:44:02"), mac("00:11:22:33:44:03")];
    if !frozen {
        return Err(format!("golden scan diff changed: {d:?}"));
    }
    let same = diff_scans(&a, &a);
    if same.unchanged.len() != a.observations.len() || !same.added.is_empty() || !same.removed.is_empty() || !same.renamed.is_empty() {
        return Err("self diff is not all unchanged".into());
    }
    Ok(format!("{TRIALS} random trials, 3 fixtures"))
}

/// Every (mac, plate) pair scored by direct enumeration.
fn oracle_scores(bt: &[BtDetection], anpr: &[AnprDetection], p: CorrelationParams) -> Vec<(MacAddress, String, usize, usize, f64)> {
    let mut by_mac: BTreeMap<MacAddress, Vec<&BtDetection>> = BTreeMap::new();
    for b in bt {
        by_mac.entry(b.mac).or_default().push(b);
    }
    let mut by_plate: BTreeMap<&str, Vec<&AnprDetection>> = BTreeMap::new();
    for a in anpr {
        by_plate.entry(a.plate.as_str()).or_default().push(a);
    }
    let close = |b: &BtDetection, a: &AnprDetection| {
        let dt = (b.timestamp - a.timestamp).num_milliseconds().abs() as f64 / 1000.0;
        dt <= p.dt_s && haversine_distance(b.position, a.position) <= p.d_m
    };
    let mut out = Vec::new();
    for (mac, bs) in &by_mac {
        for (plate, as_) in &by_plate {
            let hits: Vec<&&BtDetection> = bs.iter().filter(|b| as_.iter().any(|a| close(b, a))).collect();
            if hits.is_empty() {
                continue;
            }
            let sensors: BTreeSet<&str> = hits.iter().map(|b| b.sensor_id.as_str()).collect();
            let score = (hits.len() * sensors.len()) as f64;
            out.push((*mac, plate.to_string(), hits.len(), sensors.len(), score));
        }
    }
    out.sort_by(|x, y| y.4.total_cmp(&x.4).then(y.2.cmp(&x.2)).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    out
}

pub fn correlation() -> Verdict {
    let started = Instant::now();
    let params = CorrelationParams::default();
    let mut first = 0;
    let mut margins = Vec::new();
    for seed in 0..100u64 {
        let mut spec = SyntheticSpec { seed, ..SyntheticSpec::default() };
        spec.planted_pair = Some(PlantedSpec { n_sensors: 5, ..PlantedSpec::default() });
        let data = generate_correlation(&spec);
        let planted = data.planted.clone().ok_or("no planted pair")?;
        // through the CSV files the generator writes
        let bt = parse_bt_csv(&bt_csv(&data.bt), ImportMode::Strict).map_err(|e| e.to_string())?.records;
        let anpr = parse_anpr_csv(&anpr_csv(&data.anpr), ImportMode::Strict).map_err(|e| e.to_string())?.records;
        let got = correlate_bt_anpr(&bt, &anpr, params).map_err(|e| e.to_string())?;
        let want = oracle_scores(&bt, &anpr, params);
        let flat: Vec<_> = got.iter().map(|s| (s.mac, s.plate.clone(), s.co_occurrences, s.distinct_sensors, s.score)).collect();
        if flat != want {
            return Err(format!("seed {seed}: ranking differs from exhaustive enumeration"));
        }
        if got.first().is_some_and(|s| s.mac == planted.mac && s.plate == planted.plate) {
            first += 1;
            margins.push(got[0].score - got.get(1).map_or(0.0, |s| s.score));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let detail = format!("planted pair ranked #1 in {first}/100 seeds (smallest lead {min_margin}), oracle agreed on 100/100, {secs:.1} s");
    if first < 95 {
        return Err(detail);
    }
    if secs >= 60.0 {
        return Err(format!("{detail}; budget 60 s"));
    }
    Ok(detail)
}

pub fn stops() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut spec = SyntheticSpec { seed: 2016, n_cameras: 1, n_scan_networks: 1, ..SyntheticSpec::default() };
    spec.correlation.noise_vehicles = 1;
    spec.correlation.loose_devices = 0;
    spec.stops.tracks = 100;
    let truth: GroundTruth = {
        write_dataset(&spec, dir.path()).map_err(|e| e.to_string())?;
        serde_json::from_slice(&std::fs::read(dir.path().join("ground_truth.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?
    };
    let params = StopParams { epsilon_m: spec.stops.epsilon_m, tau_s: spec.stops.tau_s };
    let interval = spec.stops.sample_interval_s as f64;
    let (mut true_stops, mut worst, mut spurious, mut constant) = (0, 0.0f64, 0, 0);
    for tt in &truth.tracks {
        let track = parse_gpx(&std::fs::read(dir.path().join(&tt.file)).map_err(|e| e.to_string())?)
            .map_err(|e| format!("{}: {e}", tt.file))?
            .tracks()
            .into_iter()
            .next()
            .ok_or(format!("{} has no track", tt.file))?;
        let found = detect_stops(&track, params).map_err(|e| e.to_string())?;
        if tt.constant_motion {
            constant += 1;
            if !found.is_empty() {
                return Err(format!("{}: {} stop(s) on a constant-motion track", tt.track_id, found.len()));
            }
        }
        let mut matched = vec![false; found.len()];
        for s in &tt.stops {
            true_stops += 1;
            let hit = found.iter().position(|f| f.start <= s.end && f.end >= s.start).ok_or(format!("{}: stop at {} missed", tt.track_id, s.start))?;
            matched[hit] = true;
            let err = (found[hit].dwell - s.dwell_s).abs();
            worst = worst.max(err);
            if err > interval {
                return Err(format!("{}: dwell {} vs true {}", tt.track_id, found[hit].dwell, s.dwell_s));
            }
        }
        spurious += matched.iter().filter(|m| !**m).count();
    }
    if truth.tracks.len() != 100 {
        return Err(format!("expected 100 tracks, got {}", truth.tracks.len()));
    }
    if spurious > 0 {
        return Err(format!("{spurious} detected stop(s) match no true stop"));
    }
    Ok(format!(
        "100 tracks ({constant} constant motion), {true_stops} true stops recovered, worst dwell error {worst} s (limit {interval} s), 0 spurious"
    ))
}
