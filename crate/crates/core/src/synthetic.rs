//! Seeded generator for test and demonstration evidence.
//!
//! Produces Bluetooth/ANPR detections with one planted device/plate pair,
//! GPS tracks with known stops, a camera registry and a pair of Wi-Fi
//! scans. The same settings and seed always yield the same bytes.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidence::{
    AnprDetection, BtDetection, CameraCategory, CameraRecord, GpsTrack, Timestamp, TrackPoint, WifiObservation,
    WifiScan,
};
use crate::evidence::normalize_plate;
use crate::ingest::{format_utc, MacAddress};
use crate::spatial::{haversine_distance, normalize_lon, GeoPoint, EARTH_RADIUS_M};

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Centre of the generated area.
    pub center_lat: f64,
    pub center_lon: f64,
    /// Side of the square area, in kilometres.
    pub area_km: f64,
    pub start_time: Timestamp,
    pub correlation: CorrelationSpec,
    /// Device/plate pair travelling together; `None` plants nothing.
    pub planted_pair: Option<PlantedSpec>,
    pub stops: StopTrackSpec,
    /// Stops for one extra hand-specified track, visited in order.
    pub track_profile: Option<Vec<ProfileStop>>,
    pub n_cameras: usize,
    pub n_scan_networks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedSpec {
    /// Drawn at random when absent.
    pub mac: Option<MacAddress>,
    pub plate: Option<String>,
    /// Distinct sites the pair passes.
    pub n_sensors: usize,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec { mac: None, plate: None, n_sensors: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileStop {
    pub lat: f64,
    pub lon: f64,
    pub dwell_s: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 1,
            center_lat: 52.0705,
            center_lon: 4.3007,
            area_km: 20.0,
            start_time: Utc.with_ymd_and_hms(2024, 3, 1, 8, 0, 0).unwrap(),
            correlation: CorrelationSpec::default(),
            planted_pair: Some(PlantedSpec::default()),
            stops: StopTrackSpec::default(),
            track_profile: None,
            n_cameras: 1000,
            n_scan_networks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationSpec {
    /// Roadside sites, each with a co-located Bluetooth and ANPR sensor.
    pub sites: usize,
    pub noise_vehicles: usize,
    pub max_noise_passes: usize,
    /// Fraction of vehicles carrying a detectable Bluetooth device.
    pub bt_p: f64,
    /// Chance that a detectable device is logged on a given pass.
    pub bt_pass_p: f64,
    /// Chance that a passing plate is read.
    pub anpr_p: f64,
    /// Bluetooth devices not in any vehicle (pedestrians, cyclists).
    pub loose_devices: usize,
    pub window_hours: f64,
    /// Bluetooth timestamps deviate from the ANPR read by up to this much.
    pub bt_jitter_s: f64,
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        CorrelationSpec {
            sites: 16,
            noise_vehicles: 500,
            max_noise_passes: 3,
            bt_p: 0.42,
            bt_pass_p: 1.0,
            anpr_p: 1.0,
            loose_devices: 100,
            window_hours: 4.0,
            bt_jitter_s: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopTrackSpec {
    pub tracks: usize,
    pub constant_motion_fraction: f64,
    pub sample_interval_s: i64,
    pub epsilon_m: f64,
    pub tau_s: f64,
    pub min_stops: usize,
    pub max_stops: usize,
    /// Short halts (traffic lights, queues) below `tau_s`.
    pub max_short_halts: usize,
    pub leg_min_m: f64,
    pub leg_max_m: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub jitter_sigma_m: f64,
}

impl Default for StopTrackSpec {
    fn default() -> Self {
        StopTrackSpec {
            tracks: 100,
            constant_motion_fraction: 0.3,
            sample_interval_s: 5,
            epsilon_m: 50.0,
            tau_s: 300.0,
            min_stops: 1,
            max_stops: 3,
            max_short_halts: 2,
            leg_min_m: 1000.0,
            leg_max_m: 3000.0,
            speed_min_mps: 14.0,
            speed_max_mps: 22.0,
            jitter_sigma_m: 1.5,
        }
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: String| Err(SyntheticError::InvalidSpec(m));
        let c = &self.correlation;
        let s = &self.stops;
        if GeoPoint::new(self.center_lat, self.center_lon).is_err() || !positive(self.area_km) {
            return bad("centre must be a valid position and area_km > 0".into());
        }
        if c.max_noise_passes > c.sites || c.max_noise_passes == 0 {
            return bad("max_noise_passes must be between 1 and sites".into());
        }
        if let Some(p) = &self.planted_pair {
            if p.n_sensors == 0 || p.n_sensors > c.sites {
                return bad(format!("planted_pair.n_sensors must be between 1 and sites ({})", c.sites));
            }
            if p.plate.as_deref().is_some_and(|pl| pl.trim().is_empty()) {
                return bad("planted_pair.plate must not be blank".into());
            }
        }
        if [c.bt_p, c.bt_pass_p, c.anpr_p].iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("bt_p, bt_pass_p and anpr_p must lie in [0, 1]".into());
        }
        for (i, p) in self.track_profile.iter().flatten().enumerate() {
            if GeoPoint::new(p.lat, p.lon).is_err() || !positive(p.dwell_s) {
                return bad(format!("track_profile[{i}] needs a valid position and dwell_s > 0"));
            }
        }
        if !positive(c.window_hours) || !(c.bt_jitter_s.is_finite() && c.bt_jitter_s >= 0.0) {
            return bad("window_hours must be > 0 and bt_jitter_s >= 0".into());
        }
        if s.sample_interval_s <= 0 || !positive(s.tau_s) || !positive(s.epsilon_m) || s.min_stops > s.max_stops {
            return bad("stop tracks need sample_interval_s > 0, tau_s > 0, epsilon_m > 0, min_stops <= max_stops".into());
        }
        let step = s.speed_min_mps * s.sample_interval_s as f64;
        if step <= s.epsilon_m + 9.0 * s.jitter_sigma_m {
            return bad(format!(
                "moving fixes are {step} m apart, which does not clear epsilon_m plus jitter; raise speed_min_mps"
            ));
        }
        if !(s.leg_min_m > 0.0 && s.leg_min_m <= s.leg_max_m && s.speed_min_mps <= s.speed_max_mps) {
            return bad("leg and speed ranges must be positive and ordered".into());
        }
        if !(0.0..=1.0).contains(&s.constant_motion_fraction) {
            return bad("constant_motion_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Point at `dist_m` along `bearing_deg` from `p` on the sphere.
fn destination(p: GeoPoint, bearing_deg: f64, dist_m: f64) -> GeoPoint {
    let d = dist_m / EARTH_RADIUS_M;
    let b = bearing_deg.to_radians();
    let (lat1, lon1) = (p.lat().to_radians(), p.lon().to_radians());
    let lat2 = (lat1.sin() * d.cos() + lat1.cos() * d.sin() * b.cos()).asin();
    let lon2 = lon1 + (b.sin() * d.sin() * lat1.cos()).atan2(d.cos() - lat1.sin() * lat2.sin());
    GeoPoint::new(lat2.to_degrees().clamp(-90.0, 90.0), normalize_lon(lon2.to_degrees())).expect("finite")
}

/// Offset by a clipped Gaussian error of `sigma` meters in each axis.
fn jitter(rng: &mut ChaCha8Rng, p: GeoPoint, sigma: f64) -> GeoPoint {
    if sigma <= 0.0 {
        return p;
    }
    let n = Normal::new(0.0, sigma).expect("sigma > 0");
    let mut draw = || n.sample(rng).clamp(-3.0 * sigma, 3.0 * sigma);
    let (dn, de) = (draw(), draw());
    destination(destination(p, 0.0, dn), 90.0, de)
}

fn millis(ms: i64) -> Duration {
    Duration::milliseconds(ms)
}

fn random_point(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> GeoPoint {
    let half = spec.area_km * 500.0;
    let center = GeoPoint::new(spec.center_lat, spec.center_lon).expect("validated");
    let p = destination(center, 0.0, rng.random_range(-half..=half));
    destination(p, 90.0, rng.random_range(-half..=half))
}

fn random_mac(rng: &mut ChaCha8Rng, used: &mut BTreeSet<MacAddress>) -> MacAddress {
    loop {
        let mut b: [u8; 6] = rng.random();
        b[0] &= 0xFE;
        let m = MacAddress::from_octets(b);
        if used.insert(m) {
            return m;
        }
    }
}

fn random_plate(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    const LETTERS: &[u8] = b"BDFGHJKLNPRSTVXZ";
    loop {
        let mut l = || LETTERS[rng.random_range(0..LETTERS.len())] as char;
        let (a, b, c) = (l(), l(), l());
        let plate = format!("{a}{b}-{:03}-{c}", rng.random_range(0..1000));
        if used.insert(plate.clone()) {
            return plate;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub bt_sensor: String,
    pub anpr_sensor: String,
    pub bt_position: GeoPoint,
    pub anpr_position: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub mac: MacAddress,
    pub plate: String,
    pub sites: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationData {
    pub sites: Vec<Site>,
    pub bt: Vec<BtDetection>,
    pub anpr: Vec<AnprDetection>,
    pub planted: Option<PlantedPair>,
}

pub fn generate_correlation(spec: &SyntheticSpec) -> CorrelationData {
    let c = &spec.correlation;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xB1_0E70);

    // sites at least 1 km apart where the area allows it
    let mut positions: Vec<GeoPoint> = Vec::new();
    for attempt in 0.. {
        if positions.len() == c.sites {
            break;
        }
        let p = random_point(&mut rng, spec);
        let min_sep = if attempt < 10_000 { 1000.0 } else { 0.0 };
        if positions.iter().all(|q| haversine_distance(*q, p) >= min_sep) {
            positions.push(p);
        }
    }
    let sites: Vec<Site> = positions
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let bt_position = destination(p, rng.random_range(0.0..360.0), rng.random_range(0.0..10.0));
            Site {
                bt_sensor: format!("bt-{:02}", i + 1),
                anpr_sensor: format!("anpr-{:02}", i + 1),
                bt_position,
                anpr_position: p,
            }
        })
        .collect();

    let window_ms = (c.window_hours * 3_600_000.0) as i64;
    let jitter_ms = (c.bt_jitter_s * 1000.0) as i64;
    let mut macs = BTreeSet::new();
    let mut plates = BTreeSet::new();
    let mut bt = Vec::new();
    let mut anpr = Vec::new();

    let mut pass = |rng: &mut ChaCha8Rng, site: &Site, plate: Option<&str>, mac: Option<MacAddress>, planted: bool| {
        let t = spec.start_time + millis(rng.random_range(0..window_ms));
        let read = planted || rng.random_bool(c.anpr_p);
        if let Some(plate) = plate.filter(|_| read) {
            anpr.push(AnprDetection {
                plate: plate.to_string(),
                sensor_id: site.anpr_sensor.clone(),
                position: site.anpr_position,
                timestamp: t,
            });
        }
        if let Some(mac) = mac {
            if planted || rng.random_bool(c.bt_pass_p) {
                bt.push(BtDetection {
                    mac,
                    sensor_id: site.bt_sensor.clone(),
                    position: site.bt_position,
                    timestamp: t + millis(rng.random_range(-jitter_ms..=jitter_ms)),
                });
            }
        }
    };

    let planted = spec.planted_pair.as_ref().map(|p| {
        let mac = match p.mac {
            Some(m) => {
                macs.insert(m);
                m
            }
            None => random_mac(&mut rng, &mut macs),
        };
        let plate = match &p.plate {
            Some(pl) => {
                let pl = normalize_plate(pl);
                plates.insert(pl.clone());
                pl
            }
            None => random_plate(&mut rng, &mut plates),
        };
        let visited: Vec<&Site> = sites.choose_multiple(&mut rng, p.n_sensors).collect();
        for site in &visited {
            pass(&mut rng, site, Some(&plate), Some(mac), true);
        }
        PlantedPair {
            mac,
            plate,
            sites: visited.iter().map(|s| s.bt_sensor.clone()).collect(),
        }
    });

    for _ in 0..c.noise_vehicles {
        let plate = random_plate(&mut rng, &mut plates);
        let mac = rng.random_bool(c.bt_p).then(|| random_mac(&mut rng, &mut macs));
        let n = rng.random_range(1..=c.max_noise_passes);
        let visited: Vec<&Site> = sites.choose_multiple(&mut rng, n).collect();
        for site in visited {
            pass(&mut rng, site, Some(&plate), mac, false);
        }
    }
    for _ in 0..c.loose_devices {
        let mac = random_mac(&mut rng, &mut macs);
        let n = rng.random_range(1..=c.max_noise_passes);
        let visited: Vec<&Site> = sites.choose_multiple(&mut rng, n).collect();
        for site in visited {
            pass(&mut rng, site, None, Some(mac), false);
        }
    }

    bt.sort_by(|a, b| (a.timestamp, &a.sensor_id, a.mac).cmp(&(b.timestamp, &b.sensor_id, b.mac)));
    anpr.sort_by(|a, b| (a.timestamp, &a.sensor_id, &a.plate).cmp(&(b.timestamp, &b.sensor_id, &b.plate)));
    CorrelationData { sites, bt, anpr, planted }
}

/// A stop the generator put into a track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueStop {
    pub position: GeoPoint,
    pub start: Timestamp,
    pub end: Timestamp,
    pub dwell_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackTruth {
    pub track_id: String,
    pub file: String,
    pub constant_motion: bool,
    /// Stops of at least `tau_s + sample_interval_s`.
    pub stops: Vec<TrueStop>,
    /// Halts shorter than `tau_s`; a detector must not report them.
    pub short_halts: Vec<TrueStop>,
}

struct Walker<'a> {
    rng: ChaCha8Rng,
    spec: &'a StopTrackSpec,
    at: GeoPoint,
    t: Timestamp,
    heading: f64,
    points: Vec<TrackPoint>,
}

impl Walker<'_> {
    fn dt(&self) -> Duration {
        Duration::seconds(self.spec.sample_interval_s)
    }

    fn fix(&mut self, p: GeoPoint) {
        let position = jitter(&mut self.rng, p, self.spec.jitter_sigma_m);
        self.points.push(TrackPoint { position, timestamp: self.t });
    }

    /// Drives one leg; the first fix lands one step after the current one.
    fn leg(&mut self) {
        let s = self.spec;
        self.heading = (self.heading + self.rng.random_range(-90.0..90.0)).rem_euclid(360.0);
        let speed = self.rng.random_range(s.speed_min_mps..=s.speed_max_mps);
        let length = self.rng.random_range(s.leg_min_m..=s.leg_max_m);
        let step = speed * s.sample_interval_s as f64;
        let steps = (length / step).ceil().max(1.0) as usize;
        for _ in 0..steps {
            self.at = destination(self.at, self.heading, step);
            self.t += self.dt();
            let here = self.at;
            self.fix(here);
        }
    }

    /// Straight to `target` at a random leg speed, arriving on a fix.
    fn drive_to(&mut self, target: GeoPoint) {
        let s = self.spec;
        let start = self.at;
        let dist = haversine_distance(start, target);
        self.heading = initial_bearing(start, target);
        let speed = self.rng.random_range(s.speed_min_mps..=s.speed_max_mps);
        let steps = ((dist / (speed * s.sample_interval_s as f64)).floor() as usize).max(1);
        for k in 1..=steps {
            self.at = if k == steps { target } else { destination(start, self.heading, dist * k as f64 / steps as f64) };
            self.t += self.dt();
            let here = self.at;
            self.fix(here);
        }
    }

    /// Holds position for `dwell` seconds, a multiple of the interval. The
    /// halt starts at the current (arrival) fix.
    fn halt(&mut self, dwell: i64) -> TrueStop {
        let start = self.t;
        for _ in 0..dwell / self.spec.sample_interval_s {
            self.t += self.dt();
            let here = self.at;
            self.fix(here);
        }
        TrueStop {
            position: self.at,
            start,
            end: self.t,
            dwell_s: (self.t - start).num_milliseconds() as f64 / 1000.0,
        }
    }
}

/// Random tracks per `spec.stops`, followed by the `track_profile` track
/// when one is given.
pub fn generate_stop_tracks(spec: &SyntheticSpec) -> Vec<(GpsTrack, TrackTruth)> {
    let s = &spec.stops;
    let mut picker = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5709);
    let mut out: Vec<(GpsTrack, TrackTruth)> = (0..s.tracks)
        .map(|i| {
            let track_id = format!("synthetic-track-{:03}", i + 1);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
            let at = random_point(&mut rng, spec);
            let t = spec.start_time + Duration::seconds(rng.random_range(0..6 * 3600));
            let heading = rng.random_range(0.0..360.0);
            let mut w = Walker { rng, spec: s, at, t, heading, points: Vec::new() };
            let here = w.at;
            w.fix(here);
            let constant_motion = picker.random_bool(s.constant_motion_fraction);
            let mut truth = TrackTruth {
                track_id: track_id.clone(),
                file: format!("tracks/{track_id}.gpx"),
                constant_motion,
                stops: Vec::new(),
                short_halts: Vec::new(),
            };
            if constant_motion {
                cruise(&mut w);
            } else {
                let dt = s.sample_interval_s;
                let long_min = ((s.tau_s / dt as f64).ceil() as i64 + 1) * dt;
                let long_max = ((3.0 * s.tau_s / dt as f64).floor() as i64 * dt).max(long_min);
                let short_max = ((s.tau_s / dt as f64).ceil() as i64 - 1) * dt;
                let n_stops = w.rng.random_range(s.min_stops..=s.max_stops);
                let n_short = if short_max >= dt { w.rng.random_range(0..=s.max_short_halts) } else { 0 };
                let mut events: Vec<bool> = std::iter::repeat_n(true, n_stops).chain(std::iter::repeat_n(false, n_short)).collect();
                events.shuffle(&mut w.rng);
                w.leg();
                for long in events {
                    if long {
                        let dwell = w.rng.random_range(long_min / dt..=long_max / dt) * dt;
                        truth.stops.push(w.halt(dwell));
                    } else {
                        let dwell = w.rng.random_range(1..=short_max / dt) * dt;
                        truth.short_halts.push(w.halt(dwell));
                    }
                    w.leg();
                }
            }
            let track = GpsTrack { track_id, label: String::new(), points: w.points };
            (track, truth)
        })
        .collect();
    if let Some(profile) = spec.track_profile.as_ref().filter(|p| !p.is_empty()) {
        out.push(profile_track(spec, profile));
    }
    out
}

fn initial_bearing(a: GeoPoint, b: GeoPoint) -> f64 {
    let (la, lb) = (a.lat().to_radians(), b.lat().to_radians());
    let dl = (b.lon() - a.lon()).to_radians();
    let y = dl.sin() * lb.cos();
    let x = la.cos() * lb.sin() - la.sin() * lb.cos() * dl.cos();
    y.atan2(x).to_degrees().rem_euclid(360.0)
}

/// Drives from 1.5 km south of the first stop through every profile stop in
/// order. Dwells are rounded up to whole sample intervals.
fn profile_track(spec: &SyntheticSpec, profile: &[ProfileStop]) -> (GpsTrack, TrackTruth) {
    let s = &spec.stops;
    let track_id = "profile-track".to_string();
    let rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x960F11E);
    let first = GeoPoint::new(profile[0].lat, profile[0].lon).expect("validated");
    let at = destination(first, 180.0, 1500.0);
    let mut w = Walker { rng, spec: s, at, t: spec.start_time, heading: 0.0, points: Vec::new() };
    w.fix(at);
    let mut truth = TrackTruth {
        track_id: track_id.clone(),
        file: format!("tracks/{track_id}.gpx"),
        constant_motion: false,
        stops: Vec::new(),
        short_halts: Vec::new(),
    };
    for stop in profile {
        let target = GeoPoint::new(stop.lat, stop.lon).expect("validated");
        w.drive_to(target);
        let dt = s.sample_interval_s;
        let dwell = ((stop.dwell_s / dt as f64).ceil() as i64).max(1) * dt;
        let halt = w.halt(dwell);
        if halt.dwell_s >= s.tau_s {
            truth.stops.push(halt);
        } else {
            truth.short_halts.push(halt);
        }
    }
    w.leg();
    (GpsTrack { track_id, label: "profile".into(), points: w.points }, truth)
}

/// Steady travel with a slowly drifting heading, never halting: either
/// walking pace or driving speed for 30 to 60 minutes.
fn cruise(w: &mut Walker<'_>) {
    let speed = if w.rng.random_bool(0.5) { w.rng.random_range(1.0..3.0) } else { w.rng.random_range(8.0..30.0) };
    let duration = w.rng.random_range(1800..=3600);
    let step = speed * w.spec.sample_interval_s as f64;
    for _ in 0..duration / w.spec.sample_interval_s {
        w.heading = (w.heading + w.rng.random_range(-3.0..3.0)).rem_euclid(360.0);
        w.at = destination(w.at, w.heading, step);
        w.t += w.dt();
        let here = w.at;
        w.fix(here);
    }
}

pub fn generate_cameras(spec: &SyntheticSpec) -> Vec<CameraRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xCA3E7A);
    let categories = [CameraCategory::Public, CameraCategory::Private, CameraCategory::Unknown];
    (0..spec.n_cameras)
        .map(|i| {
            let category = *categories.choose(&mut rng).expect("non-empty");
            CameraRecord {
                camera_id: format!("cam-{:05}", i + 1),
                position: random_point(&mut rng, spec),
                category,
                owner_contact: format!("owner{}@example.invalid", i + 1),
                description: String::new(),
                source: "synthetic".into(),
                tags: Vec::new(),
            }
        })
        .collect()
}

/// Two scans of one street: some networks vanish, appear or are renamed
/// between them.
pub fn generate_wifi_scans(spec: &SyntheticSpec) -> (WifiScan, WifiScan) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x317F1);
    let mut used = BTreeSet::new();
    let street = random_point(&mut rng, spec);
    let heading = rng.random_range(0.0..360.0);
    let names = ["home", "Ziggo", "KPN", "cafe", "office", "guest", "printer"];
    let mut a = Vec::new();
    let mut b = Vec::new();
    let t_a = spec.start_time;
    let t_b = spec.start_time + Duration::days(7);
    for i in 0..spec.n_scan_networks {
        let bssid = random_mac(&mut rng, &mut used);
        let pos = destination(street, heading, i as f64 * 15.0);
        let ssid = rng
            .random_bool(0.9)
            .then(|| format!("{}-{}", names.choose(&mut rng).expect("non-empty"), rng.random_range(10..100)));
        let obs = |t: DateTime<Utc>, ssid: Option<String>, rng: &mut ChaCha8Rng| WifiObservation {
            bssid,
            ssid,
            position: pos,
            timestamp: t + Duration::seconds(i as i64 * 3),
            signal_dbm: Some(rng.random_range(-90..-30)),
        };
        match rng.random_range(0..10) {
            0 => a.push(obs(t_a, ssid, &mut rng)),
            1 => b.push(obs(t_b, ssid, &mut rng)),
            2 => {
                a.push(obs(t_a, ssid.clone(), &mut rng));
                b.push(obs(t_b, Some(format!("renamed-{}", rng.random_range(10..100))), &mut rng));
            }
            _ => {
                a.push(obs(t_a, ssid.clone(), &mut rng));
                b.push(obs(t_b, ssid, &mut rng));
            }
        }
    }
    (WifiScan::new("", "before", a), WifiScan::new("", "after", b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SyntheticSpec,
    pub planted_pair: Option<PlantedPair>,
    pub sites: Vec<Site>,
    pub tracks: Vec<TrackTruth>,
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Shortest form that parses back to the same `f64`.
fn fmt_coord(v: f64) -> String {
    v.to_string()
}

pub fn bt_csv(bt: &[BtDetection]) -> Vec<u8> {
    csv_bytes(
        &["timestamp", "mac", "sensor_id", "lat", "lon"],
        bt.iter().map(|d| {
            vec![format_utc(&d.timestamp), d.mac.to_string(), d.sensor_id.clone(), fmt_coord(d.position.lat()), fmt_coord(d.position.lon())]
        }),
    )
}

pub fn anpr_csv(anpr: &[AnprDetection]) -> Vec<u8> {
    csv_bytes(
        &["timestamp", "plate", "sensor_id", "lat", "lon"],
        anpr.iter().map(|d| {
            vec![format_utc(&d.timestamp), d.plate.clone(), d.sensor_id.clone(), fmt_coord(d.position.lat()), fmt_coord(d.position.lon())]
        }),
    )
}

pub fn camera_csv(cameras: &[CameraRecord]) -> Vec<u8> {
    csv_bytes(
        &["camera_id", "lat", "lon", "category", "owner", "description"],
        cameras.iter().map(|c| {
            vec![
                c.camera_id.clone(),
                fmt_coord(c.position.lat()),
                fmt_coord(c.position.lon()),
                c.category.as_str().to_string(),
                c.owner_contact.clone(),
                c.description.clone(),
            ]
        }),
    )
}

pub fn wifi_csv(scan: &WifiScan) -> Vec<u8> {
    csv_bytes(
        &["timestamp", "bssid", "ssid", "lat", "lon", "signal_dbm"],
        scan.observations.iter().map(|o| {
            vec![
                format_utc(&o.timestamp),
                o.bssid.to_string(),
                o.ssid.clone().unwrap_or_default(),
                fmt_coord(o.position.lat()),
                fmt_coord(o.position.lon()),
                o.signal_dbm.map(|s| s.to_string()).unwrap_or_default(),
            ]
        }),
    )
}

pub fn track_gpx(track: &GpsTrack) -> Vec<u8> {
    let mut s = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<gpx version=\"1.1\" creator=\"fgis gen-synthetic\" xmlns=\"http://www.topografix.com/GPX/1/1\">\n",
    );
    s.push_str(&format!("  <trk>\n    <name>{}</name>\n    <trkseg>\n", track.track_id));
    for p in &track.points {
        s.push_str(&format!(
            "      <trkpt lat=\"{:.8}\" lon=\"{:.8}\"><time>{}</time></trkpt>\n",
            p.position.lat(),
            p.position.lon(),
            format_utc(&p.timestamp)
        ));
    }
    s.push_str("    </trkseg>\n  </trk>\n</gpx>\n");
    s.into_bytes()
}

/// Writes every dataset under `out` and returns the ground truth that was
/// also written to `ground_truth.json`.
pub fn write_dataset(spec: &SyntheticSpec, out: &Path) -> Result<GroundTruth, SyntheticError> {
    spec.validate()?;
    let write = |rel: &str, bytes: &[u8]| {
        let path = out.join(rel);
        let io = |source| SyntheticError::Io { path: path.display().to_string(), source };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        fs::write(&path, bytes).map_err(io)
    };
    let corr = generate_correlation(spec);
    write("bt.csv", &bt_csv(&corr.bt))?;
    write("anpr.csv", &anpr_csv(&corr.anpr))?;
    write("cameras.csv", &camera_csv(&generate_cameras(spec)))?;
    let (a, b) = generate_wifi_scans(spec);
    write("scan_a.csv", &wifi_csv(&a))?;
    write("scan_b.csv", &wifi_csv(&b))?;
    let mut tracks = Vec::new();
    for (track, truth) in generate_stop_tracks(spec) {
        write(&truth.file, &track_gpx(&track))?;
        tracks.push(truth);
    }
    let truth = GroundTruth {
        spec: spec.clone(),
        planted_pair: corr.planted,
        sites: corr.sites,
        tracks,
    };
    let mut json = serde_json::to_vec_pretty(&truth).expect("serializable");
    json.push(b'\n');
    write("ground_truth.json", &json)?;
    Ok(truth)
}
