use std::fmt;

use serde::Serialize;

use super::{evidence_point, parse_utc, IngestError, MacAddress};
use crate::evidence::{
    normalize_plate, AnprDetection, BtDetection, CameraCategory, CameraRecord, Timestamp,
    WifiObservation, WifiScan,
};
use crate::spatial::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvSchema {
    Wifi,
    Anpr,
    Bt,
    Camera,
}

impl CsvSchema {
    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            CsvSchema::Wifi => &["timestamp", "bssid", "ssid", "lat", "lon", "signal_dbm"],
            CsvSchema::Anpr => &["timestamp", "plate", "sensor_id", "lat", "lon"],
            CsvSchema::Bt => &["timestamp", "mac", "sensor_id", "lat", "lon"],
            CsvSchema::Camera => &["camera_id", "lat", "lon", "category", "owner", "description"],
        }
    }
}

impl fmt::Display for CsvSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CsvSchema::Wifi => "Wi-Fi",
            CsvSchema::Anpr => "ANPR",
            CsvSchema::Bt => "Bluetooth",
            CsvSchema::Camera => "camera",
        })
    }
}

/// Whether bad rows abort the import.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImportMode {
    #[default]
    Strict,
    Lenient,
}

/// One rejected CSV row. `line` is the 1-based line in the file (header is line 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvOutcome<T> {
    pub records: T,
    /// Rows dropped in lenient mode. Always empty in strict mode.
    pub skipped: Vec<RowError>,
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    columns: &'a [usize],
    names: &'static [&'static str],
}

impl Row<'_> {
    fn field(&self, i: usize) -> &str {
        self.record.get(self.columns[i]).map(str::trim).unwrap_or("")
    }

    fn required(&self, i: usize) -> Result<&str, String> {
        let v = self.field(i);
        if v.is_empty() {
            Err(format!("missing {}", self.names[i]))
        } else {
            Ok(v)
        }
    }

    fn timestamp(&self, i: usize) -> Result<Timestamp, String> {
        let raw = self.required(i)?;
        parse_utc(raw).map_err(|_| format!("timestamp {raw:?} is not RFC 3339 with a UTC offset"))
    }

    fn mac(&self, i: usize) -> Result<MacAddress, String> {
        let raw = self.required(i)?;
        raw.parse().map_err(|_| format!("{} {raw:?} is not a MAC address", self.names[i]))
    }

    fn position(&self, lat_i: usize, lon_i: usize) -> Result<GeoPoint, String> {
        let num = |i: usize| -> Result<f64, String> {
            let raw = self.required(i)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("{} {raw:?} is not a number", self.names[i]))
        };
        let lat = num(lat_i)?;
        let lon = num(lon_i)?;
        evidence_point(lat, lon)
    }
}

fn read_rows<T>(
    schema: CsvSchema,
    bytes: &[u8],
    mode: ImportMode,
    mut convert: impl FnMut(&Row<'_>) -> Result<T, String>,
) -> Result<CsvOutcome<Vec<T>>, IngestError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);

    let mut records = reader.records();
    let names = schema.columns();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => {
            return Err(IngestError::BadRows {
                schema,
                rows: vec![RowError { line: 1, message: csv_error_message(&e) }],
            })
        }
        None => {
            return Err(IngestError::MissingHeader {
                schema,
                column: names[0].to_string(),
            })
        }
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let columns = names
        .iter()
        .map(|name| {
            header.iter().position(|h| h == name).ok_or_else(|| IngestError::MissingHeader {
                schema,
                column: name.to_string(),
            })
        })
        .collect::<Result<Vec<usize>, _>>()?;

    let mut out = Vec::new();
    let mut bad = Vec::new();
    for result in records {
        match result {
            Ok(record) => {
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                if record.iter().all(|f| f.trim().is_empty()) {
                    continue;
                }
                let row = Row {
                    record: &record,
                    columns: &columns,
                    names,
                };
                match convert(&row) {
                    Ok(v) => out.push(v),
                    Err(message) => bad.push(RowError { line, message }),
                }
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                bad.push(RowError { line, message: csv_error_message(&e) });
            }
        }
    }

    if !bad.is_empty() && mode == ImportMode::Strict {
        return Err(IngestError::BadRows { schema, rows: bad });
    }
    Ok(CsvOutcome { records: out, skipped: bad })
}

fn csv_error_message(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Utf8 { .. } => "row is not valid UTF-8".to_string(),
        _ => e.to_string(),
    }
}

/// Parses `timestamp,bssid,ssid,lat,lon,signal_dbm`. An empty SSID is a
/// hidden network; an empty signal is unknown. The scan id and label are
/// left empty for the store to assign.
pub fn parse_wifi_csv(bytes: &[u8], mode: ImportMode) -> Result<CsvOutcome<WifiScan>, IngestError> {
    let outcome = read_rows(CsvSchema::Wifi, bytes, mode, |row| {
        let timestamp = row.timestamp(0)?;
        let bssid = row.mac(1)?;
        let ssid = Some(row.field(2)).filter(|s| !s.is_empty()).map(str::to_string);
        let position = row.position(3, 4)?;
        let signal_dbm = match row.field(5) {
            "" => None,
            raw => Some(raw.parse::<i32>().map_err(|_| format!("signal_dbm {raw:?} is not an integer"))?),
        };
        Ok(WifiObservation {
            bssid,
            ssid,
            position,
            timestamp,
            signal_dbm,
        })
    })?;
    Ok(CsvOutcome {
        records: WifiScan::new("", "", outcome.records),
        skipped: outcome.skipped,
    })
}

/// Parses `timestamp,plate,sensor_id,lat,lon`.
pub fn parse_anpr_csv(bytes: &[u8], mode: ImportMode) -> Result<CsvOutcome<Vec<AnprDetection>>, IngestError> {
    read_rows(CsvSchema::Anpr, bytes, mode, |row| {
        let timestamp = row.timestamp(0)?;
        let plate = normalize_plate(row.required(1)?);
        let sensor_id = row.required(2)?.to_string();
        let position = row.position(3, 4)?;
        Ok(AnprDetection {
            plate,
            sensor_id,
            position,
            timestamp,
        })
    })
}

/// Parses `timestamp,mac,sensor_id,lat,lon`.
pub fn parse_bt_csv(bytes: &[u8], mode: ImportMode) -> Result<CsvOutcome<Vec<BtDetection>>, IngestError> {
    read_rows(CsvSchema::Bt, bytes, mode, |row| {
        let timestamp = row.timestamp(0)?;
        let mac = row.mac(1)?;
        let sensor_id = row.required(2)?.to_string();
        let position = row.position(3, 4)?;
        Ok(BtDetection {
            mac,
            sensor_id,
            position,
            timestamp,
        })
    })
}

/// Parses `camera_id,lat,lon,category,owner,description`. Unrecognised
/// categories map to `unknown` and are kept as a `category:<label>` tag.
pub fn parse_camera_csv(bytes: &[u8], mode: ImportMode) -> Result<CsvOutcome<Vec<CameraRecord>>, IngestError> {
    read_rows(CsvSchema::Camera, bytes, mode, |row| {
        let camera_id = row.required(0)?.to_string();
        let position = row.position(1, 2)?;
        let label = row.field(3);
        let category = CameraCategory::from_label(label);
        let mut tags = Vec::new();
        if category == CameraCategory::Unknown && !label.is_empty() && !label.eq_ignore_ascii_case("unknown") {
            tags.push(format!("category:{label}"));
        }
        Ok(CameraRecord {
            camera_id,
            position,
            category,
            owner_contact: row.field(4).to_string(),
            description: row.field(5).to_string(),
            source: String::new(),
            tags,
        })
    })
}
