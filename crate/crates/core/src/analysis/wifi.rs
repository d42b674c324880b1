use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::evidence::{Timestamp, WifiObservation, WifiScan};
use crate::ingest::{MacAddress, MacQuery};
use crate::spatial::GeoPoint;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsidChange {
    pub old_ssid: Option<String>,
    pub new_ssid: Option<String>,
}

/// Per-BSSID comparison of two scans. The four key sets partition the
/// union of both scans' BSSIDs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanDiff {
    pub added: BTreeSet<MacAddress>,
    pub removed: BTreeSet<MacAddress>,
    pub renamed: BTreeMap<MacAddress, SsidChange>,
    pub unchanged: BTreeSet<MacAddress>,
}

/// SSID per BSSID as of the latest observation. Equal timestamps are broken
/// by SSID so the result does not depend on observation order.
fn latest_ssids(scan: &WifiScan) -> BTreeMap<MacAddress, Option<&str>> {
    let mut latest: BTreeMap<MacAddress, (Timestamp, Option<&str>)> = BTreeMap::new();
    for o in &scan.observations {
        let candidate = (o.timestamp, o.ssid.as_deref());
        latest
            .entry(o.bssid)
            .and_modify(|cur| {
                if candidate > *cur {
                    *cur = candidate;
                }
            })
            .or_insert(candidate);
    }
    latest.into_iter().map(|(k, (_, s))| (k, s)).collect()
}

/// Networks that appeared (`added`), vanished (`removed`), changed name
/// (`renamed`, hidden to named included) or stayed the same between `a`
/// and `b`.
pub fn diff_scans(a: &WifiScan, b: &WifiScan) -> ScanDiff {
    let a = latest_ssids(a);
    let b = latest_ssids(b);
    let mut diff = ScanDiff::default();
    for (mac, ssid_a) in &a {
        match b.get(mac) {
            None => {
                diff.removed.insert(*mac);
            }
            Some(ssid_b) if ssid_b == ssid_a => {
                diff.unchanged.insert(*mac);
            }
            Some(ssid_b) => {
                diff.renamed.insert(
                    *mac,
                    SsidChange {
                        old_ssid: ssid_a.map(str::to_string),
                        new_ssid: ssid_b.map(str::to_string),
                    },
                );
            }
        }
    }
    diff.added.extend(b.keys().filter(|m| !a.contains_key(m)));
    diff
}

/// An observation together with the scan it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SightedObservation {
    pub scan_id: String,
    #[serde(flatten)]
    pub observation: WifiObservation,
}

fn sort_key(scan_id: &str, o: &WifiObservation) -> (Timestamp, String, MacAddress) {
    (o.timestamp, scan_id.to_string(), o.bssid)
}

/// Parses a full MAC address or a three-octet vendor prefix.
pub fn parse_bssid_query(s: &str) -> Result<MacQuery, AnalysisError> {
    s.parse().map_err(|_| AnalysisError::MalformedQuery(s.to_string()))
}

/// Every observation whose BSSID matches `query`, ordered by timestamp,
/// then scan id, then BSSID. Equal keys keep scan and observation order.
pub fn search_bssid<'a>(query: &MacQuery, scans: impl IntoIterator<Item = &'a WifiScan>) -> Vec<SightedObservation> {
    let mut hits: Vec<SightedObservation> = scans
        .into_iter()
        .flat_map(|s| {
            s.observations.iter().filter(|o| query.matches(&o.bssid)).map(|o| SightedObservation {
                scan_id: s.scan_id.clone(),
                observation: o.clone(),
            })
        })
        .collect();
    hits.sort_by_cached_key(|h| sort_key(&h.scan_id, &h.observation));
    hits
}

/// A sighting of a known device's MAC in a stored scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceEvidence {
    pub bssid: MacAddress,
    pub position: GeoPoint,
    pub timestamp: Timestamp,
    pub scan_id: String,
    pub ssid: Option<String>,
}

/// One row per observation of any `known` MAC, in the same order as
/// [`search_bssid`].
pub fn presence_report<'a>(
    known: &BTreeSet<MacAddress>,
    scans: impl IntoIterator<Item = &'a WifiScan>,
) -> Result<Vec<PresenceEvidence>, AnalysisError> {
    if known.is_empty() {
        return Err(AnalysisError::InvalidParameters("the set of known MAC addresses is empty".into()));
    }
    let mut rows: Vec<(_, PresenceEvidence)> = scans
        .into_iter()
        .flat_map(|s| {
            s.observations.iter().filter(|o| known.contains(&o.bssid)).map(|o| {
                (
                    sort_key(&s.scan_id, o),
                    PresenceEvidence {
                        bssid: o.bssid,
                        position: o.position,
                        timestamp: o.timestamp,
                        scan_id: s.scan_id.clone(),
                        ssid: o.ssid.clone(),
                    },
                )
            })
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}
