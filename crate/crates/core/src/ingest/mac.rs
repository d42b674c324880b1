use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed MAC address {0:?}")]
pub struct MacParseError(pub String);

/// A 48-bit hardware address. Displays as `AA:BB:CC:DD:EE:FF`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacAddress([u8; 6]);

impl MacAddress {
    pub const fn from_octets(octets: [u8; 6]) -> Self {
        MacAddress(octets)
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }

    pub fn oui(&self) -> Oui {
        Oui([self.0[0], self.0[1], self.0[2]])
    }
}

/// First three octets of a MAC address (vendor prefix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Oui([u8; 3]);

impl Oui {
    pub fn octets(&self) -> [u8; 3] {
        self.0
    }
}

/// Accepts colon- or hyphen-separated octets, or bare hex digits.
fn parse_octets<const N: usize>(s: &str) -> Option<[u8; N]> {
    let s = s.trim();
    let mut out = [0u8; N];
    let parts: Vec<&str> = if s.contains(':') {
        s.split(':').collect()
    } else if s.contains('-') {
        s.split('-').collect()
    } else {
        if s.len() != N * 2 || !s.is_ascii() {
            return None;
        }
        (0..N).map(|i| &s[i * 2..i * 2 + 2]).collect()
    };
    if parts.len() != N {
        return None;
    }
    for (slot, part) in out.iter_mut().zip(parts) {
        if part.len() != 2 || !part.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        *slot = u8::from_str_radix(part, 16).ok()?;
    }
    Some(out)
}

impl FromStr for MacAddress {
    type Err = MacParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_octets::<6>(s)
            .map(MacAddress)
            .ok_or_else(|| MacParseError(s.to_string()))
    }
}

impl FromStr for Oui {
    type Err = MacParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_octets::<3>(s)
            .map(Oui)
            .ok_or_else(|| MacParseError(s.to_string()))
    }
}

fn write_octets(f: &mut fmt::Formatter<'_>, octets: &[u8]) -> fmt::Result {
    for (i, b) in octets.iter().enumerate() {
        if i > 0 {
            f.write_str(":")?;
        }
        write!(f, "{b:02X}")?;
    }
    Ok(())
}

impl fmt::Display for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_octets(f, &self.0)
    }
}

impl fmt::Display for Oui {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_octets(f, &self.0)
    }
}

impl Serialize for MacAddress {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddress {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Returns the canonical text form of a MAC address string.
pub fn canonical_mac(s: &str) -> Result<String, MacParseError> {
    s.parse::<MacAddress>().map(|m| m.to_string())
}

/// A BSSID search: either one full address or a vendor prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacQuery {
    Exact(MacAddress),
    Prefix(Oui),
}

impl MacQuery {
    pub fn matches(&self, mac: &MacAddress) -> bool {
        match self {
            MacQuery::Exact(m) => m == mac,
            MacQuery::Prefix(oui) => mac.oui() == *oui,
        }
    }
}

impl FromStr for MacQuery {
    type Err = MacParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(mac) = s.parse::<MacAddress>() {
            return Ok(MacQuery::Exact(mac));
        }
        s.parse::<Oui>().map(MacQuery::Prefix)
    }
}

impl fmt::Display for MacQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MacQuery::Exact(m) => m.fmt(f),
            MacQuery::Prefix(o) => o.fmt(f),
        }
    }
}
