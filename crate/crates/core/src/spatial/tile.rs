use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{GeoPoint, SpatialError};

/// Latitude bound of the square Web-Mercator world, `atan(sinh(pi))` in degrees.
pub const MERCATOR_MAX_LAT: f64 = 85.051_128_779_806_6;

/// Latitude bound accepted by [`point_to_tile`].
pub const PROJECTION_LAT_LIMIT: f64 = 85.05113;

/// Highest zoom level a [`TileCoord`] may carry.
pub const MAX_ZOOM: u8 = 30;

/// Slippy-map tile address, y increasing southward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileCoord {
    pub z: u8,
    pub x: u32,
    pub y: u32,
}

impl TileCoord {
    pub fn new(z: u8, x: u32, y: u32) -> Result<Self, SpatialError> {
        if z > MAX_ZOOM || x as u64 >= tiles_per_side(z) || y as u64 >= tiles_per_side(z) {
            return Err(SpatialError::InvalidTile { z, x, y });
        }
        Ok(TileCoord { z, x, y })
    }
}

impl fmt::Display for TileCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.z, self.x, self.y)
    }
}

fn tiles_per_side(z: u8) -> u64 {
    1u64 << z
}

/// Axis-aligned box in degrees. Never crosses the antimeridian, so `west <= east`
/// always holds and `east` may be exactly `+180`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    south: f64,
    west: f64,
    north: f64,
    east: f64,
}

impl BoundingBox {
    pub fn new(south: f64, west: f64, north: f64, east: f64) -> Result<Self, SpatialError> {
        let finite = [south, west, north, east].iter().all(|v| v.is_finite());
        if !finite
            || !(-90.0..=90.0).contains(&south)
            || !(-90.0..=90.0).contains(&north)
            || !(-180.0..=180.0).contains(&west)
            || !(-180.0..=180.0).contains(&east)
            || south > north
            || west > east
        {
            return Err(SpatialError::InvalidBoundingBox {
                south,
                west,
                north,
                east,
            });
        }
        Ok(BoundingBox {
            south,
            west,
            north,
            east,
        })
    }

    /// Builds one or two boxes for a lon range that may wrap past ±180.
    /// `west` and `east` are unnormalized; `east - west` must be in `[0, 360]`.
    pub fn split_antimeridian(south: f64, west: f64, north: f64, east: f64) -> Vec<BoundingBox> {
        let south = south.max(-90.0);
        let north = north.min(90.0);
        if east - west >= 360.0 {
            return vec![BoundingBox::world(south, north)];
        }
        let w = super::normalize_lon(west);
        let e = w + (east - west);
        if e <= 180.0 {
            vec![BoundingBox {
                south,
                west: w,
                north,
                east: e,
            }]
        } else {
            vec![
                BoundingBox {
                    south,
                    west: w,
                    north,
                    east: 180.0,
                },
                BoundingBox {
                    south,
                    west: -180.0,
                    north,
                    east: e - 360.0,
                },
            ]
        }
    }

    fn world(south: f64, north: f64) -> BoundingBox {
        BoundingBox {
            south,
            west: -180.0,
            north,
            east: 180.0,
        }
    }

    pub fn south(&self) -> f64 {
        self.south
    }
    pub fn west(&self) -> f64 {
        self.west
    }
    pub fn north(&self) -> f64 {
        self.north
    }
    pub fn east(&self) -> f64 {
        self.east
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint::new(
            (self.south + self.north) / 2.0,
            (self.west + self.east) / 2.0,
        )
        .expect("center of a valid box is a valid point")
    }

    /// Closed containment on all four edges.
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat() >= self.south && p.lat() <= self.north && p.lon() >= self.west && p.lon() <= self.east
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.south <= other.north
            && other.south <= self.north
            && self.west <= other.east
            && other.west <= self.east
    }
}

#[derive(Serialize, Deserialize)]
struct Corner {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    sw: Corner,
    ne: Corner,
}

impl Serialize for BoundingBox {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        BoxRepr {
            sw: Corner {
                lat: self.south,
                lon: self.west,
            },
            ne: Corner {
                lat: self.north,
                lon: self.east,
            },
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = BoxRepr::deserialize(deserializer)?;
        BoundingBox::new(r.sw.lat, r.sw.lon, r.ne.lat, r.ne.lon).map_err(serde::de::Error::custom)
    }
}

fn lon_edge(x: u64, z: u8) -> f64 {
    x as f64 / tiles_per_side(z) as f64 * 360.0 - 180.0
}

fn lat_edge(y: u64, z: u8) -> f64 {
    let n = PI * (1.0 - 2.0 * y as f64 / tiles_per_side(z) as f64);
    n.sinh().atan().to_degrees()
}

/// Web-Mercator tile containing `p` at zoom `z`.
///
/// The floor-based forward formula is corrected against the tile edges
/// produced by [`tile_to_bbox`], so the two functions agree exactly at
/// every boundary.
pub fn point_to_tile(p: GeoPoint, z: u8) -> Result<TileCoord, SpatialError> {
    if p.lat().abs() > PROJECTION_LAT_LIMIT {
        return Err(SpatialError::LatitudeOutOfProjection(p.lat()));
    }
    if z > MAX_ZOOM {
        return Err(SpatialError::InvalidTile { z, x: 0, y: 0 });
    }
    let n = tiles_per_side(z);
    let last = (n - 1) as i64;

    let fx = (p.lon() + 180.0) / 360.0 * n as f64;
    let mut x = (fx.floor() as i64).clamp(0, last);
    while x > 0 && p.lon() < lon_edge(x as u64, z) {
        x -= 1;
    }
    while x < last && p.lon() >= lon_edge(x as u64 + 1, z) {
        x += 1;
    }

    let phi = p.lat().to_radians();
    let fy = (1.0 - (phi.tan() + 1.0 / phi.cos()).ln() / PI) / 2.0 * n as f64;
    let mut y = (fy.floor() as i64).clamp(0, last);
    // y grows southward: the north edge of row y is lat_edge(y)
    while y > 0 && p.lat() > lat_edge(y as u64, z) {
        y -= 1;
    }
    while y < last && p.lat() <= lat_edge(y as u64 + 1, z) {
        y += 1;
    }

    Ok(TileCoord {
        z,
        x: x as u32,
        y: y as u32,
    })
}

/// Geographic extent of a tile. Adjacent tiles share edges exactly.
pub fn tile_to_bbox(t: TileCoord) -> BoundingBox {
    let (x, y) = (t.x as u64, t.y as u64);
    BoundingBox {
        south: lat_edge(y + 1, t.z),
        west: lon_edge(x, t.z),
        north: lat_edge(y, t.z),
        east: lon_edge(x + 1, t.z),
    }
}
