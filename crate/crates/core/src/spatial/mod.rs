//! Coordinates, great-circle distance, slippy-map tile arithmetic and the
//! uniform grid index behind every radius query.

mod grid;
mod point;
mod tile;

pub use grid::{GridIndex, DEFAULT_CELL_SIZE_DEG};
pub use point::{haversine_distance, normalize_lon, GeoPoint, EARTH_RADIUS_M};
pub use tile::{
    point_to_tile, tile_to_bbox, BoundingBox, TileCoord, MAX_ZOOM, MERCATOR_MAX_LAT,
    PROJECTION_LAT_LIMIT,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpatialError {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("latitude {0} is outside the Web-Mercator projection")]
    LatitudeOutOfProjection(f64),
    #[error("invalid tile {z}/{x}/{y}")]
    InvalidTile { z: u8, x: u32, y: u32 },
    #[error("invalid bounding box: south {south}, west {west}, north {north}, east {east}")]
    InvalidBoundingBox {
        south: f64,
        west: f64,
        north: f64,
        east: f64,
    },
}
