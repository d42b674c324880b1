use std::collections::HashMap;

use super::{haversine_distance, BoundingBox, GeoPoint, EARTH_RADIUS_M};

/// Default cell edge in degrees.
pub const DEFAULT_CELL_SIZE_DEG: f64 = 0.01;

// Widens the prefilter so rounding in the bbox math can never drop a candidate.
const PREFILTER_MARGIN_DEG: f64 = 1e-6;

/// Uniform lat/lon grid over point items.
///
/// Built once, then queried read-only. Results are always refined with the
/// exact haversine distance, so the grid only affects speed.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size: f64,
    cells: HashMap<(i32, i32), Vec<(u64, GeoPoint)>>,
    len: usize,
}

impl Default for GridIndex {
    fn default() -> Self {
        GridIndex::new(DEFAULT_CELL_SIZE_DEG)
    }
}

impl GridIndex {
    pub fn new(cell_size_deg: f64) -> Self {
        assert!(
            cell_size_deg.is_finite() && cell_size_deg > 0.0,
            "cell size must be positive"
        );
        GridIndex {
            cell_size: cell_size_deg,
            cells: HashMap::new(),
            len: 0,
        }
    }

    pub fn build(cell_size_deg: f64, items: impl IntoIterator<Item = (u64, GeoPoint)>) -> Self {
        let mut idx = GridIndex::new(cell_size_deg);
        for (id, p) in items {
            idx.insert(id, p);
        }
        idx
    }

    pub fn insert(&mut self, id: u64, p: GeoPoint) {
        self.cells.entry(self.cell_of(p.lat(), p.lon())).or_default().push((id, p));
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    fn row_of(&self, lat: f64) -> i32 {
        ((lat + 90.0) / self.cell_size).floor() as i32
    }

    fn col_of(&self, lon: f64) -> i32 {
        ((lon + 180.0) / self.cell_size).floor() as i32
    }

    fn cell_of(&self, lat: f64, lon: f64) -> (i32, i32) {
        (self.row_of(lat), self.col_of(lon))
    }

    /// Ids of all items within `radius_m` of `center` (inclusive), ascending
    /// and duplicate-free.
    pub fn query_radius(&self, center: GeoPoint, radius_m: f64) -> Vec<u64> {
        let mut hits: Vec<u64> = Vec::new();
        if radius_m.is_nan() || radius_m < 0.0 {
            return hits;
        }
        let mut visit = |bucket: &Vec<(u64, GeoPoint)>| {
            for &(id, p) in bucket {
                if haversine_distance(center, p) <= radius_m {
                    hits.push(id);
                }
            }
        };

        let boxes = prefilter_boxes(center, radius_m);
        let cell_span: usize = boxes
            .iter()
            .map(|b| {
                let rows = (self.row_of(b.north()) - self.row_of(b.south()) + 1) as usize;
                let cols = (self.col_of(b.east()) - self.col_of(b.west()) + 1) as usize;
                rows.saturating_mul(cols)
            })
            .fold(0usize, usize::saturating_add);

        if cell_span >= self.cells.len() {
            self.cells.values().for_each(&mut visit);
        } else {
            for b in &boxes {
                for row in self.row_of(b.south())..=self.row_of(b.north()) {
                    for col in self.col_of(b.west())..=self.col_of(b.east()) {
                        if let Some(bucket) = self.cells.get(&(row, col)) {
                            visit(bucket);
                        }
                    }
                }
            }
        }
        hits.sort_unstable();
        hits.dedup();
        hits
    }
}

/// Boxes covering every point within `radius_m` of `center`.
fn prefilter_boxes(center: GeoPoint, radius_m: f64) -> Vec<BoundingBox> {
    let angular = radius_m / EARTH_RADIUS_M;
    if angular >= std::f64::consts::PI {
        return BoundingBox::split_antimeridian(-90.0, -180.0, 90.0, 180.0);
    }
    let dlat = angular.to_degrees() + PREFILTER_MARGIN_DEG;
    let south = center.lat() - dlat;
    let north = center.lat() + dlat;
    if south <= -90.0 || north >= 90.0 {
        // circle reaches a pole: every longitude is possible
        return BoundingBox::split_antimeridian(south, -180.0, north, 180.0);
    }
    let ratio = angular.sin() / center.lat().to_radians().cos();
    if ratio >= 1.0 {
        return BoundingBox::split_antimeridian(south, -180.0, north, 180.0);
    }
    let dlon = ratio.asin().to_degrees() + PREFILTER_MARGIN_DEG;
    if dlon >= 180.0 {
        return BoundingBox::split_antimeridian(south, -180.0, north, 180.0);
    }
    BoundingBox::split_antimeridian(south, center.lon() - dlon, north, center.lon() + dlon)
}
