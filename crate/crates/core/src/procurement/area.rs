//! Study-area polygons and the tile rectangles laid over them.

use serde_json::Value;

use super::ProcurementError;

/// Meters per degree of latitude, and of longitude at the equator.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

/// Longitude degrees spanned by `meters` at latitude `lat`.
pub fn meters_to_lon_degrees(meters: f64, lat: f64) -> f64 {
    meters / (METERS_PER_DEGREE * lat.to_radians().cos())
}

pub fn meters_to_lat_degrees(meters: f64) -> f64 {
    meters / METERS_PER_DEGREE
}

/// Half-open query rectangle `[south, north) x [west, east)` in degrees.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TileRect {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl TileRect {
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.south && lat < self.north && lon >= self.west && lon < self.east
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.south + self.north) / 2.0, (self.west + self.east) / 2.0)
    }
}

/// Polygon or multipolygon, rings as `(lon, lat)` vertex lists. Holes are
/// handled by even-odd containment over all rings.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyArea {
    pub rings: Vec<Vec<(f64, f64)>>,
}

impl StudyArea {
    pub fn new(rings: Vec<Vec<(f64, f64)>>) -> Result<Self, ProcurementError> {
        let rings: Vec<Vec<(f64, f64)>> = rings
            .into_iter()
            .map(|mut r| {
                if r.len() > 1 && r.first() == r.last() {
                    r.pop();
                }
                r
            })
            .filter(|r| r.len() >= 3)
            .collect();
        if rings.is_empty() {
            return Err(ProcurementError::EmptyPolygon);
        }
        let area = StudyArea { rings };
        let (s, w, n, e) = area.bbox();
        if !(n > s && e > w) {
            return Err(ProcurementError::EmptyPolygon);
        }
        Ok(area)
    }

    pub fn rectangle(south: f64, west: f64, north: f64, east: f64) -> Result<Self, ProcurementError> {
        Self::new(vec![vec![(west, south), (east, south), (east, north), (west, north)]])
    }

    /// Accepts a Polygon or MultiPolygon geometry, a Feature wrapping one, or a
    /// FeatureCollection whose features are unioned.
    pub fn from_geojson(doc: &Value) -> Result<Self, ProcurementError> {
        let mut rings = Vec::new();
        collect_rings(doc, &mut rings)?;
        Self::new(rings)
    }

    /// `(south, west, north, east)`
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(lon, lat) in self.rings.iter().flatten() {
            b.0 = b.0.min(lat);
            b.1 = b.1.min(lon);
            b.2 = b.2.max(lat);
            b.3 = b.3.max(lon);
        }
        b
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            let n = ring.len();
            let mut j = n - 1;
            for i in 0..n {
                let (xi, yi) = ring[i];
                let (xj, yj) = ring[j];
                if (yi > lat) != (yj > lat) && lon < (xj - xi) * (lat - yi) / (yj - yi) + xi {
                    inside = !inside;
                }
                j = i;
            }
        }
        inside
    }

    /// True when the rectangle's interior overlaps the polygon's interior.
    /// Rectangles that only touch the boundary do not intersect.
    pub fn intersects(&self, rect: &TileRect) -> bool {
        let (dy, dx) = (rect.north - rect.south, rect.east - rect.west);
        let samples = [(0.5, 0.5), (0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)];
        if samples.iter().any(|&(fy, fx)| self.contains(rect.south + fy * dy, rect.west + fx * dx)) {
            return true;
        }
        let strictly_inside =
            |lon: f64, lat: f64| lat > rect.south && lat < rect.north && lon > rect.west && lon < rect.east;
        if self.rings.iter().flatten().any(|&(lon, lat)| strictly_inside(lon, lat)) {
            return true;
        }
        let corners = [
            (rect.west, rect.south),
            (rect.east, rect.south),
            (rect.east, rect.north),
            (rect.west, rect.north),
        ];
        for ring in &self.rings {
            for i in 0..ring.len() {
                let a = ring[i];
                let b = ring[(i + 1) % ring.len()];
                for k in 0..4 {
                    if segments_cross(a, b, corners[k], corners[(k + 1) % 4]) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Proper crossing: the segments intersect at a single interior point.
fn segments_cross(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn ring_from(value: &Value) -> Result<Vec<(f64, f64)>, ProcurementError> {
    let bad = || ProcurementError::Area("ring must be an array of [lon, lat] positions".into());
    value
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|pos| {
            let p = pos.as_array().ok_or_else(bad)?;
            match (p.first().and_then(Value::as_f64), p.get(1).and_then(Value::as_f64)) {
                (Some(lon), Some(lat)) => Ok((lon, lat)),
                _ => Err(bad()),
            }
        })
        .collect()
}

fn collect_rings(doc: &Value, rings: &mut Vec<Vec<(f64, f64)>>) -> Result<(), ProcurementError> {
    match doc.get("type").and_then(Value::as_str) {
        Some("FeatureCollection") => {
            for f in doc.get("features").and_then(Value::as_array).into_iter().flatten() {
                collect_rings(f, rings)?;
            }
            Ok(())
        }
        Some("Feature") => collect_rings(doc.get("geometry").unwrap_or(&Value::Null), rings),
        Some("Polygon") => {
            for r in doc.get("coordinates").and_then(Value::as_array).into_iter().flatten() {
                rings.push(ring_from(r)?);
            }
            Ok(())
        }
        Some("MultiPolygon") => {
            for poly in doc.get("coordinates").and_then(Value::as_array).into_iter().flatten() {
                for r in poly.as_array().into_iter().flatten() {
                    rings.push(ring_from(r)?);
                }
            }
            Ok(())
        }
        other => Err(ProcurementError::Area(format!("unsupported study-area geometry {other:?}"))),
    }
}
