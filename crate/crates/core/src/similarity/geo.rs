//! Great-circle distance and a uniform grid index for radius queries.

use std::collections::HashMap;

use crate::model::{GeoPoint, StandardPoi};

pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Buckets points into cells sized so that any two points within
/// `cell_size_m` of each other sit in the same or adjacent cells.
///
/// Cell height is `cell_size_m / R` radians of latitude. Cell width is the
/// largest longitude gap two points within that distance can have at the
/// dataset's highest absolute latitude, so the 3x3 neighbourhood is a
/// superset of the query disc.
#[derive(Debug, Clone)]
pub struct SpatialGridIndex {
    pub cell_size_m: f64,
    pub origin: GeoPoint,
    lat_step: f64,
    lon_step: f64,
    pub cells: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialGridIndex {
    pub fn build(pois: &[StandardPoi], cell_size_m: f64) -> Self {
        let points: Vec<GeoPoint> = pois.iter().map(|p| p.point).collect();
        Self::from_points(&points, cell_size_m)
    }

    pub fn from_points(points: &[GeoPoint], cell_size_m: f64) -> Self {
        assert!(cell_size_m > 0.0, "cell size must be positive");
        let origin = GeoPoint {
            lat: points.iter().map(|p| p.lat).fold(f64::INFINITY, f64::min).max(-90.0),
            lon: points.iter().map(|p| p.lon).fold(f64::INFINITY, f64::min).max(-180.0),
        };
        let max_abs_lat = points.iter().map(|p| p.lat.abs()).fold(0.0, f64::max).min(89.0);
        let angle = cell_size_m / EARTH_RADIUS_M;
        let lat_step = angle.to_degrees();
        let ratio = ((angle / 2.0).sin() / max_abs_lat.to_radians().cos()).min(1.0);
        let lon_step = (2.0 * ratio.asin()).to_degrees() * (1.0 + 1e-9);
        let mut index = Self { cell_size_m, origin, lat_step, lon_step, cells: HashMap::new() };
        for (i, p) in points.iter().enumerate() {
            index.cells.entry(index.cell_of(*p)).or_default().push(i);
        }
        index
    }

    pub fn cell_of(&self, p: GeoPoint) -> (i64, i64) {
        (
            ((p.lat - self.origin.lat) / self.lat_step).floor() as i64,
            ((p.lon - self.origin.lon) / self.lon_step).floor() as i64,
        )
    }

    /// Indices of points in the cells around `p` that may lie within
    /// `radius_m`.
    pub fn candidates(&self, p: GeoPoint, radius_m: f64) -> Vec<usize> {
        let ring = (radius_m / self.cell_size_m).ceil().max(1.0) as i64;
        let (r, c) = self.cell_of(p);
        let mut out = Vec::new();
        for dr in -ring..=ring {
            for dc in -ring..=ring {
                if let Some(v) = self.cells.get(&(r + dr, c + dc)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out
    }
}

/// Other POIs within `radius_m` (inclusive) of `pois[centroid]`, sorted by
/// distance then id. With `cross_source_only`, POIs from the centroid's own
/// source are skipped.
pub fn neighbors_within(
    index: &SpatialGridIndex,
    pois: &[StandardPoi],
    centroid: usize,
    radius_m: f64,
    cross_source_only: bool,
) -> Vec<(usize, f64)> {
    let c = &pois[centroid];
    let mut out: Vec<(usize, f64)> = index
        .candidates(c.point, radius_m)
        .into_iter()
        .filter(|&i| i != centroid && !(cross_source_only && pois[i].source == c.source))
        .filter_map(|i| {
            let d = haversine_m(c.point, pois[i].point);
            (d <= radius_m).then_some((i, d))
        })
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| pois[a.0].id.cmp(&pois[b.0].id)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poi(id: &str, src: &str, lat: f64, lon: f64) -> StandardPoi {
        StandardPoi::new(src, id, GeoPoint { lat, lon }, NaiveDate::default())
    }

    /// Spherical law of cosines.
    fn slc(a: GeoPoint, b: GeoPoint) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dl = (b.lon - a.lon).to_radians();
        let c = (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).clamp(-1.0, 1.0);
        EARTH_RADIUS_M * c.acos()
    }

    #[test]
    fn haversine_examples() {
        let a = GeoPoint { lat: 1.0, lon: 103.0 };
        let b = GeoPoint { lat: 1.0, lon: 103.001 };
        assert_eq!(haversine_m(a, a), 0.0);
        let d = haversine_m(a, b);
        assert!((d - 111.3).abs() <= 0.5, "{d}");
        assert!((d - slc(a, b)).abs() < 1e-3);
        assert_eq!(haversine_m(a, b), haversine_m(b, a));
    }

    #[test]
    fn one_neighbor_at_50m() {
        let dlon = 50.0 / (EARTH_RADIUS_M * 1.3f64.to_radians().cos()) * 180.0 / std::f64::consts::PI;
        let pois = vec![poi("a", "x", 1.3, 103.9), poi("b", "y", 1.3, 103.9 + dlon)];
        let idx = SpatialGridIndex::build(&pois, 100.0);
        let n = neighbors_within(&idx, &pois, 0, 100.0, true);
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].0, 1);
        assert!((n[0].1 - 50.0).abs() < 1e-6);
    }

    #[test]
    fn radius_is_inclusive() {
        let a = poi("a", "x", 1.3, 103.9);
        // Find a point exactly 100 m north: R * dlat = 100
        let dlat = (100.0 / EARTH_RADIUS_M).to_degrees();
        let mut b = poi("b", "y", 1.3 + dlat, 103.9);
        let d = haversine_m(a.point, b.point);
        let pois = vec![a.clone(), b.clone()];
        let idx = SpatialGridIndex::build(&pois, 100.0);
        assert_eq!(neighbors_within(&idx, &pois, 0, d, true).len(), 1);
        b.point.lat += 1e-6;
        let pois = vec![a, b];
        let idx = SpatialGridIndex::build(&pois, 100.0);
        assert!(neighbors_within(&idx, &pois, 0, 100.0, true).is_empty());
    }

    #[test]
    fn same_source_excluded_when_requested() {
        let pois = vec![poi("a", "x", 1.3, 103.9), poi("b", "x", 1.3, 103.9001)];
        let idx = SpatialGridIndex::build(&pois, 100.0);
        assert!(neighbors_within(&idx, &pois, 0, 100.0, true).is_empty());
        assert_eq!(neighbors_within(&idx, &pois, 0, 100.0, false).len(), 1);
    }

    #[test]
    fn matches_brute_force_at_high_latitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pois: Vec<StandardPoi> = (0..300)
            .map(|i| poi(&i.to_string(), if i % 2 == 0 { "a" } else { "b" }, 69.0 + rng.gen_range(0.0..0.01), rng.gen_range(0.0..0.03)))
            .collect();
        let idx = SpatialGridIndex::build(&pois, 100.0);
        for c in 0..pois.len() {
            let got: Vec<usize> = neighbors_within(&idx, &pois, c, 100.0, false).into_iter().map(|x| x.0).collect();
            let mut want: Vec<(usize, f64)> = (0..pois.len())
                .filter(|&j| j != c)
                .map(|j| (j, haversine_m(pois[c].point, pois[j].point)))
                .filter(|x| x.1 <= 100.0)
                .collect();
            want.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| pois[a.0].id.cmp(&pois[b.0].id)));
            assert_eq!(got, want.into_iter().map(|x| x.0).collect::<Vec<_>>());
        }
    }
}
