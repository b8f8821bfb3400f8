//! Data procurement over a study area with recursively shrinking query
//! rectangles, for sources that cap the number of results per query.

pub mod area;
pub mod http;
pub mod source;

use std::collections::HashSet;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::GeoPoint;
pub use area::{StudyArea, TileRect};
pub use source::{FileSource, Page, PagedSource, RawRecord, SourceError};

pub const DEFAULT_MIN_DIM_M: f64 = 25.0;
pub const MAX_DEPTH: u32 = 30;

#[derive(Debug, Error)]
pub enum ProcurementError {
    #[error("study area polygon is empty or degenerate")]
    EmptyPolygon,
    #[error("study area: {0}")]
    Area(String),
    #[error("tile dimensions must be positive (got {width_m} x {height_m})")]
    InvalidTile { width_m: f64, height_m: f64 },
    #[error("invalid source config: {0}")]
    Config(String),
    #[error("source error on tile {tile}: {source}")]
    Source {
        tile: String,
        #[source]
        source: SourceError,
    },
    #[error("recursion depth {0} exceeds limit of {MAX_DEPTH}")]
    DepthExceeded(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PagedSourceConfig {
    pub source_id: String,
    pub page_size: usize,
    pub max_results_per_query: usize,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Newline-delimited GeoJSON file served as a paged source.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub requests_per_second: Option<f64>,
}

impl PagedSourceConfig {
    /// The 20-per-page, 60-per-query behaviour of token-paginated place APIs.
    pub fn capped(source_id: &str) -> Self {
        Self {
            source_id: source_id.to_string(),
            page_size: 20,
            max_results_per_query: 60,
            base_url: None,
            api_key_env: None,
            file: None,
            requests_per_second: None,
        }
    }

    pub fn validate(&self) -> Result<(), ProcurementError> {
        if self.page_size == 0 || self.max_results_per_query == 0 {
            return Err(ProcurementError::Config("page_size and max_results_per_query must be positive".into()));
        }
        if self.page_size > self.max_results_per_query {
            return Err(ProcurementError::Config("page_size exceeds max_results_per_query".into()));
        }
        Ok(())
    }

    /// Opens the configured backend: a local file if `file` is set, otherwise
    /// the HTTP adapter.
    pub fn open(&self) -> Result<Box<dyn PagedSource>, ProcurementError> {
        self.validate()?;
        let wrap = |source| ProcurementError::Source { tile: "-".into(), source };
        match (&self.file, &self.base_url) {
            (Some(path), _) => Ok(Box::new(FileSource::open(&self.source_id, path).map_err(wrap)?)),
            (None, Some(_)) => Ok(Box::new(http::HttpSource::new(self).map_err(wrap)?)),
            (None, None) => Err(ProcurementError::Config(format!("source `{}` needs `file` or `base_url`", self.source_id))),
        }
    }
}

/// A query rectangle of nominal size `width_m` x `height_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub southwest: GeoPoint,
    pub width_m: f64,
    pub height_m: f64,
    pub depth: u32,
    pub rect: TileRect,
}

impl Tile {
    /// Tile whose degree extent is derived at the south edge's latitude.
    pub fn new(southwest: GeoPoint, width_m: f64, height_m: f64) -> Result<Self, ProcurementError> {
        if !(width_m > 0.0 && height_m > 0.0) {
            return Err(ProcurementError::InvalidTile { width_m, height_m });
        }
        let rect = TileRect {
            south: southwest.lat,
            west: southwest.lon,
            north: southwest.lat + area::meters_to_lat_degrees(height_m),
            east: southwest.lon + area::meters_to_lon_degrees(width_m, southwest.lat),
        };
        Ok(Self { southwest, width_m, height_m, depth: 0, rect })
    }

    /// Four half-size children in SW, SE, NW, NE order. Children split the
    /// parent rectangle at its midpoints so they tile it exactly.
    pub fn children(&self) -> [Tile; 4] {
        let r = self.rect;
        let mid_lat = r.south + (r.north - r.south) / 2.0;
        let mid_lon = r.west + (r.east - r.west) / 2.0;
        let child = |south: f64, west: f64, north: f64, east: f64| Tile {
            southwest: GeoPoint { lat: south, lon: west },
            width_m: self.width_m / 2.0,
            height_m: self.height_m / 2.0,
            depth: self.depth + 1,
            rect: TileRect { south, west, north, east },
        };
        [
            child(r.south, r.west, mid_lat, mid_lon),
            child(r.south, mid_lon, mid_lat, r.east),
            child(mid_lat, r.west, r.north, mid_lon),
            child(mid_lat, mid_lon, r.north, r.east),
        ]
    }

    pub fn label(&self) -> String {
        format!(
            "[{:.7},{:.7} {:.1}x{:.1}m d{}]",
            self.rect.south, self.rect.west, self.width_m, self.height_m, self.depth
        )
    }
}

/// Lays a grid of `width_m` x `height_m` tiles over the area's bounding box
/// (row-major from the south-west corner) and drops tiles that do not overlap
/// the area. The last row and column are full-size tiles that may overhang the
/// bounding box.
pub fn plan_initial_grid(area: &StudyArea, width_m: f64, height_m: f64) -> Result<Vec<Tile>, ProcurementError> {
    if !(width_m > 0.0 && height_m > 0.0) {
        return Err(ProcurementError::InvalidTile { width_m, height_m });
    }
    let (south, west, north, east) = area.bbox();
    let dlat = area::meters_to_lat_degrees(height_m);
    let dlon = area::meters_to_lon_degrees(width_m, south);
    let count = |span: f64, step: f64| ((span / step) - 1e-9).ceil().max(1.0) as usize;
    let rows = count(north - south, dlat);
    let cols = count(east - west, dlon);
    let lat_edges: Vec<f64> = (0..=rows).map(|i| south + i as f64 * dlat).collect();
    let lon_edges: Vec<f64> = (0..=cols).map(|j| west + j as f64 * dlon).collect();
    let mut tiles = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let rect = TileRect { south: lat_edges[i], west: lon_edges[j], north: lat_edges[i + 1], east: lon_edges[j + 1] };
            if area.intersects(&rect) {
                tiles.push(Tile {
                    southwest: GeoPoint { lat: rect.south, lon: rect.west },
                    width_m,
                    height_m,
                    depth: 0,
                    rect,
                });
            }
        }
    }
    Ok(tiles)
}

/// The cap was hit on a tile that may not be subdivided further.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationWarning {
    pub tile: Tile,
    pub returned: usize,
}

#[derive(Debug, Clone, Default)]
pub struct FetchOutcome {
    pub records: Vec<RawRecord>,
    pub warnings: Vec<TruncationWarning>,
    pub queries: usize,
    /// Every tile whose query hit the cap and was subdivided.
    pub subdivided: Vec<Tile>,
}

impl FetchOutcome {
    fn extend(&mut self, other: FetchOutcome) {
        self.records.extend(other.records);
        self.warnings.extend(other.warnings);
        self.queries += other.queries;
        self.subdivided.extend(other.subdivided);
    }
}

/// Pages one rectangle up to the per-query cap. Returns the records, whether
/// the cap was reached, whether the source still had more, and the number of
/// page requests issued.
fn query_capped(
    tile: &Tile,
    source: &dyn PagedSource,
    config: &PagedSourceConfig,
) -> Result<(Vec<RawRecord>, bool, bool, usize), ProcurementError> {
    let mut records = Vec::new();
    let mut more = false;
    let mut pages = 0;
    while records.len() < config.max_results_per_query {
        let limit = config.page_size.min(config.max_results_per_query - records.len());
        let page = source
            .query(&tile.rect, records.len(), limit)
            .map_err(|source| ProcurementError::Source { tile: tile.label(), source })?;
        pages += 1;
        let n = page.records.len();
        records.extend(page.records.into_iter().take(limit));
        more = page.more || n > limit;
        if !page.more || n == 0 {
            break;
        }
    }
    let hit_cap = records.len() >= config.max_results_per_query;
    Ok((records, hit_cap, more, pages))
}

/// Queries `tile`; when the result count reaches the cap and half-size children
/// would still be at least `min_dim_m` on both sides, recurses into the four
/// children (SW, SE, NW, NE) and concatenates their results in that order.
pub fn fetch_recursive(
    tile: &Tile,
    source: &dyn PagedSource,
    config: &PagedSourceConfig,
    min_dim_m: f64,
) -> Result<FetchOutcome, ProcurementError> {
    if tile.depth > MAX_DEPTH {
        return Err(ProcurementError::DepthExceeded(tile.depth));
    }
    config.validate()?;
    let (records, hit_cap, more, pages) = query_capped(tile, source, config)?;
    if !hit_cap {
        return Ok(FetchOutcome { records, queries: pages, ..Default::default() });
    }
    let can_split = tile.width_m / 2.0 >= min_dim_m && tile.height_m / 2.0 >= min_dim_m;
    if !can_split {
        let mut out = FetchOutcome { queries: pages, ..Default::default() };
        if more {
            log::warn!("{}: cap of {} reached on {} below the minimum tile size", source.source_id(), records.len(), tile.label());
            out.warnings.push(TruncationWarning { tile: *tile, returned: records.len() });
        }
        out.records = records;
        return Ok(out);
    }
    let results: Vec<Result<FetchOutcome, ProcurementError>> =
        tile.children().par_iter().map(|child| fetch_recursive(child, source, config, min_dim_m)).collect();
    let mut out = FetchOutcome { queries: pages, subdivided: vec![*tile], ..Default::default() };
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Fetches every tile of a grid, in grid order.
pub fn fetch_grid(
    tiles: &[Tile],
    source: &dyn PagedSource,
    config: &PagedSourceConfig,
    min_dim_m: f64,
) -> Result<FetchOutcome, ProcurementError> {
    let results: Vec<_> = tiles.par_iter().map(|t| fetch_recursive(t, source, config, min_dim_m)).collect();
    let mut out = FetchOutcome::default();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Keeps the first record for each `(source_id, native_id)`.
pub fn dedupe_by_id(records: Vec<RawRecord>) -> Vec<RawRecord> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .filter(|r| seen.insert((r.source_id.clone(), r.native_id.clone())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORIGIN: GeoPoint = GeoPoint { lat: 1.33, lon: 103.96 };

    fn square_area(side_m: f64) -> StudyArea {
        let n = ORIGIN.lat + area::meters_to_lat_degrees(side_m);
        let e = ORIGIN.lon + area::meters_to_lon_degrees(side_m, ORIGIN.lat);
        StudyArea::rectangle(ORIGIN.lat, ORIGIN.lon, n, e).unwrap()
    }

    fn rec(src: &str, id: &str) -> RawRecord {
        RawRecord { source_id: src.into(), native_id: id.into(), payload: serde_json::Value::Null }
    }

    #[test]
    fn square_with_500m_tiles_gives_four() {
        let tiles = plan_initial_grid(&square_area(1000.0), 500.0, 500.0).unwrap();
        assert_eq!(tiles.len(), 4);
        // row-major from the south-west
        assert_eq!(tiles[0].rect.south, tiles[1].rect.south);
        assert!(tiles[1].rect.west > tiles[0].rect.west);
        assert!(tiles[2].rect.south > tiles[0].rect.south);
    }

    #[test]
    fn l_shape_drops_one_quadrant() {
        let h = area::meters_to_lat_degrees(500.0);
        let w = area::meters_to_lon_degrees(500.0, ORIGIN.lat);
        let (s, x) = (ORIGIN.lat, ORIGIN.lon);
        let ring = vec![
            (x, s),
            (x + 2.0 * w, s),
            (x + 2.0 * w, s + h),
            (x + w, s + h),
            (x + w, s + 2.0 * h),
            (x, s + 2.0 * h),
        ];
        let l = StudyArea::new(vec![ring]).unwrap();
        let tiles = plan_initial_grid(&l, 500.0, 500.0).unwrap();
        assert_eq!(tiles.len(), 3);
        assert!(tiles.iter().all(|t| !(t.rect.south > s && t.rect.west > x)));
    }

    #[test]
    fn grid_count_matches_enumeration() {
        // brute force: count k with k*step < span
        let enumerate = |span: f64, step: f64| (0..).take_while(|k| (*k as f64) * step < span - 1e-9).count();
        assert_eq!(enumerate(1000.0, 300.0), 4);
        let tiles = plan_initial_grid(&square_area(1000.0), 300.0, 300.0).unwrap();
        assert_eq!(tiles.len(), enumerate(1000.0, 300.0).pow(2));
        assert_eq!(tiles.len(), 16);
        assert!(tiles.iter().all(|t| t.width_m == 300.0 && t.height_m == 300.0));
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(plan_initial_grid(&square_area(100.0), 0.0, 10.0).is_err());
        assert!(Tile::new(ORIGIN, -1.0, 5.0).is_err());
    }

    #[test]
    fn children_halve_and_tile_parent() {
        let t = Tile::new(ORIGIN, 200.0, 100.0).unwrap();
        let c = t.children();
        assert!(c.iter().all(|k| k.width_m == 100.0 && k.height_m == 50.0 && k.depth == 1));
        assert_eq!(c[0].rect.east, c[1].rect.west);
        assert_eq!(c[0].rect.north, c[2].rect.south);
        assert_eq!(c[3].rect.north, t.rect.north);
        assert_eq!(c[3].rect.east, t.rect.east);
    }

    fn points_in(tile: &Tile, n: usize) -> Vec<(String, f64, f64)> {
        let r = tile.rect;
        (0..n)
            .map(|i| {
                let f = (i as f64 + 0.5) / n as f64;
                (format!("p{i}"), r.south + f * (r.north - r.south), r.west + (1.0 - f) * (r.east - r.west))
            })
            .collect()
    }

    #[test]
    fn below_cap_returns_without_subdividing() {
        let tile = Tile::new(ORIGIN, 200.0, 200.0).unwrap();
        let src = FileSource::from_points("g", points_in(&tile, 59));
        let out = fetch_recursive(&tile, &src, &PagedSourceConfig::capped("g"), 25.0).unwrap();
        assert_eq!(out.records.len(), 59);
        assert!(out.subdivided.is_empty());
        assert_eq!(out.queries, 3);
    }

    #[test]
    fn over_cap_subdivides_into_four() {
        let tile = Tile::new(ORIGIN, 200.0, 200.0).unwrap();
        let src = FileSource::from_points("g", points_in(&tile, 61));
        let out = fetch_recursive(&tile, &src, &PagedSourceConfig::capped("g"), 25.0).unwrap();
        assert_eq!(out.subdivided.len(), 1);
        let deduped = dedupe_by_id(out.records);
        assert_eq!(deduped.len(), 61);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn cap_below_minimum_size_warns() {
        let tile = Tile::new(ORIGIN, 40.0, 40.0).unwrap();
        let src = FileSource::from_points("g", points_in(&tile, 75));
        let out = fetch_recursive(&tile, &src, &PagedSourceConfig::capped("g"), 25.0).unwrap();
        assert_eq!(out.records.len(), 60);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.subdivided.is_empty());
    }

    #[test]
    fn exactly_cap_below_minimum_is_not_a_truncation() {
        let tile = Tile::new(ORIGIN, 40.0, 40.0).unwrap();
        let src = FileSource::from_points("g", points_in(&tile, 60));
        let out = fetch_recursive(&tile, &src, &PagedSourceConfig::capped("g"), 25.0).unwrap();
        assert_eq!(out.records.len(), 60);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn depth_guard() {
        let mut tile = Tile::new(ORIGIN, 40.0, 40.0).unwrap();
        tile.depth = MAX_DEPTH + 1;
        let src = FileSource::from_points("g", vec![]);
        assert!(matches!(
            fetch_recursive(&tile, &src, &PagedSourceConfig::capped("g"), 25.0),
            Err(ProcurementError::DepthExceeded(_))
        ));
    }

    struct Failing;
    impl PagedSource for Failing {
        fn source_id(&self) -> &str {
            "bad"
        }
        fn query(&self, _: &TileRect, _: usize, _: usize) -> Result<Page, SourceError> {
            Err(SourceError::Http("boom".into()))
        }
    }

    #[test]
    fn source_errors_carry_tile() {
        let tile = Tile::new(ORIGIN, 100.0, 100.0).unwrap();
        let err = fetch_recursive(&tile, &Failing, &PagedSourceConfig::capped("bad"), 25.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("d0") && msg.contains("boom"), "{msg}");
    }

    #[test]
    fn config_validation() {
        let mut c = PagedSourceConfig::capped("g");
        c.page_size = 100;
        assert!(c.validate().is_err());
        assert!(PagedSourceConfig::capped("g").validate().is_ok());
    }

    #[test]
    fn dedupe_examples() {
        let out = dedupe_by_id(vec![rec("s", "a"), rec("s", "a"), rec("s", "b")]);
        assert_eq!(out.iter().map(|r| r.native_id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        let out = dedupe_by_id(vec![rec("s", "a"), rec("s", "b"), rec("s", "a")]);
        assert_eq!(out.iter().map(|r| r.native_id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        let out = dedupe_by_id(vec![rec("s", "a"), rec("t", "a")]);
        assert_eq!(out.len(), 2);
    }
}
