//! Canonical record types shared by every pipeline stage.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("latitude {0} outside [-90, 90] or not finite")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180] or not finite")]
    Longitude(f64),
    #[error("bounding box is inverted or not finite")]
    Bound,
    #[error("duplicate source `{0}` in ranking")]
    DuplicateSource(String),
}

/// NFC-normalise, lowercase, trim and collapse internal whitespace.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect::<String>().to_lowercase();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, ModelError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(ModelError::Latitude(lat));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(ModelError::Longitude(lon));
        }
        Ok(Self { lat, lon })
    }

    pub fn is_valid(&self) -> bool {
        Self::new(self.lat, self.lon).is_ok()
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.7}, {:.7})", self.lat, self.lon)
    }
}

/// Axis-aligned rectangle in degrees, inclusive on every edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self, ModelError> {
        let b = Self { min_lat, min_lon, max_lat, max_lon };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(ModelError::Bound)
        }
    }

    pub fn around(point: GeoPoint) -> Self {
        Self { min_lat: point.lat, min_lon: point.lon, max_lat: point.lat, max_lon: point.lon }
    }

    pub fn is_valid(&self) -> bool {
        [self.min_lat, self.min_lon, self.max_lat, self.max_lon].iter().all(|v| v.is_finite())
            && self.min_lat <= self.max_lat
            && self.min_lon <= self.max_lon
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min_lat && p.lat <= self.max_lat && p.lon >= self.min_lon && p.lon <= self.max_lon
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            min_lat: self.min_lat.min(other.min_lat),
            min_lon: self.min_lon.min(other.min_lon),
            max_lat: self.max_lat.max(other.max_lat),
            max_lon: self.max_lon.max(other.max_lon),
        }
    }

    pub fn include(&self, p: GeoPoint) -> BoundingBox {
        self.union(&BoundingBox::around(p))
    }
}

/// Segmented address. Components are lowercased and trimmed; `raw` keeps the
/// source text verbatim.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressComponents {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_number: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postal_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default)]
    pub raw: String,
}

impl AddressComponents {
    pub fn components(&self) -> [(&'static str, &Option<String>); 6] {
        [
            ("block_number", &self.block_number),
            ("street_name", &self.street_name),
            ("unit", &self.unit),
            ("postal_code", &self.postal_code),
            ("state", &self.state),
            ("country", &self.country),
        ]
    }

    /// True when no component carries text.
    pub fn is_empty(&self) -> bool {
        self.components().iter().all(|(_, c)| c.as_deref().is_none_or(|s| s.trim().is_empty()))
    }

    /// Same components, `raw` ignored.
    pub fn same_components(&self, other: &AddressComponents) -> bool {
        self.components() == other.components()
    }
}

/// The standardised POI schema every source is converted into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardPoi {
    pub id: String,
    pub source: String,
    pub point: GeoPoint,
    pub bound: Option<BoundingBox>,
    pub name: Option<String>,
    pub address: Option<AddressComponents>,
    pub place_types: BTreeSet<String>,
    pub tags: BTreeSet<String>,
    pub extraction_date: NaiveDate,
    pub requires_verification: bool,
    /// Original place-type labels that could not be mapped onto the target
    /// taxonomy. They are also retained in `place_types`.
    pub unmapped_types: BTreeSet<String>,
}

pub fn poi_id(source: &str, native_id: &str) -> String {
    format!("{source}:{native_id}")
}

impl StandardPoi {
    pub fn new(source: &str, native_id: &str, point: GeoPoint, extraction_date: NaiveDate) -> Self {
        let source = normalize_text(source);
        Self {
            id: poi_id(&source, native_id.trim()),
            source,
            point,
            bound: None,
            name: None,
            address: None,
            place_types: BTreeSet::new(),
            tags: BTreeSet::new(),
            extraction_date,
            requires_verification: false,
            unmapped_types: BTreeSet::new(),
        }
    }

    pub fn with_name(mut self, name: &str) -> Self {
        let name = normalize_text(name);
        self.name = (!name.is_empty()).then_some(name);
        self
    }

    pub fn with_address(mut self, address: AddressComponents) -> Self {
        self.address = Some(address);
        self
    }

    pub fn with_bound(mut self, bound: BoundingBox) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn with_place_types<I, S>(mut self, types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.place_types = types
            .into_iter()
            .map(|t| normalize_text(t.as_ref()))
            .filter(|t| !t.is_empty())
            .collect();
        self
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.tags = tags
            .into_iter()
            .map(|t| t.as_ref().trim().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        self
    }

    /// Native identifier (the part after the `<source>:` prefix).
    pub fn native_id(&self) -> &str {
        self.id.split_once(':').map_or(self.id.as_str(), |(_, n)| n)
    }

    pub fn has_address(&self) -> bool {
        self.address.as_ref().is_some_and(|a| !a.is_empty())
    }

    pub fn has_name(&self) -> bool {
        self.name.as_deref().is_some_and(|n| !n.trim().is_empty())
    }
}

fn is_normalized(s: &str) -> bool {
    s == s.trim() && s == s.to_lowercase()
}

/// Lists every broken invariant of a POI. Empty means well formed.
pub fn validate_poi(poi: &StandardPoi) -> Vec<String> {
    let mut v = Vec::new();
    if !poi.point.lat.is_finite() || !(-90.0..=90.0).contains(&poi.point.lat) {
        v.push("point.lat out of range".to_string());
    }
    if !poi.point.lon.is_finite() || !(-180.0..=180.0).contains(&poi.point.lon) {
        v.push("point.lon out of range".to_string());
    }
    if poi.id.trim().is_empty() {
        v.push("id is empty".to_string());
    } else if !poi.id.starts_with(&format!("{}:", poi.source)) {
        v.push("id not namespaced by source".to_string());
    }
    if let Some(b) = &poi.bound {
        if !b.is_valid() {
            v.push("bound invalid".to_string());
        } else if !b.contains(poi.point) {
            v.push("point outside bound".to_string());
        }
    }
    if let Some(name) = &poi.name {
        if !is_normalized(name) {
            v.push("name not normalized".to_string());
        }
    }
    if let Some(addr) = &poi.address {
        if !addr.is_empty() && addr.raw.is_empty() {
            v.push("address.raw empty while components set".to_string());
        }
        for (field, comp) in addr.components() {
            if let Some(c) = comp {
                if !is_normalized(c) {
                    v.push(format!("address.{field} not normalized"));
                }
            }
        }
    }
    for t in &poi.place_types {
        if t.is_empty() || !is_normalized(t) {
            v.push(format!("place_types entry `{t}` not normalized"));
        }
    }
    v
}

/// Validates a dataset: per-POI violations plus id uniqueness.
pub fn validate_dataset(pois: &[StandardPoi]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for poi in pois {
        if !seen.insert(poi.id.as_str()) {
            out.push(format!("{}: duplicate id", poi.id));
        }
        out.extend(validate_poi(poi).into_iter().map(|m| format!("{}: {m}", poi.id)));
    }
    out
}

/// Source trust order, most authoritative first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRanking {
    sources: Vec<String>,
}

impl SourceRanking {
    pub fn new<I, S>(sources: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<String> = Vec::new();
        for s in sources {
            let s = normalize_text(s.as_ref());
            if out.contains(&s) {
                return Err(ModelError::DuplicateSource(s));
            }
            out.push(s);
        }
        Ok(Self { sources: out })
    }

    /// OneMap, SLA, Google Places, HERE, OSM.
    pub fn default_singapore() -> Self {
        Self::new(["onemap", "sla", "google", "here", "osm"]).expect("static ranking is unique")
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Listed sources return their index; anything else ranks after them.
    pub fn rank(&self, source: &str) -> usize {
        self.sources.iter().position(|s| s == source).unwrap_or(self.sources.len())
    }

    /// Total order: listed sources by index, unlisted ones after them in
    /// lexicographic order.
    pub fn compare(&self, a: &str, b: &str) -> Ordering {
        let key = |s: &str| -> (usize, Option<String>) {
            match self.sources.iter().position(|x| x == s) {
                Some(i) => (i, None),
                None => (self.sources.len(), Some(s.to_string())),
            }
        };
        key(a).cmp(&key(b))
    }

    /// Appends every unlisted source of `universe` in lexicographic order.
    pub fn extended<'a, I>(&self, universe: I) -> SourceRanking
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut extra: Vec<String> =
            universe.into_iter().filter(|s| !self.sources.iter().any(|x| x == s)).map(str::to_string).collect();
        extra.sort();
        extra.dedup();
        let mut sources = self.sources.clone();
        sources.extend(extra);
        SourceRanking { sources }
    }
}

/// Rank of `source` under `ranking` (0 = most authoritative).
pub fn source_rank(source: &str, ranking: &SourceRanking) -> usize {
    ranking.rank(source)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 8, 1).unwrap()
    }

    fn poi() -> StandardPoi {
        StandardPoi::new("google", "abc", GeoPoint::new(1.35, 103.94).unwrap(), date())
            .with_name("  Tampines   MALL ")
            .with_place_types(["Shopping_Mall", "shopping_mall", "Point Of Interest"])
    }

    #[test]
    fn well_formed_poi_has_no_violations() {
        let p = poi();
        assert_eq!(p.id, "google:abc");
        assert_eq!(p.name.as_deref(), Some("tampines mall"));
        assert_eq!(p.place_types.len(), 2);
        assert!(validate_poi(&p).is_empty());
    }

    #[test]
    fn latitude_out_of_range_is_reported() {
        let mut p = poi();
        p.point.lat = 95.0;
        assert_eq!(validate_poi(&p), vec!["point.lat out of range".to_string()]);
        assert!(GeoPoint::new(95.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn point_outside_bound_is_reported() {
        let p = poi().with_bound(BoundingBox::new(1.0, 103.0, 1.1, 103.1).unwrap());
        assert_eq!(validate_poi(&p), vec!["point outside bound".to_string()]);
    }

    #[test]
    fn duplicate_ids_in_dataset() {
        let v = validate_dataset(&[poi(), poi()]);
        assert_eq!(v, vec!["google:abc: duplicate id".to_string()]);
    }

    #[test]
    fn nfc_normalisation() {
        // "e" + combining acute vs precomposed
        assert_eq!(normalize_text("Cafe\u{301}"), normalize_text("CAF\u{c9}"));
    }

    #[test]
    fn ranking_examples() {
        let r = SourceRanking::default_singapore();
        assert_eq!(source_rank("onemap", &r), 0);
        assert_eq!(source_rank("osm", &r), 4);
        assert_eq!(source_rank("unknown_src", &r), 5);
        assert!(SourceRanking::new(["a", "b", "a"]).is_err());
    }

    #[test]
    fn extended_ranking_orders_unlisted_lexicographically() {
        let r = SourceRanking::default_singapore().extended(["zeta", "alpha", "osm", "alpha"]);
        assert_eq!(r.rank("alpha"), 5);
        assert_eq!(r.rank("zeta"), 6);
        assert_eq!(r.rank("osm"), 4);
    }

    #[test]
    fn compare_is_a_total_order() {
        let r = SourceRanking::default_singapore();
        let mut names = vec!["zz", "osm", "aa", "onemap", "here", "google", "sla", "mm"];
        names.sort_by(|a, b| r.compare(a, b));
        assert_eq!(names, vec!["onemap", "sla", "google", "here", "osm", "aa", "mm", "zz"]);
        for a in &names {
            for b in &names {
                assert_eq!(r.compare(a, b), r.compare(b, a).reverse());
                assert_eq!(r.compare(a, b) == Ordering::Equal, a == b);
            }
        }
    }

    #[test]
    fn serde_round_trip_preserves_fields() {
        let p = poi()
            .with_bound(BoundingBox::new(1.3, 103.9, 1.4, 104.0).unwrap())
            .with_tags(["opening_hours:24/7"]);
        let json = serde_json::to_string(&p).unwrap();
        let back: StandardPoi = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
    }
}
