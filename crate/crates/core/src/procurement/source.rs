//! Paged query interface and the file-backed implementation.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::area::TileRect;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("http error: {0}")]
    Http(String),
    #[error("missing environment variable `{0}`")]
    MissingEnv(String),
}

/// A record as delivered by a source, before standardisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub source_id: String,
    pub native_id: String,
    pub payload: Value,
}

/// One page of results. `more` is set when the source holds further records
/// for the same rectangle beyond this page.
#[derive(Debug, Clone, Default)]
pub struct Page {
    pub records: Vec<RawRecord>,
    pub more: bool,
}

/// Answers "records inside this rectangle", one page at a time. Must tolerate
/// concurrent calls.
pub trait PagedSource: Sync {
    fn source_id(&self) -> &str;

    fn query(&self, rect: &TileRect, offset: usize, limit: usize) -> Result<Page, SourceError>;
}

/// Extracts `(native_id, lat, lon)` from a GeoJSON feature. Properties win over
/// the feature id and the Point geometry.
pub fn feature_key(feature: &Value) -> Option<(String, f64, f64)> {
    let props = feature.get("properties");
    let native_id = props
        .and_then(|p| p.get("native_id"))
        .or_else(|| feature.get("id"))
        .and_then(|v| match v {
            Value::String(s) => Some(s.clone()),
            Value::Number(n) => Some(n.to_string()),
            _ => None,
        })
        .filter(|s| !s.trim().is_empty())?;
    let coords = feature.get("geometry").and_then(|g| g.get("coordinates")).and_then(Value::as_array);
    let lat = props
        .and_then(|p| p.get("lat"))
        .and_then(Value::as_f64)
        .or_else(|| coords.and_then(|c| c.get(1)).and_then(Value::as_f64))?;
    let lon = props
        .and_then(|p| p.get("lon"))
        .and_then(Value::as_f64)
        .or_else(|| coords.and_then(|c| c.first()).and_then(Value::as_f64))?;
    Some((native_id, lat, lon))
}

#[derive(Debug, Clone)]
struct Located {
    lat: f64,
    lon: f64,
    record: RawRecord,
}

/// Serves records from newline-delimited GeoJSON features held in memory.
#[derive(Debug, Clone)]
pub struct FileSource {
    source_id: String,
    records: Vec<Located>,
}

impl FileSource {
    pub fn open(source_id: &str, path: &Path) -> Result<Self, SourceError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(source_id, std::io::BufReader::new(file))
    }

    pub fn from_reader<R: BufRead>(source_id: &str, reader: R) -> Result<Self, SourceError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let feature: Value =
                serde_json::from_str(&line).map_err(|e| SourceError::Parse { line: i + 1, message: e.to_string() })?;
            let (native_id, lat, lon) = feature_key(&feature).ok_or_else(|| SourceError::Parse {
                line: i + 1,
                message: "feature lacks native_id, lat or lon".into(),
            })?;
            records.push(Located {
                lat,
                lon,
                record: RawRecord { source_id: source_id.to_string(), native_id, payload: feature },
            });
        }
        Ok(Self { source_id: source_id.to_string(), records })
    }

    /// Builds a source directly from `(native_id, lat, lon)` triples.
    pub fn from_points<I>(source_id: &str, points: I) -> Self
    where
        I: IntoIterator<Item = (String, f64, f64)>,
    {
        let records = points
            .into_iter()
            .map(|(native_id, lat, lon)| Located {
                lat,
                lon,
                record: RawRecord {
                    source_id: source_id.to_string(),
                    payload: serde_json::json!({
                        "type": "Feature",
                        "geometry": {"type": "Point", "coordinates": [lon, lat]},
                        "properties": {"native_id": native_id.clone(), "lat": lat, "lon": lon},
                    }),
                    native_id,
                },
            })
            .collect();
        Self { source_id: source_id.to_string(), records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Every record inside `rect`, in file order.
    pub fn records_in(&self, rect: &TileRect) -> Vec<&RawRecord> {
        self.records.iter().filter(|r| rect.contains(r.lat, r.lon)).map(|r| &r.record).collect()
    }
}

impl PagedSource for FileSource {
    fn source_id(&self) -> &str {
        &self.source_id
    }

    fn query(&self, rect: &TileRect, offset: usize, limit: usize) -> Result<Page, SourceError> {
        let inside = self.records_in(rect);
        let end = (offset + limit).min(inside.len());
        let records = inside.get(offset..end).map(|s| s.iter().map(|r| (*r).clone()).collect()).unwrap_or_default();
        Ok(Page { records, more: end < inside.len() })
    }
}
