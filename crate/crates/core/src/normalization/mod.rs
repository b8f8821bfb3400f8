//! Schema standardisation: raw source records to [`StandardPoi`].

pub mod address;

use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{BoundingBox, GeoPoint, StandardPoi};
use crate::procurement::RawRecord;
pub use address::{canonical_address_string, parse_address, parse_address_with, AddressVocabulary};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read profile {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid profile: {0}")]
    Invalid(String),
}

/// Dotted paths into a raw payload, e.g. `properties.displayName` or
/// `geometry.coordinates.1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldPaths {
    pub native_id: String,
    pub lat: String,
    pub lon: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub address: Option<String>,
    #[serde(default)]
    pub place_type: Option<String>,
    #[serde(default)]
    pub date: Option<String>,
    #[serde(default)]
    pub tags: Option<String>,
    /// `[south, west, north, east]`
    #[serde(default)]
    pub bound: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub source_id: String,
    pub field_paths: FieldPaths,
    #[serde(default)]
    pub place_type_delimiter: Option<String>,
}

impl SourceProfile {
    pub fn from_toml(text: &str) -> Result<Self, ProfileError> {
        let p: SourceProfile = toml::from_str(text).map_err(|e| ProfileError::Invalid(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProfileError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.source_id.trim().is_empty() {
            return Err(ProfileError::Invalid("source_id is empty".into()));
        }
        let f = &self.field_paths;
        for (name, path) in [("native_id", &f.native_id), ("lat", &f.lat), ("lon", &f.lon)] {
            if path.trim().is_empty() {
                return Err(ProfileError::Invalid(format!("mandatory path `{name}` is empty")));
            }
        }
        Ok(())
    }

    /// Profile for the newline-delimited GeoJSON layout served by
    /// [`crate::procurement::FileSource`].
    pub fn geojson_default(source_id: &str) -> Self {
        Self {
            source_id: source_id.to_string(),
            field_paths: FieldPaths {
                native_id: "properties.native_id".into(),
                lat: "geometry.coordinates.1".into(),
                lon: "geometry.coordinates.0".into(),
                name: Some("properties.name".into()),
                address: Some("properties.address".into()),
                place_type: Some("properties.place_type".into()),
                date: Some("properties.date".into()),
                tags: Some("properties.tags".into()),
                bound: None,
            },
            place_type_delimiter: Some(";".into()),
        }
    }
}

/// A raw record that could not be standardised.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("record #{index} ({source_id}:{native_id}): {message}")]
pub struct RecordError {
    pub index: usize,
    pub source_id: String,
    pub native_id: String,
    pub message: String,
}

/// Resolves a dotted path; numeric segments index arrays.
pub fn resolve_path<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(value, |cur, seg| match cur {
        Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
        Value::Object(map) => map.get(seg),
        _ => None,
    })
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn as_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().filter_map(as_text).filter(|s| !s.trim().is_empty()).collect();
            (!parts.is_empty()).then(|| parts.join(", "))
        }
        _ => None,
    }
}

fn split_list(v: &Value, delimiter: Option<&str>) -> Vec<String> {
    match v {
        Value::Array(items) => items.iter().flat_map(|i| split_list(i, delimiter)).collect(),
        Value::String(s) => match delimiter {
            Some(d) if !d.is_empty() => s.split(d).map(str::to_string).collect(),
            _ => vec![s.clone()],
        },
        Value::Number(n) => vec![n.to_string()],
        _ => Vec::new(),
    }
}

fn tags_from(v: &Value, delimiter: Option<&str>) -> Vec<String> {
    match v {
        Value::Object(map) => map
            .iter()
            .filter_map(|(k, val)| as_text(val).map(|t| format!("{k}:{t}")))
            .collect(),
        other => split_list(other, delimiter),
    }
}

fn parse_date(v: &Value) -> Option<NaiveDate> {
    let s = v.as_str()?.trim();
    NaiveDate::parse_from_str(s.get(..10)?, "%Y-%m-%d").ok()
}

/// Converts one raw record with a source profile.
pub fn standardize(
    record: &RawRecord,
    profile: &SourceProfile,
    extraction_date: NaiveDate,
    vocab: &AddressVocabulary,
) -> Result<StandardPoi, String> {
    if record.source_id != profile.source_id {
        return Err(format!("profile is for `{}`, record from `{}`", profile.source_id, record.source_id));
    }
    let paths = &profile.field_paths;
    let payload = &record.payload;
    let native_id = resolve_path(payload, &paths.native_id)
        .and_then(as_text)
        .filter(|s| !s.trim().is_empty())
        .unwrap_or_else(|| record.native_id.clone());
    if native_id.trim().is_empty() {
        return Err("missing native_id".into());
    }
    let lat = resolve_path(payload, &paths.lat).and_then(as_number).ok_or("missing lat")?;
    let lon = resolve_path(payload, &paths.lon).and_then(as_number).ok_or("missing lon")?;
    let point = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;

    let optional = |p: &Option<String>| p.as_deref().and_then(|p| resolve_path(payload, p));
    let date = optional(&paths.date).and_then(parse_date).unwrap_or(extraction_date);
    let delimiter = profile.place_type_delimiter.as_deref();

    let mut poi = StandardPoi::new(&profile.source_id, &native_id, point, date);
    if let Some(name) = optional(&paths.name).and_then(as_text) {
        poi = poi.with_name(&name);
    }
    let raw_address = optional(&paths.address).and_then(as_text).unwrap_or_default();
    poi = poi.with_address(parse_address_with(&raw_address, vocab));
    if let Some(v) = optional(&paths.place_type) {
        poi = poi.with_place_types(split_list(v, delimiter));
    }
    if let Some(v) = optional(&paths.tags) {
        poi = poi.with_tags(tags_from(v, delimiter));
    }
    if let Some(arr) = optional(&paths.bound).and_then(Value::as_array) {
        let nums: Vec<f64> = arr.iter().filter_map(as_number).collect();
        if let [s, w, n, e] = nums[..] {
            match BoundingBox::new(s, w, n, e) {
                Ok(b) if b.contains(point) => poi = poi.with_bound(b),
                _ => log::warn!("{}: bound {nums:?} dropped, it does not contain the point", poi.id),
            }
        }
    }
    Ok(poi)
}

/// Standardises every record, preserving input order. Records missing a
/// mandatory field are skipped and reported.
pub fn standardize_all(
    records: &[RawRecord],
    profile: &SourceProfile,
    extraction_date: NaiveDate,
    vocab: &AddressVocabulary,
) -> (Vec<StandardPoi>, Vec<RecordError>) {
    let results: Vec<_> =
        records.par_iter().map(|r| standardize(r, profile, extraction_date, vocab)).collect();
    let mut pois = Vec::new();
    let mut errors = Vec::new();
    for (index, (res, rec)) in results.into_iter().zip(records).enumerate() {
        match res {
            Ok(p) => pois.push(p),
            Err(message) => errors.push(RecordError {
                index,
                source_id: rec.source_id.clone(),
                native_id: rec.native_id.clone(),
                message,
            }),
        }
    }
    (pois, errors)
}
