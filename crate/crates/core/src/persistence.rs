//! Dataset and artifact I/O: GeoJSON / newline-delimited POI records, raw
//! procurement dumps, pair tables and model files.
//!
//! POIs are written as GeoJSON features: the location becomes a Point
//! geometry (`[lon, lat]`, 7 decimal places) and every other field is a
//! property. Output is sorted by id and key-ordered, so saving the same
//! dataset twice yields identical bytes.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::matcher::{DecidedPair, FeaturePair, Label, LabeledPair, MatchModel, MatcherError};
use crate::procurement::RawRecord;
use crate::verification::PoiRecord;

pub const COORDINATE_DECIMALS: i32 = 7;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {error}")]
    Io { path: PathBuf, error: std::io::Error },
    #[error("{path}: malformed JSON at line {line}: {message}")]
    Json { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: line {line}: {message}")]
    Csv { path: PathBuf, line: usize, message: String },
    #[error("{path}: {error}")]
    Model { path: PathBuf, error: MatcherError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |error| PersistError::Io { path: path.to_path_buf(), error }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    GeoJson,
    Ndjson,
}

impl DatasetFormat {
    /// `.ndjson` / `.jsonl` are newline-delimited; anything else is GeoJSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("ndjson" | "jsonl") => DatasetFormat::Ndjson,
            _ => DatasetFormat::GeoJson,
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "geojson" | "json" => Ok(DatasetFormat::GeoJson),
            "ndjson" | "jsonl" => Ok(DatasetFormat::Ndjson),
            other => Err(format!("unknown dataset format `{other}` (expected geojson or ndjson)")),
        }
    }
}

/// A feature that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Serialize, Error)]
#[error("line {line} (feature #{index}): {message}")]
pub struct RecordIssue {
    pub line: usize,
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub issues: Vec<RecordIssue>,
}

fn round_coordinate(v: f64) -> f64 {
    let scale = 10f64.powi(COORDINATE_DECIMALS);
    (v * scale).round() / scale
}

/// Rounds every number under the keys that hold coordinates.
fn round_coordinates(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_coordinate(f)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_coordinates),
        Value::Object(map) => map.values_mut().for_each(round_coordinates),
        _ => {}
    }
}

/// Serialises a record as a GeoJSON feature.
pub fn to_feature<T: Serialize + PoiRecord>(record: &T) -> Result<Value, serde_json::Error> {
    let Value::Object(mut props) = serde_json::to_value(record)? else {
        return Err(serde::ser::Error::custom("record did not serialise to an object"));
    };
    props.remove("point");
    for key in ["bound", "contributing_points"] {
        if let Some(v) = props.get_mut(key) {
            round_coordinates(v);
        }
    }
    let p = record.poi().point;
    let mut coords = Value::Array(vec![p.lon.into(), p.lat.into()]);
    round_coordinates(&mut coords);
    let mut feature = Map::new();
    feature.insert("type".into(), "Feature".into());
    feature.insert("id".into(), record.poi().id.clone().into());
    feature.insert("geometry".into(), serde_json::json!({ "type": "Point", "coordinates": coords }));
    feature.insert("properties".into(), Value::Object(props));
    Ok(Value::Object(feature))
}

/// Parses one GeoJSON feature. The geometry must be a Point.
pub fn from_feature<T: DeserializeOwned>(feature: &Value) -> Result<T, String> {
    let geometry = feature.get("geometry").ok_or("feature has no geometry")?;
    match geometry.get("type").and_then(Value::as_str) {
        Some("Point") => {}
        Some(other) => return Err(format!("geometry type {other} is not Point")),
        None => return Err("geometry has no type".into()),
    }
    let coords = geometry.get("coordinates").and_then(Value::as_array).ok_or("Point has no coordinates")?;
    let (lon, lat) = match coords.as_slice() {
        [lon, lat, ..] => (lon.as_f64().ok_or("non-numeric longitude")?, lat.as_f64().ok_or("non-numeric latitude")?),
        _ => return Err("Point needs two coordinates".into()),
    };
    let mut props = match feature.get("properties") {
        Some(Value::Object(m)) => m.clone(),
        _ => return Err("feature has no properties object".into()),
    };
    if !props.contains_key("id") {
        if let Some(id) = feature.get("id") {
            props.insert("id".into(), id.clone());
        }
    }
    props.insert("point".into(), serde_json::json!({ "lat": lat, "lon": lon }));
    serde_json::from_value(Value::Object(props)).map_err(|e| e.to_string())
}

fn line_of(text: &str, offset: usize) -> usize {
    1 + text.as_bytes()[..offset.min(text.len())].iter().filter(|&&b| b == b'\n').count()
}

#[derive(Deserialize)]
struct Collection<'a> {
    #[serde(rename = "type")]
    kind: String,
    #[serde(borrow, default)]
    features: Vec<&'a RawValue>,
}

/// Parses a FeatureCollection document. Malformed JSON fails the whole
/// document; features that do not convert are reported individually.
pub fn parse_geojson<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Loaded<T>, PersistError> {
    let doc: Collection = serde_json::from_str(text)
        .map_err(|e| PersistError::Json { path: path.to_path_buf(), line: e.line(), message: e.to_string() })?;
    if doc.kind != "FeatureCollection" {
        return Err(PersistError::Format { path: path.to_path_buf(), message: format!("type is {}, expected FeatureCollection", doc.kind) });
    }
    let mut out = Loaded { records: Vec::with_capacity(doc.features.len()), issues: Vec::new() };
    for (index, raw) in doc.features.iter().enumerate() {
        let line = line_of(text, raw.get().as_ptr() as usize - text.as_ptr() as usize);
        let parsed = serde_json::from_str::<Value>(raw.get()).map_err(|e| e.to_string()).and_then(|v| from_feature(&v));
        match parsed {
            Ok(r) => out.records.push(r),
            Err(message) => out.issues.push(RecordIssue { line, index, message }),
        }
    }
    Ok(out)
}

/// Parses one feature per line; blank lines are skipped. Every bad line,
/// including malformed JSON, is reported with its line number.
pub fn parse_ndjson<T: DeserializeOwned, R: BufRead>(reader: R, path: &Path) -> Result<Loaded<T>, PersistError> {
    let mut out = Loaded { records: Vec::new(), issues: Vec::new() };
    let mut index = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(&line).map_err(|e| e.to_string()).and_then(|v| from_feature(&v));
        match parsed {
            Ok(r) => out.records.push(r),
            Err(message) => out.issues.push(RecordIssue { line: i + 1, index, message }),
        }
        index += 1;
    }
    Ok(out)
}

pub fn load_dataset<T: DeserializeOwned>(path: &Path, format: DatasetFormat) -> Result<Loaded<T>, PersistError> {
    match format {
        DatasetFormat::GeoJson => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            parse_geojson(&text, path)
        }
        DatasetFormat::Ndjson => {
            let file = fs::File::open(path).map_err(io_err(path))?;
            parse_ndjson(BufReader::new(file), path)
        }
    }
}

/// Renders records sorted by id, one feature per line in either format.
pub fn render_dataset<T: Serialize + PoiRecord>(records: &[T], format: DatasetFormat) -> Result<String, serde_json::Error> {
    let mut order: Vec<&T> = records.iter().collect();
    order.sort_by(|a, b| a.poi().id.cmp(&b.poi().id));
    let lines: Vec<String> =
        order.into_iter().map(|r| to_feature(r).map(|f| f.to_string())).collect::<Result<_, _>>()?;
    Ok(match format {
        DatasetFormat::Ndjson => lines.iter().map(|l| format!("{l}\n")).collect(),
        DatasetFormat::GeoJson if lines.is_empty() => "{\"type\":\"FeatureCollection\",\"features\":[]}\n".to_string(),
        DatasetFormat::GeoJson => format!("{{\"type\":\"FeatureCollection\",\"features\":[\n{}\n]}}\n", lines.join(",\n")),
    })
}

pub fn save_dataset<T: Serialize + PoiRecord>(records: &[T], path: &Path, format: DatasetFormat) -> Result<(), PersistError> {
    let text = render_dataset(records, format)
        .map_err(|e| PersistError::Format { path: path.to_path_buf(), message: e.to_string() })?;
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), PersistError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Raw procurement output: one `{source_id, native_id, payload}` per line.
pub fn save_raw(records: &[RawRecord], path: &Path) -> Result<(), PersistError> {
    let mut text = String::new();
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| PersistError::Format { path: path.to_path_buf(), message: e.to_string() })?;
        text.push_str(&line);
        text.push('\n');
    }
    write_text(path, &text)
}

/// Reads raw records. Lines that are bare payloads (not wrapped in a
/// `{source_id, native_id, payload}` envelope) are attributed to
/// `source_id` with the native id left for the source profile to resolve.
pub fn load_raw(path: &Path, source_id: &str) -> Result<Loaded<RawRecord>, PersistError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Loaded { records: Vec::new(), issues: Vec::new() };
    let mut index = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(&line) {
            Ok(v) if v.get("payload").is_some() && v.get("source_id").is_some() => match serde_json::from_value(v) {
                Ok(r) => out.records.push(r),
                Err(e) => out.issues.push(RecordIssue { line: i + 1, index, message: e.to_string() }),
            },
            Ok(payload) => {
                out.records.push(RawRecord { source_id: source_id.to_string(), native_id: String::new(), payload })
            }
            Err(e) => out.issues.push(RecordIssue { line: i + 1, index, message: e.to_string() }),
        }
        index += 1;
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    id_a: String,
    id_b: String,
    s_name: f64,
    s_address: f64,
    #[serde(default)]
    score: Option<f64>,
    #[serde(default)]
    label: Option<String>,
}

fn csv_err(path: &Path, e: csv::Error) -> PersistError {
    if let csv::ErrorKind::Io(io) = e.kind() {
        return PersistError::Io { path: path.to_path_buf(), error: std::io::Error::new(io.kind(), io.to_string()) };
    }
    let line = e.position().map_or(0, |p| p.line() as usize);
    PersistError::Csv { path: path.to_path_buf(), line, message: e.to_string() }
}

fn parse_label(path: &Path, line: usize, text: &str) -> Result<Label, PersistError> {
    text.parse().map_err(|e: String| PersistError::Csv { path: path.to_path_buf(), line, message: e })
}

/// `id_a,id_b,s_name,s_address,score,label`, sorted by pair key.
pub fn save_decided_pairs(pairs: &[DecidedPair], path: &Path) -> Result<(), PersistError> {
    let mut order: Vec<&DecidedPair> = pairs.iter().collect();
    order.sort_by(|a, b| a.pair.key().cmp(&b.pair.key()));
    let mut w = csv::Writer::from_writer(Vec::new());
    for d in order {
        w.serialize(PairRow {
            id_a: d.pair.id_a.clone(),
            id_b: d.pair.id_b.clone(),
            s_name: d.pair.s_name,
            s_address: d.pair.s_address,
            score: Some(d.score),
            label: d.pair.label.map(|l| l.as_str().to_string()),
        })
        .map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| PersistError::Format { path: path.to_path_buf(), message: e.to_string() })?;
    fs::write(path, bytes).map_err(io_err(path))
}

/// Reads a pair table written by [`save_decided_pairs`] (the `score` and
/// `label` columns may be empty).
pub fn load_feature_pairs(path: &Path) -> Result<Vec<DecidedPair>, PersistError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for row in r.deserialize::<PairRow>() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = out.len() + 2;
        let label = row.label.as_deref().filter(|s| !s.trim().is_empty()).map(|s| parse_label(path, line, s)).transpose()?;
        out.push(DecidedPair {
            pair: FeaturePair::new(&row.id_a, &row.id_b, row.s_name, row.s_address, label),
            score: row.score.unwrap_or(f64::NAN),
        });
    }
    Ok(out)
}

/// Ground truth as `id_a,id_b,label`; ids are canonicalised.
pub fn load_labeled_pairs(path: &Path) -> Result<Vec<LabeledPair>, PersistError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<(String, String, String)>().enumerate() {
        let (a, b, label) = row.map_err(|e| csv_err(path, e))?;
        let line = i + 2;
        if a.trim().is_empty() || b.trim().is_empty() {
            return Err(PersistError::Csv { path: path.to_path_buf(), line, message: "empty id".into() });
        }
        out.push(LabeledPair::new(a.trim(), b.trim(), parse_label(path, line, &label)?));
    }
    Ok(out)
}

pub fn save_labeled_pairs(pairs: &[LabeledPair], path: &Path) -> Result<(), PersistError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id_a", "id_b", "label"]).map_err(|e| csv_err(path, e))?;
    for p in pairs {
        w.write_record([p.id_a.as_str(), p.id_b.as_str(), p.label.as_str()]).map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| PersistError::Format { path: path.to_path_buf(), message: e.to_string() })?;
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn save_model(model: &MatchModel, path: &Path) -> Result<(), PersistError> {
    let text = model.to_json().map_err(|error| PersistError::Model { path: path.to_path_buf(), error })?;
    write_text(path, &text)
}

pub fn load_model(path: &Path) -> Result<MatchModel, PersistError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    MatchModel::from_json(&text).map_err(|error| PersistError::Model { path: path.to_path_buf(), error })
}

/// Writes any serialisable value as pretty JSON with a trailing newline.
pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), PersistError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| PersistError::Format { path: path.to_path_buf(), message: e.to_string() })?;
    write_text(path, &(text + "\n"))
}
