//! Review of POIs flagged for manual verification, with an append-only
//! audit trail that can be replayed.

use std::fs::OpenOptions;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_text, StandardPoi};
use crate::taxonomy::{nearest_labels, EmbeddingStore, TargetTaxonomy};
use crate::unification::UnifiedPoi;

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("unknown POI id '{0}'")]
    UnknownId(String),
    #[error("POI '{0}' is not flagged for verification")]
    NotFlagged(String),
    #[error("assign_types needs at least one label")]
    NoLabels,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Anything carrying a standardised record.
pub trait PoiRecord {
    fn poi(&self) -> &StandardPoi;
    fn poi_mut(&mut self) -> &mut StandardPoi;
}

impl PoiRecord for StandardPoi {
    fn poi(&self) -> &StandardPoi {
        self
    }
    fn poi_mut(&mut self) -> &mut StandardPoi {
        self
    }
}

impl PoiRecord for UnifiedPoi {
    fn poi(&self) -> &StandardPoi {
        &self.poi
    }
    fn poi_mut(&mut self) -> &mut StandardPoi {
        &mut self.poi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    /// Some source place type had no target label above the threshold.
    UnmappedTaxonomy,
    /// No place type at all.
    MissingPlaceType,
}

impl FlagReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FlagReason::UnmappedTaxonomy => "unmapped_taxonomy",
            FlagReason::MissingPlaceType => "missing_place_type",
        }
    }
}

pub fn flag_reasons(poi: &StandardPoi) -> Vec<FlagReason> {
    let mut out = Vec::new();
    if !poi.unmapped_types.is_empty() {
        out.push(FlagReason::UnmappedTaxonomy);
    }
    if poi.place_types.is_empty() {
        out.push(FlagReason::MissingPlaceType);
    }
    out
}

/// Flagged records with their reasons, in input order.
pub fn list_flagged<T: PoiRecord>(records: &[T]) -> Vec<(&T, Vec<FlagReason>)> {
    records.iter().filter(|r| r.poi().requires_verification).map(|r| (r, flag_reasons(r.poi()))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "labels", rename_all = "snake_case")]
pub enum Resolution {
    /// Replace the unmapped labels with these target labels.
    AssignTypes(Vec<String>),
    /// Accept the record as it is.
    Dismiss,
}

impl Resolution {
    pub fn action(&self) -> &'static str {
        match self {
            Resolution::AssignTypes(_) => "assign_types",
            Resolution::Dismiss => "dismiss",
        }
    }

    pub fn labels(&self) -> &[String] {
        match self {
            Resolution::AssignTypes(l) => l,
            Resolution::Dismiss => &[],
        }
    }

    pub fn from_parts(action: &str, labels: Vec<String>) -> Result<Self, String> {
        match action.trim() {
            "assign_types" | "assign" => {
                let labels: Vec<String> =
                    labels.iter().map(|l| normalize_text(l)).filter(|l| !l.is_empty()).collect();
                if labels.is_empty() {
                    Err(VerificationError::NoLabels.to_string())
                } else {
                    Ok(Resolution::AssignTypes(labels))
                }
            }
            "dismiss" => Ok(Resolution::Dismiss),
            other => Err(format!("unknown action '{other}'")),
        }
    }
}

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub timestamp: DateTime<Utc>,
    pub operator: String,
    pub poi_id: String,
    pub action: String,
    pub labels: Vec<String>,
}

impl AuditEntry {
    pub fn resolution(&self) -> Result<Resolution, String> {
        Resolution::from_parts(&self.action, self.labels.clone())
    }
}

/// Applies a resolution to a flagged record and returns its audit entry.
///
/// Assigning types removes the unmapped labels from `place_types` and adds
/// the assigned ones; dismissing keeps `place_types` as they are. Both clear
/// the flag and the unmapped-label list.
pub fn resolve_flag<T: PoiRecord>(
    records: &mut [T],
    poi_id: &str,
    resolution: &Resolution,
    operator: &str,
    timestamp: DateTime<Utc>,
) -> Result<AuditEntry, VerificationError> {
    let record = records
        .iter_mut()
        .find(|r| r.poi().id == poi_id)
        .ok_or_else(|| VerificationError::UnknownId(poi_id.to_string()))?;
    let poi = record.poi_mut();
    if !poi.requires_verification {
        return Err(VerificationError::NotFlagged(poi_id.to_string()));
    }
    if let Resolution::AssignTypes(labels) = resolution {
        if labels.is_empty() {
            return Err(VerificationError::NoLabels);
        }
        for u in std::mem::take(&mut poi.unmapped_types) {
            poi.place_types.remove(&u);
        }
        poi.place_types.extend(labels.iter().map(|l| normalize_text(l)).filter(|l| !l.is_empty()));
    }
    poi.unmapped_types.clear();
    poi.requires_verification = false;
    Ok(AuditEntry {
        timestamp,
        operator: operator.to_string(),
        poi_id: poi_id.to_string(),
        action: resolution.action().to_string(),
        labels: resolution.labels().to_vec(),
    })
}

/// Re-applies logged resolutions in order.
pub fn replay<T: PoiRecord>(records: &mut [T], entries: &[AuditEntry]) -> Result<(), VerificationError> {
    for (i, e) in entries.iter().enumerate() {
        let resolution = e.resolution().map_err(|message| VerificationError::Parse { line: i + 1, message })?;
        resolve_flag(records, &e.poi_id, &resolution, &e.operator, e.timestamp)?;
    }
    Ok(())
}

/// Appends entries to an NDJSON audit log, creating it if needed.
pub fn append_audit(path: &Path, entries: &[AuditEntry]) -> Result<(), VerificationError> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    for e in entries {
        let line = serde_json::to_string(e).map_err(io::Error::other)?;
        writeln!(file, "{line}")?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_audit<R: Read>(reader: R) -> Result<Vec<AuditEntry>, VerificationError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| VerificationError::Parse { line: i + 1, message: e.to_string() })?;
        out.push(entry);
    }
    Ok(out)
}

pub fn load_audit(path: &Path) -> Result<Vec<AuditEntry>, VerificationError> {
    read_audit(std::fs::File::open(path)?)
}

/// Reads `poi_id,action,labels` rows; labels are `|`-separated.
pub fn read_resolutions_csv<R: Read>(reader: R) -> Result<Vec<(String, Resolution)>, VerificationError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| VerificationError::Parse { line, message: e.to_string() })?;
        let id = row.get(0).filter(|s| !s.is_empty()).ok_or(VerificationError::Parse { line, message: "missing poi_id".into() })?;
        let action = row.get(1).ok_or(VerificationError::Parse { line, message: "missing action".into() })?;
        let labels = row.get(2).unwrap_or("").split('|').map(str::to_string).collect();
        let resolution = Resolution::from_parts(action, labels).map_err(|message| VerificationError::Parse { line, message })?;
        out.push((id.to_string(), resolution));
    }
    Ok(out)
}

/// Suggestion source for interactive review.
pub struct Suggester<'a> {
    pub taxonomy: &'a TargetTaxonomy,
    pub store: &'a EmbeddingStore,
}

pub const SUGGESTIONS: usize = 5;

/// Walks the flagged records one by one. For each, shows its labels and
/// the closest target labels, then reads one command:
/// numbers (space-separated) pick suggestions, `d` dismisses, `s` skips,
/// `q` stops, anything else is taken as `|`-separated labels.
pub fn review_interactive<T, R, W>(
    records: &mut [T],
    suggester: Option<&Suggester<'_>>,
    operator: &str,
    mut input: R,
    mut output: W,
) -> Result<Vec<AuditEntry>, VerificationError>
where
    T: PoiRecord,
    R: BufRead,
    W: Write,
{
    let ids: Vec<String> = list_flagged(records).into_iter().map(|(r, _)| r.poi().id.clone()).collect();
    let mut entries = Vec::new();
    'outer: for (n, id) in ids.iter().enumerate() {
        let poi = records.iter().find(|r| &r.poi().id == id).expect("listed id exists").poi().clone();
        let reasons: Vec<&str> = flag_reasons(&poi).into_iter().map(FlagReason::as_str).collect();
        writeln!(output, "[{}/{}] {} {}", n + 1, ids.len(), poi.id, poi.name.as_deref().unwrap_or("(no name)"))?;
        writeln!(output, "  reasons: {}", reasons.join(", "))?;
        writeln!(output, "  place types: {}", poi.place_types.iter().cloned().collect::<Vec<_>>().join(" | "))?;
        let mut suggestions: Vec<(String, f64)> = Vec::new();
        if let Some(s) = suggester {
            for label in poi.unmapped_types.iter().chain(poi.place_types.iter()).take(1) {
                suggestions = nearest_labels(label, s.taxonomy, s.store, SUGGESTIONS);
                writeln!(output, "  suggestions for '{label}':")?;
            }
            for (i, (label, score)) in suggestions.iter().enumerate() {
                writeln!(output, "    {}. {label} ({score:.3})", i + 1)?;
            }
        }
        loop {
            write!(output, "  choice [numbers | d=dismiss | s=skip | q=quit | labels a|b]: ")?;
            output.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                break 'outer;
            }
            let line = line.trim();
            let resolution = match line {
                "q" => break 'outer,
                "s" | "" => break,
                "d" => Resolution::Dismiss,
                _ => {
                    let picks: Option<Vec<usize>> = line.split_whitespace().map(|t| t.parse().ok()).collect();
                    match picks {
                        Some(p) if !p.is_empty() => {
                            if p.iter().any(|&i| i == 0 || i > suggestions.len()) {
                                writeln!(output, "  no such suggestion")?;
                                continue;
                            }
                            Resolution::AssignTypes(p.into_iter().map(|i| suggestions[i - 1].0.clone()).collect())
                        }
                        _ => match Resolution::from_parts("assign_types", line.split('|').map(str::to_string).collect()) {
                            Ok(r) => r,
                            Err(e) => {
                                writeln!(output, "  {e}")?;
                                continue;
                            }
                        },
                    }
                }
            };
            entries.push(resolve_flag(records, id, &resolution, operator, Utc::now())?);
            break;
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GeoPoint;
    use chrono::{NaiveDate, TimeZone};

    fn t() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap()
    }

    fn data() -> Vec<StandardPoi> {
        let d = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let mut a = StandardPoi::new("osm", "1", GeoPoint { lat: 1.0, lon: 103.0 }, d).with_place_types(["hawker_stall"]);
        a.unmapped_types.insert("hawker_stall".into());
        a.requires_verification = true;
        let mut b = StandardPoi::new("osm", "2", GeoPoint { lat: 1.0, lon: 103.0 }, d);
        b.requires_verification = true;
        let c = StandardPoi::new("osm", "3", GeoPoint { lat: 1.0, lon: 103.0 }, d).with_place_types(["cafe"]);
        vec![a, b, c]
    }

    #[test]
    fn listing_reasons() {
        let d = data();
        let f = list_flagged(&d);
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].1, [FlagReason::UnmappedTaxonomy]);
        assert_eq!(f[1].1, [FlagReason::MissingPlaceType]);
        assert!(list_flagged(&d[2..]).is_empty());
    }

    #[test]
    fn assign_dismiss_and_errors() {
        let mut d = data();
        let e = resolve_flag(&mut d, "osm:1", &Resolution::AssignTypes(vec!["Restaurant".into()]), "ana", t()).unwrap();
        assert!(!d[0].requires_verification);
        assert!(d[0].place_types.contains("restaurant"));
        assert!(!d[0].place_types.contains("hawker_stall"));
        assert_eq!(e.action, "assign_types");
        let before = d[1].place_types.clone();
        resolve_flag(&mut d, "osm:2", &Resolution::Dismiss, "ana", t()).unwrap();
        assert!(!d[1].requires_verification);
        assert_eq!(d[1].place_types, before);
        assert!(matches!(resolve_flag(&mut d, "osm:9", &Resolution::Dismiss, "ana", t()), Err(VerificationError::UnknownId(_))));
        assert!(matches!(resolve_flag(&mut d, "osm:3", &Resolution::Dismiss, "ana", t()), Err(VerificationError::NotFlagged(_))));
        assert!(list_flagged(&d).is_empty());
    }

    #[test]
    fn replay_reproduces_result() {
        let original = data();
        let mut live = original.clone();
        let entries = vec![
            resolve_flag(&mut live, "osm:2", &Resolution::AssignTypes(vec!["shop".into()]), "bo", t()).unwrap(),
            resolve_flag(&mut live, "osm:1", &Resolution::Dismiss, "bo", t()).unwrap(),
        ];
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("audit.ndjson");
        append_audit(&log, &entries[..1]).unwrap();
        append_audit(&log, &entries[1..]).unwrap();
        let loaded = load_audit(&log).unwrap();
        assert_eq!(loaded, entries);
        let mut replayed = original;
        replay(&mut replayed, &loaded).unwrap();
        assert_eq!(replayed, live);
    }

    #[test]
    fn resolutions_csv() {
        let text = "poi_id,action,labels\nosm:1,assign_types,Restaurant|Cafe\nosm:2,dismiss,\n";
        let r = read_resolutions_csv(text.as_bytes()).unwrap();
        assert_eq!(r[0], ("osm:1".into(), Resolution::AssignTypes(vec!["restaurant".into(), "cafe".into()])));
        assert_eq!(r[1], ("osm:2".into(), Resolution::Dismiss));
        let bad = "poi_id,action,labels\nosm:1,explode,\n";
        assert!(matches!(read_resolutions_csv(bad.as_bytes()), Err(VerificationError::Parse { line: 2, .. })));
    }

    #[test]
    fn interactive_session() {
        let store = EmbeddingStore::from_reader("3 2\nhawker 1 0\nstall 0.9 0.1\nfood 1 0.05\n".as_bytes()).unwrap();
        let taxonomy = TargetTaxonomy::new(["food", "stall"], &store);
        let suggester = Suggester { taxonomy: &taxonomy, store: &store };
        let mut d = data();
        let mut out = Vec::new();
        let entries = review_interactive(&mut d, Some(&suggester), "cy", "9\n1\nd\n".as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("1. stall"), "{text}");
        assert!(text.contains("no such suggestion"));
        assert_eq!(entries.len(), 2);
        assert!(d[0].place_types.contains("stall"));
        assert!(list_flagged(&d).is_empty());
    }
}
