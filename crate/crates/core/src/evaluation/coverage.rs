//! Per-source attribute completeness.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{SourceRanking, StandardPoi};
use crate::unification::UnifiedPoi;

pub const ATTRIBUTES: [&str; 5] = ["coordinates", "address", "name", "place_type", "tags"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub source: String,
    pub total: usize,
    /// Present counts in [`ATTRIBUTES`] order.
    pub present: [usize; 5],
}

impl CoverageRow {
    pub fn of<'a, I>(source: &str, pois: I) -> Self
    where
        I: IntoIterator<Item = &'a StandardPoi>,
    {
        let mut row = CoverageRow { source: source.to_string(), total: 0, present: [0; 5] };
        for p in pois {
            row.total += 1;
            let flags = [
                p.point.is_valid(),
                p.has_address(),
                p.has_name(),
                p.place_types.iter().any(|t| !t.trim().is_empty()),
                p.tags.iter().any(|t| !t.trim().is_empty()),
            ];
            for (c, f) in row.present.iter_mut().zip(flags) {
                *c += usize::from(f);
            }
        }
        row
    }

    /// Percentage of POIs with the attribute, rounded to one decimal.
    pub fn percent(&self, attribute: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            (1000.0 * self.present[attribute] as f64 / self.total as f64).round() / 10.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
}

/// One row per source (ordered by `ranking`, unlisted sources after) and,
/// when given, a final `unified` row.
pub fn coverage_report(pois: &[StandardPoi], unified: Option<&[UnifiedPoi]>, ranking: &SourceRanking) -> CoverageReport {
    let mut by_source: BTreeMap<&str, Vec<&StandardPoi>> = BTreeMap::new();
    for p in pois {
        by_source.entry(p.source.as_str()).or_default().push(p);
    }
    let mut sources: Vec<&str> = by_source.keys().copied().collect();
    sources.sort_by(|a, b| ranking.compare(a, b));
    let mut rows: Vec<CoverageRow> = sources.iter().map(|s| CoverageRow::of(s, by_source[s].iter().copied())).collect();
    if let Some(u) = unified {
        rows.push(CoverageRow::of("unified", u.iter().map(|x| &x.poi)));
    }
    CoverageReport { rows }
}

impl CoverageReport {
    pub fn row(&self, source: &str) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.source == source)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,total");
        for a in ATTRIBUTES {
            let _ = write!(out, ",{a},{a}_pct");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.source, r.total);
            for i in 0..ATTRIBUTES.len() {
                let _ = write!(out, ",{},{:.1}", r.present[i], r.percent(i));
            }
            out.push('\n');
        }
        out
    }

    /// Aligned table with cells like `291 (75.6%)`.
    pub fn to_text(&self) -> String {
        let mut header = vec!["source".to_string(), "total".to_string()];
        header.extend(ATTRIBUTES.iter().map(|a| a.to_string()));
        let mut table = vec![header];
        for r in &self.rows {
            let mut line = vec![r.source.clone(), r.total.to_string()];
            line.extend((0..ATTRIBUTES.len()).map(|i| format!("{} ({:.1}%)", r.present[i], r.percent(i))));
            table.push(line);
        }
        let widths: Vec<usize> =
            (0..table[0].len()).map(|c| table.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for line in &table {
            let cells: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}
