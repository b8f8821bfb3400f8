//! Place-type taxonomy mapping by word-vector cosine similarity.

pub mod embedding;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{normalize_text, StandardPoi};
pub use embedding::{EmbeddingError, EmbeddingStore};

pub const DEFAULT_THRESHOLD: f64 = 0.95;

/// Splits a label into its words, followed by the whole phrase when it has
/// more than one word.
pub fn decompose_label(label: &str) -> Vec<String> {
    let words: Vec<String> = normalize_text(label)
        .split(|c: char| c.is_whitespace() || c == '_' || c == '/')
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect();
    let mut out = words.clone();
    if words.len() > 1 {
        out.push(words.join(" "));
    }
    out
}

/// Mean of the word vectors of a phrase; `None` when no word is known.
pub fn phrase_vector(phrase: &str, store: &EmbeddingStore) -> Option<Vec<f64>> {
    let vectors: Vec<Vec<f64>> = normalize_text(phrase)
        .split(|c: char| c.is_whitespace() || c == '_' || c == '/')
        .filter(|w| !w.is_empty())
        .filter_map(|w| store.word_vector(w))
        .collect();
    let refs: Vec<&Vec<f64>> = vectors.iter().collect();
    embedding::mean(&refs, store.dim)
}

/// `x . y / (|x| |y|)`, zero when either vector has zero norm.
pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64, EmbeddingError> {
    if x.len() != y.len() {
        return Err(EmbeddingError::DimensionMismatch { left: x.len(), right: y.len() });
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

/// Target vocabulary with precomputed phrase vectors.
#[derive(Debug, Clone)]
pub struct TargetTaxonomy {
    labels: Vec<String>,
    vectors: Vec<Option<Vec<f64>>>,
}

impl TargetTaxonomy {
    pub fn new<I, S>(labels: I, store: &EmbeddingStore) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = BTreeSet::new();
        let labels: Vec<String> = labels
            .into_iter()
            .map(|l| normalize_text(l.as_ref()))
            .filter(|l| !l.is_empty() && seen.insert(l.clone()))
            .collect();
        let vectors = labels.iter().map(|l| phrase_vector(l, store)).collect();
        Self { labels, vectors }
    }

    /// One label per line; blank lines and `#` comments ignored.
    pub fn load(path: &Path, store: &EmbeddingStore) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(
            text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')),
            store,
        ))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Labels without a vector; they can only be matched verbatim.
    pub fn unvectorizable(&self) -> Vec<&str> {
        self.labels.iter().zip(&self.vectors).filter(|(_, v)| v.is_none()).map(|(l, _)| l.as_str()).collect()
    }

    /// `(label, score)` for every target, scored against one phrase.
    fn scores(&self, phrase: &str, vector: Option<&Vec<f64>>) -> Vec<(usize, f64)> {
        let spaced = phrase.replace('_', " ");
        self.labels
            .iter()
            .zip(&self.vectors)
            .enumerate()
            .filter_map(|(i, (label, tv))| {
                if label.replace('_', " ") == spaced {
                    return Some((i, 1.0));
                }
                let (v, t) = (vector?, tv.as_ref()?);
                cosine_similarity(v, t).ok().map(|s| (i, s))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyMapping {
    pub original_label: String,
    pub mapped_labels: BTreeSet<String>,
    pub scores: BTreeMap<String, f64>,
    pub flagged: bool,
}

/// Maps one source label onto every target scoring at least `threshold`
/// against any of its components.
pub fn map_place_type(
    label: &str,
    targets: &TargetTaxonomy,
    store: &EmbeddingStore,
    threshold: f64,
) -> TaxonomyMapping {
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for component in decompose_label(label) {
        let vector = phrase_vector(&component, store);
        for (i, s) in targets.scores(&component, vector.as_ref()) {
            if s >= threshold {
                let e = scores.entry(targets.labels[i].clone()).or_insert(s);
                *e = e.max(s);
            }
        }
    }
    let mapped_labels: BTreeSet<String> = scores.keys().cloned().collect();
    TaxonomyMapping {
        original_label: normalize_text(label),
        flagged: mapped_labels.is_empty(),
        mapped_labels,
        scores,
    }
}

/// The `k` best-scoring targets for a label, best first, ties by label.
pub fn nearest_labels(label: &str, targets: &TargetTaxonomy, store: &EmbeddingStore, k: usize) -> Vec<(String, f64)> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for component in decompose_label(label) {
        let vector = phrase_vector(&component, store);
        for (i, s) in targets.scores(&component, vector.as_ref()) {
            let e = best.entry(i).or_insert(s);
            *e = e.max(s);
        }
    }
    let mut ranked: Vec<(String, f64)> = best.into_iter().map(|(i, s)| (targets.labels[i].clone(), s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

/// Replaces a POI's place types with their mapped labels. Unmappable labels
/// are kept, recorded in `unmapped_types`, and flag the POI for verification.
pub fn map_poi(
    poi: &StandardPoi,
    targets: &TargetTaxonomy,
    store: &EmbeddingStore,
    threshold: f64,
) -> (StandardPoi, Vec<TaxonomyMapping>) {
    let mut out = poi.clone();
    let mappings: Vec<TaxonomyMapping> =
        poi.place_types.iter().map(|l| map_place_type(l, targets, store, threshold)).collect();
    out.place_types = BTreeSet::new();
    for m in &mappings {
        if m.flagged {
            out.place_types.insert(m.original_label.clone());
            out.unmapped_types.insert(m.original_label.clone());
            out.requires_verification = true;
        } else {
            out.place_types.extend(m.mapped_labels.iter().cloned());
        }
    }
    (out, mappings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store(text: &str) -> EmbeddingStore {
        EmbeddingStore::from_reader(text.as_bytes()).unwrap()
    }

    #[test]
    fn decomposition() {
        assert_eq!(decompose_label("Asian Restaurant"), ["asian", "restaurant", "asian restaurant"]);
        assert_eq!(decompose_label("cafe"), ["cafe"]);
        assert_eq!(decompose_label("Fast Food Outlet"), ["fast", "food", "outlet", "fast food outlet"]);
        assert_eq!(decompose_label("meal_takeaway"), ["meal", "takeaway", "meal takeaway"]);
        assert!(decompose_label("  ").is_empty());
    }

    #[test]
    fn phrase_vectors() {
        let s = store("2 2\nasian 1 3\nrestaurant 3 1\n");
        assert_eq!(phrase_vector("asian", &s), Some(vec![1.0, 3.0]));
        assert_eq!(phrase_vector("Asian Restaurant", &s), Some(vec![2.0, 2.0]));
        assert_eq!(phrase_vector("asian zzz", &s), Some(vec![1.0, 3.0]));
        assert_eq!(phrase_vector("qqq zzz", &s), None);
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine_similarity(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn identical_token_maps_with_score_one() {
        let s = store("2 2\nrestaurant 1 0\nstore 0 1\n");
        let t = TargetTaxonomy::new(["restaurant", "store"], &s);
        let m = map_place_type("Restaurant", &t, &s, DEFAULT_THRESHOLD);
        assert_eq!(m.mapped_labels.iter().collect::<Vec<_>>(), ["restaurant"]);
        assert!((m.scores["restaurant"] - 1.0).abs() < 1e-12);
        assert!(!m.flagged);
    }

    #[test]
    fn unknown_label_is_flagged() {
        let s = store("1 2\nrestaurant 1 0\n");
        let t = TargetTaxonomy::new(["restaurant"], &s);
        let m = map_place_type("zzxqv", &t, &s, DEFAULT_THRESHOLD);
        assert!(m.flagged);
        assert!(m.mapped_labels.is_empty());
    }

    #[test]
    fn asian_restaurant_fixture() {
        // asian = (0.5, 0.376), restaurant = (1, 0), store = (0, 1).
        // Phrase mean (0.75, 0.188): cos with restaurant = 0.75 / sqrt(0.75^2 + 0.188^2)
        let s = store("3 2\nasian 0.5 0.376\nrestaurant 1 0\nstore 0 1\n");
        let expected = 0.75 / (0.75f64 * 0.75 + 0.188 * 0.188).sqrt();
        assert!((expected - 0.97).abs() < 1e-4, "{expected}");
        let t = TargetTaxonomy::new(["restaurant", "store"], &s);
        let phrase = phrase_vector("asian restaurant", &s).unwrap();
        let got = cosine_similarity(&phrase, &[1.0, 0.0]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        let m = map_place_type("Asian Restaurant", &t, &s, DEFAULT_THRESHOLD);
        assert_eq!(m.mapped_labels.iter().collect::<Vec<_>>(), ["restaurant"]);
        // the single word "restaurant" also scores 1.0; the max is kept
        assert!((m.scores["restaurant"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn verbatim_match_without_vector() {
        let s = store("1 2\nfoo 1 0\n");
        let t = TargetTaxonomy::new(["meal_takeaway"], &s);
        assert_eq!(t.unvectorizable(), ["meal_takeaway"]);
        let m = map_place_type("Meal Takeaway", &t, &s, 0.95);
        assert!(m.mapped_labels.contains("meal_takeaway"));
    }

    #[test]
    fn map_poi_flags_unmapped() {
        use crate::model::GeoPoint;
        let s = store("2 2\nrestaurant 1 0\nstore 0 1\n");
        let t = TargetTaxonomy::new(["restaurant", "store"], &s);
        let poi = StandardPoi::new("osm", "1", GeoPoint { lat: 1.0, lon: 103.0 }, Default::default())
            .with_place_types(["Restaurant", "Hawker Centre"]);
        let (mapped, maps) = map_poi(&poi, &t, &s, 0.95);
        assert_eq!(maps.len(), 2);
        assert!(mapped.requires_verification);
        assert!(mapped.place_types.contains("restaurant"));
        assert!(mapped.place_types.contains("hawker centre"));
        assert_eq!(mapped.unmapped_types.iter().collect::<Vec<_>>(), ["hawker centre"]);

        let ok = poi.clone().with_place_types(["restaurant"]);
        let (mapped, _) = map_poi(&ok, &t, &s, 0.95);
        assert!(!mapped.requires_verification);
    }

    #[test]
    fn nearest_are_sorted() {
        let s = store("3 2\nrestaurant 1 0\nstore 0 1\ncafe 0.9 0.1\n");
        let t = TargetTaxonomy::new(["restaurant", "store", "cafe"], &s);
        let n = nearest_labels("restaurant", &t, &s, 2);
        assert_eq!(n[0].0, "restaurant");
        assert_eq!(n[1].0, "cafe");
    }

    fn vec2() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 4)
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(x in vec2(), y in vec2(), a in 0.01f64..100.0) {
            let xy = cosine_similarity(&x, &y).unwrap();
            prop_assert!((xy - cosine_similarity(&y, &x).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = x.iter().map(|v| v * a).collect();
            prop_assert!((xy - cosine_similarity(&scaled, &y).unwrap()).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&xy));
        }

        #[test]
        fn threshold_gating_is_monotone(vs in proptest::collection::vec(vec2(), 5), lo in 0.0f64..1.0, d in 0.0f64..0.5) {
            let names = ["alpha", "beta", "gamma", "delta", "omega"];
            let text = std::iter::once("5 4".to_string())
                .chain(names.iter().zip(&vs).map(|(n, v)| format!("{n} {}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))))
                .collect::<Vec<_>>()
                .join("\n");
            let s = store(&text);
            let t = TargetTaxonomy::new(["alpha", "beta", "gamma"], &s);
            let hi = (lo + d).min(1.0);
            let low = map_place_type("delta omega", &t, &s, lo);
            let high = map_place_type("delta omega", &t, &s, hi);
            prop_assert!(high.mapped_labels.is_subset(&low.mapped_labels));
            prop_assert!(low.scores.values().all(|v| *v >= lo));
            prop_assert!(high.scores.values().all(|v| *v >= hi));
        }
    }
}
