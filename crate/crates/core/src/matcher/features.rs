//! Candidate pairs and their two similarity features.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::StandardPoi;
use crate::normalization::canonical_address_string;
use crate::similarity::text::normalized_similarity;
use crate::similarity::{fit_tfidf, name_similarity, neighbors_within, SpatialGridIndex, TfIdfModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Match,
    NonMatch,
}

impl Label {
    pub fn from_bool(is_match: bool) -> Self {
        if is_match {
            Label::Match
        } else {
            Label::NonMatch
        }
    }

    pub fn is_match(self) -> bool {
        self == Label::Match
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Match => "match",
            Label::NonMatch => "non_match",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "match" | "1" | "true" => Ok(Label::Match),
            "non_match" | "nonmatch" | "0" | "false" => Ok(Label::NonMatch),
            other => Err(format!("unknown label '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePair {
    pub id_a: String,
    pub id_b: String,
    pub s_name: f64,
    pub s_address: f64,
    pub label: Option<Label>,
}

impl FeaturePair {
    /// Builds a pair in canonical orientation (`id_a < id_b`). Features are
    /// symmetric, so swapping the ids leaves them unchanged.
    pub fn new(id_1: &str, id_2: &str, s_name: f64, s_address: f64, label: Option<Label>) -> Self {
        let (id_a, id_b) = if id_1 <= id_2 { (id_1, id_2) } else { (id_2, id_1) };
        Self { id_a: id_a.to_string(), id_b: id_b.to_string(), s_name, s_address, label }
    }

    pub fn features(&self) -> [f64; 2] {
        [self.s_name, self.s_address]
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.id_a, &self.id_b)
    }
}

/// A ground-truth decision for a pair of POI ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub id_a: String,
    pub id_b: String,
    pub label: Label,
}

impl LabeledPair {
    /// Canonical orientation (`id_a < id_b`).
    pub fn new(id_1: &str, id_2: &str, label: Label) -> Self {
        let (id_a, id_b) = if id_1 <= id_2 { (id_1, id_2) } else { (id_2, id_1) };
        Self { id_a: id_a.to_string(), id_b: id_b.to_string(), label }
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.id_a, &self.id_b)
    }
}

/// Which similarity measure feeds each feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureBackend {
    /// Edit-distance similarity for both names and addresses.
    String,
    /// Neighbourhood TF-IDF cosine for both names and addresses.
    #[serde(rename = "tfidf")]
    TfIdf,
    /// Edit-distance names, TF-IDF addresses.
    Hybrid,
}

impl FeatureBackend {
    pub const ALL: [FeatureBackend; 3] = [FeatureBackend::String, FeatureBackend::TfIdf, FeatureBackend::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureBackend::String => "string",
            FeatureBackend::TfIdf => "tfidf",
            FeatureBackend::Hybrid => "hybrid",
        }
    }

    fn name_uses_tfidf(self) -> bool {
        self == FeatureBackend::TfIdf
    }

    fn address_uses_tfidf(self) -> bool {
        self != FeatureBackend::String
    }
}

impl fmt::Display for FeatureBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "string" => Ok(FeatureBackend::String),
            "tfidf" | "tf-idf" => Ok(FeatureBackend::TfIdf),
            "hybrid" | "string+tfidf" => Ok(FeatureBackend::Hybrid),
            other => Err(format!("unknown feature backend '{other}'")),
        }
    }
}

/// Per-neighbourhood TF-IDF models. A model is absent when its corpus has
/// no tokens; similarities computed against an absent model are 0.
#[derive(Debug, Clone, Default)]
pub struct NeighborhoodModels {
    pub address: Option<TfIdfModel>,
    pub name: Option<TfIdfModel>,
}

impl NeighborhoodModels {
    pub fn fit<'a, I>(members: I) -> Self
    where
        I: IntoIterator<Item = &'a StandardPoi>,
    {
        let mut addresses = Vec::new();
        let mut names = Vec::new();
        for p in members {
            if let Some(a) = p.address.as_ref().filter(|a| !a.is_empty()) {
                addresses.push(canonical_address_string(a));
            }
            if let Some(n) = p.name.as_ref().filter(|n| !n.trim().is_empty()) {
                names.push(n.clone());
            }
        }
        Self { address: fit_tfidf(&addresses).ok(), name: fit_tfidf(&names).ok() }
    }
}

/// Name feature; 0 when either name is missing.
pub fn name_feature(a: &StandardPoi, b: &StandardPoi, backend: FeatureBackend, models: &NeighborhoodModels) -> f64 {
    let (Some(na), Some(nb)) = (a.name.as_deref(), b.name.as_deref()) else {
        return 0.0;
    };
    if na.trim().is_empty() || nb.trim().is_empty() {
        return 0.0;
    }
    if backend.name_uses_tfidf() {
        models.name.as_ref().map_or(0.0, |m| m.text_similarity(na, nb))
    } else {
        name_similarity(na, nb)
    }
}

/// Address feature; 0 when either address is missing.
pub fn address_feature(a: &StandardPoi, b: &StandardPoi, backend: FeatureBackend, models: &NeighborhoodModels) -> f64 {
    let (Some(aa), Some(ab)) = (a.address.as_ref(), b.address.as_ref()) else {
        return 0.0;
    };
    if aa.is_empty() || ab.is_empty() {
        return 0.0;
    }
    let (sa, sb) = (canonical_address_string(aa), canonical_address_string(ab));
    if backend.address_uses_tfidf() {
        models.address.as_ref().map_or(0.0, |m| m.text_similarity(&sa, &sb))
    } else {
        normalized_similarity(&sa, &sb)
    }
}

/// Featurizes with the hybrid backend: edit-distance names and TF-IDF
/// addresses under `tfidf`.
pub fn featurize_pair(a: &StandardPoi, b: &StandardPoi, tfidf: &TfIdfModel) -> FeaturePair {
    let models = NeighborhoodModels { address: Some(tfidf.clone()), name: None };
    featurize_with(a, b, FeatureBackend::Hybrid, &models)
}

pub fn featurize_with(a: &StandardPoi, b: &StandardPoi, backend: FeatureBackend, models: &NeighborhoodModels) -> FeaturePair {
    FeaturePair::new(
        &a.id,
        &b.id,
        name_feature(a, b, backend, models),
        address_feature(a, b, backend, models),
        None,
    )
}

/// Generates and featurizes candidate pairs over a dataset.
///
/// Each pair is scored exactly once, in the neighbourhood of its
/// lexicographically smaller POI (the centroid). The neighbourhood corpus is
/// the centroid plus every POI within the radius, from any source.
pub struct PairFeaturizer<'a> {
    pois: &'a [StandardPoi],
    by_id: HashMap<&'a str, usize>,
    index: SpatialGridIndex,
    pub radius_m: f64,
    pub backend: FeatureBackend,
    pub cross_source_only: bool,
}

impl<'a> PairFeaturizer<'a> {
    pub fn new(pois: &'a [StandardPoi], backend: FeatureBackend, radius_m: f64) -> Self {
        let by_id = pois.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
        let index = SpatialGridIndex::build(pois, radius_m.max(1.0));
        Self { pois, by_id, index, radius_m, backend, cross_source_only: true }
    }

    pub fn with_cross_source_only(mut self, yes: bool) -> Self {
        self.cross_source_only = yes;
        self
    }

    pub fn pois(&self) -> &'a [StandardPoi] {
        self.pois
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// The centroid and all POIs within the radius of it, any source.
    pub fn neighborhood(&self, centroid: usize) -> Vec<usize> {
        let mut members = vec![centroid];
        members.extend(neighbors_within(&self.index, self.pois, centroid, self.radius_m, false).into_iter().map(|x| x.0));
        members
    }

    fn models_for(&self, members: &[usize]) -> NeighborhoodModels {
        NeighborhoodModels::fit(members.iter().map(|&i| &self.pois[i]))
    }

    /// Candidate partners of `centroid` whose id sorts after it.
    pub fn partners(&self, centroid: usize) -> Vec<usize> {
        let c = &self.pois[centroid];
        neighbors_within(&self.index, self.pois, centroid, self.radius_m, self.cross_source_only)
            .into_iter()
            .map(|x| x.0)
            .filter(|&j| self.pois[j].id > c.id)
            .collect()
    }

    /// All canonical candidate pairs of one centroid, featurized.
    pub fn centroid_pairs(&self, centroid: usize) -> Vec<FeaturePair> {
        let partners = self.partners(centroid);
        if partners.is_empty() {
            return Vec::new();
        }
        let models = self.models_for(&self.neighborhood(centroid));
        partners
            .into_iter()
            .map(|j| featurize_with(&self.pois[centroid], &self.pois[j], self.backend, &models))
            .collect()
    }

    /// Every candidate pair in the dataset, sorted by `(id_a, id_b)`.
    pub fn all_pairs(&self) -> Vec<FeaturePair> {
        let mut out: Vec<FeaturePair> =
            (0..self.pois.len()).into_par_iter().flat_map_iter(|c| self.centroid_pairs(c)).collect();
        out.sort_by(|a, b| a.key().cmp(&b.key()));
        out
    }

    /// Featurizes explicitly listed pairs (e.g. labelled ground truth). A
    /// partner farther than the radius is added to the centroid's corpus so
    /// the pair can still be scored.
    pub fn featurize_listed(&self, pairs: &[LabeledPair]) -> Result<Vec<FeaturePair>, String> {
        let mut resolved = Vec::with_capacity(pairs.len());
        for LabeledPair { id_a: a, id_b: b, label } in pairs {
            let ia = self.index_of(a).ok_or_else(|| format!("unknown POI id '{a}'"))?;
            let ib = self.index_of(b).ok_or_else(|| format!("unknown POI id '{b}'"))?;
            if ia == ib {
                return Err(format!("pair joins '{a}' with itself"));
            }
            let (c, o) = if self.pois[ia].id < self.pois[ib].id { (ia, ib) } else { (ib, ia) };
            resolved.push((c, o, Some(*label)));
        }
        let mut by_centroid: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, (c, _, _)) in resolved.iter().enumerate() {
            by_centroid.entry(*c).or_default().push(k);
        }
        let mut groups: Vec<(usize, Vec<usize>)> = by_centroid.into_iter().collect();
        groups.sort_by_key(|g| g.0);
        let scored: Vec<Vec<(usize, FeaturePair)>> = groups
            .par_iter()
            .map(|(c, ks)| {
                let base = self.neighborhood(*c);
                let shared = self.models_for(&base);
                ks.iter()
                    .map(|&k| {
                        let (_, o, label) = resolved[k];
                        let models = if base.contains(&o) {
                            None
                        } else {
                            let mut extended = base.clone();
                            extended.push(o);
                            Some(self.models_for(&extended))
                        };
                        let mut fp = featurize_with(&self.pois[*c], &self.pois[o], self.backend, models.as_ref().unwrap_or(&shared));
                        fp.label = label;
                        (k, fp)
                    })
                    .collect()
            })
            .collect();
        let mut out: Vec<Option<FeaturePair>> = vec![None; resolved.len()];
        for (k, fp) in scored.into_iter().flatten() {
            out[k] = Some(fp);
        }
        Ok(out.into_iter().map(|x| x.expect("every pair scored")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GeoPoint;
    use crate::normalization::parse_address;
    use chrono::NaiveDate;

    fn poi(src: &str, id: &str, lat: f64, lon: f64, name: Option<&str>, addr: Option<&str>) -> StandardPoi {
        let mut p = StandardPoi::new(src, id, GeoPoint { lat, lon }, NaiveDate::default());
        if let Some(n) = name {
            p = p.with_name(n);
        }
        if let Some(a) = addr {
            p = p.with_address(parse_address(a));
        }
        p
    }

    #[test]
    fn identical_pois_score_one() {
        let a = poi("osm", "1", 1.3, 103.8, Some("Kopi Hub"), Some("520 Tampines Central"));
        let b = poi("here", "1", 1.3, 103.8, Some("Kopi Hub"), Some("520 Tampines Central"));
        let c = poi("sla", "9", 1.3, 103.8, Some("Other"), Some("10 Simei Street"));
        let models = NeighborhoodModels::fit([&a, &b, &c]);
        let fp = featurize_pair(&a, &b, models.address.as_ref().unwrap());
        assert_eq!(fp.id_a, "here:1");
        assert_eq!(fp.id_b, "osm:1");
        assert_eq!(fp.s_name, 1.0);
        assert!((fp.s_address - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_fields_score_zero() {
        let a = poi("osm", "1", 1.3, 103.8, None, None);
        let b = poi("here", "1", 1.3, 103.8, None, Some("520 Tampines Central"));
        for backend in FeatureBackend::ALL {
            let fp = featurize_with(&a, &b, backend, &NeighborhoodModels::fit([&a, &b]));
            assert_eq!((fp.s_name, fp.s_address), (0.0, 0.0));
        }
    }

    #[test]
    fn composition_with_standalone_ops() {
        let a = poi("osm", "1", 1.3, 103.8, Some("Bayfront Mall"), Some("Blk 5 Bayfront Ave"));
        let b = poi("here", "2", 1.3, 103.8, Some("Mall Bayfront"), Some("7 Bayfront Ave"));
        let c = poi("sla", "3", 1.3, 103.8, Some("Cafe"), Some("1 Marina Way"));
        let models = NeighborhoodModels::fit([&a, &b, &c]);
        let fp = featurize_with(&a, &b, FeatureBackend::Hybrid, &models);
        assert_eq!(fp.s_name, name_similarity("Bayfront Mall", "Mall Bayfront"));
        let m = models.address.as_ref().unwrap();
        let want = crate::similarity::address_similarity(m, a.address.as_ref().unwrap(), b.address.as_ref().unwrap());
        assert_eq!(fp.s_address, want);
        let s = featurize_with(&a, &b, FeatureBackend::String, &models);
        let (ca, cb) = (canonical_address_string(a.address.as_ref().unwrap()), canonical_address_string(b.address.as_ref().unwrap()));
        assert_eq!(s.s_address, normalized_similarity(&ca, &cb));
        let t = featurize_with(&a, &b, FeatureBackend::TfIdf, &models);
        assert_eq!(t.s_name, models.name.as_ref().unwrap().text_similarity("Bayfront Mall", "Mall Bayfront"));
    }

    #[test]
    fn radius_filter_and_dedup() {
        let near = 5.0 / 111_320.0;
        let far = 150.0 / 111_320.0;
        let pois = vec![
            poi("osm", "1", 1.3, 103.8, Some("A"), None),
            poi("here", "1", 1.3 + near, 103.8, Some("A"), None),
            poi("sla", "1", 1.3 + far, 103.8, Some("A"), None),
        ];
        let f = PairFeaturizer::new(&pois, FeatureBackend::Hybrid, 100.0);
        let pairs = f.all_pairs();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].key(), ("here:1", "osm:1"));
    }

    #[test]
    fn listed_pairs_keep_labels_and_order() {
        let pois = vec![
            poi("osm", "1", 1.3, 103.8, Some("Kopi"), Some("1 Simei Street")),
            poi("here", "1", 1.3, 103.8001, Some("Kopi"), Some("1 Simei Street")),
            poi("sla", "1", 1.31, 103.8, Some("Kopi"), Some("1 Simei Street")),
        ];
        let f = PairFeaturizer::new(&pois, FeatureBackend::Hybrid, 100.0);
        let listed = vec![LabeledPair::new("osm:1", "here:1", Label::Match), LabeledPair::new("sla:1", "osm:1", Label::NonMatch)];
        let out = f.featurize_listed(&listed).unwrap();
        assert_eq!(out[0].key(), ("here:1", "osm:1"));
        assert_eq!(out[0].label, Some(Label::Match));
        assert_eq!(out[1].key(), ("osm:1", "sla:1"));
        assert_eq!(out[1].s_name, 1.0);
        assert!(f.featurize_listed(&[LabeledPair::new("x", "osm:1", Label::Match)]).is_err());
    }

    #[test]
    fn label_parsing() {
        assert_eq!("match".parse::<Label>(), Ok(Label::Match));
        assert_eq!("non-match".parse::<Label>(), Ok(Label::NonMatch));
        assert_eq!("non_match".parse::<Label>(), Ok(Label::NonMatch));
        assert!("maybe".parse::<Label>().is_err());
    }
}
