//! Groups decided matches into clusters and merges each cluster into a
//! single record using source-authority rules.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::DecidedPair;
use crate::model::{BoundingBox, GeoPoint, SourceRanking, StandardPoi};
use crate::normalization::canonical_address_string;

#[derive(Debug, Error, PartialEq)]
pub enum UnificationError {
    #[error("match pair references unknown POI id '{0}'")]
    UnknownId(String),
    #[error("duplicate POI id '{0}' in dataset")]
    DuplicateId(String),
    #[error("cannot merge an empty cluster")]
    EmptyCluster,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCluster {
    /// Sorted ascending.
    pub member_ids: Vec<String>,
}

/// A merged record plus where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedPoi {
    /// Merged attributes. `id` is the smallest contributing id and `source`
    /// the most authoritative contributing source.
    #[serde(flatten)]
    pub poi: StandardPoi,
    #[serde(default)]
    pub contributing_ids: BTreeSet<String>,
    #[serde(default)]
    pub contributing_sources: BTreeSet<String>,
    /// Every contributing record's own location, keyed by id.
    #[serde(default)]
    pub contributing_points: BTreeMap<String, GeoPoint>,
}

impl From<StandardPoi> for UnifiedPoi {
    fn from(poi: StandardPoi) -> Self {
        UnifiedPoi {
            contributing_ids: BTreeSet::from([poi.id.clone()]),
            contributing_sources: BTreeSet::from([poi.source.clone()]),
            contributing_points: BTreeMap::from([(poi.id.clone(), poi.point)]),
            poi,
        }
    }
}

impl UnifiedPoi {
    pub fn id(&self) -> &str {
        &self.poi.id
    }

    /// A record read without provenance (e.g. a standard-schema file) is
    /// its own sole contributor.
    pub fn ensure_provenance(&mut self) {
        if self.contributing_ids.is_empty() {
            *self = UnifiedPoi::from(self.poi.clone());
        }
    }
}

/// Ids of the pairs decided as matches.
pub fn match_pairs(decided: &[DecidedPair]) -> Vec<(String, String)> {
    decided.iter().filter(|d| d.is_match()).map(|d| (d.pair.id_a.clone(), d.pair.id_b.clone())).collect()
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Connected components of the match graph over `ids`. Every id lands in
/// exactly one cluster; clusters are ordered by their smallest member.
pub fn cluster_matches<S: AsRef<str>>(ids: &[S], pairs: &[(String, String)]) -> Result<Vec<MatchCluster>, UnificationError> {
    let mut index: HashMap<&str, usize> = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if index.insert(id.as_ref(), i).is_some() {
            return Err(UnificationError::DuplicateId(id.as_ref().to_string()));
        }
    }
    let mut set = DisjointSet::new(ids.len());
    for (a, b) in pairs {
        let ia = *index.get(a.as_str()).ok_or_else(|| UnificationError::UnknownId(a.clone()))?;
        let ib = *index.get(b.as_str()).ok_or_else(|| UnificationError::UnknownId(b.clone()))?;
        set.union(ia, ib);
    }
    let mut groups: HashMap<usize, Vec<String>> = HashMap::new();
    for (i, id) in ids.iter().enumerate() {
        let root = set.find(i);
        groups.entry(root).or_default().push(id.as_ref().to_string());
    }
    let mut clusters: Vec<MatchCluster> = groups
        .into_values()
        .map(|mut member_ids| {
            member_ids.sort();
            MatchCluster { member_ids }
        })
        .collect();
    clusters.sort_by(|a, b| a.member_ids[0].cmp(&b.member_ids[0]));
    Ok(clusters)
}

/// Longest candidate, ties broken by lexicographic order.
fn longest<'a, T>(candidates: impl Iterator<Item = (&'a T, String)>) -> Option<&'a T> {
    candidates
        .min_by(|(_, a), (_, b)| b.chars().count().cmp(&a.chars().count()).then_with(|| a.cmp(b)))
        .map(|(t, _)| t)
}

/// Members whose source ranks best among those satisfying `has`.
fn best_ranked<'a, F>(members: &[&'a UnifiedPoi], ranking: &SourceRanking, has: F) -> Vec<&'a UnifiedPoi>
where
    F: Fn(&UnifiedPoi) -> bool,
{
    let with: Vec<&UnifiedPoi> = members.iter().copied().filter(|m| has(m)).collect();
    let Some(top) = with.iter().map(|m| m.poi.source.as_str()).min_by(|a, b| ranking.compare(a, b)) else {
        return Vec::new();
    };
    let top = top.to_string();
    with.into_iter().filter(|m| ranking.compare(&m.poi.source, &top) == Ordering::Equal).collect()
}

/// Merges records that describe the same place.
///
/// - location: mean of the best-ranked members' locations;
/// - bound: smallest box holding every member's bound and location;
/// - name, address: longest value among the best-ranked members that have
///   one (ties lexicographic);
/// - place types, tags, unmapped types, provenance: unions;
/// - extraction date: latest;
/// - verification flag: any member flagged, or no place type survived.
pub fn merge_unified(members: &[&UnifiedPoi], ranking: &SourceRanking) -> Result<UnifiedPoi, UnificationError> {
    let first = members.first().ok_or(UnificationError::EmptyCluster)?;
    if members.len() == 1 {
        let mut out = (*first).clone();
        out.poi.requires_verification |= out.poi.place_types.is_empty();
        return Ok(out);
    }
    let top = best_ranked(members, ranking, |_| true);
    let n = top.len() as f64;
    let point = GeoPoint {
        lat: top.iter().map(|m| m.poi.point.lat).sum::<f64>() / n,
        lon: top.iter().map(|m| m.poi.point.lon).sum::<f64>() / n,
    };
    let mut bound = BoundingBox::around(members[0].poi.point);
    for m in members {
        bound = bound.include(m.poi.point);
        if let Some(b) = &m.poi.bound {
            bound = bound.union(b);
        }
        for p in m.contributing_points.values() {
            bound = bound.include(*p);
        }
    }
    let named = best_ranked(members, ranking, |m| m.poi.has_name());
    let name = longest(named.iter().map(|m| (*m, m.poi.name.clone().unwrap_or_default())))
        .and_then(|m| m.poi.name.clone());
    let addressed = best_ranked(members, ranking, |m| m.poi.has_address());
    let address = longest(addressed.iter().map(|m| {
        let a = m.poi.address.as_ref().expect("filtered on address");
        (*m, canonical_address_string(a))
    }))
    .and_then(|m| m.poi.address.clone());

    let mut merged = StandardPoi {
        id: members.iter().map(|m| m.poi.id.as_str()).min().expect("non-empty").to_string(),
        source: top[0].poi.source.clone(),
        point,
        bound: Some(bound),
        name,
        address,
        place_types: BTreeSet::new(),
        tags: BTreeSet::new(),
        extraction_date: members.iter().map(|m| m.poi.extraction_date).max().expect("non-empty"),
        requires_verification: members.iter().any(|m| m.poi.requires_verification),
        unmapped_types: BTreeSet::new(),
    };
    let mut contributing_ids = BTreeSet::new();
    let mut contributing_sources = BTreeSet::new();
    let mut contributing_points = BTreeMap::new();
    for m in members {
        merged.place_types.extend(m.poi.place_types.iter().cloned());
        merged.tags.extend(m.poi.tags.iter().cloned());
        merged.unmapped_types.extend(m.poi.unmapped_types.iter().cloned());
        contributing_ids.extend(m.contributing_ids.iter().cloned());
        contributing_sources.extend(m.contributing_sources.iter().cloned());
        contributing_points.extend(m.contributing_points.iter().map(|(k, v)| (k.clone(), *v)));
    }
    merged.requires_verification |= merged.place_types.is_empty();
    Ok(UnifiedPoi { poi: merged, contributing_ids, contributing_sources, contributing_points })
}

pub fn merge_cluster(
    cluster: &MatchCluster,
    pois: &[StandardPoi],
    ranking: &SourceRanking,
) -> Result<UnifiedPoi, UnificationError> {
    let by_id: HashMap<&str, &StandardPoi> = pois.iter().map(|p| (p.id.as_str(), p)).collect();
    let members: Vec<UnifiedPoi> = cluster
        .member_ids
        .iter()
        .map(|id| by_id.get(id.as_str()).map(|p| UnifiedPoi::from((*p).clone())).ok_or_else(|| UnificationError::UnknownId(id.clone())))
        .collect::<Result<_, _>>()?;
    merge_unified(&members.iter().collect::<Vec<_>>(), ranking)
}

/// Clusters `records` by `pairs` and merges every cluster. Output is sorted
/// by id.
pub fn unify_records(
    records: &[UnifiedPoi],
    pairs: &[(String, String)],
    ranking: &SourceRanking,
) -> Result<Vec<UnifiedPoi>, UnificationError> {
    let ids: Vec<&str> = records.iter().map(|r| r.id()).collect();
    let clusters = cluster_matches(&ids, pairs)?;
    let by_id: HashMap<&str, &UnifiedPoi> = records.iter().map(|r| (r.id(), r)).collect();
    let mut out: Vec<UnifiedPoi> = clusters
        .par_iter()
        .map(|c| {
            let members: Vec<&UnifiedPoi> = c.member_ids.iter().map(|id| by_id[id.as_str()]).collect();
            merge_unified(&members, ranking)
        })
        .collect::<Result<_, _>>()?;
    out.sort_by(|a, b| a.poi.id.cmp(&b.poi.id));
    Ok(out)
}

pub fn unify_dataset(
    pois: &[StandardPoi],
    pairs: &[(String, String)],
    ranking: &SourceRanking,
) -> Result<Vec<UnifiedPoi>, UnificationError> {
    let records: Vec<UnifiedPoi> = pois.iter().cloned().map(UnifiedPoi::from).collect();
    unify_records(&records, pairs, ranking)
}
