//! Match/non-match decisions for candidate POI pairs: weighted-sum baselines
//! and class-rebalanced tree ensembles.

pub mod ensemble;
pub mod features;
pub mod sampling;
pub mod tree;
pub mod tuning;
pub mod wsa;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{
    predict_match, train_ensemble, train_match_model, Algorithm, Hyperparams, MatchModel, SubModel, TrainConfig,
    DEFAULT_DECISION_THRESHOLD, DEFAULT_K,
};
pub use features::{featurize_pair, featurize_with, FeatureBackend, FeaturePair, Label, LabeledPair, NeighborhoodModels, PairFeaturizer};
pub use sampling::{balanced_class_size, rebalance, stratified_split, LabeledSplit};
pub use tuning::{cross_validate_tune, default_grid, TuneResult};
pub use wsa::{tune_wsa, wsa_classify, WsaObjective, WsaParams};

use crate::model::StandardPoi;

#[derive(Debug, Error)]
pub enum MatcherError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("pair has no label")]
    Unlabelled,
    #[error("dataset contains a single class")]
    SingleClass,
    #[error("a class has only {0} sample(s); at least 2 are needed")]
    TooFewSamples(usize),
    #[error("model has no trained sub-models")]
    Untrained,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("malformed model: {0}")]
    Format(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u64),
}

/// What turns features into a decision.
#[derive(Debug, Clone, PartialEq)]
pub enum Decider {
    Model(MatchModel),
    Wsa { params: WsaParams, backend: FeatureBackend },
}

impl Decider {
    pub fn backend(&self) -> FeatureBackend {
        match self {
            Decider::Model(m) => m.backend,
            Decider::Wsa { backend, .. } => *backend,
        }
    }

    /// Score (model probability or weighted sum) and decision.
    pub fn decide(&self, pair: &FeaturePair) -> Result<(f64, Label), MatcherError> {
        match self {
            Decider::Model(m) => predict_match(m, pair),
            Decider::Wsa { params, .. } => Ok((params.score(pair), wsa_classify(pair, params))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecidedPair {
    /// Features with `label` set to the decision.
    pub pair: FeaturePair,
    pub score: f64,
}

impl DecidedPair {
    pub fn is_match(&self) -> bool {
        self.pair.label == Some(Label::Match)
    }
}

/// Decides already featurized pairs, in input order.
pub fn decide_pairs(pairs: Vec<FeaturePair>, decider: &Decider) -> Result<Vec<DecidedPair>, MatcherError> {
    pairs
        .into_par_iter()
        .map(|mut pair| {
            let (score, label) = decider.decide(&pair)?;
            pair.label = Some(label);
            Ok(DecidedPair { pair, score })
        })
        .collect()
}

/// Generates every cross-source candidate pair within `radius_m`,
/// featurizes it in its centroid's neighbourhood, and decides it. Output is
/// sorted by `(id_a, id_b)` and contains each pair once.
pub fn match_all(pois: &[StandardPoi], decider: &Decider, radius_m: f64) -> Result<Vec<DecidedPair>, MatcherError> {
    let featurizer = PairFeaturizer::new(pois, decider.backend(), radius_m);
    decide_pairs(featurizer.all_pairs(), decider)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GeoPoint;
    use crate::normalization::parse_address;
    use chrono::NaiveDate;

    fn poi(src: &str, lat: f64, lon: f64) -> StandardPoi {
        StandardPoi::new(src, "1", GeoPoint { lat, lon }, NaiveDate::default())
            .with_name("Kopi Corner")
            .with_address(parse_address("12 Simei Street"))
    }

    #[test]
    fn twin_pois_match_and_distant_do_not_pair() {
        let d5 = 5.0 / 111_320.0;
        let d150 = 150.0 / 111_320.0;
        let wsa = Decider::Wsa { params: WsaParams::new(0.8, 0.2, 0.85).unwrap(), backend: FeatureBackend::String };
        let near = vec![poi("osm", 1.3, 103.8), poi("here", 1.3 + d5, 103.8)];
        let out = match_all(&near, &wsa, 100.0).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].is_match());
        let far = vec![poi("osm", 1.3, 103.8), poi("here", 1.3 + d150, 103.8)];
        assert!(match_all(&far, &wsa, 100.0).unwrap().is_empty());
        assert!(match_all(&[], &wsa, 100.0).unwrap().is_empty());
    }
}
