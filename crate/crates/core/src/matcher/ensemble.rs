//! Bagged decision trees and gradient-boosted regression trees over the two
//! similarity features, plus the averaged multi-dataset model.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{FeatureBackend, FeaturePair, Label};
use super::sampling::{derive_seed, rebalance, rng_for};
use super::tree::{Criterion, Features, Presorted, Tree, TreeBuilder};
use super::tuning::{cross_validate_tune, default_grid};
use super::MatcherError;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_DECISION_THRESHOLD: f64 = 0.5;
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Bagging,
    GradientBoosting,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Bagging => "bagging",
            Algorithm::GradientBoosting => "gradient_boosting",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "bagging" => Ok(Algorithm::Bagging),
            "gb" | "gradient_boosting" | "boosting" => Ok(Algorithm::GradientBoosting),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Shrinkage per boosting round; unused by bagging.
    pub learning_rate: Option<f64>,
}

impl Hyperparams {
    pub fn new(n_trees: usize, max_depth: usize, learning_rate: Option<f64>) -> Self {
        Self { n_trees, max_depth, learning_rate }
    }

    pub fn validate(&self, algorithm: Algorithm) -> Result<(), MatcherError> {
        if self.n_trees == 0 {
            return Err(MatcherError::InvalidParams("n_trees must be at least 1".into()));
        }
        if algorithm == Algorithm::GradientBoosting {
            let lr = self.learning_rate.unwrap_or(DEFAULT_LEARNING_RATE);
            if !(lr > 0.0 && lr <= 1.0) {
                return Err(MatcherError::InvalidParams(format!("learning_rate {lr} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// One ensemble trained on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubModel {
    /// Probability = fraction of trees voting "match".
    Bagging { trees: Vec<Tree> },
    /// Probability = sigmoid(f0 + learning_rate * sum of tree outputs).
    GradientBoosting { f0: f64, learning_rate: f64, trees: Vec<Tree> },
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl SubModel {
    pub fn n_trees(&self) -> usize {
        match self {
            SubModel::Bagging { trees } | SubModel::GradientBoosting { trees, .. } => trees.len(),
        }
    }

    pub fn predict_proba(&self, x: &Features) -> f64 {
        self.predict_proba_prefix(x, usize::MAX)
    }

    /// Prediction using only the first `n` trees; identical to a model
    /// trained with `n` trees under the same seed.
    pub fn predict_proba_prefix(&self, x: &Features, n: usize) -> f64 {
        match self {
            SubModel::Bagging { trees } => {
                let used = &trees[..n.min(trees.len())];
                if used.is_empty() {
                    return 0.5;
                }
                let votes = used.iter().filter(|t| t.predict(x) >= 0.5).count();
                votes as f64 / used.len() as f64
            }
            SubModel::GradientBoosting { f0, learning_rate, trees } => {
                let f = trees.iter().take(n).fold(*f0, |acc, t| acc + learning_rate * t.predict(x));
                sigmoid(f)
            }
        }
    }
}

fn to_xy(dataset: &[FeaturePair]) -> Result<(Vec<Features>, Vec<f64>), MatcherError> {
    let mut x = Vec::with_capacity(dataset.len());
    let mut y = Vec::with_capacity(dataset.len());
    for p in dataset {
        let label = p.label.ok_or(MatcherError::Unlabelled)?;
        x.push(p.features());
        y.push(if label.is_match() { 1.0 } else { 0.0 });
    }
    if !y.contains(&1.0) || !y.contains(&0.0) {
        return Err(MatcherError::SingleClass);
    }
    Ok((x, y))
}

/// Fits one sub-model on `x`/`y` (0/1 targets).
pub fn fit_sub_model(
    x: &[Features],
    y: &[f64],
    algorithm: Algorithm,
    hp: &Hyperparams,
    seed: u64,
) -> Result<SubModel, MatcherError> {
    hp.validate(algorithm)?;
    let n = x.len();
    let pos = y.iter().filter(|&&v| v == 1.0).count();
    if pos == 0 || pos == n {
        return Err(MatcherError::SingleClass);
    }
    let presorted = Presorted::new(x);
    match algorithm {
        Algorithm::Bagging => {
            let trees = (0..hp.n_trees as u64)
                .map(|t| {
                    let mut rng = rng_for(seed, t);
                    let mut w = vec![0.0; n];
                    for _ in 0..n {
                        w[rng.gen_range(0..n)] += 1.0;
                    }
                    TreeBuilder::fit(x, y, &w, &presorted, Criterion::Gini, hp.max_depth)
                })
                .collect();
            Ok(SubModel::Bagging { trees })
        }
        Algorithm::GradientBoosting => {
            let (model, _) = fit_boosting(x, y, hp, &presorted);
            Ok(model)
        }
    }
}

/// Gradient boosting under logistic loss. Returns the model and the mean
/// training log-loss after each round (index 0 = the constant model).
pub fn fit_boosting(x: &[Features], y: &[f64], hp: &Hyperparams, presorted: &Presorted) -> (SubModel, Vec<f64>) {
    let n = x.len();
    let lr = hp.learning_rate.unwrap_or(DEFAULT_LEARNING_RATE);
    let p = y.iter().sum::<f64>() / n as f64;
    let f0 = (p / (1.0 - p)).ln();
    let w = vec![1.0; n];
    let mut f = vec![f0; n];
    let mut residual = vec![0.0; n];
    let mut losses = vec![log_loss(y, &f)];
    let mut trees = Vec::with_capacity(hp.n_trees);
    for _ in 0..hp.n_trees {
        for i in 0..n {
            residual[i] = y[i] - sigmoid(f[i]);
        }
        let tree = TreeBuilder::fit(x, &residual, &w, presorted, Criterion::SquaredError, hp.max_depth);
        for i in 0..n {
            f[i] += lr * tree.predict(&x[i]);
        }
        losses.push(log_loss(y, &f));
        trees.push(tree);
    }
    (SubModel::GradientBoosting { f0, learning_rate: lr, trees }, losses)
}

/// Mean logistic loss of raw scores `f` against 0/1 targets.
pub fn log_loss(y: &[f64], f: &[f64]) -> f64 {
    let total: f64 = y
        .iter()
        .zip(f)
        .map(|(&yi, &fi)| {
            // ln(1 + e^f) - y f, computed stably.
            let softplus = if fi > 0.0 { fi + (-fi).exp().ln_1p() } else { fi.exp().ln_1p() };
            softplus - yi * fi
        })
        .sum();
    total / y.len() as f64
}

/// Trains one sub-model on a labelled dataset.
pub fn train_ensemble(
    dataset: &[FeaturePair],
    algorithm: Algorithm,
    hp: &Hyperparams,
    seed: u64,
) -> Result<SubModel, MatcherError> {
    let (x, y) = to_xy(dataset)?;
    fit_sub_model(&x, &y, algorithm, hp, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchModel {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub backend: FeatureBackend,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub decision_threshold: f64,
    /// Whether the sub-models were trained on rebalanced datasets.
    pub rebalanced: bool,
    /// Samples per class in each rebalanced dataset.
    pub class_size: Option<usize>,
    /// Mean cross-validated balanced accuracy of the chosen hyperparameters.
    pub cv_score: Option<f64>,
    pub sub_models: Vec<SubModel>,
}

impl MatchModel {
    pub fn predict_proba(&self, x: &Features) -> Result<f64, MatcherError> {
        if self.sub_models.is_empty() {
            return Err(MatcherError::Untrained);
        }
        let sum: f64 = self.sub_models.iter().map(|m| m.predict_proba(x)).sum();
        Ok((sum / self.sub_models.len() as f64).clamp(0.0, 1.0))
    }

    pub fn to_json(&self) -> Result<String, MatcherError> {
        serde_json::to_string(self).map_err(|e| MatcherError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, MatcherError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| MatcherError::Format(e.to_string()))?;
        let version = value.get("format_version").and_then(|v| v.as_u64()).ok_or_else(|| {
            MatcherError::Format("missing format_version".into())
        })?;
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(MatcherError::UnsupportedVersion(version));
        }
        serde_json::from_value(value).map_err(|e| MatcherError::Format(e.to_string()))
    }
}

/// Mean sub-model probability; match iff it reaches the decision threshold.
pub fn predict_match(model: &MatchModel, pair: &FeaturePair) -> Result<(f64, Label), MatcherError> {
    let p = model.predict_proba(&pair.features())?;
    Ok((p, Label::from_bool(p >= model.decision_threshold)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub backend: FeatureBackend,
    pub k: usize,
    pub rebalance: bool,
    pub grid: Vec<Hyperparams>,
    pub folds: usize,
    pub seed: u64,
    pub decision_threshold: f64,
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            backend: FeatureBackend::Hybrid,
            k: DEFAULT_K,
            rebalance: true,
            grid: default_grid(algorithm),
            folds: 5,
            seed,
            decision_threshold: DEFAULT_DECISION_THRESHOLD,
        }
    }
}

/// Rebalances (optionally), tunes hyperparameters by cross-validation, and
/// trains one sub-model per dataset.
pub fn train_match_model(train: &[FeaturePair], cfg: &TrainConfig) -> Result<MatchModel, MatcherError> {
    let datasets = if cfg.rebalance {
        rebalance(train, cfg.k, derive_seed(cfg.seed, 0xB1))?
    } else {
        to_xy(train)?;
        vec![train.to_vec()]
    };
    let class_size = cfg.rebalance.then(|| datasets[0].len() / 2);
    let (hyperparams, cv_score) = if cfg.grid.len() == 1 {
        (cfg.grid[0], None)
    } else {
        let tuned = cross_validate_tune(&datasets, cfg.algorithm, &cfg.grid, cfg.folds, derive_seed(cfg.seed, 0xC2))?;
        (tuned.best, Some(tuned.best_score))
    };
    let sub_models = datasets
        .par_iter()
        .enumerate()
        .map(|(i, d)| train_ensemble(d, cfg.algorithm, &hyperparams, derive_seed(cfg.seed, 0x1000 + i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MatchModel {
        format_version: MODEL_FORMAT_VERSION,
        algorithm: cfg.algorithm,
        backend: cfg.backend,
        hyperparams,
        seed: cfg.seed,
        decision_threshold: cfg.decision_threshold,
        rebalanced: cfg.rebalance,
        class_size,
        cv_score,
        sub_models,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::matcher::tree::Node;

    pub(crate) fn separable() -> Vec<FeaturePair> {
        let mut v = Vec::new();
        for i in 0..30 {
            let t = i as f64 / 30.0;
            v.push(FeaturePair::new(&format!("m{i}"), "z", 0.9 + t / 10.0, t, Some(Label::Match)));
            v.push(FeaturePair::new(&format!("n{i}"), "z", 0.3 * t, t, Some(Label::NonMatch)));
        }
        v
    }

    /// Four clusters in an XOR layout; the 2x2 checkerboard needs two
    /// splits. Cluster sizes are unequal so the first greedy split has gain.
    pub(crate) fn xor() -> Vec<FeaturePair> {
        let mut v = Vec::new();
        for (n, a, m, count) in [(0.1, 0.1, false, 12), (0.9, 0.9, false, 8), (0.1, 0.9, true, 10), (0.9, 0.1, true, 10)] {
            for i in 0..count {
                let e = i as f64 / 100.0;
                v.push(FeaturePair::new(&format!("{n}{a}{i}"), "z", n + e, a + e, Some(Label::from_bool(m))));
            }
        }
        v
    }

    fn accuracy(m: &SubModel, data: &[FeaturePair]) -> f64 {
        let ok = data.iter().filter(|p| (m.predict_proba(&p.features()) >= 0.5) == p.label.unwrap().is_match()).count();
        ok as f64 / data.len() as f64
    }

    /// Best training accuracy of any single axis-aligned threshold rule.
    fn best_stump_accuracy(data: &[FeaturePair]) -> f64 {
        let mut best: f64 = 0.0;
        for f in 0..2 {
            for p in data {
                let t = p.features()[f];
                for flip in [false, true] {
                    let ok = data.iter().filter(|q| ((q.features()[f] > t) ^ flip) == q.label.unwrap().is_match()).count();
                    best = best.max(ok as f64 / data.len() as f64);
                }
            }
        }
        best
    }

    #[test]
    fn separable_training_accuracy_is_one() {
        let data = separable();
        for algo in [Algorithm::Bagging, Algorithm::GradientBoosting] {
            let m = train_ensemble(&data, algo, &Hyperparams::new(25, 2, Some(0.3)), 3).unwrap();
            assert_eq!(accuracy(&m, &data), 1.0, "{algo}");
        }
    }

    #[test]
    fn xor_depth_two_beats_stumps() {
        let data = xor();
        let oracle = best_stump_accuracy(&data);
        assert!(oracle <= 0.75);
        for algo in [Algorithm::Bagging, Algorithm::GradientBoosting] {
            let deep = train_ensemble(&data, algo, &Hyperparams::new(50, 2, Some(0.3)), 5).unwrap();
            assert!(accuracy(&deep, &data) > 0.9, "{algo}");
        }
        let stump = train_ensemble(&data, Algorithm::Bagging, &Hyperparams::new(1, 1, None), 5).unwrap();
        assert!(accuracy(&stump, &data) <= oracle + 1e-12);
    }

    #[test]
    fn boosting_starts_at_log_odds_and_loss_decreases() {
        let data = xor();
        let (x, y) = to_xy(&data).unwrap();
        for lr in [0.1, 0.3] {
            let (m, losses) = fit_boosting(&x, &y, &Hyperparams::new(40, 2, Some(lr)), &Presorted::new(&x));
            match m {
                SubModel::GradientBoosting { f0, .. } => assert_eq!(f0, 0.0),
                _ => unreachable!(),
            }
            assert!((losses[0] - std::f64::consts::LN_2).abs() < 1e-12);
            assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn single_class_rejected() {
        let data: Vec<_> = separable().into_iter().filter(|p| p.label == Some(Label::Match)).collect();
        assert!(matches!(train_ensemble(&data, Algorithm::Bagging, &Hyperparams::new(5, 1, None), 0), Err(MatcherError::SingleClass)));
    }

    fn constant(p: f64) -> SubModel {
        SubModel::GradientBoosting { f0: (p / (1.0 - p)).ln(), learning_rate: 0.1, trees: vec![] }
    }

    fn model_of(subs: Vec<SubModel>) -> MatchModel {
        MatchModel {
            format_version: MODEL_FORMAT_VERSION,
            algorithm: Algorithm::GradientBoosting,
            backend: FeatureBackend::Hybrid,
            hyperparams: Hyperparams::new(1, 1, Some(0.1)),
            seed: 0,
            decision_threshold: 0.5,
            rebalanced: true,
            class_size: None,
            cv_score: None,
            sub_models: subs,
        }
    }

    #[test]
    fn averaging_and_threshold() {
        let pair = FeaturePair::new("a", "b", 0.5, 0.5, None);
        let (p, l) = predict_match(&model_of(vec![constant(0.9), constant(0.7)]), &pair).unwrap();
        assert!((p - 0.8).abs() < 1e-12);
        assert_eq!(l, Label::Match);
        let zero = SubModel::Bagging { trees: vec![Tree { nodes: vec![Node::Leaf { value: 0.0 }] }] };
        assert_eq!(predict_match(&model_of(vec![zero]), &pair).unwrap(), (0.0, Label::NonMatch));
        let half = SubModel::Bagging {
            trees: vec![Tree { nodes: vec![Node::Leaf { value: 1.0 }] }, Tree { nodes: vec![Node::Leaf { value: 0.0 }] }],
        };
        assert_eq!(predict_match(&model_of(vec![half]), &pair).unwrap(), (0.5, Label::Match));
        assert!(matches!(predict_match(&model_of(vec![]), &pair), Err(MatcherError::Untrained)));
    }

    #[test]
    fn identical_sub_models_average_to_one() {
        let data = xor();
        let sub = train_ensemble(&data, Algorithm::GradientBoosting, &Hyperparams::new(10, 2, Some(0.3)), 1).unwrap();
        let single = model_of(vec![sub.clone()]);
        let many = model_of(vec![sub.clone(), sub.clone(), sub]);
        for p in &data {
            let a = single.predict_proba(&p.features()).unwrap();
            let b = many.predict_proba(&p.features()).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn prefix_equals_smaller_model() {
        let data = xor();
        for algo in [Algorithm::Bagging, Algorithm::GradientBoosting] {
            let big = train_ensemble(&data, algo, &Hyperparams::new(30, 2, Some(0.3)), 9).unwrap();
            let small = train_ensemble(&data, algo, &Hyperparams::new(10, 2, Some(0.3)), 9).unwrap();
            for p in &data {
                assert_eq!(big.predict_proba_prefix(&p.features(), 10), small.predict_proba(&p.features()));
            }
        }
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let mut cfg = TrainConfig::new(Algorithm::Bagging, 4);
        cfg.k = 2;
        cfg.grid = vec![Hyperparams::new(5, 2, None)];
        let m = train_match_model(&xor(), &cfg).unwrap();
        assert_eq!(m.sub_models.len(), 2);
        let text = m.to_json().unwrap();
        assert_eq!(MatchModel::from_json(&text).unwrap(), m);
        let bumped = text.replace("\"format_version\":1", "\"format_version\":99");
        assert!(matches!(MatchModel::from_json(&bumped), Err(MatcherError::UnsupportedVersion(99))));
        assert_eq!(train_match_model(&xor(), &cfg).unwrap(), m);
    }
}
