//! Hyperparameter selection by stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::{fit_sub_model, Algorithm, Hyperparams};
use super::features::FeaturePair;
use super::sampling::{derive_seed, rng_for};
use super::tree::Features;
use super::MatcherError;

pub fn default_grid(algorithm: Algorithm) -> Vec<Hyperparams> {
    let rates: &[Option<f64>] = match algorithm {
        Algorithm::Bagging => &[None],
        Algorithm::GradientBoosting => &[Some(0.1), Some(0.3)],
    };
    let mut grid = Vec::new();
    for n_trees in [25, 50, 100] {
        for max_depth in [1, 2, 3] {
            for &lr in rates {
                grid.push(Hyperparams::new(n_trees, max_depth, lr));
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: Hyperparams,
    pub best_score: f64,
    /// Mean balanced accuracy of every grid point, in grid order.
    pub scores: Vec<(Hyperparams, f64)>,
}

/// Fold number of every sample: each class is shuffled and dealt round-robin.
pub fn stratified_folds(y: &[f64], folds: usize, seed: u64) -> Vec<usize> {
    let mut out = vec![0; y.len()];
    for (stream, class) in [(0u64, 1.0), (1, 0.0)] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng_for(seed, stream));
        for (k, i) in idx.into_iter().enumerate() {
            out[i] = k % folds;
        }
    }
    out
}

/// Mean per-class recall over the classes present in `y`.
pub fn balanced_accuracy_of(y: &[f64], predicted: &[bool]) -> f64 {
    let mut hit = [0usize; 2];
    let mut total = [0usize; 2];
    for (&yi, &pi) in y.iter().zip(predicted) {
        let c = usize::from(yi == 1.0);
        total[c] += 1;
        if pi == (c == 1) {
            hit[c] += 1;
        }
    }
    let recalls: Vec<f64> = (0..2).filter(|&c| total[c] > 0).map(|c| hit[c] as f64 / total[c] as f64).collect();
    if recalls.is_empty() {
        0.0
    } else {
        recalls.iter().sum::<f64>() / recalls.len() as f64
    }
}

fn lr_key(hp: &Hyperparams) -> u64 {
    hp.learning_rate.map_or(0, f64::to_bits)
}

/// Scores every grid point by mean held-out balanced accuracy over `folds`
/// folds of each dataset, and returns the best. Ties go to fewer trees,
/// then shallower trees, then the smaller learning rate.
///
/// Grid points differing only in tree count share one fit: the largest
/// ensemble is trained and evaluated on its prefixes.
pub fn cross_validate_tune(
    datasets: &[Vec<FeaturePair>],
    algorithm: Algorithm,
    grid: &[Hyperparams],
    folds: usize,
    seed: u64,
) -> Result<TuneResult, MatcherError> {
    if grid.is_empty() {
        return Err(MatcherError::EmptyGrid);
    }
    if folds < 2 {
        return Err(MatcherError::InvalidParams(format!("need at least 2 folds, got {folds}")));
    }
    for hp in grid {
        hp.validate(algorithm)?;
    }
    if datasets.is_empty() {
        return Err(MatcherError::InvalidParams("no datasets to tune on".into()));
    }
    let data: Vec<(Vec<Features>, Vec<f64>)> = datasets
        .iter()
        .map(|d| {
            let x = d.iter().map(FeaturePair::features).collect();
            let y = d
                .iter()
                .map(|p| p.label.map(|l| if l.is_match() { 1.0 } else { 0.0 }).ok_or(MatcherError::Unlabelled))
                .collect::<Result<Vec<f64>, _>>()?;
            Ok((x, y))
        })
        .collect::<Result<_, MatcherError>>()?;

    // Group grid points by everything except the tree count.
    let mut groups: Vec<((usize, u64), Vec<usize>)> = Vec::new();
    for (gi, hp) in grid.iter().enumerate() {
        let key = (hp.max_depth, lr_key(hp));
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(gi),
            None => groups.push((key, vec![gi])),
        }
    }

    let jobs: Vec<(usize, usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..data.len()).flat_map(move |d| (0..folds).map(move |f| (g, d, f))))
        .collect();
    let fold_of: Vec<Vec<usize>> =
        data.iter().enumerate().map(|(d, (_, y))| stratified_folds(y, folds, derive_seed(seed, d as u64))).collect();

    let results: Vec<Vec<(usize, f64)>> = jobs
        .par_iter()
        .map(|&(g, d, f)| -> Result<Vec<(usize, f64)>, MatcherError> {
            let (x, y) = &data[d];
            let members = &groups[g].1;
            let max_trees = members.iter().map(|&gi| grid[gi].n_trees).max().unwrap_or(1);
            let mut hp = grid[members[0]];
            hp.n_trees = max_trees;
            let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for i in 0..x.len() {
                if fold_of[d][i] == f {
                    vx.push(x[i]);
                    vy.push(y[i]);
                } else {
                    tx.push(x[i]);
                    ty.push(y[i]);
                }
            }
            if vx.is_empty() {
                return Ok(Vec::new());
            }
            let fit_seed = derive_seed(seed, 0x5EED_0000 + (d * folds + f) as u64);
            let model = fit_sub_model(&tx, &ty, algorithm, &hp, fit_seed)?;
            Ok(members
                .iter()
                .map(|&gi| {
                    let n = grid[gi].n_trees;
                    let pred: Vec<bool> = vx.iter().map(|xi| model.predict_proba_prefix(xi, n) >= 0.5).collect();
                    (gi, balanced_accuracy_of(&vy, &pred))
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;

    let mut sum = vec![0.0; grid.len()];
    let mut count = vec![0usize; grid.len()];
    for (gi, score) in results.into_iter().flatten() {
        sum[gi] += score;
        count[gi] += 1;
    }
    let scores: Vec<(Hyperparams, f64)> =
        grid.iter().enumerate().map(|(gi, hp)| (*hp, if count[gi] > 0 { sum[gi] / count[gi] as f64 } else { 0.0 })).collect();

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| {
        let (ha, hb) = (&grid[a], &grid[b]);
        ha.n_trees
            .cmp(&hb.n_trees)
            .then(ha.max_depth.cmp(&hb.max_depth))
            .then(ha.learning_rate.unwrap_or(0.0).total_cmp(&hb.learning_rate.unwrap_or(0.0)))
    });
    let mut best = order[0];
    for &gi in &order[1..] {
        if scores[gi].1 > scores[best].1 + 1e-12 {
            best = gi;
        }
    }
    Ok(TuneResult { best: grid[best], best_score: scores[best].1, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::ensemble::tests::{separable, xor};

    #[test]
    fn single_point_grid() {
        let hp = Hyperparams::new(5, 1, None);
        let r = cross_validate_tune(&[xor()], Algorithm::Bagging, &[hp], 5, 0).unwrap();
        assert_eq!(r.best, hp);
    }

    #[test]
    fn xor_prefers_depth_two() {
        for algo in [Algorithm::Bagging, Algorithm::GradientBoosting] {
            let grid = [Hyperparams::new(25, 1, Some(0.3)), Hyperparams::new(25, 2, Some(0.3))];
            let r = cross_validate_tune(&[xor(), xor()], algo, &grid, 5, 1).unwrap();
            assert_eq!(r.best.max_depth, 2, "{algo}: {:?}", r.scores);
        }
    }

    #[test]
    fn ties_prefer_smaller_models() {
        let grid = [Hyperparams::new(50, 3, None), Hyperparams::new(25, 3, None), Hyperparams::new(25, 1, None)];
        let r = cross_validate_tune(&[separable()], Algorithm::Bagging, &grid, 5, 2).unwrap();
        assert!(r.scores.iter().all(|s| s.1 == 1.0));
        assert_eq!(r.best, Hyperparams::new(25, 1, None));
    }

    #[test]
    fn folds_are_stratified_and_deterministic() {
        let y: Vec<f64> = (0..23).map(|i| if i < 8 { 1.0 } else { 0.0 }).collect();
        let a = stratified_folds(&y, 5, 3);
        assert_eq!(a, stratified_folds(&y, 5, 3));
        for f in 0..5 {
            let pos = (0..23).filter(|&i| a[i] == f && y[i] == 1.0).count();
            assert!((1..=2).contains(&pos));
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(cross_validate_tune(&[xor()], Algorithm::Bagging, &[], 5, 0), Err(MatcherError::EmptyGrid)));
    }

    #[test]
    fn default_grid_shapes() {
        assert_eq!(default_grid(Algorithm::Bagging).len(), 9);
        assert_eq!(default_grid(Algorithm::GradientBoosting).len(), 18);
    }

    #[test]
    fn balanced_accuracy_examples() {
        assert_eq!(balanced_accuracy_of(&[1.0, 0.0, 0.0, 0.0], &[false, false, false, false]), 0.5);
        assert_eq!(balanced_accuracy_of(&[1.0, 0.0], &[true, false]), 1.0);
    }
}
