//! Stratified splitting and hybrid over/under-sampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeaturePair;
use super::MatcherError;

/// Mixes a base seed with a stream number (splitmix64 finalizer) so that
/// parallel consumers get independent, reproducible generators.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSplit {
    pub train: Vec<FeaturePair>,
    pub test: Vec<FeaturePair>,
    pub ratio: f64,
}

/// Indices of matches and non-matches; errors on unlabelled pairs.
pub fn class_indices(pairs: &[FeaturePair]) -> Result<(Vec<usize>, Vec<usize>), MatcherError> {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (i, p) in pairs.iter().enumerate() {
        match p.label {
            Some(l) if l.is_match() => pos.push(i),
            Some(_) => neg.push(i),
            None => return Err(MatcherError::Unlabelled),
        }
    }
    Ok((pos, neg))
}

/// Splits each class independently: `round(ratio * n_class)` samples of each
/// class go to train. Both halves keep input order.
pub fn stratified_split(pairs: &[FeaturePair], ratio: f64, seed: u64) -> Result<LabeledSplit, MatcherError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(MatcherError::InvalidParams(format!("split ratio {ratio} outside (0, 1)")));
    }
    let (pos, neg) = class_indices(pairs)?;
    let mut in_train = vec![false; pairs.len()];
    for (stream, mut class) in [(0u64, pos), (1, neg)] {
        if class.len() < 2 {
            return Err(MatcherError::TooFewSamples(class.len()));
        }
        class.shuffle(&mut rng_for(seed, stream));
        let take = ((ratio * class.len() as f64).round() as usize).clamp(1, class.len() - 1);
        for &i in &class[..take] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (p, t) in pairs.iter().zip(in_train) {
        if t {
            train.push(p.clone());
        } else {
            test.push(p.clone());
        }
    }
    Ok(LabeledSplit { train, test, ratio })
}

/// Per-class size of a rebalanced dataset: the geometric mean of the class
/// counts, rounded.
pub fn balanced_class_size(n_min: usize, n_maj: usize) -> usize {
    ((n_min as f64 * n_maj as f64).sqrt().round() as usize).max(1)
}

/// Draws `k` balanced datasets: the minority class is sampled with
/// replacement and the majority class without, each to `M` samples.
pub fn rebalance(train: &[FeaturePair], k: usize, seed: u64) -> Result<Vec<Vec<FeaturePair>>, MatcherError> {
    if k == 0 {
        return Err(MatcherError::InvalidParams("k must be at least 1".into()));
    }
    let (pos, neg) = class_indices(train)?;
    if pos.is_empty() || neg.is_empty() {
        return Err(MatcherError::SingleClass);
    }
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let m = balanced_class_size(minority.len(), majority.len());
    Ok((0..k as u64)
        .map(|d| {
            let mut rng = rng_for(seed, d);
            let mut out = Vec::with_capacity(2 * m);
            out.extend((0..m).map(|_| train[minority[rng.gen_range(0..minority.len())]].clone()));
            out.extend(majority.choose_multiple(&mut rng, m).map(|&i| train[i].clone()));
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::features::Label;
    use std::collections::HashMap;

    fn labelled(n_pos: usize, n_neg: usize) -> Vec<FeaturePair> {
        let mut v = Vec::new();
        for i in 0..n_pos {
            v.push(FeaturePair::new(&format!("p{i:05}"), "z", 0.9, 0.9, Some(Label::Match)));
        }
        for i in 0..n_neg {
            v.push(FeaturePair::new(&format!("n{i:05}"), "z", 0.1, 0.1, Some(Label::NonMatch)));
        }
        v
    }

    fn count(v: &[FeaturePair]) -> (usize, usize) {
        let p = v.iter().filter(|x| x.label == Some(Label::Match)).count();
        (p, v.len() - p)
    }

    #[test]
    fn split_counts() {
        let data = labelled(200, 8498);
        let s = stratified_split(&data, 0.75, 7).unwrap();
        let (p, n) = count(&s.train);
        assert_eq!(p, 150);
        assert!(n == 6373 || n == 6374);
        assert_eq!(s.train.len() + s.test.len(), data.len());
        let keys: std::collections::HashSet<_> = s.train.iter().map(|x| x.key()).collect();
        assert!(s.test.iter().all(|x| !keys.contains(&x.key())));
        assert_eq!(stratified_split(&data, 0.75, 7).unwrap(), s);
        let small = stratified_split(&labelled(4, 4), 0.5, 1).unwrap();
        assert_eq!(count(&small.train), (2, 2));
        assert!(matches!(stratified_split(&labelled(1, 10), 0.75, 1), Err(MatcherError::TooFewSamples(1))));
    }

    #[test]
    fn class_size_oracle() {
        assert_eq!(balanced_class_size(150, 6373), (955_950f64).sqrt().round() as usize);
        assert_eq!(balanced_class_size(150, 6373), 978);
        assert_eq!(balanced_class_size(100, 100), 100);
    }

    #[test]
    fn rebalance_properties() {
        let data = labelled(150, 6373);
        let sets = rebalance(&data, 3, 11).unwrap();
        assert_eq!(sets.len(), 3);
        for s in &sets {
            assert_eq!(count(s), (978, 978));
            let mut seen: HashMap<(&str, &str), usize> = HashMap::new();
            for p in s.iter().filter(|p| p.label == Some(Label::NonMatch)) {
                *seen.entry(p.key()).or_default() += 1;
            }
            assert!(seen.values().all(|&c| c == 1), "majority drawn without replacement");
            let originals: std::collections::HashSet<_> = data.iter().map(|p| p.key()).collect();
            assert!(s.iter().all(|p| originals.contains(&p.key())));
        }
        assert_ne!(sets[0], sets[1]);
        assert_eq!(rebalance(&data, 3, 11).unwrap(), sets);
        let even = rebalance(&labelled(100, 100), 1, 0).unwrap();
        assert_eq!(count(&even[0]), (100, 100));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
