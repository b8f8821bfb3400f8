//! TF-IDF weighting and cosine similarity over small document collections.
//!
//! `tf(t, d) = count(t in d) / |d|`, `idf(t) = ln(|D| / df(t))`, no smoothing.

use std::collections::HashMap;

use thiserror::Error;

use super::text::tokenize;
use crate::model::AddressComponents;
use crate::normalization::canonical_address_string;

#[derive(Debug, Error, PartialEq)]
pub enum TfIdfError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    pub vocabulary: HashMap<String, usize>,
    pub idf: Vec<f64>,
    pub doc_count: usize,
}

/// Sparse vector sorted by term index.
pub type SparseVector = Vec<(usize, f64)>;

pub fn fit_tfidf<S: AsRef<str>>(corpus: &[S]) -> Result<TfIdfModel, TfIdfError> {
    let mut vocabulary: HashMap<String, usize> = HashMap::new();
    let mut df: Vec<usize> = Vec::new();
    for doc in corpus {
        let mut tokens = tokenize(doc.as_ref());
        tokens.sort();
        tokens.dedup();
        for t in tokens {
            let next = vocabulary.len();
            let idx = *vocabulary.entry(t).or_insert(next);
            if idx == df.len() {
                df.push(0);
            }
            df[idx] += 1;
        }
    }
    if vocabulary.is_empty() {
        return Err(TfIdfError::EmptyCorpus);
    }
    let n = corpus.len() as f64;
    let idf = df.iter().map(|&d| (n / d as f64).ln()).collect();
    Ok(TfIdfModel { vocabulary, idf, doc_count: corpus.len() })
}

impl TfIdfModel {
    pub fn idf_of(&self, token: &str) -> Option<f64> {
        self.vocabulary.get(token).map(|&i| self.idf[i])
    }

    /// TF-IDF vector of a document. Out-of-vocabulary tokens count towards
    /// `|d|` but carry no weight.
    pub fn transform(&self, text: &str) -> SparseVector {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Vec::new();
        }
        let len = tokens.len() as f64;
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for t in &tokens {
            if let Some(&i) = self.vocabulary.get(t) {
                *counts.entry(i).or_default() += 1;
            }
        }
        let mut v: SparseVector = counts
            .into_iter()
            .map(|(i, c)| (i, c as f64 / len * self.idf[i]))
            .filter(|(_, w)| *w != 0.0)
            .collect();
        v.sort_by_key(|x| x.0);
        v
    }

    /// Cosine of the two documents' TF-IDF vectors, clamped to `[0, 1]`;
    /// zero when either vector is zero.
    pub fn text_similarity(&self, a: &str, b: &str) -> f64 {
        sparse_cosine(&self.transform(a), &self.transform(b))
    }
}

pub fn sparse_cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let norm = |v: &SparseVector| v.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

pub fn address_similarity(model: &TfIdfModel, a: &AddressComponents, b: &AddressComponents) -> f64 {
    model.text_similarity(&canonical_address_string(a), &canonical_address_string(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const D: [&str; 3] = ["520 tampines central", "520 tampines ave", "10 simei street"];

    #[test]
    fn tampines_weights() {
        let m = fit_tfidf(&D).unwrap();
        assert_eq!(m.doc_count, 3);
        let idf = m.idf_of("tampines").unwrap();
        assert!((idf - (1.5f64).ln()).abs() < 1e-12);
        assert!((idf - 0.4055).abs() < 1e-4);
        let v = m.transform(D[0]);
        let w = v.iter().find(|(i, _)| *i == m.vocabulary["tampines"]).unwrap().1;
        assert!((w - 0.1352).abs() < 1e-4);
        assert!((w - (1.5f64).ln() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ubiquitous_token_has_zero_idf() {
        let m = fit_tfidf(&["520 a", "520 b", "520 c"]).unwrap();
        assert_eq!(m.idf_of("520"), Some(0.0));
    }

    #[test]
    fn single_document_corpus_is_all_zero() {
        let m = fit_tfidf(&["10 simei street"]).unwrap();
        assert!(m.idf.iter().all(|&x| x == 0.0));
        assert!(m.transform("10 simei street").is_empty());
        assert_eq!(m.text_similarity("10 simei street", "10 simei street"), 0.0);
    }

    #[test]
    fn empty_corpus_errors() {
        assert_eq!(fit_tfidf(&["", " "]), Err(TfIdfError::EmptyCorpus));
        assert_eq!(fit_tfidf::<&str>(&[]), Err(TfIdfError::EmptyCorpus));
    }

    #[test]
    fn identical_and_disjoint() {
        let m = fit_tfidf(&D).unwrap();
        assert!((m.text_similarity(D[0], D[0]) - 1.0).abs() < 1e-12);
        let shared_only_zero = fit_tfidf(&["520 a", "520 b"]).unwrap();
        assert_eq!(shared_only_zero.text_similarity("520", "520"), 0.0);
    }

    #[test]
    fn address_components_are_rendered() {
        use crate::normalization::parse_address;
        let m = fit_tfidf(&D).unwrap();
        let a = parse_address("520 Tampines Central");
        let b = parse_address("Blk 520 Tampines Central");
        assert!((address_similarity(&m, &a, &b) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn idf_non_increasing_in_df(docs in proptest::collection::vec("[abcde ]{0,12}", 1..8)) {
            if let Ok(m) = fit_tfidf(&docs) {
                let df = |t: &str| docs.iter().filter(|d| tokenize(d).iter().any(|x| x == t)).count();
                for (a, &ia) in &m.vocabulary {
                    for (b, &ib) in &m.vocabulary {
                        if df(a) < df(b) {
                            prop_assert!(m.idf[ia] >= m.idf[ib]);
                        }
                    }
                    prop_assert!(m.idf[ia] >= 0.0);
                }
            }
        }

        #[test]
        fn similarity_symmetric_in_unit_range(docs in proptest::collection::vec("[abcde ]{1,12}", 2..6), i in 0usize..6, j in 0usize..6) {
            if let Ok(m) = fit_tfidf(&docs) {
                let a = &docs[i % docs.len()];
                let b = &docs[j % docs.len()];
                let s = m.text_similarity(a, b);
                prop_assert_eq!(s, m.text_similarity(b, a));
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}
