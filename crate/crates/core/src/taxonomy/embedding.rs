use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing header")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Word vectors in the plain-text `count dim` + `token v1 .. vdim` layout,
/// optionally with a character n-gram table for out-of-vocabulary words.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
    pub subword_ngrams: Option<HashMap<String, Vec<f64>>>,
}

pub const NGRAM_MIN: usize = 3;
pub const NGRAM_MAX: usize = 6;

fn read_table<R: BufRead>(reader: R) -> Result<(usize, HashMap<String, Vec<f64>>), EmbeddingError> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            None => return Err(EmbeddingError::MissingHeader),
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
        }
    };
    let nums: Vec<usize> = header.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    let (count, dim) = match nums[..] {
        [c, d] if d > 0 && header.split_whitespace().count() == 2 => (c, d),
        _ => return Err(EmbeddingError::MissingHeader),
    };
    let mut vectors = HashMap::with_capacity(count);
    for (i, line) in lines {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-empty line has a token").to_lowercase();
        let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let values = values.map_err(|e| EmbeddingError::Malformed { line: line_no, message: e.to_string() })?;
        if values.len() != dim {
            return Err(EmbeddingError::Malformed {
                line: line_no,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        vectors.insert(token, values);
    }
    Ok((dim, vectors))
}

impl EmbeddingStore {
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let (dim, vectors) = read_table(reader)?;
        Ok(Self { dim, vectors, subword_ngrams: None })
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        Self::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Attaches an n-gram table in the same text layout. Keys are the
    /// n-grams of `<word>`, boundary markers included.
    pub fn with_subwords<R: BufRead>(mut self, reader: R) -> Result<Self, EmbeddingError> {
        let (dim, table) = read_table(reader)?;
        if dim != self.dim {
            return Err(EmbeddingError::DimensionMismatch { left: self.dim, right: dim });
        }
        self.subword_ngrams = Some(table);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Stored vector, or the mean of the word's known character n-grams.
    pub fn word_vector(&self, word: &str) -> Option<Vec<f64>> {
        let word = word.to_lowercase();
        if let Some(v) = self.vectors.get(&word) {
            return Some(v.clone());
        }
        let table = self.subword_ngrams.as_ref()?;
        let found: Vec<&Vec<f64>> = char_ngrams(&word).iter().filter_map(|g| table.get(g)).collect();
        mean(&found, self.dim)
    }
}

/// Character n-grams (lengths 3 to 6) of `<word>`.
pub fn char_ngrams(word: &str) -> Vec<String> {
    let chars: Vec<char> = format!("<{word}>").chars().collect();
    let mut out = Vec::new();
    for n in NGRAM_MIN..=NGRAM_MAX {
        if n > chars.len() {
            break;
        }
        for w in chars.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}

pub(crate) fn mean(vectors: &[&Vec<f64>], dim: usize) -> Option<Vec<f64>> {
    if vectors.is_empty() {
        return None;
    }
    let mut acc = vec![0.0; dim];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Some(acc)
}
