//! Candidate generation (radius filter) and lexical similarity features.

pub mod geo;
pub mod text;
pub mod tfidf;

pub use geo::{haversine_m, neighbors_within, SpatialGridIndex, EARTH_RADIUS_M};
pub use text::{levenshtein, name_similarity, token_sort};
pub use tfidf::{address_similarity, fit_tfidf, TfIdfError, TfIdfModel};

pub const DEFAULT_RADIUS_M: f64 = 100.0;
