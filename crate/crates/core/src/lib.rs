//! Point-of-interest conflation engine.

pub mod evaluation;
pub mod matcher;
pub mod model;
pub mod normalization;
pub mod persistence;
pub mod pipeline;
pub mod procurement;
pub mod similarity;
pub mod taxonomy;
pub mod unification;
pub mod verification;
