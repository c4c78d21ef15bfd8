//! Quantify and visualize the geometry of word meanings in contextual-embedding
//! space.
//!
//! The crate is organized around the analysis pipeline:
//!
//! * [`corpus`] segments text and builds ~100-word context windows around
//!   target-word occurrences.
//! * [`embedstore`] reads and writes the `EMBV1` embedding container and the
//!   JSONL sense-label files, and joins the two.
//! * [`geometry`] computes cosine similarity, embedding diversity and
//!   within/between-sense similarity.
//! * [`stats`] provides OLS, one-way ANOVA, Welch's t and confidence intervals.
//! * [`tsne`] is an exact t-SNE for 2-D layouts.
//! * [`proxigram`] builds high-dimensional k-NN overlays and renders them as SVG.
//! * [`nbayes`] is a Gaussian naive Bayes sense classifier.
//! * [`labelkit`] merges labels, takes rater majorities and computes
//!   Krippendorff's alpha.
//! * [`synthkit`] generates synthetic sense-cluster geometry for experiments.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and sequentially otherwise. Every reduction combines
//! per-row partials in a fixed order, so results are bit-identical either way.

pub mod corpus;
pub mod embedstore;
mod error;
pub mod geometry;
pub mod labelkit;
mod matrix;
pub mod nbayes;
mod par;
pub mod proxigram;
pub mod rng;
pub mod stats;
pub mod synthkit;
pub mod tsne;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use par::is_parallel;
