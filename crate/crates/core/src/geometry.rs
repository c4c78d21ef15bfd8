//! Cosine similarity, embedding diversity and within/between-sense
//! similarity.
//!
//! All math runs in `f64`. Pairs are visited in row-major order `(i, j)`,
//! `i < j`; parallel work is split by row and the per-row partial sums are
//! folded in row order, so every value here is reproducible bit for bit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::embedstore::{EmbeddingSet, LabeledEmbeddingSet};
use crate::stats::{mean_ci, MeanCi};
use crate::{par, Error, Result};

pub const DEFAULT_CI_LEVEL: f64 = 0.99;

fn dot_f32(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum()
}

/// `dot(u, v) / (|u| |v|)` clamped to `[-1, 1]`. The denominator is taken
/// as `sqrt(|u|^2 |v|^2)`, which is exact for `u == v`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("dimensions {} and {} differ", u.len(), v.len())));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>();
    let nv = v.iter().map(|a| a * a).sum::<f64>();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Domain("cosine similarity of a zero-norm vector".into()));
    }
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

/// Squared row norms of an embedding set, failing on the first zero-norm row.
pub(crate) fn row_norms(set: &EmbeddingSet) -> Result<Vec<f64>> {
    set.rows()
        .enumerate()
        .map(|(i, r)| {
            let n = dot_f32(r, r);
            if n == 0.0 {
                Err(Error::Domain(format!(
                    "row {i} (context {:?}) has zero norm",
                    set.context_ids()[i]
                )))
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// Cosine similarity of rows `i` and `j` given precomputed squared norms.
pub(crate) fn row_cosine(set: &EmbeddingSet, sq_norms: &[f64], i: usize, j: usize) -> f64 {
    (dot_f32(set.row(i), set.row(j)) / (sq_norms[i] * sq_norms[j]).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityRecord {
    pub word: String,
    pub context_count: usize,
    pub diversity: f64,
}

/// Mean cosine distance `1 - cos` over all unordered pairs of distinct rows.
pub fn embedding_diversity(set: &EmbeddingSet) -> Result<DiversityRecord> {
    let n = set.count();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "diversity of {:?} needs at least 2 contexts, got {n}",
            set.word()
        )));
    }
    let norms = row_norms(set)?;
    let partials = par::map_range(n, |i| {
        (i + 1..n).fold(0.0, |acc, j| acc + (1.0 - row_cosine(set, &norms, i, j)))
    });
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(DiversityRecord {
        word: set.word().to_string(),
        context_count: n,
        diversity: par::ordered_sum(&partials) / pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupStatus {
    Within,
    Between,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub word: String,
    pub i: usize,
    pub j: usize,
    pub group_status: GroupStatus,
    pub similarity: f64,
}

/// One record per unordered pair `(i, j)`, `i < j`, in row-major order.
pub fn pairwise_records(data: &LabeledEmbeddingSet) -> Result<Vec<PairRecord>> {
    let set = data.set();
    let labels = data.labels();
    let n = set.count();
    let norms = row_norms(set)?;
    let rows = par::map_range(n, |i| {
        (i + 1..n)
            .map(|j| PairRecord {
                word: set.word().to_string(),
                i,
                j,
                group_status: if labels[i] == labels[j] {
                    GroupStatus::Within
                } else {
                    GroupStatus::Between
                },
                similarity: row_cosine(set, &norms, i, j),
            })
            .collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSimilarityReport {
    pub word: String,
    pub within_mean: f64,
    pub between_mean: f64,
    pub within_pairs: usize,
    pub between_pairs: usize,
    /// Mean within-label similarity for every label with at least 2 rows.
    pub per_group_within: BTreeMap<String, f64>,
    pub ci_level: f64,
    pub within_ci: Interval,
    pub between_ci: Interval,
}

/// Normal-approximation interval over a pair population. Pairs sharing a
/// point are not independent; the interval ignores that. A single pair gets
/// a zero-width interval.
fn pair_ci(values: &[f64], level: f64) -> Result<(f64, Interval)> {
    if values.len() == 1 {
        return Ok((values[0], Interval { lo: values[0], hi: values[0] }));
    }
    let MeanCi { mean, lo, hi, .. } = mean_ci(values, level)?;
    Ok((mean, Interval { lo, hi }))
}

/// Aggregates pair records into within/between means and intervals.
pub fn summarize_pairs(
    word: &str,
    labels: &[String],
    records: &[PairRecord],
    ci_level: f64,
) -> Result<GroupSimilarityReport> {
    if !(ci_level > 0.0 && ci_level < 1.0) {
        return Err(Error::Precondition(format!("ci_level {ci_level} outside (0, 1)")));
    }
    let mut within = Vec::new();
    let mut between = Vec::new();
    let mut per_label: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in records {
        match r.group_status {
            GroupStatus::Within => {
                within.push(r.similarity);
                let e = per_label.entry(labels[r.i].as_str()).or_default();
                e.0 += r.similarity;
                e.1 += 1;
            }
            GroupStatus::Between => between.push(r.similarity),
        }
    }
    if between.is_empty() {
        return Err(Error::NoBetweenPairs);
    }
    if within.is_empty() {
        return Err(Error::NoWithinPairs);
    }
    let (within_mean, within_ci) = pair_ci(&within, ci_level)?;
    let (between_mean, between_ci) = pair_ci(&between, ci_level)?;
    Ok(GroupSimilarityReport {
        word: word.to_string(),
        within_mean,
        between_mean,
        within_pairs: within.len(),
        between_pairs: between.len(),
        per_group_within: per_label
            .into_iter()
            .map(|(l, (s, c))| (l.to_string(), s / c as f64))
            .collect(),
        ci_level,
        within_ci,
        between_ci,
    })
}

/// Mean cosine similarity of same-label pairs versus different-label pairs.
pub fn group_similarity(data: &LabeledEmbeddingSet, ci_level: f64) -> Result<GroupSimilarityReport> {
    if data.label_alphabet().len() < 2 {
        return Err(Error::NoBetweenPairs);
    }
    let records = pairwise_records(data)?;
    summarize_pairs(data.set().word(), data.labels(), &records, ci_level)
}
