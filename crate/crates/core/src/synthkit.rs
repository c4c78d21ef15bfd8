//! Synthetic sense geometry.
//!
//! A synthetic "word" is a set of Gaussian clusters, one per sense, around
//! unit-norm centres that sit at a fixed pairwise distance from one another.
//! One cluster emulates an unambiguous word; two far-apart clusters a
//! homonym; several close clusters a polyseme.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedstore::{EmbeddingSet, LabeledEmbeddingSet};
use crate::geometry::{embedding_diversity, DiversityRecord};
use crate::stats::{self, AnovaResult, WelchResult};
use crate::{par, rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub n_clusters: usize,
    pub points_per_cluster: usize,
    pub dim: usize,
    /// Euclidean distance between any two (unit-norm) cluster centres.
    pub centre_separation: f64,
    /// Standard deviation of the isotropic noise around each centre.
    pub within_spread: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ClusterSpec {
    /// Largest separation unit vectors can have when all pairs are
    /// equidistant: the edge of a regular simplex inscribed in the sphere.
    pub fn max_separation(n_clusters: usize) -> f64 {
        if n_clusters <= 1 {
            f64::INFINITY
        } else {
            (2.0 * n_clusters as f64 / (n_clusters as f64 - 1.0)).sqrt()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_clusters == 0 || self.points_per_cluster == 0 || self.dim == 0 {
            return fail(format!(
                "n_clusters, points_per_cluster and dim must be positive (got {}, {}, {})",
                self.n_clusters, self.points_per_cluster, self.dim
            ));
        }
        if self.dim < self.n_clusters {
            return fail(format!("dim {} cannot hold {} orthogonal centres", self.dim, self.n_clusters));
        }
        if !(self.centre_separation > 0.0) || !(self.within_spread > 0.0) {
            return fail("centre_separation and within_spread must be positive".into());
        }
        let max = Self::max_separation(self.n_clusters);
        if self.centre_separation > max {
            return fail(format!(
                "separation {} exceeds {max:.6}, the most {} unit centres allow",
                self.centre_separation, self.n_clusters
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_clusters * self.points_per_cluster
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn gaussian_vec(rng: &mut rng::SeededRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `k` random orthonormal vectors by Gram-Schmidt on Gaussian draws.
fn random_orthonormal(rng: &mut rng::SeededRng, k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v = gaussian_vec(rng, dim);
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Unit-norm centres with all pairwise distances equal to `separation`.
///
/// With orthonormal `q_1..q_k`, the centred vertices `q_i - mean(q)` form a
/// regular simplex orthogonal to `mean(q)`. Scaling them to unit length and
/// mixing with the normalized mean direction gives
/// `c_i = sqrt(1 - b^2) * base + b * u_i`, whose pairwise distance is
/// `b * sqrt(2k / (k - 1))`.
pub fn cluster_centres(spec: &ClusterSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = rng::seeded(rng::derive_seed(spec.seed, &[0]));
    let k = spec.n_clusters;
    let q = random_orthonormal(&mut rng, k, spec.dim);
    if k == 1 {
        return Ok(q);
    }
    let kf = k as f64;
    let mean: Vec<f64> = (0..spec.dim).map(|d| q.iter().map(|v| v[d]).sum::<f64>() / kf).collect();
    let mean_norm = dot(&mean, &mean).sqrt();
    let base: Vec<f64> = mean.iter().map(|x| x / mean_norm).collect();
    let vertex_norm = (1.0 - 1.0 / kf).sqrt();
    let b = spec.centre_separation / ClusterSpec::max_separation(k);
    let a = (1.0 - b * b).max(0.0).sqrt();
    Ok(q.iter()
        .map(|qi| {
            qi.iter()
                .zip(&mean)
                .zip(&base)
                .map(|((x, m), e)| a * e + b * (x - m) / vertex_norm)
                .collect()
        })
        .collect())
}

/// Labeled set named `synthetic`; see [`gen_word`].
pub fn gen_cluster_set(spec: &ClusterSpec) -> Result<LabeledEmbeddingSet> {
    gen_word(spec, "synthetic")
}

/// Draws `points_per_cluster` points around each centre, cluster by
/// cluster. Context ids are `word:index`; labels are `sense-<cluster>`.
pub fn gen_word(spec: &ClusterSpec, word: &str) -> Result<LabeledEmbeddingSet> {
    let centres = cluster_centres(spec)?;
    let mut rng = rng::seeded(rng::derive_seed(spec.seed, &[1]));
    let mut rows = Vec::with_capacity(spec.len());
    let mut labels = Vec::with_capacity(spec.len());
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..spec.points_per_cluster {
            let row = loop {
                let row: Vec<f64> = centre
                    .iter()
                    .map(|m| m + spec.within_spread * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                if row.iter().any(|&v| v as f32 != 0.0) {
                    break row;
                }
            };
            rows.push(row);
            labels.push(format!("sense-{c}"));
        }
    }
    let ids = (0..rows.len()).map(|i| format!("{word}:{i}")).collect();
    LabeledEmbeddingSet::new(EmbeddingSet::from_rows(word, ids, &rows)?, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    #[serde(flatten)]
    pub spec: ClusterSpec,
}

/// Profile config for [`simulate_ambiguity_experiment`]. Per-condition
/// `seed` fields are ignored; every word gets a seed derived from the
/// experiment seed, its condition index and its word index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub words_per_condition: usize,
    pub conditions: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedWord {
    pub condition: String,
    #[serde(flatten)]
    pub record: DiversityRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub a: String,
    pub b: String,
    pub welch: WelchResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub words: Vec<SimulatedWord>,
    pub summaries: Vec<ConditionSummary>,
    pub anova: AnovaResult,
    /// Welch test for every pair of conditions `(a, b)` with `a` listed first.
    pub contrasts: Vec<Contrast>,
}

impl ExperimentResult {
    pub fn contrast(&self, a: &str, b: &str) -> Option<&Contrast> {
        self.contrasts.iter().find(|c| c.a == a && c.b == b)
    }

    pub fn summary(&self, condition: &str) -> Option<&ConditionSummary> {
        self.summaries.iter().find(|s| s.condition == condition)
    }
}

pub fn word_seed(experiment_seed: u64, condition: usize, word: usize) -> u64 {
    rng::derive_seed(experiment_seed, &[condition as u64, word as u64])
}

pub fn simulate_ambiguity_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.conditions.len() < 2 {
        return Err(Error::Config("an experiment needs at least 2 conditions".into()));
    }
    if config.words_per_condition < 2 {
        return Err(Error::Config("words_per_condition must be at least 2".into()));
    }
    for (i, c) in config.conditions.iter().enumerate() {
        if config.conditions[..i].iter().any(|o| o.name == c.name) {
            return Err(Error::Config(format!("duplicate condition {:?}", c.name)));
        }
        if c.spec.len() < 2 {
            return Err(Error::Config(format!("condition {:?} generates fewer than 2 points", c.name)));
        }
        c.spec.validate()?;
    }
    let w = config.words_per_condition;
    let words = par::map_range(config.conditions.len() * w, |k| -> Result<SimulatedWord> {
        let (ci, wi) = (k / w, k % w);
        let cond = &config.conditions[ci];
        let spec = ClusterSpec {
            seed: word_seed(config.seed, ci, wi),
            ..cond.spec
        };
        let set = gen_word(&spec, &format!("{}-{wi:03}", cond.name))?;
        Ok(SimulatedWord {
            condition: cond.name.clone(),
            record: embedding_diversity(set.set())?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let groups: Vec<Vec<f64>> = words
        .chunks(w)
        .map(|c| c.iter().map(|s| s.record.diversity).collect())
        .collect();
    let summaries = config
        .conditions
        .iter()
        .zip(&groups)
        .map(|(c, g)| ConditionSummary {
            condition: c.name.clone(),
            n: g.len(),
            mean: stats::mean(g),
            sd: stats::sample_variance(g).sqrt(),
        })
        .collect();
    let mut contrasts = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            contrasts.push(Contrast {
                a: config.conditions[i].name.clone(),
                b: config.conditions[j].name.clone(),
                welch: stats::welch_t(&groups[i], &groups[j])?,
            });
        }
    }
    Ok(ExperimentResult {
        anova: stats::one_way_anova(&groups)?,
        words,
        summaries,
        contrasts,
    })
}

/// Reference profiles. Centre separations are multiples of the within-cluster
/// spread: 6x for homonym-like senses, 3x for polyseme-like ones.
pub mod profiles {
    use super::{ClusterSpec, Condition, ExperimentConfig};

    pub const SPREAD: f64 = 0.05;
    pub const DIM: usize = 16;

    pub fn unambiguous(points: usize, seed: u64) -> ClusterSpec {
        ClusterSpec {
            n_clusters: 1,
            points_per_cluster: points,
            dim: DIM,
            centre_separation: 6.0 * SPREAD,
            within_spread: SPREAD,
            seed,
        }
    }

    pub fn homonym(points_per_sense: usize, seed: u64) -> ClusterSpec {
        ClusterSpec {
            n_clusters: 2,
            points_per_cluster: points_per_sense,
            ..unambiguous(0, seed)
        }
    }

    pub fn polyseme(senses: usize, points_per_sense: usize, seed: u64) -> ClusterSpec {
        ClusterSpec {
            n_clusters: senses,
            points_per_cluster: points_per_sense,
            dim: DIM.max(2 * senses),
            centre_separation: 3.0 * SPREAD,
            ..unambiguous(0, seed)
        }
    }

    /// Two senses, 200 contexts each.
    pub fn two_cluster_fixture(seed: u64) -> ClusterSpec {
        homonym(200, seed)
    }

    /// Unambiguous, homonym and six-sense polyseme words of 24 contexts each.
    pub fn three_condition_experiment(words_per_condition: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            seed,
            words_per_condition,
            conditions: vec![
                Condition { name: "unambiguous".into(), spec: unambiguous(24, 0) },
                Condition { name: "homonym".into(), spec: homonym(12, 0) },
                Condition { name: "polyseme".into(), spec: polyseme(6, 4, 0) },
            ],
        }
    }
}
