//! Gaussian naive Bayes sense classifier with seeded train/test splits.
//!
//! Per-class means and variances use the population (ddof = 0) estimator.
//! Every variance is then increased by `eps_ratio * max_j var(X[:, j])`, the
//! largest single-column variance of the whole training matrix, so constant
//! dimensions never produce a zero variance.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{par, rng, Error, Matrix, Result};

pub const DEFAULT_EPS_RATIO: f64 = 1e-9;
pub const DEFAULT_TEST_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

fn fisher_yates(indices: &mut [usize], rng: &mut rng::SeededRng) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

fn check_fraction(test_fraction: f64) -> Result<()> {
    if test_fraction > 0.0 && test_fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::Split(format!("test fraction {test_fraction} outside (0, 1)")))
    }
}

/// Unstratified split: shuffle `0..n`, then the first `round(n * test_fraction)`
/// indices form the test set and the rest the training set.
pub fn split_half(n: usize, test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    check_fraction(test_fraction)?;
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Split(format!(
            "{n} rows with test fraction {test_fraction} leaves an empty side"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    fisher_yates(&mut idx, &mut rng::seeded(seed));
    let train_indices = idx.split_off(n_test);
    Ok(SplitPlan {
        train_indices,
        test_indices: idx,
        seed,
        test_fraction,
    })
}

/// Per-label split. Each label sends `round(n_label * test_fraction)` rows to
/// the test side, capped so at least one row stays in training.
pub fn split_stratified(labels: &[String], test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    check_fraction(test_fraction)?;
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    let mut rng = rng::seeded(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut rows in by_label.into_values() {
        fisher_yates(&mut rows, &mut rng);
        let k = ((rows.len() as f64 * test_fraction).round() as usize).min(rows.len() - 1);
        test.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split("stratified split leaves an empty side".into()));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train_indices: train,
        test_indices: test,
        seed,
        test_fraction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    /// Sorted distinct labels; ties in prediction go to the earlier class.
    pub classes: Vec<String>,
    pub priors: Vec<f64>,
    pub means: Matrix,
    pub variances: Matrix,
    pub epsilon: f64,
}

impl GnbModel {
    pub fn new(classes: Vec<String>, priors: Vec<f64>, means: Matrix, variances: Matrix) -> Result<Self> {
        let c = classes.len();
        if c == 0 || priors.len() != c || means.rows() != c || variances.rows() != c || means.cols() != variances.cols() {
            return Err(Error::Shape("inconsistent model dimensions".into()));
        }
        if (priors.iter().sum::<f64>() - 1.0).abs() > 1e-12 || priors.iter().any(|&p| p <= 0.0) {
            return Err(Error::Validation("priors must be positive and sum to 1".into()));
        }
        if variances.as_slice().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Validation("variances must be strictly positive".into()));
        }
        Ok(Self {
            classes,
            priors,
            means,
            variances,
            epsilon: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    pub fn class_index(&self, label: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownClass(label.to_string()))
    }

    fn joint_log_likelihood(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| {
                let (mu, var) = (self.means.row(c), self.variances.row(c));
                let ll: f64 = x
                    .iter()
                    .zip(mu)
                    .zip(var)
                    .map(|((&xi, &m), &v)| -0.5 * (2.0 * PI * v).ln() - 0.5 * (xi - m).powi(2) / v)
                    .sum();
                self.priors[c].ln() + ll
            })
            .collect()
    }
}

fn population_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let m = values.clone().sum::<f64>() / n;
    values.map(|v| (v - m).powi(2)).sum::<f64>() / n
}

pub fn fit_gnb(x: &Matrix, y: &[String], eps_ratio: f64) -> Result<GnbModel> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if d == 0 {
        return Err(Error::Shape("training matrix has no columns".into()));
    }
    if y.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", y.len())));
    }
    if !(eps_ratio > 0.0) {
        return Err(Error::Config(format!("smoothing ratio {eps_ratio} must be positive")));
    }
    let max_var = (0..d)
        .map(|j| population_variance((0..n).map(|i| x.get(i, j))))
        .fold(0.0, f64::max);
    // an all-constant matrix falls back to a unit scale
    let epsilon = eps_ratio * if max_var > 0.0 { max_var } else { 1.0 };

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in y.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let c = groups.len();
    let mut means = Matrix::zeros(c, d);
    let mut variances = Matrix::zeros(c, d);
    let mut priors = Vec::with_capacity(c);
    for (k, rows) in groups.values().enumerate() {
        priors.push(rows.len() as f64 / n as f64);
        for j in 0..d {
            let col = rows.iter().map(|&i| x.get(i, j));
            let m = col.clone().sum::<f64>() / rows.len() as f64;
            means.set(k, j, m);
            variances.set(k, j, population_variance(col) + epsilon);
        }
    }
    let mut model = GnbModel::new(groups.keys().map(|s| s.to_string()).collect(), priors, means, variances)?;
    model.epsilon = epsilon;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<String>,
    /// m x classes joint log-likelihoods (log prior plus log density).
    pub log_scores: Matrix,
}

/// Argmax of log prior plus summed Gaussian log densities, per row.
pub fn predict_gnb(model: &GnbModel, x: &Matrix) -> Result<Prediction> {
    if x.cols() != model.dim() {
        return Err(Error::Shape(format!(
            "model has dim {}, input has {}",
            model.dim(),
            x.cols()
        )));
    }
    let rows = par::map_range(x.rows(), |i| model.joint_log_likelihood(x.row(i)));
    let labels = rows
        .iter()
        .map(|scores| {
            let best = scores
                .iter()
                .enumerate()
                .fold(0, |best, (c, &s)| if s > scores[best] { c } else { best });
            model.classes[best].clone()
        })
        .collect();
    Ok(Prediction {
        labels,
        log_scores: Matrix::from_vec(x.rows(), model.classes.len(), rows.concat())?,
    })
}

pub fn accuracy(predicted: &[String], truth: &[String]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions for {} truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub classes: Vec<String>,
    /// Test rows per class.
    pub support: BTreeMap<String, usize>,
    /// `confusion[t][p]`: test rows of class `t` predicted as class `p`,
    /// both indexed by `classes`.
    pub confusion: Vec<Vec<usize>>,
}

/// Scores predictions against the truth. A truth label the model never saw
/// is an [`Error::UnknownClass`].
pub fn classification_report(
    model: &GnbModel,
    predicted: &[String],
    truth: &[String],
    n_train: usize,
) -> Result<ClassificationReport> {
    let acc = accuracy(predicted, truth)?;
    let c = model.classes.len();
    let mut confusion = vec![vec![0usize; c]; c];
    let mut support: BTreeMap<String, usize> = model.classes.iter().map(|l| (l.clone(), 0)).collect();
    for (p, t) in predicted.iter().zip(truth) {
        let ti = model.class_index(t)?;
        let pi = model.class_index(p)?;
        confusion[ti][pi] += 1;
        *support.get_mut(t).expect("known class") += 1;
    }
    Ok(ClassificationReport {
        accuracy: acc,
        n_train,
        n_test: truth.len(),
        classes: model.classes.clone(),
        support,
        confusion,
    })
}

/// Fits on the plan's training rows and reports on its test rows.
pub fn train_and_evaluate(
    x: &Matrix,
    y: &[String],
    plan: &SplitPlan,
    eps_ratio: f64,
) -> Result<(GnbModel, ClassificationReport)> {
    let pick = |idx: &[usize]| idx.iter().map(|&i| y[i].clone()).collect::<Vec<_>>();
    let model = fit_gnb(&x.select_rows(&plan.train_indices), &pick(&plan.train_indices), eps_ratio)?;
    let test_x = x.select_rows(&plan.test_indices);
    let pred = predict_gnb(&model, &test_x)?;
    let report = classification_report(&model, &pred.labels, &pick(&plan.test_indices), plan.train_indices.len())?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn split_structure() {
        let p = split_half(10, 0.5, 0).unwrap();
        assert_eq!((p.train_indices.len(), p.test_indices.len()), (5, 5));
        let mut all: Vec<usize> = p.train_indices.iter().chain(&p.test_indices).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(p, split_half(10, 0.5, 0).unwrap());
        assert_ne!(p.test_indices, split_half(10, 0.5, 1).unwrap().test_indices);
    }

    #[test]
    fn split_rounding_and_errors() {
        let p = split_half(3, 0.5, 0).unwrap();
        assert_eq!((p.test_indices.len(), p.train_indices.len()), (2, 1));
        assert!(matches!(split_half(2, 0.1, 0), Err(Error::Split(_))));
        assert!(matches!(split_half(4, 1.0, 0), Err(Error::Split(_))));
        assert!(split_half(1, 0.5, 0).is_err());
    }

    #[test]
    fn stratified_split_balances_labels() {
        let labels: Vec<String> = (0..20).map(|i| if i < 14 { "a" } else { "b" }.to_string()).collect();
        let p = split_stratified(&labels, 0.5, 3).unwrap();
        let test_b = p.test_indices.iter().filter(|&&i| i >= 14).count();
        assert_eq!(test_b, 3);
        assert_eq!(p.test_indices.len(), 10);
        let singleton = s(&["a", "a", "b"]);
        let p = split_stratified(&singleton, 0.5, 0).unwrap();
        assert!(p.train_indices.contains(&2));
    }

    #[test]
    fn single_class_model() {
        let m = fit_gnb(&col(&[1.0, 2.0, 3.0]), &s(&["x", "x", "x"]), DEFAULT_EPS_RATIO).unwrap();
        let p = predict_gnb(&m, &col(&[-100.0, 0.0, 1e6])).unwrap();
        assert!(p.labels.iter().all(|l| l == "x"));
    }

    #[test]
    fn nearer_mean_wins_with_equal_smoothed_variances() {
        let m = fit_gnb(&col(&[0.0, 10.0]), &s(&["a", "b"]), DEFAULT_EPS_RATIO).unwrap();
        assert_eq!(m.variances.get(0, 0), m.variances.get(1, 0));
        assert_relative_eq!(m.variances.get(0, 0), 25e-9, max_relative = 1e-12);
        assert_eq!(predict_gnb(&m, &col(&[1.0])).unwrap().labels, ["a"]);
        assert_eq!(predict_gnb(&m, &col(&[0.0, 10.0])).unwrap().labels, ["a", "b"]);
    }

    #[test]
    fn prior_decides_identical_likelihoods() {
        let means = Matrix::from_vec(2, 1, vec![0.0, 0.0]).unwrap();
        let vars = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let m = GnbModel::new(s(&["a", "b"]), vec![0.01, 0.99], means, vars).unwrap();
        assert_eq!(predict_gnb(&m, &col(&[0.3, -2.0])).unwrap().labels, ["b", "b"]);
    }

    #[test]
    fn log_density_comparison() {
        let means = Matrix::from_vec(2, 1, vec![0.0, 10.0]).unwrap();
        let vars = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let m = GnbModel::new(s(&["n0", "n10"]), vec![0.5, 0.5], means, vars).unwrap();
        let p = predict_gnb(&m, &col(&[2.0, 5.0])).unwrap();
        assert_eq!(p.labels, ["n0", "n0"]); // 5.0 is the exact midpoint: tie -> first class
        let diff = p.log_scores.get(0, 0) - p.log_scores.get(0, 1);
        assert!((diff - (64.0 - 4.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_dimensions_stay_positive() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0], [4.0, 5.0]]).unwrap();
        let m = fit_gnb(&x, &s(&["a", "a", "b", "b"]), DEFAULT_EPS_RATIO).unwrap();
        assert!(m.variances.as_slice().iter().all(|&v| v > 0.0));
        let flat = Matrix::from_rows(&[[2.0], [2.0]]).unwrap();
        let m = fit_gnb(&flat, &s(&["a", "b"]), DEFAULT_EPS_RATIO).unwrap();
        assert!(m.variances.as_slice().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn errors() {
        let m = fit_gnb(&col(&[0.0, 1.0]), &s(&["a", "b"]), DEFAULT_EPS_RATIO).unwrap();
        assert!(matches!(predict_gnb(&m, &Matrix::zeros(1, 2)), Err(Error::Shape(_))));
        assert!(fit_gnb(&Matrix::zeros(0, 1), &[], DEFAULT_EPS_RATIO).is_err());
        assert!(matches!(accuracy(&s(&["a"]), &s(&["a", "b"])), Err(Error::Shape(_))));
        assert!(matches!(
            classification_report(&m, &s(&["a"]), &s(&["zzz"]), 2),
            Err(Error::UnknownClass(_))
        ));
    }

    #[test]
    fn accuracy_values() {
        assert_eq!(accuracy(&s(&["a", "b"]), &s(&["a", "b"])).unwrap(), 1.0);
        let p: Vec<String> = (0..10).map(|i| if i < 5 { "a" } else { "b" }.into()).collect();
        assert_eq!(accuracy(&p, &vec!["a".to_string(); 10]).unwrap(), 0.5);
    }

    #[test]
    fn separated_clusters_fit_perfectly_on_training_data() {
        let mut rng = rng::seeded(0);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let (d, per) = (16, 200);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, name) in ["a", "b"].iter().enumerate() {
            for _ in 0..per {
                rows.push((0..d).map(|j| if j == 0 { 6.0 * c as f64 } else { 0.0 } + noise.sample(&mut rng)).collect::<Vec<_>>());
                labels.push(name.to_string());
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let m = fit_gnb(&x, &labels, DEFAULT_EPS_RATIO).unwrap();
        let p = predict_gnb(&m, &x).unwrap();
        assert_eq!(accuracy(&p.labels, &labels).unwrap(), 1.0);
        assert!((m.priors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rescaled_priors_keep_argmax(
            pts in prop::collection::vec(-5.0f64..5.0, 1..20),
            scale in 1e-3f64..1e3,
        ) {
            let x = col(&[-1.0, -0.5, 0.4, 1.0, 2.0, 3.5]);
            let m = fit_gnb(&x, &s(&["a", "a", "b", "b", "c", "c"]), DEFAULT_EPS_RATIO).unwrap();
            let mut scaled = m.clone();
            scaled.priors.iter_mut().for_each(|p| *p *= scale);
            let q = col(&pts);
            prop_assert_eq!(predict_gnb(&m, &q).unwrap().labels, predict_gnb(&scaled, &q).unwrap().labels);
        }
    }
}
