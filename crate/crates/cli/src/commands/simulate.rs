use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ambigeo_core::geometry::DiversityRecord;
use ambigeo_core::stats::{self, one_way_anova, ols, AnovaResult, OlsFit};
use ambigeo_core::Matrix;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use super::write_json;
use crate::error::{user_error, CliResult, UserContext};
use crate::manifest::{sidecar_path, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// ols of diversity on n_senses and n_meanings
    Regression,
    /// one-way ANOVA over conditions, overall and per pair
    Factorial,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    /// CSV with header word,context_count,diversity.
    #[arg(long)]
    diversity: PathBuf,
    /// CSV with header word,condition[,n_senses,n_meanings].
    #[arg(long)]
    conditions: PathBuf,
    #[arg(long, value_enum)]
    design: Design,
    /// Stats JSON output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ConditionRow {
    pub word: String,
    pub condition: String,
    #[serde(default)]
    pub n_senses: Option<f64>,
    #[serde(default)]
    pub n_meanings: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Term {
    pub term: String,
    pub b: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub beta: f64,
}

#[derive(Debug, Serialize)]
pub struct RegressionReport {
    pub design: Design,
    pub n: usize,
    pub terms: Vec<Term>,
    pub r_squared: f64,
    pub df_residual: usize,
}

#[derive(Debug, Serialize)]
pub struct GroupSummary {
    pub condition: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Serialize)]
pub struct PairContrast {
    pub a: String,
    pub b: String,
    pub anova: AnovaResult,
}

#[derive(Debug, Serialize)]
pub struct FactorialReport {
    pub design: Design,
    pub conditions: Vec<GroupSummary>,
    pub omnibus: AnovaResult,
    pub contrasts: Vec<PairContrast>,
}

pub fn coefficient_table<S: AsRef<str>>(names: &[S], fit: &OlsFit) -> Vec<Term> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| Term {
            term: name.as_ref().to_string(),
            b: fit.coefficients[j],
            se: fit.standard_errors[j],
            t: fit.t_values[j],
            p: fit.p_values[j],
            beta: fit.standardized_beta[j],
        })
        .collect()
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .user(format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .user(format!("parsing {}", path.display()))
}

/// Diversity value of every conditioned word, in condition-file order.
fn join(diversity: &[DiversityRecord], conditions: &[ConditionRow]) -> CliResult<Vec<f64>> {
    let mut by_word = BTreeMap::new();
    for r in diversity {
        if by_word.insert(r.word.as_str(), r.diversity).is_some() {
            return Err(user_error(format!("word {:?} appears twice in the diversity table", r.word)));
        }
    }
    let missing: Vec<&str> = conditions
        .iter()
        .map(|c| c.word.as_str())
        .filter(|w| !by_word.contains_key(w))
        .collect();
    if !missing.is_empty() {
        return Err(user_error(format!("words missing from the diversity table: {}", missing.join(", "))));
    }
    Ok(conditions.iter().map(|c| by_word[c.word.as_str()]).collect())
}

pub fn regression(y: &[f64], conditions: &[ConditionRow]) -> CliResult<RegressionReport> {
    let mut rows = Vec::with_capacity(conditions.len());
    for c in conditions {
        match (c.n_senses, c.n_meanings) {
            (Some(s), Some(m)) => rows.push([1.0, s, m]),
            _ => return Err(user_error(format!("word {:?} lacks n_senses or n_meanings", c.word))),
        }
    }
    let x = Matrix::from_rows(&rows)?;
    let fit = ols(y, &x).user("fitting the regression")?;
    Ok(RegressionReport {
        design: Design::Regression,
        n: y.len(),
        terms: coefficient_table(&["intercept", "n_senses", "n_meanings"], &fit),
        r_squared: fit.r_squared,
        df_residual: fit.df_residual,
    })
}

pub fn factorial(y: &[f64], conditions: &[ConditionRow]) -> CliResult<FactorialReport> {
    let mut names: Vec<&str> = Vec::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for (c, &v) in conditions.iter().zip(y) {
        match names.iter().position(|n| *n == c.condition) {
            Some(i) => groups[i].push(v),
            None => {
                names.push(&c.condition);
                groups.push(vec![v]);
            }
        }
    }
    if groups.len() < 2 {
        return Err(user_error("factorial design needs at least 2 conditions"));
    }
    let omnibus = one_way_anova(&groups).user("omnibus ANOVA")?;
    let mut contrasts = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            contrasts.push(PairContrast {
                a: names[i].to_string(),
                b: names[j].to_string(),
                anova: one_way_anova(&[&groups[i], &groups[j]]).user(format!("ANOVA {} vs {}", names[i], names[j]))?,
            });
        }
    }
    let conditions = names
        .iter()
        .zip(&groups)
        .map(|(n, g)| GroupSummary {
            condition: n.to_string(),
            n: g.len(),
            mean: stats::mean(g),
            sd: if g.len() > 1 { stats::sample_variance(g).sqrt() } else { 0.0 },
        })
        .collect();
    Ok(FactorialReport {
        design: Design::Factorial,
        conditions,
        omnibus,
        contrasts,
    })
}

pub fn run(args: Args) -> CliResult<()> {
    let mut manifest = RunManifest::new("simulate");
    manifest
        .param("diversity", &args.diversity)
        .param("conditions", &args.conditions)
        .param("design", args.design);
    let diversity: Vec<DiversityRecord> = read_csv(&args.diversity)?;
    let conditions: Vec<ConditionRow> = read_csv(&args.conditions)?;
    manifest.input(&args.diversity)?;
    manifest.input(&args.conditions)?;
    if conditions.is_empty() {
        return Err(user_error(format!("{} has no rows", args.conditions.display())));
    }
    let y = join(&diversity, &conditions)?;
    match args.design {
        Design::Regression => write_json(&args.out, &regression(&y, &conditions)?)?,
        Design::Factorial => write_json(&args.out, &factorial(&y, &conditions)?)?,
    }
    manifest.output(args.out.parent().unwrap_or(&args.out), &args.out)?;
    manifest.write(&sidecar_path(&args.out))?;
    Ok(())
}
