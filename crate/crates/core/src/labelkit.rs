//! Sense-label management: synonym merging, rater majority vote and
//! Krippendorff's alpha (nominal scale).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::embedstore::{SenseLabeling, OTHER_LABEL};
use crate::{Error, Result};

/// Rewrites labels to canonical forms; labels not in the map pass through.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MergeMap(pub BTreeMap<String, String>);

impl MergeMap {
    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        Self(pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect())
    }

    pub fn apply<'a>(&'a self, label: &'a str) -> &'a str {
        self.0.get(label).map_or(label, String::as_str)
    }
}

pub fn distinct_labels(labeling: &SenseLabeling) -> BTreeSet<&str> {
    labeling.entries.values().map(String::as_str).collect()
}

pub fn merge_labels(labeling: &SenseLabeling, merges: &MergeMap) -> Result<SenseLabeling> {
    if let Some((from, _)) = merges.0.iter().find(|(_, to)| to.as_str() == OTHER_LABEL) {
        return Err(Error::ReservedLabel(format!("{from} -> {OTHER_LABEL}")));
    }
    Ok(SenseLabeling {
        target: labeling.target.clone(),
        source: labeling.source.clone(),
        entries: labeling
            .entries
            .iter()
            .map(|(c, l)| (c.clone(), merges.apply(l).to_string()))
            .collect(),
    })
}

/// Labels from several sources aligned on a shared, sorted context list.
/// A missing cell means the source did not label that context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaterTable {
    pub target: String,
    pub context_ids: Vec<String>,
    pub columns: BTreeMap<String, Vec<Option<String>>>,
    pub allowed_labels: BTreeSet<String>,
}

impl RaterTable {
    /// Aligns labelings on the union of their context ids. When
    /// `allowed` is `None` the alphabet is every observed label plus `other`.
    pub fn from_labelings(labelings: &[SenseLabeling], allowed: Option<BTreeSet<String>>) -> Result<Self> {
        let first = labelings
            .first()
            .ok_or_else(|| Error::Precondition("no label sources".into()))?;
        let mut context_ids = BTreeSet::new();
        for l in labelings {
            if l.target != first.target {
                return Err(Error::Validation(format!(
                    "sources label different targets: {:?} and {:?}",
                    first.target, l.target
                )));
            }
            context_ids.extend(l.entries.keys().cloned());
        }
        let context_ids: Vec<String> = context_ids.into_iter().collect();
        let mut columns = BTreeMap::new();
        for l in labelings {
            let col = context_ids.iter().map(|c| l.entries.get(c).cloned()).collect();
            if columns.insert(l.source.clone(), col).is_some() {
                return Err(Error::Validation(format!("duplicate source {:?}", l.source)));
            }
        }
        let observed: BTreeSet<String> = columns.values().flatten().flatten().cloned().collect();
        let allowed_labels = match allowed {
            Some(mut set) => {
                set.insert(OTHER_LABEL.to_string());
                if let Some(bad) = observed.iter().find(|l| !set.contains(*l)) {
                    return Err(Error::Validation(format!("label {bad:?} is not in the allowed set")));
                }
                set
            }
            None => {
                let mut set = observed;
                set.insert(OTHER_LABEL.to_string());
                set
            }
        };
        Ok(Self {
            target: first.target.clone(),
            context_ids,
            columns,
            allowed_labels,
        })
    }
}

/// Ground truth from rater votes: a context gets label `L` when at least
/// `min_agree` sources chose `L` and `L` is not `other`. Contexts without
/// such a label, or where two labels tie for the most votes, are left out.
pub fn majority_label(table: &RaterTable, min_agree: usize, source: &str) -> Result<SenseLabeling> {
    if min_agree == 0 || table.columns.len() < min_agree {
        return Err(Error::Precondition(format!(
            "{} rater columns cannot reach agreement of {min_agree}",
            table.columns.len()
        )));
    }
    let mut out = SenseLabeling::new(table.target.clone(), source);
    for (row, ctx) in table.context_ids.iter().enumerate() {
        let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
        for col in table.columns.values() {
            if let Some(l) = &col[row] {
                *votes.entry(l).or_default() += 1;
            }
        }
        let top = votes.values().copied().max().unwrap_or(0);
        let leaders: Vec<&str> = votes
            .iter()
            .filter(|&(l, &c)| c == top && *l != OTHER_LABEL)
            .map(|(l, _)| *l)
            .collect();
        let other_leads = votes.get(OTHER_LABEL) == Some(&top);
        if top >= min_agree && leaders.len() == 1 && !other_leads {
            out.insert(ctx.clone(), leaders[0])?;
        }
    }
    Ok(out)
}

/// Krippendorff's alpha for nominal data, `1 - D_o / D_e`, from the
/// coincidence matrix. Each column is one rater; `None` marks a missing
/// rating. Units with fewer than two ratings are not pairable and are
/// ignored.
pub fn krippendorff_alpha<C: AsRef<[Option<String>]>>(columns: &[C]) -> Result<f64> {
    if columns.len() < 2 {
        return Err(Error::Precondition("alpha needs at least 2 rating columns".into()));
    }
    let units = columns[0].as_ref().len();
    if columns.iter().any(|c| c.as_ref().len() != units) {
        return Err(Error::Shape("rating columns differ in length".into()));
    }
    let alphabet: BTreeSet<&str> = columns
        .iter()
        .flat_map(|c| c.as_ref().iter().flatten().map(String::as_str))
        .collect();
    let index: BTreeMap<&str, usize> = alphabet.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let v = alphabet.len();

    let mut coincidence = vec![vec![0.0f64; v]; v];
    let mut pairable_units = 0usize;
    for u in 0..units {
        let values: Vec<usize> = columns
            .iter()
            .filter_map(|c| c.as_ref()[u].as_deref().map(|l| index[l]))
            .collect();
        let m = values.len();
        if m < 2 {
            continue;
        }
        pairable_units += 1;
        let w = 1.0 / (m as f64 - 1.0);
        for (a, &ca) in values.iter().enumerate() {
            for (b, &cb) in values.iter().enumerate() {
                if a != b {
                    coincidence[ca][cb] += w;
                }
            }
        }
    }
    if pairable_units < 2 {
        return Err(Error::InsufficientData(format!(
            "alpha needs 2 units with at least 2 ratings, found {pairable_units}"
        )));
    }
    let marginals: Vec<f64> = coincidence.iter().map(|r| r.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..v {
        for k in 0..v {
            if c != k {
                observed += coincidence[c][k];
                expected += marginals[c] * marginals[k];
            }
        }
    }
    if expected == 0.0 {
        return Err(Error::UndefinedAlpha("only one distinct label among pairable values".into()));
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pairwise: BTreeMap<String, f64>,
    pub average: f64,
}

/// Mean of alpha(auto, rater) over the raters.
pub fn average_pairwise_alpha(
    auto: &[Option<String>],
    raters: &[(String, Vec<Option<String>>)],
) -> Result<AgreementReport> {
    if raters.is_empty() {
        return Err(Error::Precondition("no raters to compare against".into()));
    }
    let mut pairwise = BTreeMap::new();
    for (name, col) in raters {
        let a = krippendorff_alpha(&[auto, col.as_slice()]).map_err(|e| match e {
            Error::UndefinedAlpha(m) => Error::UndefinedAlpha(format!("rater {name}: {m}")),
            Error::InsufficientData(m) => Error::InsufficientData(format!("rater {name}: {m}")),
            other => other,
        })?;
        pairwise.insert(name.clone(), a);
    }
    let average = pairwise.values().sum::<f64>() / pairwise.len() as f64;
    Ok(AgreementReport { pairwise, average })
}

/// Agreement of the `auto_source` column with every other column of `table`.
pub fn table_agreement(table: &RaterTable, auto_source: &str) -> Result<AgreementReport> {
    let auto = table
        .columns
        .get(auto_source)
        .ok_or_else(|| Error::Precondition(format!("no column for source {auto_source:?}")))?;
    let raters: Vec<(String, Vec<Option<String>>)> = table
        .columns
        .iter()
        .filter(|(s, _)| s.as_str() != auto_source)
        .map(|(s, c)| (s.clone(), c.clone()))
        .collect();
    average_pairwise_alpha(auto, &raters)
}
