use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use ambigeo_core::embedstore::SenseLabeling;
use ambigeo_core::labelkit::{distinct_labels, majority_label, merge_labels, table_agreement, MergeMap, RaterTable};
use log::info;
use serde::Serialize;

use super::write_json;
use crate::error::{user_error, CliResult, UserContext};
use crate::manifest::{sidecar_path, RunManifest};

pub const MAJORITY_SOURCE: &str = "majority";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Automatic labels (JSONL).
    #[arg(long)]
    auto: PathBuf,
    /// Rater label files (JSONL), one per rater with distinct sources.
    #[arg(long = "rater", required = true, num_args = 1..)]
    raters: Vec<PathBuf>,
    /// Votes a label needs to become the majority label of a context.
    #[arg(long, default_value_t = 2)]
    min_agree: usize,
    /// JSON object mapping labels to their merged form, applied to every source.
    #[arg(long)]
    merges: Option<PathBuf>,
    /// Writes the rater majority labels as JSONL with source `majority`.
    #[arg(long)]
    majority_out: Option<PathBuf>,
    /// Agreement report JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Report {
    target: String,
    auto_source: String,
    contexts: usize,
    auto_labels: usize,
    auto_labels_after_merge: usize,
    pairwise: BTreeMap<String, f64>,
    average: f64,
    majority_contexts: usize,
}

pub fn run(args: Args) -> CliResult<()> {
    let mut manifest = RunManifest::new("agreement");
    manifest
        .param("auto", &args.auto)
        .param("raters", &args.raters)
        .param("min_agree", args.min_agree)
        .param("merges", &args.merges);

    let merges = match &args.merges {
        Some(p) => {
            let raw = fs::read_to_string(p).user(format!("reading {}", p.display()))?;
            manifest.input(p)?;
            serde_json::from_str::<MergeMap>(&raw).user(format!("parsing {}", p.display()))?
        }
        None => MergeMap::default(),
    };
    let auto_raw = SenseLabeling::read_file(&args.auto).user(format!("reading {}", args.auto.display()))?;
    manifest.input(&args.auto)?;
    let auto = merge_labels(&auto_raw, &merges).user("merging automatic labels")?;
    let mut raters = Vec::with_capacity(args.raters.len());
    for p in &args.raters {
        let l = SenseLabeling::read_file(p).user(format!("reading {}", p.display()))?;
        manifest.input(p)?;
        if l.source == auto.source {
            return Err(user_error(format!("{} reuses the automatic source {:?}", p.display(), l.source)));
        }
        raters.push(merge_labels(&l, &merges).user(format!("merging labels of {}", p.display()))?);
    }

    let mut all = vec![auto.clone()];
    all.extend(raters.iter().cloned());
    let table = RaterTable::from_labelings(&all, None).user("aligning label sources")?;
    let agreement = table_agreement(&table, &auto.source).user("computing agreement")?;
    let rater_table = RaterTable::from_labelings(&raters, None).user("aligning rater files")?;
    let majority = majority_label(&rater_table, args.min_agree, MAJORITY_SOURCE).user("rater majority")?;
    info!(
        "{}: average alpha {:.4} over {} raters; {} majority contexts",
        auto.target,
        agreement.average,
        raters.len(),
        majority.len()
    );

    let report = Report {
        target: auto.target.clone(),
        auto_source: auto.source.clone(),
        contexts: table.context_ids.len(),
        auto_labels: distinct_labels(&auto_raw).len(),
        auto_labels_after_merge: distinct_labels(&auto).len(),
        pairwise: agreement.pairwise,
        average: agreement.average,
        majority_contexts: majority.len(),
    };
    write_json(&args.out, &report)?;
    let root = args.out.parent().unwrap_or(&args.out).to_path_buf();
    manifest.output(&root, &args.out)?;
    if let Some(p) = &args.majority_out {
        majority.write_file(p)?;
        manifest.output(&root, p)?;
    }
    manifest.write(&sidecar_path(&args.out))?;
    Ok(())
}
