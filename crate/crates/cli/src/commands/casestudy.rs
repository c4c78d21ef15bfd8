use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ambigeo_core::embedstore::{attach_labels, read_embv1_file, LabeledEmbeddingSet, SenseLabeling};
use ambigeo_core::geometry::{group_similarity, pairwise_records, DEFAULT_CI_LEVEL};
use ambigeo_core::nbayes::{
    split_half, split_stratified, train_and_evaluate, ClassificationReport, DEFAULT_EPS_RATIO, DEFAULT_TEST_FRACTION,
};
use ambigeo_core::proxigram::{knn_graph, render_proxigram, Palette, DEFAULT_K};
use ambigeo_core::tsne::{tsne_embed, TsneConfig, TsneResult};
use log::info;
use serde::Serialize;

use super::{create_dir, write_json};
use crate::error::{user_error, CliResult, UserContext};
use crate::manifest::RunManifest;

/// Fewest labeled contexts a case study will run on.
pub const MIN_CONTEXTS: usize = 10;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// EMBV1 file for one target word.
    #[arg(long)]
    embeddings: PathBuf,
    /// Sense labels (JSONL); unlabeled contexts are dropped.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    tsne_perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    tsne_iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Neighbours per point in the proxigram.
    #[arg(long, default_value_t = DEFAULT_K)]
    knn: usize,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    test_fraction: f64,
    /// Split each label separately so train and test keep label proportions.
    #[arg(long)]
    stratify: bool,
    #[arg(long, default_value_t = DEFAULT_CI_LEVEL)]
    ci_level: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_RATIO)]
    var_smoothing: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Serialize)]
struct Classification<'a> {
    stratified: bool,
    seed: u64,
    test_fraction: f64,
    #[serde(flatten)]
    report: &'a ClassificationReport,
}

#[derive(Debug, Serialize)]
struct LayoutRow<'a> {
    context_id: &'a str,
    x: f64,
    y: f64,
    label: &'a str,
}

fn write_layout(path: &Path, data: &LabeledEmbeddingSet, run: &TsneResult) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, id) in data.set().context_ids().iter().enumerate() {
        w.serialize(LayoutRow {
            context_id: id,
            x: run.layout.get(i, 0),
            y: run.layout.get(i, 1),
            label: &data.labels()[i],
        })?;
    }
    w.flush()?;
    let mut kl = csv::Writer::from_path(path.with_file_name("kl.csv"))?;
    kl.write_record(["iteration", "kl"])?;
    for (it, v) in run.kl_trace.iter().enumerate() {
        kl.write_record([it.to_string(), v.to_string()])?;
    }
    kl.flush()?;
    Ok(())
}

pub fn run(args: Args) -> CliResult<()> {
    let mut manifest = RunManifest::new("casestudy");
    manifest
        .param("embeddings", &args.embeddings)
        .param("labels", &args.labels)
        .param("tsne_perplexity", args.tsne_perplexity)
        .param("tsne_iterations", args.tsne_iterations)
        .param("seed", args.seed)
        .param("knn", args.knn)
        .param("test_fraction", args.test_fraction)
        .param("stratify", args.stratify)
        .param("ci_level", args.ci_level)
        .param("var_smoothing", args.var_smoothing);

    let set = read_embv1_file(&args.embeddings).user(format!("reading {}", args.embeddings.display()))?;
    let labeling = SenseLabeling::read_file(&args.labels).user(format!("reading {}", args.labels.display()))?;
    manifest.input(&args.embeddings)?;
    manifest.input(&args.labels)?;
    if labeling.target != set.word() {
        return Err(user_error(format!(
            "labels are for {:?} but embeddings are for {:?}",
            labeling.target,
            set.word()
        )));
    }
    let data = attach_labels(&set, &labeling).user("attaching labels")?;
    if data.len() < MIN_CONTEXTS {
        return Err(user_error(format!(
            "only {} labeled contexts, need at least {MIN_CONTEXTS}",
            data.len()
        )));
    }
    let alphabet = data.label_alphabet().len();
    if alphabet < 2 {
        return Err(user_error("labeled contexts cover fewer than 2 labels"));
    }
    info!("{}: {} labeled contexts, {alphabet} labels", set.word(), data.len());
    create_dir(&args.out_dir)?;
    let out = |name: &str| args.out_dir.join(name);
    let mut written = Vec::new();

    let x = data.set().to_matrix();
    let cfg = TsneConfig {
        perplexity: args.tsne_perplexity,
        iterations: args.tsne_iterations,
        exaggeration_iterations: TsneConfig::default().exaggeration_iterations.min(args.tsne_iterations),
        seed: args.seed,
        ..TsneConfig::default()
    };
    let run = tsne_embed(&x, &cfg).user("t-SNE")?;
    info!("t-SNE final KL {:.4}", run.kl_trace.last().copied().unwrap_or(f64::NAN));
    write_layout(&out("tsne.csv"), &data, &run)?;
    written.extend(["tsne.csv", "kl.csv"]);

    let graph = knn_graph(&x, &run.layout, args.knn, data.set().context_ids(), Some(data.labels())).user("k-NN graph")?;
    let mut svg = BufWriter::new(File::create(out("proxigram.svg"))?);
    svg.write_all(render_proxigram(&graph, Palette::default())?.as_bytes())?;
    svg.flush()?;
    write_json(&out("proxigram.json"), &graph)?;
    written.extend(["proxigram.svg", "proxigram.json"]);

    let report = group_similarity(&data, args.ci_level).user("group similarity")?;
    write_json(&out("groupsim.json"), &report)?;
    let mut pairs = csv::Writer::from_path(out("pairs.csv"))?;
    for r in pairwise_records(&data)? {
        pairs.serialize(r)?;
    }
    pairs.flush()?;
    written.extend(["groupsim.json", "pairs.csv"]);

    let plan = if args.stratify {
        split_stratified(data.labels(), args.test_fraction, args.seed)
    } else {
        split_half(data.len(), args.test_fraction, args.seed)
    }
    .user("splitting train and test")?;
    let (model, classification) = train_and_evaluate(&x, data.labels(), &plan, args.var_smoothing).user("classifier")?;
    info!("held-out accuracy {:.4}", classification.accuracy);
    write_json(
        &out("classify.json"),
        &Classification {
            stratified: args.stratify,
            seed: args.seed,
            test_fraction: args.test_fraction,
            report: &classification,
        },
    )?;
    write_json(&out("model.json"), &model)?;
    written.extend(["classify.json", "model.json"]);

    for name in written {
        manifest.output(&args.out_dir, &out(name))?;
    }
    manifest.write(&out("manifest.json"))?;
    Ok(())
}
