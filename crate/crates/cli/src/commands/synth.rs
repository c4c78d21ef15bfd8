use std::fs;
use std::path::PathBuf;

use ambigeo_core::embedstore::{write_embv1_file, SenseLabeling};
use ambigeo_core::geometry::DiversityRecord;
use ambigeo_core::synthkit::{gen_word, simulate_ambiguity_experiment, word_seed, ClusterSpec, ExperimentConfig};
use log::info;
use serde::Serialize;

use super::diversity::{write_diversity_csv, EMBEDDING_EXT};
use super::{create_dir, write_json};
use crate::error::{CliResult, UserContext};
use crate::manifest::RunManifest;

pub const LABEL_SOURCE: &str = "generator";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Experiment JSON: {"seed", "words_per_condition", "conditions": [{"name", "n_clusters",
    /// "points_per_cluster", "dim", "centre_separation", "within_spread"}]}.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write every generated word as `embeddings/<word>.embv1` plus
    /// `embeddings/<word>.labels.jsonl`.
    #[arg(long)]
    emit_embeddings: bool,
}

#[derive(Debug, Serialize)]
struct ConditionRow<'a> {
    word: &'a str,
    condition: &'a str,
}

pub fn run(args: Args) -> CliResult<()> {
    let raw = fs::read_to_string(&args.config).user(format!("reading {}", args.config.display()))?;
    let config: ExperimentConfig = serde_json::from_str(&raw).user(format!("parsing {}", args.config.display()))?;
    let mut manifest = RunManifest::new("synth");
    manifest
        .param("config", &args.config)
        .param("emit_embeddings", args.emit_embeddings);
    manifest.input(&args.config)?;

    let result = simulate_ambiguity_experiment(&config).user("running the experiment")?;
    for s in &result.summaries {
        info!("{}: mean diversity {:.5} (sd {:.5}, n {})", s.condition, s.mean, s.sd, s.n);
    }
    create_dir(&args.out_dir)?;
    let out = |name: &str| args.out_dir.join(name);

    let records: Vec<DiversityRecord> = result.words.iter().map(|w| w.record.clone()).collect();
    write_diversity_csv(&out("diversity.csv"), &records)?;
    let mut cond = csv::Writer::from_path(out("conditions.csv"))?;
    for w in &result.words {
        cond.serialize(ConditionRow {
            word: &w.record.word,
            condition: &w.condition,
        })?;
    }
    cond.flush()?;
    write_json(
        &out("stats.json"),
        &serde_json::json!({
            "seed": config.seed,
            "words_per_condition": config.words_per_condition,
            "conditions": result.summaries,
            "omnibus": result.anova,
            "contrasts": result.contrasts,
        }),
    )?;
    let mut written = vec![out("diversity.csv"), out("conditions.csv"), out("stats.json")];

    if args.emit_embeddings {
        let dir = out("embeddings");
        create_dir(&dir)?;
        for (ci, c) in config.conditions.iter().enumerate() {
            for wi in 0..config.words_per_condition {
                let spec = ClusterSpec {
                    seed: word_seed(config.seed, ci, wi),
                    ..c.spec
                };
                let word = format!("{}-{wi:03}", c.name);
                let data = gen_word(&spec, &word)?;
                let emb = dir.join(format!("{word}.{EMBEDDING_EXT}"));
                write_embv1_file(data.set(), &emb)?;
                let mut labels = SenseLabeling::new(word.clone(), LABEL_SOURCE);
                for (id, l) in data.set().context_ids().iter().zip(data.labels()) {
                    labels.insert(id.clone(), l.clone())?;
                }
                let lab = dir.join(format!("{word}.labels.jsonl"));
                labels.write_file(&lab)?;
                written.extend([emb, lab]);
            }
        }
    }
    for p in &written {
        manifest.output(&args.out_dir, p)?;
    }
    manifest.write(&out("manifest.json"))?;
    Ok(())
}
