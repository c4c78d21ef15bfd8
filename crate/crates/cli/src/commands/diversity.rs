use std::path::{Path, PathBuf};

use ambigeo_core::embedstore::read_embv1_file;
use ambigeo_core::geometry::{embedding_diversity, DiversityRecord};
use log::info;

use super::files_with_extension;
use crate::error::{user_error, CliResult, UserContext};
use crate::manifest::{sidecar_path, RunManifest};

pub const EMBEDDING_EXT: &str = "embv1";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of `.embv1` files, one target word each.
    #[arg(long)]
    embeddings: PathBuf,
    /// CSV output: word,context_count,diversity.
    #[arg(long)]
    out: PathBuf,
}

pub fn write_diversity_csv(path: &Path, records: &[DiversityRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: Args) -> CliResult<()> {
    let mut manifest = RunManifest::new("diversity");
    manifest.param("embeddings", &args.embeddings);
    let files = files_with_extension(&args.embeddings, EMBEDDING_EXT)?;
    if files.is_empty() {
        return Err(user_error(format!("no .{EMBEDDING_EXT} files in {}", args.embeddings.display())));
    }
    let mut records = Vec::with_capacity(files.len());
    for path in &files {
        let set = read_embv1_file(path).user(format!("reading {}", path.display()))?;
        manifest.input(path)?;
        let r = embedding_diversity(&set).user(format!("diversity of {}", path.display()))?;
        info!("{}: n={} diversity={:.6}", r.word, r.context_count, r.diversity);
        records.push(r);
    }
    write_diversity_csv(&args.out, &records)?;
    manifest.output(args.out.parent().unwrap_or(&args.out), &args.out)?;
    manifest.write(&sidecar_path(&args.out))?;
    Ok(())
}
