use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use ambigeo_core::corpus::{windows_for, Document, DEFAULT_WINDOW_SIZE};
use log::info;

use super::files_with_extension;
use crate::error::{user_error, CliResult, UserContext};
use crate::manifest::{sidecar_path, RunManifest};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of `.txt` documents; the file stem is the document id.
    #[arg(long)]
    corpus: PathBuf,
    /// One target word per line; blank lines and `#` comments are skipped.
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value_t = DEFAULT_WINDOW_SIZE)]
    size: usize,
    /// Treat every line of a document as one sentence instead of segmenting.
    #[arg(long)]
    presegmented: bool,
    /// Windows JSONL output.
    #[arg(long)]
    out: PathBuf,
}

pub fn read_targets(raw: &str) -> Vec<String> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn run(args: Args) -> CliResult<()> {
    if args.size == 0 {
        return Err(user_error("--size must be positive"));
    }
    let mut manifest = RunManifest::new("windows");
    manifest
        .param("corpus", &args.corpus)
        .param("targets", &args.targets)
        .param("size", args.size)
        .param("presegmented", args.presegmented);

    let targets = read_targets(&fs::read_to_string(&args.targets).user(format!("reading {}", args.targets.display()))?);
    if targets.is_empty() {
        return Err(user_error(format!("{} lists no targets", args.targets.display())));
    }
    manifest.input(&args.targets)?;
    let files = files_with_extension(&args.corpus, "txt")?;
    if files.is_empty() {
        return Err(user_error(format!("no .txt documents in {}", args.corpus.display())));
    }

    let mut out = BufWriter::new(File::create(&args.out).user(format!("creating {}", args.out.display()))?);
    let mut total = 0usize;
    for path in &files {
        let raw = fs::read_to_string(path).user(format!("reading {}", path.display()))?;
        manifest.input(path)?;
        let doc_id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let doc = if args.presegmented {
            Document::from_lines(doc_id, &raw)
        } else {
            Document::from_text(doc_id, &raw)
        };
        let doc = match doc {
            Ok(d) => d,
            Err(e) => {
                info!("skipping {}: {e}", path.display());
                continue;
            }
        };
        for t in &targets {
            for w in windows_for(&doc, t, args.size)? {
                serde_json::to_writer(&mut out, &w)?;
                out.write_all(b"\n")?;
                total += 1;
            }
        }
    }
    out.flush()?;
    drop(out);
    info!("wrote {total} windows from {} documents", files.len());
    manifest.param("windows", total);
    manifest.output(args.out.parent().unwrap_or(&args.out), &args.out)?;
    manifest.write(&sidecar_path(&args.out))?;
    Ok(())
}
