use std::path::PathBuf;

use ambigeo_core::geometry::PairRecord;
use ambigeo_core::stats::interaction_model;
use serde::Serialize;

use super::simulate::{coefficient_table, read_csv, Term};
use super::write_json;
use crate::error::{CliResult, UserContext};
use crate::manifest::{sidecar_path, RunManifest};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// pairs.csv of the reference word (coded 0).
    #[arg(long)]
    reference: PathBuf,
    /// pairs.csv of the contrast word (coded 1).
    #[arg(long)]
    contrast: PathBuf,
    /// Model JSON output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Report {
    reference_word: String,
    contrast_word: String,
    n: usize,
    coefficients: Vec<Term>,
    r_squared: f64,
    df_residual: usize,
}

pub fn run(args: Args) -> CliResult<()> {
    let mut manifest = RunManifest::new("interaction");
    manifest.param("reference", &args.reference).param("contrast", &args.contrast);
    let reference: Vec<PairRecord> = read_csv(&args.reference)?;
    let contrast: Vec<PairRecord> = read_csv(&args.contrast)?;
    manifest.input(&args.reference)?;
    manifest.input(&args.contrast)?;
    let m = interaction_model(&reference, &contrast).user("fitting the interaction model")?;
    let f = &m.fit;
    let report = Report {
        reference_word: m.reference_word.clone(),
        contrast_word: m.contrast_word.clone(),
        n: reference.len() + contrast.len(),
        coefficients: coefficient_table(&m.terms, f),
        r_squared: f.r_squared,
        df_residual: f.df_residual,
    };
    write_json(&args.out, &report)?;
    manifest.output(args.out.parent().unwrap_or(&args.out), &args.out)?;
    manifest.write(&sidecar_path(&args.out))?;
    Ok(())
}
