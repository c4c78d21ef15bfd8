pub mod agreement;
pub mod casestudy;
pub mod diversity;
pub mod interaction;
pub mod simulate;
pub mod synth;
pub mod windows;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliResult, UserContext};

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).user(format!("creating output directory {}", dir.display()))
}

/// Regular files in `dir` with the given extension, sorted by name.
pub fn files_with_extension(dir: &Path, ext: &str) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).user(format!("reading directory {}", dir.display()))? {
        let path = entry.user(format!("reading directory {}", dir.display()))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}
