//! Run manifests: what was run, on which inputs, producing which outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    /// sha256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of every output file, keyed by path relative to the output root.
    pub outputs: BTreeMap<String, String>,
    pub tool_version: String,
    pub backend: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            backend: if ambigeo_core::is_parallel() { "rayon" } else { "sequential" }.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.parameters.insert(key.to_string(), v);
        self
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, root: &Path, path: &Path) -> std::io::Result<()> {
        let key = path.strip_prefix(root).unwrap_or(path);
        self.outputs.insert(key.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Where the manifest for a single-file output goes.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_sits_next_to_output() {
        assert_eq!(sidecar_path(Path::new("out/div.csv")), Path::new("out/div.csv.manifest.json"));
    }

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
