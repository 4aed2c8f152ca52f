use super::config::RunConfig;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";

/// Everything needed to reproduce a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub threads: usize,
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

/// Output directory `<root>/<command>-<model>-<hash>`, addressed by the
/// SHA-256 of the command and its resolved config. Files are written to a
/// temporary name and renamed into place.
pub struct RunDir {
    path: PathBuf,
    command: String,
    hash: String,
    files: Vec<String>,
}

pub fn config_hash(command: &str, cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(cfg.to_json().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl RunDir {
    pub fn create(root: &Path, command: &str, cfg: &RunConfig) -> Result<Self> {
        let hash = config_hash(command, cfg);
        let path = root.join(format!("{command}-{}-{}", cfg.model.name(), &hash[..12]));
        fs::create_dir_all(&path)?;
        Ok(Self { path, command: command.into(), hash, files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes a file atomically through `fill`.
    pub fn write(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let target = self.path.join(name);
        let tmp = self.path.join(format!(".{name}.tmp"));
        fs::write(&tmp, &buf)?;
        fs::rename(&tmp, &target)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.into());
        }
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, |b| {
            serde_json::to_writer_pretty(&mut *b, value)?;
            b.push(b'\n');
            Ok(())
        })
    }

    /// Writes the manifest last, so its presence marks a complete run.
    pub fn finish(mut self, cfg: &RunConfig, threads: usize, summary: serde_json::Value) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.clone(),
            config_hash: self.hash.clone(),
            config: cfg.clone(),
            threads,
            files: self.files.clone(),
            summary,
        };
        self.write_json(MANIFEST, &manifest)?;
        Ok(self.path)
    }
}

/// Manifests of every complete run below `root`, sorted by directory name.
pub fn collect_manifests(root: &Path) -> Result<Vec<(PathBuf, Manifest)>> {
    let mut out = Vec::new();
    if !root.exists() {
        return Ok(out);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
    dirs.sort();
    for d in dirs {
        let m = d.join(MANIFEST);
        if let Ok(text) = fs::read_to_string(&m) {
            if let Ok(man) = serde_json::from_str::<Manifest>(&text) {
                out.push((d, man));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_addressed_and_complete() {
        let root = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        let mut a = RunDir::create(root.path(), "thresholds", &cfg).unwrap();
        a.write("x.csv", |b| {
            b.extend_from_slice(b"k,v\n");
            Ok(())
        })
        .unwrap();
        let pa = a.finish(&cfg, 1, serde_json::json!({"ok": true})).unwrap();
        let b = RunDir::create(root.path(), "thresholds", &cfg).unwrap();
        assert_eq!(b.path(), pa);
        let found = collect_manifests(root.path()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].1.files, vec!["x.csv".to_string()]);
        assert_eq!(found[0].1.config, cfg);
        let mut other = cfg.clone();
        other.seed = 9;
        assert_ne!(config_hash("thresholds", &cfg), config_hash("thresholds", &other));
    }
}
