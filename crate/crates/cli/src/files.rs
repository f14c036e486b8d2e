//! Corpus layout, staged output directories and manifests.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gaze_events::ingest::{read_session_csv, GazeSample};
use gaze_events::protocol::StimulusProtocol;

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

pub fn session_csv(id: &str) -> String {
    format!("{id}.csv")
}

pub fn protocol_json(id: &str) -> String {
    format!("{id}.protocol.json")
}

pub fn truth_csv(id: &str) -> String {
    format!("{id}.truth.csv")
}

pub fn fixations_csv(id: &str) -> String {
    format!("{id}.fixations.csv")
}

pub fn labels_csv(id: &str) -> String {
    format!("{id}.labels.csv")
}

/// Session ids in a corpus directory, sorted: every `<id>.csv` whose stem has
/// no further dot-suffix.
pub fn list_sessions(dir: &Path) -> CliResult<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(stem) = name.strip_suffix(".csv") {
            if !stem.contains('.') && entry.path().is_file() {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    if ids.is_empty() {
        return Err(CliError::Data(format!("{}: no session CSV files", dir.display())));
    }
    Ok(ids)
}

/// A raw session and its protocol.
pub struct CorpusEntry {
    pub id: String,
    pub samples: Vec<GazeSample>,
    pub protocol: StimulusProtocol,
}

pub fn read_corpus(dir: &Path) -> CliResult<Vec<CorpusEntry>> {
    list_sessions(dir)?
        .into_iter()
        .map(|id| {
            let samples = read_session_csv(&dir.join(session_csv(&id))).map_err(|e| CliError::from(e).context(&id))?;
            let protocol_path = dir.join(protocol_json(&id));
            if !protocol_path.is_file() {
                return Err(CliError::Data(format!("{id}: missing {}", protocol_json(&id))));
            }
            let protocol = StimulusProtocol::read(&protocol_path).map_err(|e| CliError::from(e).context(&id))?;
            Ok(CorpusEntry { id, samples, protocol })
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn digests(dir: &Path, names: &[String]) -> CliResult<Vec<FileDigest>> {
    names
        .iter()
        .map(|name| {
            Ok(FileDigest {
                name: name.clone(),
                sha256: file_sha256(&dir.join(name))?,
            })
        })
        .collect()
}

pub fn require_dir(path: &Path) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: not a directory", path.display())))
    }
}

/// Output written into a hidden sibling directory and renamed into place by
/// [`commit`](Self::commit), so a failed run leaves nothing behind.
pub struct StagedDir {
    target: PathBuf,
    staging: PathBuf,
    committed: bool,
}

impl StagedDir {
    pub fn create(target: &Path) -> CliResult<Self> {
        if target.exists() {
            let empty = target.is_dir()
                && fs::read_dir(target)
                    .map_err(|e| CliError::io(target, e))?
                    .next()
                    .is_none();
            if !empty {
                return Err(CliError::Usage(format!(
                    "{}: output already exists and is not an empty directory",
                    target.display()
                )));
            }
        }
        let name = target
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| CliError::Usage(format!("{}: invalid output path", target.display())))?;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;
        Ok(StagedDir {
            target: target.to_path_buf(),
            staging,
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.staging
    }

    pub fn commit(mut self) -> CliResult<PathBuf> {
        if self.target.exists() {
            fs::remove_dir(&self.target).map_err(|e| CliError::io(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| CliError::io(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

pub fn create_file(path: &Path) -> CliResult<BufWriter<fs::File>> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(BufWriter::new(file))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

/// Provenance for one command's output directory. Holds no timestamps or
/// absolute paths, so identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, seed: Option<u64>, config: &C) -> CliResult<Self> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Internal(e.to_string()))?;
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config_hash: config_hash(&config)?,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Short identifier used to tag normalized reports.
    pub fn run_id(&self) -> String {
        format!("{}-{}", self.command, &self.config_hash[..12])
    }

    pub fn add_inputs(&mut self, dir: &Path, names: &[String]) -> CliResult<()> {
        self.inputs.extend(digests(dir, names)?);
        Ok(())
    }

    /// Hashes every file under `dir` except the manifest and writes it.
    pub fn finish(self, dir: &Path) -> CliResult<()> {
        self.finish_excluding(dir, &[])
    }

    /// As [`finish`](Self::finish), skipping top-level entries in `exclude`.
    pub fn finish_excluding(mut self, dir: &Path, exclude: &[&str]) -> CliResult<()> {
        let mut outputs = Vec::new();
        collect_digests(dir, dir, &mut outputs)?;
        outputs.retain(|d| {
            !exclude
                .iter()
                .any(|x| d.name == *x || d.name.starts_with(&format!("{x}/")))
        });
        outputs.sort_by(|a, b| a.name.cmp(&b.name));
        self.outputs = outputs;
        write_json(&dir.join(MANIFEST), &self)
    }
}

fn collect_digests(root: &Path, dir: &Path, out: &mut Vec<FileDigest>) -> CliResult<()> {
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() {
            collect_digests(root, &path, out)?;
            continue;
        }
        let rel = path.strip_prefix(root).map_err(|e| CliError::Internal(e.to_string()))?;
        let name = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if name == MANIFEST {
            continue;
        }
        out.push(FileDigest {
            name,
            sha256: file_sha256(&path)?,
        });
    }
    Ok(())
}

pub fn config_hash(config: &serde_json::Value) -> CliResult<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(sha256_hex(&bytes))
}

pub fn read_manifest(dir: &Path) -> CliResult<Manifest> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Err(CliError::Data(format!("{}: no {MANIFEST}", dir.display())));
    }
    read_json(&path)
}
