//! On-disk artifacts and the in-memory registry rebuilt from them.
//!
//! Layout under the root directory:
//! `datasets/<fingerprint>.csv`, `models/<id>.json` with its registry entry
//! in `models/<id>.entry.json`, and `jobs/<id>.json` with campaign reports in
//! `jobs/<id>.report.json`. Files are written to a temporary name and renamed
//! so a reader never sees a partial artifact.

use dispute_core::data::{parse_dataset, DataError, Dataset, VariableSchema};
use dispute_core::model::{ModelArtifact, ModelKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub model_id: String,
    pub kind: ModelKind,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    /// SHA-256 of the training dataset CSV.
    pub dataset_fingerprint: String,
    /// Artifact file name inside the models directory.
    pub artifact_path: String,
}

pub struct RegisteredModel {
    pub entry: ModelEntry,
    pub artifact: ModelArtifact,
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

/// Ids become file names, so only hex digits and dashes are accepted.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_hexdigit() || c == '-')
}

pub struct Store {
    root: PathBuf,
    models: RwLock<BTreeMap<String, Arc<RegisteredModel>>>,
    writer: Mutex<()>,
}

impl Store {
    /// Creates the directory layout if needed and registers every loadable
    /// model. Unloadable artifacts are skipped with a warning.
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Store> {
        let root = root.into();
        for sub in ["datasets", "models", "jobs"] {
            fs::create_dir_all(root.join(sub))?;
        }
        let mut models = BTreeMap::new();
        for item in fs::read_dir(root.join("models"))? {
            let path = item?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            if !name.ends_with(".entry.json") {
                continue;
            }
            match load_model(&root.join("models"), &path) {
                Ok(m) => {
                    models.insert(m.entry.model_id.clone(), Arc::new(m));
                }
                Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
            }
        }
        tracing::info!("registered {} models from {}", models.len(), root.display());
        Ok(Store {
            root,
            models: RwLock::new(models),
            writer: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn jobs_dir(&self) -> PathBuf {
        self.root.join("jobs")
    }

    /// Validates and stores a CSV upload; the id is its content hash.
    pub fn put_dataset(&self, csv: &str) -> Result<(String, Dataset), DataError> {
        let ds = parse_dataset(csv, &VariableSchema::standard())?;
        let id = fingerprint(csv.as_bytes());
        let path = self.root.join("datasets").join(format!("{id}.csv"));
        let _w = self.writer.lock().expect("writer lock");
        if !path.exists() {
            write_atomic(&path, csv.as_bytes()).map_err(|e| DataError::InvalidConfig(format!("storing dataset: {e}")))?;
        }
        Ok((id, ds))
    }

    /// The dataset and its fingerprint, or `None` when unknown.
    pub fn dataset(&self, id: &str) -> Option<Result<Dataset, DataError>> {
        if !valid_id(id) {
            return None;
        }
        let text = fs::read_to_string(self.root.join("datasets").join(format!("{id}.csv"))).ok()?;
        Some(parse_dataset(&text, &VariableSchema::standard()))
    }

    pub fn model(&self, id: &str) -> Option<Arc<RegisteredModel>> {
        self.models.read().expect("registry lock").get(id).cloned()
    }

    /// Entries ordered by creation time, then id.
    pub fn entries(&self) -> Vec<ModelEntry> {
        let mut out: Vec<ModelEntry> = self
            .models
            .read()
            .expect("registry lock")
            .values()
            .map(|m| m.entry.clone())
            .collect();
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.model_id.cmp(&b.model_id)));
        out
    }

    /// Persists and registers a new model under a fresh id.
    pub fn register(&self, artifact: ModelArtifact, dataset_fingerprint: String) -> io::Result<ModelEntry> {
        let model_id = uuid::Uuid::new_v4().to_string();
        let entry = ModelEntry {
            model_id: model_id.clone(),
            kind: artifact.kind,
            created_at: now_unix(),
            dataset_fingerprint,
            artifact_path: format!("{model_id}.json"),
        };
        let dir = self.root.join("models");
        let entry_json = serde_json::to_string_pretty(&entry).expect("entry serializes");
        {
            let _w = self.writer.lock().expect("writer lock");
            write_atomic(&dir.join(&entry.artifact_path), artifact.to_json().as_bytes())?;
            write_atomic(&dir.join(format!("{model_id}.entry.json")), entry_json.as_bytes())?;
        }
        self.models.write().expect("registry lock").insert(
            model_id,
            Arc::new(RegisteredModel {
                entry: entry.clone(),
                artifact,
            }),
        );
        Ok(entry)
    }
}

fn load_model(dir: &Path, entry_path: &Path) -> Result<RegisteredModel, String> {
    let entry: ModelEntry = serde_json::from_str(&fs::read_to_string(entry_path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if !valid_id(&entry.model_id) || entry.artifact_path.contains(['/', '\\']) {
        return Err("entry names an invalid id or path".into());
    }
    let text = fs::read_to_string(dir.join(&entry.artifact_path)).map_err(|e| e.to_string())?;
    let artifact = ModelArtifact::from_json(&text).map_err(|e| e.to_string())?;
    if artifact.kind != entry.kind {
        return Err("entry kind differs from the artifact".into());
    }
    Ok(RegisteredModel { entry, artifact })
}
