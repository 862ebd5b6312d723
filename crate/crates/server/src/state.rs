//! Collections known to the service and the jobs working on them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use missingpath_core::collection::{Collection, CollectionDescriptor, IngestStatus, DESCRIPTOR_FILE};

use crate::error::{ApiError, ApiResult};
use crate::jobs::{JobRegistry, ProjectionSlot};
use crate::log::ActionLog;

pub struct Entry {
    pub id: String,
    pub dir: PathBuf,
    descriptor: RwLock<CollectionDescriptor>,
    collection: RwLock<Option<Arc<Collection>>>,
    pub projection: Mutex<ProjectionSlot>,
}

impl Entry {
    fn new(dir: PathBuf, descriptor: CollectionDescriptor) -> Self {
        Entry {
            id: descriptor.collection_id.clone(),
            dir,
            descriptor: RwLock::new(descriptor),
            collection: RwLock::new(None),
            projection: Mutex::new(ProjectionSlot::default()),
        }
    }

    /// Latest descriptor, as written by the pipeline when it has written one.
    pub fn descriptor(&self) -> CollectionDescriptor {
        if let Ok(d) = CollectionDescriptor::read(&self.dir) {
            *self.descriptor.write().expect("descriptor lock poisoned") = d;
        }
        self.descriptor.read().expect("descriptor lock poisoned").clone()
    }

    pub fn set_descriptor(&self, d: CollectionDescriptor) {
        *self.descriptor.write().expect("descriptor lock poisoned") = d;
    }

    /// The loaded collection, opening it from disk on first use once ready.
    pub fn ready(&self) -> ApiResult<Arc<Collection>> {
        if let Some(c) = self.collection.read().expect("collection lock poisoned").clone() {
            return Ok(c);
        }
        let descriptor = self.descriptor();
        if descriptor.status != IngestStatus::Ready {
            return Err(ApiError::NotReady { collection_id: self.id.clone(), status: descriptor.status });
        }
        self.reload()
    }

    /// Re-reads the collection files.
    pub fn reload(&self) -> ApiResult<Arc<Collection>> {
        let c = Arc::new(Collection::open(&self.dir)?);
        *self.collection.write().expect("collection lock poisoned") = Some(c.clone());
        Ok(c)
    }

    pub fn unload(&self) {
        *self.collection.write().expect("collection lock poisoned") = None;
    }
}

pub struct AppState {
    pub data_dir: PathBuf,
    /// Used when a collection request names no source.
    pub default_endpoint: Option<String>,
    pub jobs: JobRegistry,
    pub log: ActionLog,
    collections: RwLock<BTreeMap<String, Arc<Entry>>>,
}

impl AppState {
    /// Opens `data_dir`, registering every collection directory found in it.
    pub fn open(data_dir: impl AsRef<Path>, default_endpoint: Option<String>) -> anyhow::Result<Self> {
        let data_dir = data_dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&data_dir)?;
        let mut collections = BTreeMap::new();
        for dir in std::fs::read_dir(&data_dir)? {
            let dir = dir?.path();
            if !dir.join(DESCRIPTOR_FILE).is_file() {
                continue;
            }
            match CollectionDescriptor::read(&dir) {
                Ok(d) => {
                    let entry = Entry::new(dir, d);
                    collections.insert(entry.id.clone(), Arc::new(entry));
                }
                Err(e) => tracing::warn!(dir = %dir.display(), error = %e, "skipping unreadable collection"),
            }
        }
        tracing::info!(count = collections.len(), dir = %data_dir.display(), "collections registered");
        Ok(AppState {
            log: ActionLog::open(&data_dir)?,
            data_dir,
            default_endpoint,
            jobs: JobRegistry::default(),
            collections: RwLock::new(collections),
        })
    }

    pub fn entry(&self, id: &str) -> ApiResult<Arc<Entry>> {
        self.collections
            .read()
            .expect("collections lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::UnknownCollection(id.to_string()))
    }

    pub fn entries(&self) -> Vec<Arc<Entry>> {
        self.collections.read().expect("collections lock poisoned").values().cloned().collect()
    }

    /// Registers a collection about to be ingested. An existing collection may only
    /// be replaced when its previous ingest failed.
    pub fn register(&self, descriptor: CollectionDescriptor) -> ApiResult<Arc<Entry>> {
        let mut collections = self.collections.write().expect("collections lock poisoned");
        let id = descriptor.collection_id.clone();
        if let Some(existing) = collections.get(&id) {
            match existing.descriptor().status {
                IngestStatus::Failed { .. } => {
                    existing.unload();
                    existing.set_descriptor(descriptor);
                    return Ok(existing.clone());
                }
                status => {
                    return Err(ApiError::Conflict(format!(
                        "collection {id} already exists with status {}",
                        serde_json::to_value(&status).map(|v| v["state"].to_string()).unwrap_or_default()
                    )))
                }
            }
        }
        let entry = Arc::new(Entry::new(self.data_dir.join(&id), descriptor));
        collections.insert(id, entry.clone());
        Ok(entry)
    }
}
