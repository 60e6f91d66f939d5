//! Durable store of user preference profiles and audio catalog metadata.
//!
//! Single structured document on disk, replaced atomically on every
//! write; concurrent writers are serialized with an advisory file lock.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{AsqmError, Result};
use crate::qoe::Category;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub preferred_categories: BTreeSet<Category>,
    /// Incremented on every upsert of this profile.
    #[serde(default)]
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioRecord {
    pub audio_id: String,
    pub category: Category,
    pub media_len: f64,
    pub codec: String,
    pub bitrate_kbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoreDoc {
    schema_version: u32,
    categories: BTreeSet<Category>,
    users: BTreeMap<String, UserProfile>,
    audios: BTreeMap<String, AudioRecord>,
}

impl StoreDoc {
    fn empty(categories: BTreeSet<Category>) -> Self {
        Self { schema_version: SCHEMA_VERSION, categories, users: BTreeMap::new(), audios: BTreeMap::new() }
    }
}

/// Default category vocabulary.
pub fn default_categories() -> BTreeSet<Category> {
    ["music", "sport", "news", "documentary"]
        .iter()
        .map(|c| Category::new(c))
        .collect()
}

pub struct PrefStore {
    path: PathBuf,
    doc: StoreDoc,
}

impl PrefStore {
    /// Opens the store at `path`, creating an empty document with the
    /// given category vocabulary when the file does not exist.
    pub fn open(path: &Path, categories: BTreeSet<Category>) -> Result<Self> {
        let doc = if path.exists() {
            let bytes = fs::read(path)?;
            let doc: StoreDoc = serde_json::from_slice(&bytes)
                .map_err(|e| AsqmError::Parse { line: 0, message: e.to_string() })?;
            if doc.schema_version != SCHEMA_VERSION {
                return Err(AsqmError::Config(format!(
                    "store schema version {} unsupported (expected {SCHEMA_VERSION})",
                    doc.schema_version
                )));
            }
            doc
        } else {
            StoreDoc::empty(categories)
        };
        Ok(Self { path: path.to_path_buf(), doc })
    }

    pub fn categories(&self) -> &BTreeSet<Category> {
        &self.doc.categories
    }

    fn persist(&self) -> Result<()> {
        let dir = self.path.parent().unwrap_or_else(|| Path::new("."));
        fs::create_dir_all(dir)?;
        let lock_path = self.path.with_extension("lock");
        let lock = fs::OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)?;
        lock.lock()?;
        let tmp_path = self.path.with_extension("tmp");
        {
            let mut tmp = fs::File::create(&tmp_path)?;
            serde_json::to_writer_pretty(&mut tmp, &self.doc)
                .map_err(|e| AsqmError::Parse { line: 0, message: e.to_string() })?;
            tmp.write_all(b"\n")?;
            tmp.sync_all()?;
        }
        fs::rename(&tmp_path, &self.path)?;
        lock.unlock()?;
        Ok(())
    }

    fn check_category(&self, category: &Category) -> Result<()> {
        if !self.doc.categories.contains(category) {
            return Err(AsqmError::Config(format!(
                "category \"{category}\" not in the configured vocabulary"
            )));
        }
        Ok(())
    }

    /// Inserts or replaces a profile, returning the stored version.
    pub fn upsert_profile(&mut self, mut profile: UserProfile) -> Result<u64> {
        for category in &profile.preferred_categories {
            self.check_category(category)?;
        }
        profile.version = self
            .doc
            .users
            .get(&profile.user_id)
            .map(|existing| existing.version + 1)
            .unwrap_or(1);
        let version = profile.version;
        self.doc.users.insert(profile.user_id.clone(), profile);
        self.persist()?;
        Ok(version)
    }

    pub fn get_profile(&self, user_id: &str) -> Result<&UserProfile> {
        self.doc
            .users
            .get(user_id)
            .ok_or_else(|| AsqmError::UserNotFound(user_id.to_string()))
    }

    pub fn upsert_audio(&mut self, record: AudioRecord) -> Result<()> {
        self.check_category(&record.category)?;
        if !(record.media_len > 0.0) || !(record.bitrate_kbps > 0.0) {
            return Err(AsqmError::InvalidInput(format!(
                "audio {}: media length and bitrate must be positive",
                record.audio_id
            )));
        }
        self.doc.audios.insert(record.audio_id.clone(), record);
        self.persist()
    }

    pub fn get_audio(&self, audio_id: &str) -> Result<&AudioRecord> {
        self.doc
            .audios
            .get(audio_id)
            .ok_or_else(|| AsqmError::AudioNotFound(audio_id.to_string()))
    }

    /// True iff the audio's category is in the user's preferred set.
    pub fn has_preference(&self, user_id: &str, audio_id: &str) -> Result<bool> {
        let profile = self.get_profile(user_id)?;
        let audio = self.get_audio(audio_id)?;
        Ok(profile.preferred_categories.contains(&audio.category))
    }
}
