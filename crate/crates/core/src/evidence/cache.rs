use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SearchResultPage;
use crate::claim::{EvidenceSnippet, SourceKind};

pub const CACHE_DIR_ENV: &str = "STEPCHECK_CACHE_DIR";
const CACHE_SCHEMA: &str = "stepcheck-cache/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub question: String,
    pub source_kind: SourceKind,
    pub snippets: Vec<EvidenceSnippet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<SearchResultPage>,
}

#[derive(Serialize, Deserialize)]
struct StoredEntry {
    schema: String,
    key: String,
    #[serde(flatten)]
    entry: CacheEntry,
}

/// One JSON file per key at `<dir>/<first two hex chars>/<key>.json`.
/// Writes go to a temporary file in the same directory and are renamed
/// into place, so readers never see a partial entry.
#[derive(Debug, Clone)]
pub struct EvidenceCache {
    dir: PathBuf,
}

impl EvidenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("__");
        self.dir.join(shard).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> io::Result<Option<CacheEntry>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let stored: StoredEntry = serde_json::from_slice(&bytes)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
        if stored.schema != CACHE_SCHEMA || stored.key != key {
            log::warn!("ignoring stale cache entry {}", path.display());
            return Ok(None);
        }
        Ok(Some(stored.entry))
    }

    pub fn put(&self, key: &str, entry: &CacheEntry) -> io::Result<()> {
        let path = self.path_for(key);
        let parent = path.parent().expect("cache path has a parent");
        fs::create_dir_all(parent)?;
        let stored = StoredEntry {
            schema: CACHE_SCHEMA.to_string(),
            key: key.to_string(),
            entry: entry.clone(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        serde_json::to_writer_pretty(&mut tmp, &stored)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    /// Removes every entry file; returns how many were deleted.
    pub fn clear(&self) -> io::Result<usize> {
        if !self.dir.exists() {
            return Ok(0);
        }
        let mut removed = 0;
        for shard in fs::read_dir(&self.dir)? {
            let shard = shard?.path();
            if !shard.is_dir() {
                continue;
            }
            for file in fs::read_dir(&shard)? {
                let file = file?.path();
                if file.extension().is_some_and(|e| e == "json") {
                    fs::remove_file(&file)?;
                    removed += 1;
                }
            }
            // Leaves non-empty shards (foreign files) alone.
            let _ = fs::remove_dir(&shard);
        }
        Ok(removed)
    }
}
