//! Content-addressed completion cache.
//!
//! Each entry is a JSON file at `<cache_dir>/<first2 of digest>/<digest>.json`
//! holding the request, the completion text, and a timestamp. The digest is a
//! SHA-256 over a canonical serialization of the request, so identical
//! requests hit the same file across processes and machines. Writes go
//! through a temp file and rename; a mutex serializes writers in-process.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::backend::CompletionRequest;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache i/o failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt cache entry at {path}: {source}")]
    Corrupt {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Stable digest over (backend_id, prompt, max_output_tokens, temperature,
/// stop_sequences). The fields are hashed in a fixed order, so the key does
/// not depend on any serialization quirk of the request struct.
pub fn cache_key(request: &CompletionRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"backend_id\0");
    hasher.update(request.backend_id.as_bytes());
    hasher.update(b"\0prompt\0");
    match &request.prompt {
        super::backend::Prompt::Single { text } => {
            hasher.update(b"single\0");
            hasher.update(text.as_bytes());
        }
        super::backend::Prompt::Chat { system, user } => {
            hasher.update(b"chat\0");
            hasher.update(system.as_bytes());
            hasher.update(b"\0");
            hasher.update(user.as_bytes());
        }
    }
    hasher.update(b"\0max_output_tokens\0");
    hasher.update(request.max_output_tokens.to_le_bytes());
    hasher.update(b"\0temperature\0");
    hasher.update(request.temperature.to_bits().to_le_bytes());
    hasher.update(b"\0stop_sequences\0");
    for stop in &request.stop_sequences {
        hasher.update(stop.as_bytes());
        hasher.update(b"\0");
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request: CompletionRequest,
    pub response: String,
    #[serde(default)]
    pub raw: serde_json::Value,
    pub timestamp: u64,
}

pub struct CompletionCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl CompletionCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<CompletionCache, CacheError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| CacheError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(CompletionCache {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> Result<Option<CacheEntry>, CacheError> {
        let path = self.entry_path(key);
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => {
                return Err(CacheError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let entry = serde_json::from_slice(&bytes).map_err(|source| CacheError::Corrupt {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Some(entry))
    }

    pub fn store(&self, key: &str, entry: &CacheEntry) -> Result<(), CacheError> {
        let _guard = self.write_lock.lock().unwrap();
        let path = self.entry_path(key);
        let parent = path.parent().unwrap();
        fs::create_dir_all(parent).map_err(|source| CacheError::Io {
            path: parent.display().to_string(),
            source,
        })?;
        let tmp = path.with_extension("json.tmp");
        let body = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        fs::write(&tmp, body).map_err(|source| CacheError::Io {
            path: tmp.display().to_string(),
            source,
        })?;
        fs::rename(&tmp, &path).map_err(|source| CacheError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(())
    }

    /// (entry count, total bytes) over the whole cache directory.
    pub fn stats(&self) -> Result<(usize, u64), CacheError> {
        let mut count = 0usize;
        let mut bytes = 0u64;
        for shard in fs::read_dir(&self.dir).map_err(|source| CacheError::Io {
            path: self.dir.display().to_string(),
            source,
        })? {
            let shard = shard.map_err(|source| CacheError::Io {
                path: self.dir.display().to_string(),
                source,
            })?;
            if !shard.path().is_dir() {
                continue;
            }
            for entry in fs::read_dir(shard.path()).map_err(|source| CacheError::Io {
                path: shard.path().display().to_string(),
                source,
            })? {
                let entry = entry.map_err(|source| CacheError::Io {
                    path: shard.path().display().to_string(),
                    source,
                })?;
                if entry.path().extension().map(|e| e == "json").unwrap_or(false) {
                    count += 1;
                    bytes += entry.metadata().map(|m| m.len()).unwrap_or(0);
                }
            }
        }
        Ok((count, bytes))
    }

    pub fn clear(&self) -> Result<usize, CacheError> {
        let (count, _) = self.stats()?;
        for shard in fs::read_dir(&self.dir)
            .map_err(|source| CacheError::Io {
                path: self.dir.display().to_string(),
                source,
            })?
            .flatten()
        {
            if shard.path().is_dir() {
                fs::remove_dir_all(shard.path()).map_err(|source| CacheError::Io {
                    path: shard.path().display().to_string(),
                    source,
                })?;
            }
        }
        Ok(count)
    }
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
