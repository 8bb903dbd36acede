//! Persistent response cache: one file per request digest.
//!
//! Each entry file starts with a `sha256:<hex>` line covering the payload
//! bytes that follow; a mismatch on read is reported as corruption.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{LmBackend, LmError, LmReply, LmRequest, LmResponse};

#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LmError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ResponseCache {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> Result<PathBuf, LmError> {
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(LmError::InvalidRequest(format!(
                "cache key {key:?} is not a hex digest"
            )));
        }
        Ok(self.dir.join(key))
    }

    pub fn get(&self, key: &str) -> Result<Option<Vec<u8>>, LmError> {
        let path = self.entry_path(key)?;
        let raw = match fs::read(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let newline = raw
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| LmError::CacheCorrupt(key.to_string()))?;
        let (header, payload) = (&raw[..newline], &raw[newline + 1..]);
        let expected = format!("sha256:{}", hex::encode(Sha256::digest(payload)));
        if header != expected.as_bytes() {
            return Err(LmError::CacheCorrupt(key.to_string()));
        }
        Ok(Some(payload.to_vec()))
    }

    /// Stores `payload` under `key`. An existing entry is left untouched.
    pub fn put(&self, key: &str, payload: &[u8]) -> Result<(), LmError> {
        let path = self.entry_path(key)?;
        let _guard = self.write_lock.lock().expect("cache lock");
        if path.exists() {
            return Ok(());
        }
        let tmp = self.dir.join(format!(".{key}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            writeln!(f, "sha256:{}", hex::encode(Sha256::digest(payload)))?;
            f.write_all(payload)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn len(&self) -> Result<usize, LmError> {
        Ok(fs::read_dir(&self.dir)?
            .filter_map(Result::ok)
            .filter(|e| !e.file_name().to_string_lossy().starts_with('.'))
            .count())
    }

    pub fn is_empty(&self) -> Result<bool, LmError> {
        Ok(self.len()? == 0)
    }
}

/// Wraps a backend with a [`ResponseCache`].
///
/// Probability, likelihood and greedy requests are always cached. Sampled
/// generations are cached only when a run seed is configured, and the seed
/// becomes part of the key.
pub struct CachedBackend<B> {
    inner: B,
    cache: ResponseCache,
    seed: Option<u64>,
}

impl<B: LmBackend> CachedBackend<B> {
    pub fn new(inner: B, cache: ResponseCache, seed: Option<u64>) -> Self {
        CachedBackend { inner, cache, seed }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn key(&self, request: &LmRequest) -> Option<String> {
        let seed = if request.kind.is_stochastic() {
            Some(self.seed?)
        } else {
            None
        };
        let mut h = Sha256::new();
        h.update(self.inner.id().as_bytes());
        h.update(b"\n");
        h.update(request.kind.digest().as_bytes());
        if let Some(seed) = seed {
            h.update(format!("\nseed:{seed}").as_bytes());
        }
        Some(hex::encode(h.finalize()))
    }
}

impl<B: LmBackend> LmBackend for CachedBackend<B> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn call(&self, request: &LmRequest) -> Result<LmReply, LmError> {
        let Some(key) = self.key(request) else {
            return self.inner.call(request);
        };
        if let Some(bytes) = self.cache.get(&key)? {
            let response: LmResponse =
                serde_json::from_slice(&bytes).map_err(|_| LmError::CacheCorrupt(key.clone()))?;
            return Ok(LmReply {
                response,
                cached: true,
            });
        }
        let reply = self.inner.call(request)?;
        let bytes = serde_json::to_vec(&reply.response).expect("response serializes");
        self.cache.put(&key, &bytes)?;
        Ok(reply)
    }
}
