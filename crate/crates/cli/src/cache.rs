//! On-disk cache of chunk-mixture trajectories.
//!
//! Entries are keyed by a hash of the prepared tokens, the chunk size, the
//! topic-model settings and the topic-model seed, so a hit reproduces the
//! trajectory a retrain would give.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use levytopic::corpus::TokenStream;
use levytopic::flow::{topic_trajectory, FlowError};
use levytopic::levy::Trajectory;
use levytopic::simplex::SimplexPoint;
use levytopic::topics::LdaConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Entry {
    version: u32,
    key: String,
    source_id: String,
    k: usize,
    log_components: Vec<Vec<f64>>,
}

pub fn cache_key(stream: &TokenStream, k: usize, lda: &LdaConfig, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(CACHE_VERSION.to_le_bytes());
    h.update((stream.tokens.len() as u64).to_le_bytes());
    for t in &stream.tokens {
        h.update(t.as_bytes());
        h.update([0u8]);
    }
    h.update((k as u64).to_le_bytes());
    h.update(serde_json::to_vec(lda).expect("config serializes"));
    h.update(seed.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub struct TrajectoryCache {
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl TrajectoryCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TrajectoryCache {
            dir: dir.into(),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn read(&self, path: &Path, key: &str) -> Option<Trajectory> {
        let text = std::fs::read_to_string(path).ok()?;
        let e: Entry = serde_json::from_str(&text).ok()?;
        if e.version != CACHE_VERSION || e.key != key {
            return None;
        }
        let points = e
            .log_components
            .into_iter()
            .map(SimplexPoint::from_log_components)
            .collect::<Result<Vec<_>, _>>()
            .ok()?;
        Trajectory::from_points(points).ok()
    }

    /// Cached trajectory for `(stream, k, lda, seed)`, training on a miss.
    pub fn trajectory(
        &self,
        stream: &TokenStream,
        k: usize,
        lda: &LdaConfig,
        seed: u64,
    ) -> Result<Trajectory, FlowError> {
        let key = cache_key(stream, k, lda, seed);
        let path = self.path(&key);
        if let Some(t) = self.read(&path, &key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            log::debug!("cache hit for {} k={k}", stream.source_id);
            return Ok(t);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let traj = topic_trajectory(stream, k, lda, seed)?;
        let entry = Entry {
            version: CACHE_VERSION,
            key: key.clone(),
            source_id: stream.source_id.clone(),
            k,
            log_components: traj
                .points()
                .iter()
                .map(|p| p.log_components().to_vec())
                .collect(),
        };
        // A failed write only costs a retrain next time.
        let write = std::fs::create_dir_all(&self.dir).and_then(|_| {
            let tmp = self.dir.join(format!("{key}.tmp"));
            std::fs::write(
                &tmp,
                serde_json::to_string(&entry).expect("entry serializes"),
            )?;
            std::fs::rename(&tmp, &path)
        });
        if let Err(e) = write {
            log::warn!("could not write cache entry {}: {e}", path.display());
        }
        Ok(traj)
    }
}
