//! On-disk descriptor cache keyed by video content and extraction settings.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use actionseg::features::{read_feature_dump, write_feature_dump};
use actionseg::{extract_video_features, ExtractionConfig, FrameFeatures, FrameSequence};
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "ACTIONSEG_CACHE_DIR";

pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("actionseg-cache"));
        Self { dir }
    }

    pub fn key(seq: &FrameSequence, cfg: &ExtractionConfig) -> String {
        let mut h = Sha256::new();
        h.update(b"actionseg-features-v1\n");
        h.update(seq.content_hash().as_bytes());
        h.update(cfg.tau.to_bits().to_le_bytes());
        h.update((cfg.frame_stride as u64).to_le_bytes());
        h.update(cfg.hs_alpha.to_bits().to_le_bytes());
        h.update((cfg.hs_iters as u64).to_le_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.feat"))
    }

    /// Cached descriptors if present and readable, otherwise extracts and
    /// stores them. Cache failures never fail the caller.
    pub fn features(
        &self,
        seq: &FrameSequence,
        cfg: &ExtractionConfig,
    ) -> actionseg::Result<Vec<FrameFeatures>> {
        let key = Self::key(seq, cfg);
        let path = self.path(&key);
        if let Ok(file) = fs::File::open(&path) {
            if let Ok(f) = read_feature_dump(BufReader::new(file)) {
                if f.len() == cfg.retained_frames(seq.len()).len() {
                    return Ok(f);
                }
            }
        }
        let features = extract_video_features(seq, cfg)?;
        self.store(&key, &features);
        Ok(features)
    }

    fn store(&self, key: &str, features: &[FrameFeatures]) {
        if fs::create_dir_all(&self.dir).is_err() {
            return;
        }
        let tmp = self.dir.join(format!("{key}.{}.tmp", std::process::id()));
        let written = fs::File::create(&tmp)
            .ok()
            .and_then(|f| write_feature_dump(features, BufWriter::new(f)).ok());
        if written.is_none() || fs::rename(&tmp, self.path(key)).is_err() {
            let _ = fs::remove_file(&tmp);
        }
    }
}
