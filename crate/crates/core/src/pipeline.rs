//! End-to-end configuration plus the train and segment entry points shared
//! by the evaluation harness and the command-line tool.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_video_features, ExtractionConfig, FeatureVector, FrameFeatures};
use crate::frame_io::{FrameSequence, LabelTrack};
use crate::gmm::{em_fit, FitConfig, GmmModel, TrainMeta};
use crate::segmenter::{segment_video_detailed, window_in_retained_frames, ModelBank, Segmentation, SegmentationTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub extraction: ExtractionConfig,
    /// Sliding window length in original frames.
    pub window_frames: usize,
    pub fit: FitConfig,
    /// Train one model per (action, scenario) instead of one per action.
    pub per_scenario: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            extraction: ExtractionConfig::default(),
            window_frames: 25,
            fit: FitConfig {
                n_components: 1024,
                ..FitConfig::default()
            },
            per_scenario: true,
        }
    }
}

impl PipelineConfig {
    /// Settings for the small synthetic benchmark: four components, one model per action.
    pub fn synthetic() -> Self {
        Self {
            fit: FitConfig {
                n_components: 4,
                ..FitConfig::default()
            },
            per_scenario: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.extraction.validate()?;
        self.fit.validate()?;
        if self.window_frames == 0 {
            return Err(Error::InvalidInput("window_frames must be >= 1".into()));
        }
        Ok(())
    }

    /// Window length in retained (post-stride) frames.
    pub fn window_retained(&self) -> usize {
        window_in_retained_frames(self.window_frames, self.extraction.frame_stride)
    }
}

/// A single-action clip.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledVideo {
    pub frames: FrameSequence,
    pub action: String,
    /// Empty when scenarios are not tracked.
    pub scenario: String,
    /// Stitching group (1 or 2).
    pub group: u8,
}

/// Descriptors of one training clip.
#[derive(Debug, Clone)]
pub struct TrainingClip {
    pub features: Vec<FrameFeatures>,
    pub action: String,
    pub scenario: String,
}

/// Fits one model per action, or per (action, scenario) when `per_scenario`
/// is set, from the pooled descriptors of every matching clip.
pub fn train_models(clips: &[TrainingClip], cfg: &PipelineConfig) -> Result<Vec<GmmModel>> {
    cfg.validate()?;
    let mut pools: BTreeMap<(String, String), Vec<FeatureVector>> = BTreeMap::new();
    for clip in clips {
        let scenario = if cfg.per_scenario {
            clip.scenario.clone()
        } else {
            String::new()
        };
        let pool = pools.entry((clip.action.clone(), scenario)).or_default();
        for ff in &clip.features {
            pool.extend_from_slice(&ff.vectors);
        }
    }
    pools
        .into_par_iter()
        .map(|((action, scenario), pool)| {
            if pool.len() < cfg.fit.n_components {
                return Err(Error::NoTrainingData(if scenario.is_empty() {
                    action
                } else {
                    format!("{action}/{scenario}")
                }));
            }
            let mut model = em_fit(&pool, &cfg.fit)?.with_labels(action, scenario);
            model.meta = Some(TrainMeta {
                tau: Some(cfg.extraction.tau),
                stride: Some(cfg.extraction.frame_stride),
                fit_config: cfg.fit,
                data_count: pool.len(),
            });
            Ok(model)
        })
        .collect()
}

/// Extracts descriptors from every clip and trains the model bank.
pub fn train_bank(videos: &[LabelledVideo], cfg: &PipelineConfig) -> Result<ModelBank> {
    let clips = videos
        .iter()
        .map(|v| {
            Ok(TrainingClip {
                features: extract_video_features(&v.frames, &cfg.extraction)?,
                action: v.action.clone(),
                scenario: v.scenario.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ModelBank::from_models(train_models(&clips, cfg)?)
}

/// Segments pre-extracted descriptors of a video with `n_frames` frames.
pub fn segment_features(
    features: &[FrameFeatures],
    n_frames: usize,
    bank: &ModelBank,
    cfg: &PipelineConfig,
) -> Result<(Segmentation, SegmentationTrace)> {
    segment_video_detailed(features, bank, cfg.window_retained(), n_frames)
}

pub fn segment_sequence(
    seq: &FrameSequence,
    bank: &ModelBank,
    cfg: &PipelineConfig,
) -> Result<Segmentation> {
    cfg.validate()?;
    let features = extract_video_features(seq, &cfg.extraction)?;
    segment_features(&features, seq.len(), bank, cfg).map(|(s, _)| s)
}

/// Wraps per-frame ordinals from `bank` into a label track.
pub fn segmentation_track(seg: &Segmentation, bank: &ModelBank) -> Result<LabelTrack> {
    LabelTrack::new(seg.frame_labels.clone(), bank.action_names().to_vec())
}
