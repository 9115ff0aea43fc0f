//! Temporal action segmentation from dense motion and gradient descriptors
//! scored by per-action Gaussian mixture models.

pub mod error;
pub mod eval;
pub mod features;
pub mod field;
pub mod frame_io;
pub mod gmm;
pub mod motion;
pub mod pipeline;
pub mod segmenter;

pub use error::{Error, Result};
pub use eval::{
    frame_accuracy, kfold_split, stitch_sequences, synth_generate, synthetic_cross_validation, synthetic_folds,
    CrossValReport, EvalReport, SynthProtocol, SynthSpec, TestVideo,
};
pub use features::{
    extract_video_features, ExtractionConfig, FeatureVector, FrameFeatures, FEATURE_DIM,
};
pub use field::ScalarField;
pub use frame_io::{
    load_labels, load_sequence, Frame, FrameSequence, LabelTrack, Segment, SequenceFormat,
};
pub use gmm::{em_fit, load_model, save_model, FitConfig, GmmModel};
pub use motion::{horn_schunck, FlowField};
pub use pipeline::{train_bank, LabelledVideo, PipelineConfig};
pub use segmenter::{merge_short_segments, segment_video, ModelBank, Segmentation};
