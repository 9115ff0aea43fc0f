use std::fs;
use std::path::Path;

use actionseg::gmm::FitConfig;
use actionseg::{ExtractionConfig, PipelineConfig};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Flat key/value settings file. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub tau: f64,
    pub frame_stride: usize,
    pub window_frames: usize,
    pub n_components: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub var_floor: f64,
    pub kmeans_iters: usize,
    pub hs_alpha: f64,
    pub hs_iters: usize,
    pub seed: u64,
    pub per_scenario: bool,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self::from_pipeline(&PipelineConfig::default())
    }
}

impl ConfigFile {
    fn from_pipeline(cfg: &PipelineConfig) -> Self {
        Self {
            tau: cfg.extraction.tau,
            frame_stride: cfg.extraction.frame_stride,
            window_frames: cfg.window_frames,
            n_components: cfg.fit.n_components,
            max_iters: cfg.fit.max_iters,
            rel_tol: cfg.fit.rel_tol,
            var_floor: cfg.fit.var_floor,
            kmeans_iters: cfg.fit.kmeans_iters,
            hs_alpha: cfg.extraction.hs_alpha,
            hs_iters: cfg.extraction.hs_iters,
            seed: cfg.fit.seed,
            per_scenario: cfg.per_scenario,
        }
    }

    pub fn to_pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            extraction: ExtractionConfig {
                tau: self.tau,
                frame_stride: self.frame_stride,
                hs_alpha: self.hs_alpha,
                hs_iters: self.hs_iters,
            },
            window_frames: self.window_frames,
            fit: FitConfig {
                n_components: self.n_components,
                max_iters: self.max_iters,
                rel_tol: self.rel_tol,
                var_floor: self.var_floor,
                seed: self.seed,
                kmeans_iters: self.kmeans_iters,
            },
            per_scenario: self.per_scenario,
        }
    }
}

/// Settings shared by every model-facing subcommand. Flags override the file.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML settings file
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    /// Gradient magnitude threshold
    #[arg(long)]
    pub tau: Option<f64>,
    /// Keep every N-th frame
    #[arg(long, value_name = "N")]
    pub stride: Option<usize>,
    /// Window length in original frames
    #[arg(long, value_name = "FRAMES")]
    pub window: Option<usize>,
    /// Mixture components per model
    #[arg(long, value_name = "N")]
    pub components: Option<usize>,
    #[arg(long)]
    pub hs_alpha: Option<f64>,
    #[arg(long, value_name = "N")]
    pub hs_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// One model per (action, scenario)
    #[arg(long, value_name = "BOOL")]
    pub per_scenario: Option<bool>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut file = match &self.config {
            Some(path) => load_config_file(path)?,
            None => ConfigFile::default(),
        };
        macro_rules! apply {
            ($($flag:ident => $key:ident),* $(,)?) => {
                $(if let Some(v) = self.$flag {
                    file.$key = v;
                })*
            };
        }
        apply!(
            tau => tau,
            stride => frame_stride,
            window => window_frames,
            components => n_components,
            hs_alpha => hs_alpha,
            hs_iters => hs_iters,
            seed => seed,
            per_scenario => per_scenario,
        );
        let cfg = file.to_pipeline();
        cfg.validate().map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
        Ok(cfg)
    }
}

pub fn load_config_file(path: &Path) -> Result<ConfigFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config {}: {}", path.display(), e.message())))
}
