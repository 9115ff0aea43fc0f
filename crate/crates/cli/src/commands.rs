use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use actionseg::eval::{synthetic_folds, CrossValReport, EvalReport, SynthProtocol, SynthSpec};
use actionseg::frame_io::{load_labels, load_sequence, write_pgm_dir, write_segments_csv, SequenceFormat};
use actionseg::pipeline::{segment_features, segmentation_track, train_models, TrainingClip};
use actionseg::{frame_accuracy, load_model, save_model, FrameSequence, ModelBank, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::cache::FeatureCache;
use crate::error::{CliError, CliResult};
use crate::manifest::{read_manifest, write_manifest, ManifestRow};

const MODEL_SUFFIX: &str = ".model.json";

fn load_video(path: &Path) -> CliResult<FrameSequence> {
    let format = SequenceFormat::infer(path)?;
    Ok(load_sequence(path, format)?)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

/// File-system friendly version of an action or scenario name.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn model_file_name(action: &str, scenario: &str) -> String {
    if scenario.is_empty() {
        format!("{}{MODEL_SUFFIX}", file_stem(action))
    } else {
        format!("{}@{}{MODEL_SUFFIX}", file_stem(action), file_stem(scenario))
    }
}

fn model_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("cannot read model directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.to_string_lossy().ends_with(MODEL_SUFFIX))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_bank(dir: &Path) -> CliResult<ModelBank> {
    let files = model_files(dir)?;
    if files.is_empty() {
        return Err(CliError::data(format!("no *{MODEL_SUFFIX} files in {}", dir.display())));
    }
    let models = files
        .iter()
        .map(|p| load_model(p).map_err(|e| CliError::data(format!("{}: {e}", p.display()))))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ModelBank::from_models(models)?)
}

fn row_action(row: &ManifestRow) -> CliResult<String> {
    if let Some(a) = &row.action {
        return Ok(a.clone());
    }
    let labels = row.labels.as_ref().ok_or_else(|| {
        CliError::data(format!("{}: training rows need an action or a labels file", row.video.display()))
    })?;
    let track = load_labels(labels)?;
    match track.action_names() {
        [only] => Ok(only.clone()),
        _ => Err(CliError::data(format!(
            "{}: training clips must contain exactly one action",
            labels.display()
        ))),
    }
}

pub struct TrainArgs<'a> {
    pub manifest: &'a Path,
    pub out: &'a Path,
    pub exclude_fold: Option<usize>,
}

pub fn train(cfg: &PipelineConfig, args: &TrainArgs) -> CliResult<Vec<PathBuf>> {
    let rows: Vec<ManifestRow> = read_manifest(args.manifest)?
        .into_iter()
        .filter(|r| args.exclude_fold.is_none() || r.fold != args.exclude_fold)
        .collect();
    if rows.is_empty() {
        return Err(CliError::data("no training rows left after excluding the fold"));
    }
    let cache = FeatureCache::from_env();
    let mut clips = Vec::with_capacity(rows.len());
    for row in &rows {
        let action = row_action(row)?;
        let seq = load_video(&row.video)?;
        clips.push(TrainingClip {
            features: cache.features(&seq, &cfg.extraction)?,
            action,
            scenario: row.scenario.clone().unwrap_or_default(),
        });
    }
    let models = train_models(&clips, cfg)?;

    let mut names = BTreeSet::new();
    for m in &models {
        if !names.insert(model_file_name(&m.action, &m.scenario)) {
            return Err(CliError::data(format!(
                "action/scenario names collide after sanitising: {:?}/{:?}",
                m.action, m.scenario
            )));
        }
    }
    create_dir(args.out)?;
    for stale in model_files(args.out)? {
        fs::remove_file(&stale).map_err(|e| CliError::data(format!("cannot replace {}: {e}", stale.display())))?;
    }
    let mut written = Vec::with_capacity(models.len());
    for m in &models {
        let path = args.out.join(model_file_name(&m.action, &m.scenario));
        save_model(m, &path)?;
        written.push(path);
    }
    Ok(written)
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(
            fs::File::create(p).map_err(|e| CliError::data(format!("cannot write {}: {e}", p.display())))?,
        )),
        _ => Box::new(io::stdout().lock()),
    })
}

pub struct SegmentArgs<'a> {
    pub models: &'a Path,
    pub video: &'a Path,
    pub out: Option<&'a Path>,
    pub scores: Option<&'a Path>,
}

pub fn segment(cfg: &PipelineConfig, args: &SegmentArgs) -> CliResult<()> {
    let bank = load_bank(args.models)?;
    let seq = load_video(args.video)?;
    if seq.len() < cfg.window_frames {
        return Err(actionseg::Error::TooShort {
            len: seq.len(),
            needed: cfg.window_frames,
        }
        .into());
    }
    let features = FeatureCache::from_env().features(&seq, &cfg.extraction)?;
    let (seg, trace) = segment_features(&features, seq.len(), &bank, cfg)?;

    let mut out = open_output(args.out)?;
    write_segments_csv(&seg.segments, bank.action_names(), &mut out)?;
    out.flush().map_err(CliError::data)?;

    if let Some(path) = args.scores {
        let mut w = csv::Writer::from_writer(open_output(Some(path))?);
        let mut header = vec!["window_start_frame".to_string()];
        header.extend(bank.action_names().iter().cloned());
        w.write_record(&header).map_err(CliError::data)?;
        for ws in &trace.window_scores {
            let mut rec = vec![trace.retained_frames[ws.window_start].to_string()];
            rec.extend(ws.scores.iter().map(|s| format!("{s:?}")));
            w.write_record(&rec).map_err(CliError::data)?;
        }
        w.flush().map_err(CliError::data)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct FoldReport {
    pub fold: Option<usize>,
    #[serde(flatten)]
    pub report: EvalReport,
}

#[derive(Debug, Serialize)]
pub struct EvalOutput {
    pub folds: Vec<FoldReport>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

pub struct EvalArgs<'a> {
    pub models: &'a Path,
    pub manifest: &'a Path,
    pub out: Option<&'a Path>,
}

/// Rows are grouped by fold; fold `n` uses `models/fold-n` when that
/// directory exists and `models` otherwise.
pub fn eval(cfg: &PipelineConfig, args: &EvalArgs) -> CliResult<(EvalOutput, CrossValReport)> {
    if !args.models.is_dir() {
        return Err(CliError::data(format!("model directory {} does not exist", args.models.display())));
    }
    let rows = read_manifest(args.manifest)?;
    let mut groups: BTreeMap<Option<usize>, Vec<&ManifestRow>> = BTreeMap::new();
    for row in &rows {
        groups.entry(row.fold).or_default().push(row);
    }
    let cache = FeatureCache::from_env();
    let mut fold_ids = Vec::new();
    let mut reports = Vec::new();
    for (fold, rows) in groups {
        let dir = match fold {
            Some(n) if args.models.join(format!("fold-{n}")).is_dir() => args.models.join(format!("fold-{n}")),
            _ => args.models.to_path_buf(),
        };
        let bank = load_bank(&dir)?;
        let mut per_video = Vec::with_capacity(rows.len());
        for row in rows {
            let labels = row.labels.as_ref().ok_or_else(|| {
                CliError::data(format!("{}: evaluation rows need a labels file", row.video.display()))
            })?;
            let truth = load_labels(labels)?.remap(bank.action_names())?;
            let seq = load_video(&row.video)?;
            let features = cache.features(&seq, &cfg.extraction)?;
            let (seg, _) = segment_features(&features, seq.len(), &bank, cfg)?;
            let pred = segmentation_track(&seg, &bank)?;
            per_video.push(
                frame_accuracy(&pred, &truth).map_err(|e| CliError::data(format!("{}: {e}", row.video.display())))?,
            );
        }
        fold_ids.push(fold);
        reports.push(EvalReport::combine(&per_video)?);
    }
    let cv = CrossValReport::from_folds(reports)?;
    let output = EvalOutput {
        folds: fold_ids
            .into_iter()
            .zip(cv.folds.iter().cloned())
            .map(|(fold, report)| FoldReport { fold, report })
            .collect(),
        fold_accuracies: cv.fold_accuracies.clone(),
        mean_accuracy: cv.mean_accuracy,
        std_accuracy: cv.std_accuracy,
    };
    let mut json = serde_json::to_string_pretty(&output).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push('\n');
    let mut out = open_output(args.out)?;
    out.write_all(json.as_bytes()).and_then(|_| out.flush()).map_err(CliError::data)?;
    Ok((output, cv))
}

/// Synthetic dataset description: generator settings plus how many clips
/// to render and, optionally, how to fold them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    pub instances_per_action: usize,
    /// Split each action's clips into this many folds and write stitched
    /// test sequences per fold.
    #[serde(default)]
    pub folds: Option<usize>,
    #[serde(default = "default_four")]
    pub test_sequences_per_fold: usize,
    #[serde(default = "default_four")]
    pub instances_per_test_sequence: usize,
    pub generator: SynthSpec,
}

fn default_four() -> usize {
    4
}

pub fn load_synth_file(path: &Path) -> CliResult<SynthFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read spec {}: {e}", path.display())))?;
    let parsed: SynthFile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad spec {}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad spec {}: {}", path.display(), e.message())))?
    };
    parsed
        .generator
        .validate()
        .map_err(|e| CliError::Usage(format!("bad spec {}: {e}", path.display())))?;
    if parsed.instances_per_action == 0 {
        return Err(CliError::Usage("instances_per_action must be >= 1".into()));
    }
    Ok(parsed)
}

/// Writes `instances/`, `train.csv` and, with folds, `test/` and `test.csv`.
pub fn synth(file: &SynthFile, seed: u64, out: &Path) -> CliResult<()> {
    let protocol = SynthProtocol {
        folds: file.folds.unwrap_or(1),
        instances_per_action: file.instances_per_action,
        test_sequences_per_fold: if file.folds.is_some() { file.test_sequences_per_fold } else { 0 },
        instances_per_test_sequence: file.instances_per_test_sequence,
    };
    if file.folds.is_some_and(|k| k < 2 || k > file.instances_per_action) {
        return Err(CliError::Usage(format!(
            "folds must lie in 2..={} for {} instances per action",
            file.instances_per_action, file.instances_per_action
        )));
    }
    let (clips, folds) = if file.folds.is_some() {
        synthetic_folds(&file.generator, &protocol, seed)?
    } else {
        (actionseg::synth_generate(&file.generator, file.instances_per_action, seed)?, Vec::new())
    };

    let mut held_out_fold = vec![None; clips.len()];
    for (f, fold) in folds.iter().enumerate() {
        for &i in &fold.held_out {
            held_out_fold[i] = Some(f);
        }
    }

    create_dir(&out.join("instances"))?;
    let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
    let mut train_rows = Vec::with_capacity(clips.len());
    for (clip, fold) in clips.iter().zip(held_out_fold) {
        let n = counters.entry(&clip.action).or_default();
        let stem = format!("{}_{:03}", file_stem(&clip.action), n);
        *n += 1;
        let rel = Path::new("instances").join(&stem);
        write_pgm_dir(&clip.frames, &out.join(&rel))?;
        let labels = actionseg::LabelTrack::new(vec![1; clip.frames.len()], vec![clip.action.clone()])?;
        let labels_rel = Path::new("instances").join(format!("{stem}.csv"));
        labels.save(&out.join(&labels_rel))?;
        train_rows.push(ManifestRow {
            video: rel,
            action: Some(clip.action.clone()),
            scenario: None,
            labels: Some(labels_rel),
            fold,
        });
    }
    write_manifest_file(&out.join("train.csv"), &train_rows)?;

    if !folds.is_empty() {
        let mut test_rows = Vec::new();
        for (f, fold) in folds.iter().enumerate() {
            for (s, test) in fold.tests.iter().enumerate() {
                let rel = Path::new("test").join(format!("fold-{f}")).join(format!("seq_{s:03}"));
                write_pgm_dir(&test.frames, &out.join(&rel))?;
                let labels_rel = rel.with_extension("csv");
                test.truth.save(&out.join(&labels_rel))?;
                test_rows.push(ManifestRow {
                    video: rel,
                    action: None,
                    scenario: None,
                    labels: Some(labels_rel),
                    fold: Some(f),
                });
            }
        }
        write_manifest_file(&out.join("test.csv"), &test_rows)?;
    }
    Ok(())
}

fn write_manifest_file(path: &Path, rows: &[ManifestRow]) -> CliResult<()> {
    let mut bytes = Vec::new();
    write_manifest(rows, &mut bytes).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(path, &bytes)
}
