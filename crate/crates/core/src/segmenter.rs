//! Joint segmentation and classification of a multi-action video.
//!
//! A window of `L` consecutive retained frames pools all their descriptors
//! and is scored against every action by the average log-likelihood. Windows
//! slide by one retained frame; each frame sums the score vectors of all
//! windows covering it and takes the arg-max action. Runs shorter than `L`
//! are then folded into the preceding run.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{FrameFeatures, FEATURE_DIM};
use crate::frame_io::{run_lengths, Segment};
use crate::gmm::GmmModel;

/// Trained models grouped by action. Several models (e.g. one per scenario)
/// may share an action; the action's score is the best of them.
#[derive(Debug, Clone)]
pub struct ModelBank {
    models: Vec<GmmModel>,
    /// 1-based action ordinal of each model.
    action_of: Vec<usize>,
    action_names: Vec<String>,
}

impl ModelBank {
    /// Groups `models` by their `action` field against the given ordering.
    pub fn new(models: Vec<GmmModel>, action_names: Vec<String>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidInput("model bank is empty".into()));
        }
        let dim = models[0].dim();
        let mut action_of = Vec::with_capacity(models.len());
        for m in &models {
            if m.dim() != dim {
                return Err(Error::dims(
                    format!("model dimension {dim}"),
                    format!("{} for action {:?}", m.dim(), m.action),
                ));
            }
            let a = action_names
                .iter()
                .position(|n| *n == m.action)
                .ok_or_else(|| Error::UnknownAction(m.action.clone()))?;
            action_of.push(a + 1);
        }
        for (i, name) in action_names.iter().enumerate() {
            if !action_of.contains(&(i + 1)) {
                return Err(Error::NoTrainingData(name.clone()));
            }
        }
        Ok(Self {
            models,
            action_of,
            action_names,
        })
    }

    /// Actions ordered by name.
    pub fn from_models(models: Vec<GmmModel>) -> Result<Self> {
        let mut names: Vec<String> = models.iter().map(|m| m.action.clone()).collect();
        names.sort();
        names.dedup();
        Self::new(models, names)
    }

    pub fn models(&self) -> &[GmmModel] {
        &self.models
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn action_of(&self, model: usize) -> usize {
        self.action_of[model]
    }
}

/// The per-action score vector of one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowScore {
    pub window_start: usize,
    pub scores: Vec<f64>,
}

/// Per-frame action labels plus their run-length encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub frame_labels: Vec<usize>,
    pub segments: Vec<Segment>,
}

impl Segmentation {
    pub fn from_labels(frame_labels: Vec<usize>) -> Self {
        let segments = run_lengths(&frame_labels);
        Self {
            frame_labels,
            segments,
        }
    }
}

/// Converts a window length in original frames to retained frames, rounding up.
pub fn window_in_retained_frames(window_frames: usize, stride: usize) -> usize {
    window_frames.div_ceil(stride.max(1)).max(1)
}

fn check_window(t: usize, window: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::InvalidInput("window length must be >= 1".into()));
    }
    if t < window {
        return Err(Error::TooShort {
            len: t,
            needed: window,
        });
    }
    Ok(())
}

/// Scores every window of `window` consecutive retained frames.
///
/// Windows with no descriptors at all are skipped, as are windows whose
/// scores come out non-finite.
pub fn window_scores(
    features: &[FrameFeatures],
    bank: &ModelBank,
    window: usize,
) -> Result<Vec<WindowScore>> {
    check_window(features.len(), window)?;
    if bank.dim() != FEATURE_DIM {
        return Err(Error::dims(FEATURE_DIM, bank.dim()));
    }
    // per-frame Σ log p per model; windows are then sums of frame totals
    let frame_sums: Vec<Vec<f64>> = features
        .par_iter()
        .map(|ff| bank.models.iter().map(|m| m.sum_log_pdf(&ff.vectors)).collect())
        .collect();
    let counts: Vec<usize> = features.iter().map(FrameFeatures::len).collect();

    let n_models = bank.models.len();
    let mut out = Vec::with_capacity(features.len() - window + 1);
    for start in 0..=features.len() - window {
        let n: usize = counts[start..start + window].iter().sum();
        if n == 0 {
            continue;
        }
        let mut scores = vec![f64::NEG_INFINITY; bank.n_actions()];
        for m in 0..n_models {
            let total: f64 = frame_sums[start..start + window].iter().map(|s| s[m]).sum();
            let avg = total / n as f64;
            let slot = &mut scores[bank.action_of[m] - 1];
            if avg > *slot {
                *slot = avg;
            }
        }
        if scores.iter().all(|s| s.is_finite()) {
            out.push(WindowScore {
                window_start: start,
                scores,
            });
        }
    }
    Ok(out)
}

/// Sums the score vectors of all windows covering each of `n_frames`
/// retained frames; `None` where no window covers the frame.
pub fn frame_fusion(
    scores: &[WindowScore],
    n_frames: usize,
    window: usize,
) -> Result<Vec<Option<Vec<f64>>>> {
    check_window(n_frames, window)?;
    let max_windows = n_frames - window + 1;
    if scores.len() > max_windows {
        return Err(Error::InvalidInput(format!(
            "{} window scores exceed the {max_windows} windows of {n_frames} frames",
            scores.len()
        )));
    }
    let n_actions = scores.first().map_or(0, |s| s.scores.len());
    let mut fused: Vec<Option<Vec<f64>>> = vec![None; n_frames];
    let mut last_start = None;
    for s in scores {
        if s.window_start + window > n_frames {
            return Err(Error::InvalidInput(format!(
                "window at {} overruns {n_frames} frames",
                s.window_start
            )));
        }
        if last_start.is_some_and(|l| s.window_start <= l) {
            return Err(Error::InvalidInput(
                "window scores must have strictly increasing starts".into(),
            ));
        }
        if s.scores.len() != n_actions {
            return Err(Error::dims(n_actions, s.scores.len()));
        }
        last_start = Some(s.window_start);
        for slot in &mut fused[s.window_start..s.window_start + window] {
            let acc = slot.get_or_insert_with(|| vec![0.0; n_actions]);
            for (a, v) in acc.iter_mut().zip(&s.scores) {
                *a += v;
            }
        }
    }
    Ok(fused)
}

/// Arg-max action per frame (1-based); NaN counts as −∞ and ties go to the
/// lowest ordinal.
pub fn frame_labels(fused: &[Vec<f64>]) -> Vec<usize> {
    fused
        .iter()
        .map(|row| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (a, &v) in row.iter().enumerate() {
                let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
                if v > best_v {
                    best = a;
                    best_v = v;
                }
            }
            best + 1
        })
        .collect()
}

/// Gives each unlabelled entry the label of its nearest labelled neighbour
/// (the earlier one on ties). `None` if nothing is labelled.
pub fn fill_unlabelled(labels: &[Option<usize>]) -> Option<Vec<usize>> {
    let known: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    if known.is_empty() {
        return None;
    }
    let mut out = Vec::with_capacity(labels.len());
    let mut k = 0;
    for i in 0..labels.len() {
        while k + 1 < known.len() && known[k + 1] <= i {
            k += 1;
        }
        let src = if known[k] >= i || k + 1 == known.len() {
            known[k]
        } else {
            let (prev, next) = (known[k], known[k + 1]);
            if i - prev <= next - i {
                prev
            } else {
                next
            }
        };
        out.push(labels[src].unwrap());
    }
    Some(out)
}

/// One left-to-right scan over `runs`: each run shorter than `min_len` takes
/// the (possibly already relabelled) action of the run before it; a leading
/// short run takes the action of the run after it.
fn merge_pass(runs: &[Segment], min_len: usize) -> Vec<usize> {
    let mut actions: Vec<usize> = runs.iter().map(|r| r.action).collect();
    for (i, r) in runs.iter().enumerate() {
        if r.len() < min_len {
            actions[i] = match i {
                0 => runs.get(1).map_or(r.action, |next| next.action),
                _ => actions[i - 1],
            };
        }
    }
    runs.iter()
        .zip(actions)
        .flat_map(|(r, a)| std::iter::repeat_n(a, r.len()))
        .collect()
}

/// Folds every run shorter than `min_len` into the preceding run (a leading
/// short run joins the following one), repeating to a fixed point.
pub fn merge_short_segments(labels: &[usize], min_len: usize) -> Segmentation {
    let mut current = labels.to_vec();
    loop {
        let runs = run_lengths(&current);
        if runs.len() <= 1 || runs.iter().all(|r| r.len() >= min_len) {
            return Segmentation {
                frame_labels: current,
                segments: runs,
            };
        }
        current = merge_pass(&runs, min_len);
    }
}

/// Intermediate products of [`segment_video_detailed`], kept for debugging dumps.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentationTrace {
    /// Original frame index of every retained frame.
    pub retained_frames: Vec<usize>,
    pub window_scores: Vec<WindowScore>,
    pub fused: Vec<Option<Vec<f64>>>,
    /// Labels per retained frame after merging.
    pub retained_labels: Vec<usize>,
}

/// Full pipeline at retained-frame resolution.
pub fn segment_retained(
    features: &[FrameFeatures],
    bank: &ModelBank,
    window: usize,
) -> Result<(Segmentation, SegmentationTrace)> {
    let scores = window_scores(features, bank, window)?;
    let fused = frame_fusion(&scores, features.len(), window)?;
    let covered: Vec<Option<usize>> = fused
        .iter()
        .map(|f| f.as_ref().map(|v| frame_labels(std::slice::from_ref(v))[0]))
        .collect();
    let labels = fill_unlabelled(&covered).ok_or_else(|| {
        Error::InvalidInput("no window contains any descriptor; nothing to classify".into())
    })?;
    let seg = merge_short_segments(&labels, window);
    let trace = SegmentationTrace {
        retained_frames: features.iter().map(|f| f.frame_index).collect(),
        window_scores: scores,
        fused,
        retained_labels: seg.frame_labels.clone(),
    };
    Ok((seg, trace))
}

/// Segments a video of `n_frames` original frames. `window` counts retained
/// frames; frames without features take the label of the nearest retained
/// frame, the earlier one on ties.
pub fn segment_video(
    features: &[FrameFeatures],
    bank: &ModelBank,
    window: usize,
    n_frames: usize,
) -> Result<Segmentation> {
    segment_video_detailed(features, bank, window, n_frames).map(|(s, _)| s)
}

pub fn segment_video_detailed(
    features: &[FrameFeatures],
    bank: &ModelBank,
    window: usize,
    n_frames: usize,
) -> Result<(Segmentation, SegmentationTrace)> {
    if let Some(bad) = features
        .windows(2)
        .find(|w| w[1].frame_index <= w[0].frame_index)
    {
        return Err(Error::InvalidInput(format!(
            "retained frames out of order at {}",
            bad[1].frame_index
        )));
    }
    if let Some(last) = features.last() {
        if last.frame_index >= n_frames {
            return Err(Error::InvalidInput(format!(
                "retained frame {} beyond video length {n_frames}",
                last.frame_index
            )));
        }
    }
    let (retained, trace) = segment_retained(features, bank, window)?;
    let mut sparse = vec![None; n_frames];
    for (ff, &l) in features.iter().zip(&retained.frame_labels) {
        sparse[ff.frame_index] = Some(l);
    }
    let labels = fill_unlabelled(&sparse).expect("at least one retained frame");
    Ok((Segmentation::from_labels(labels), trace))
}
