//! Evaluation harness: frame-level accuracy and confusion matrices, k-fold
//! splits, stitched multi-action sequences and a synthetic action generator.

use std::f64::consts::TAU;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame_io::{Frame, FrameSequence, LabelTrack};
use crate::pipeline::{segment_sequence, segmentation_track, train_bank, LabelledVideo, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub action_names: Vec<String>,
    /// Percent of frames labelled correctly.
    pub frame_accuracy: f64,
    /// `confusion[truth][predicted]`, 0-based action indices.
    pub confusion: Vec<Vec<usize>>,
    /// Percent per truth action; `None` for actions absent from the truth.
    pub per_action_accuracy: Vec<Option<f64>>,
    pub n_frames: usize,
}

impl EvalReport {
    fn from_confusion(action_names: Vec<String>, confusion: Vec<Vec<usize>>) -> Self {
        let n_frames: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        let frame_accuracy = if n_frames == 0 {
            0.0
        } else {
            100.0 * correct as f64 / n_frames as f64
        };
        let per_action_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: usize = row.iter().sum();
                (total > 0).then(|| 100.0 * row[i] as f64 / total as f64)
            })
            .collect();
        Self {
            action_names,
            frame_accuracy,
            confusion,
            per_action_accuracy,
            n_frames,
        }
    }

    /// Pools several reports over the same actions into one.
    pub fn combine(reports: &[EvalReport]) -> Result<EvalReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::InvalidInput("no reports to combine".into()))?;
        let a = first.action_names.len();
        let mut confusion = vec![vec![0; a]; a];
        for r in reports {
            if r.action_names != first.action_names {
                return Err(Error::InvalidInput(
                    "reports cover different action sets".into(),
                ));
            }
            for (row, other) in confusion.iter_mut().zip(&r.confusion) {
                for (c, o) in row.iter_mut().zip(other) {
                    *c += o;
                }
            }
        }
        Ok(Self::from_confusion(first.action_names.clone(), confusion))
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "frame accuracy: {:.2}% over {} frames",
            self.frame_accuracy, self.n_frames
        )?;
        let width = self
            .action_names
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max(8);
        write!(f, "{:>width$}", "truth")?;
        for n in &self.action_names {
            write!(f, " {n:>width$}")?;
        }
        writeln!(f, " {:>8}", "acc%")?;
        for (i, row) in self.confusion.iter().enumerate() {
            write!(f, "{:>width$}", self.action_names[i])?;
            for c in row {
                write!(f, " {c:>width$}")?;
            }
            match self.per_action_accuracy[i] {
                Some(p) => writeln!(f, " {p:>8.2}")?,
                None => writeln!(f, " {:>8}", "-")?,
            }
        }
        Ok(())
    }
}

/// Frame-level accuracy of `pred` against `truth`. Predicted labels are
/// re-expressed in the truth's action ordering first.
pub fn frame_accuracy(pred: &LabelTrack, truth: &LabelTrack) -> Result<EvalReport> {
    if pred.len() != truth.len() {
        return Err(Error::dims(
            format!("{} truth frames", truth.len()),
            format!("{} predicted", pred.len()),
        ));
    }
    let mut names = truth.action_names().to_vec();
    for n in pred.action_names() {
        if !names.contains(n) {
            names.push(n.clone());
        }
    }
    let pred = pred.remap(&names)?;
    let truth = truth.remap(&names)?;
    let a = names.len();
    let mut confusion = vec![vec![0; a]; a];
    for (&t, &p) in truth.labels().iter().zip(pred.labels()) {
        confusion[t - 1][p - 1] += 1;
    }
    Ok(EvalReport::from_confusion(names, confusion))
}

/// Per-fold reports and their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub folds: Vec<EvalReport>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

impl CrossValReport {
    pub fn from_folds(folds: Vec<EvalReport>) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::InvalidInput("no folds".into()));
        }
        let acc: Vec<f64> = folds.iter().map(|r| r.frame_accuracy).collect();
        let (mean, std) = mean_std(&acc);
        Ok(Self {
            folds,
            fold_accuracies: acc,
            mean_accuracy: mean,
            std_accuracy: std,
        })
    }
}

impl fmt::Display for CrossValReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.folds.iter().enumerate() {
            writeln!(f, "fold {i}")?;
            write!(f, "{r}")?;
        }
        writeln!(
            f,
            "mean frame accuracy: {:.2} ± {:.2}% over {} fold(s)",
            self.mean_accuracy,
            self.std_accuracy,
            self.folds.len()
        )
    }
}

/// Mean and sample (n − 1) standard deviation; the deviation of a single value is 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffles `ids` with `seed` and deals them into `k` test folds whose sizes
/// differ by at most one (larger folds first).
pub fn kfold_split<T: Clone>(ids: &[T], k: usize, seed: u64) -> Result<Vec<Fold<T>>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k must be >= 2, got {k}")));
    }
    if ids.len() < k {
        return Err(Error::InvalidInput(format!(
            "cannot split {} ids into {k} folds",
            ids.len()
        )));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = ids.len() / k;
    let extra = ids.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let test_idx = &order[start..start + size];
        let test = test_idx.iter().map(|&i| ids[i].clone()).collect();
        let train = order[..start]
            .iter()
            .chain(&order[start + size..])
            .map(|&i| ids[i].clone())
            .collect();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(folds)
}

/// Concatenates `n_instances` clips drawn at random, strictly alternating
/// between group 1 and group 2 from a random starting group and never
/// drawing the same clip twice in a row from a group that has alternatives.
pub fn stitch_sequences(
    instances: &[LabelledVideo],
    action_names: &[String],
    seed: u64,
    n_instances: usize,
) -> Result<(FrameSequence, LabelTrack)> {
    if n_instances == 0 {
        return Err(Error::InvalidInput("n_instances must be >= 1".into()));
    }
    let groups: [Vec<usize>; 2] = [1u8, 2].map(|g| {
        (0..instances.len())
            .filter(|&i| instances[i].group == g)
            .collect()
    });
    for (g, members) in groups.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::InvalidInput(format!("stitching group {} is empty", g + 1)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut group = rng.random_range(0..2usize);
    let mut last = [None::<usize>; 2];
    let mut frames = Vec::new();
    let mut labels = Vec::new();
    let mut fps = None;
    for _ in 0..n_instances {
        let members = &groups[group];
        let candidates: Vec<usize> = if members.len() > 1 {
            members.iter().copied().filter(|&i| Some(i) != last[group]).collect()
        } else {
            members.clone()
        };
        let pick = candidates[rng.random_range(0..candidates.len())];
        last[group] = Some(pick);
        let inst = &instances[pick];
        let ordinal = action_names
            .iter()
            .position(|n| *n == inst.action)
            .ok_or_else(|| Error::UnknownAction(inst.action.clone()))?
            + 1;
        fps.get_or_insert(inst.frames.fps());
        labels.extend(std::iter::repeat_n(ordinal, inst.frames.len()));
        frames.extend(inst.frames.frames().iter().cloned());
        group = 1 - group;
    }
    Ok((
        FrameSequence::new(frames, fps.unwrap_or(crate::frame_io::DEFAULT_FPS))?,
        LabelTrack::new(labels, action_names.to_vec())?,
    ))
}

/// How a synthetic action moves its texture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "lowercase")]
pub enum MotionRecipe {
    /// Velocity `(vx, vy)` in pixels per frame, plus an optional sinusoidal
    /// surge of `surge` pixels along the direction of travel.
    Translate {
        vx: f64,
        vy: f64,
        #[serde(default)]
        surge: f64,
        #[serde(default = "default_surge_period")]
        surge_period: f64,
    },
    /// Sinusoidal back-and-forth displacement along `angle` (radians).
    Oscillate {
        amplitude: f64,
        period: f64,
        angle: f64,
    },
    /// Zoom about the frame centre by a factor of `exp(amplitude · sin(2πt / period))`.
    Dilate { amplitude: f64, period: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthAction {
    pub name: String,
    #[serde(flatten)]
    pub motion: MotionRecipe,
    pub group: u8,
    /// Seeds the texture; actions sharing a seed share their appearance.
    #[serde(default)]
    pub texture_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub actions: Vec<SynthAction>,
    pub width: usize,
    pub height: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub noise_sigma: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    /// Sinusoids per texture.
    #[serde(default = "default_texture_waves")]
    pub texture_waves: usize,
    /// Standard deviation of texture intensity before noise.
    #[serde(default = "default_texture_contrast")]
    pub texture_contrast: f64,
    /// Shortest and longest texture wavelength in pixels.
    #[serde(default = "default_texture_wavelength")]
    pub texture_wavelength: (f64, f64),
    /// Start every instance at rest phase and make its length a whole number
    /// of motion cycles, so that stitched instances join without a jump.
    #[serde(default = "default_whole_cycles")]
    pub whole_cycles: bool,
}

fn default_surge_period() -> f64 {
    16.0
}

fn default_fps() -> f64 {
    crate::frame_io::DEFAULT_FPS
}

fn default_texture_waves() -> usize {
    16
}

fn default_texture_contrast() -> f64 {
    60.0
}

fn default_texture_wavelength() -> (f64, f64) {
    (10.0, 20.0)
}

fn default_whole_cycles() -> bool {
    true
}

impl SynthSpec {
    /// Translate / oscillate / dilate of one shared texture on 48×48 frames.
    pub fn three_actions() -> Self {
        Self {
            actions: vec![
                SynthAction {
                    name: "translate".into(),
                    motion: MotionRecipe::Translate {
                        vx: 1.0,
                        vy: 0.0,
                        surge: 3.0,
                        surge_period: 16.0,
                    },
                    group: 1,
                    texture_seed: 7,
                },
                SynthAction {
                    name: "oscillate".into(),
                    motion: MotionRecipe::Oscillate {
                        amplitude: 3.0,
                        period: 16.0,
                        angle: std::f64::consts::FRAC_PI_2,
                    },
                    group: 2,
                    texture_seed: 7,
                },
                SynthAction {
                    name: "dilate".into(),
                    motion: MotionRecipe::Dilate {
                        amplitude: 0.15,
                        period: 16.0,
                    },
                    group: 2,
                    texture_seed: 7,
                },
            ],
            width: 48,
            height: 48,
            min_length: 48,
            max_length: 96,
            noise_sigma: 14.0,
            fps: default_fps(),
            texture_waves: default_texture_waves(),
            texture_contrast: default_texture_contrast(),
            texture_wavelength: default_texture_wavelength(),
            whole_cycles: default_whole_cycles(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput("synthetic frame size must be non-zero".into()));
        }
        if self.actions.is_empty() {
            return Err(Error::InvalidInput("synthetic spec has no actions".into()));
        }
        if self.min_length == 0 || self.min_length > self.max_length {
            return Err(Error::InvalidInput("invalid instance length range".into()));
        }
        let (lo, hi) = self.texture_wavelength;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidInput("invalid texture wavelength range".into()));
        }
        if !(self.texture_contrast.is_finite() && self.texture_contrast >= 0.0) {
            return Err(Error::InvalidInput("texture_contrast must be >= 0".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidInput("noise_sigma must be >= 0".into()));
        }
        for a in &self.actions {
            if a.group != 1 && a.group != 2 {
                return Err(Error::InvalidInput(format!(
                    "action {:?} has group {}, expected 1 or 2",
                    a.name, a.group
                )));
            }
            match a.motion {
                MotionRecipe::Oscillate { period, .. }
                | MotionRecipe::Dilate { period, .. }
                | MotionRecipe::Translate {
                    surge_period: period,
                    ..
                } if !(period.is_finite() && period > 0.0) =>
                {
                    return Err(Error::InvalidInput(format!(
                        "action {:?} needs a positive period",
                        a.name
                    )));
                }
                _ => {}
            }
            if self.whole_cycles {
                self.instance_lengths(&a.motion)?;
            }
        }
        Ok(())
    }

    /// Frames after which `motion` returns exactly to its starting state, if any.
    pub fn cycle_length(&self, motion: &MotionRecipe) -> Option<usize> {
        let whole = |x: f64| (x - x.round()).abs() < 1e-9;
        match *motion {
            MotionRecipe::Translate {
                vx,
                vy,
                surge,
                surge_period,
            } => (1..=self.max_length).find(|&n| {
                let n = n as f64;
                whole(vx * n / self.width as f64)
                    && whole(vy * n / self.height as f64)
                    && (surge == 0.0 || whole(n / surge_period))
            }),
            MotionRecipe::Oscillate { period, .. } | MotionRecipe::Dilate { period, .. } => {
                (whole(period) && period >= 1.0).then_some(period.round() as usize)
            }
        }
    }

    /// Admissible instance lengths for `motion`.
    fn instance_lengths(&self, motion: &MotionRecipe) -> Result<Vec<usize>> {
        if !self.whole_cycles {
            return Ok((self.min_length..=self.max_length).collect());
        }
        let cycle = self.cycle_length(motion).ok_or_else(|| {
            Error::InvalidInput(format!("{motion:?} has no whole cycle within max_length"))
        })?;
        let lengths: Vec<usize> = (self.min_length..=self.max_length)
            .filter(|n| n % cycle == 0)
            .collect();
        if lengths.is_empty() {
            return Err(Error::InvalidInput(format!(
                "no multiple of the {cycle}-frame cycle lies in {}..={}",
                self.min_length, self.max_length
            )));
        }
        Ok(lengths)
    }
}

/// A periodic texture: sum of sinusoids with whole numbers of cycles across the frame.
struct Texture {
    waves: Vec<(f64, f64, f64, f64)>,
    width: f64,
    height: f64,
}

impl Texture {
    /// `n` equal-amplitude waves with pixel standard deviation `contrast`,
    /// random orientations and wavelengths in `wavelength` (pixels), snapped
    /// to whole cycles across the frame.
    fn random(
        rng: &mut ChaCha8Rng,
        n: usize,
        contrast: f64,
        wavelength: (f64, f64),
        width: usize,
        height: usize,
    ) -> Self {
        let a = contrast * (2.0 / n.max(1) as f64).sqrt();
        let (w, h) = (width as f64, height as f64);
        let waves = (0..n)
            .map(|_| {
                let theta = rng.random_range(0.0..std::f64::consts::PI);
                let lambda = rng.random_range(wavelength.0..=wavelength.1);
                let kx = (w * theta.cos() / lambda).round();
                let ky = (h * theta.sin() / lambda).round();
                let phase = rng.random_range(0.0..TAU);
                (kx, ky, phase, a)
            })
            .collect();
        Self {
            waves,
            width: w,
            height: h,
        }
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let mut v = 128.0;
        for &(kx, ky, phase, a) in &self.waves {
            // reduce each product modulo the period so integer shifts are exact
            let arg = (kx * x).rem_euclid(self.width) / self.width
                + (ky * y).rem_euclid(self.height) / self.height;
            v += a * (TAU * arg + phase).sin();
        }
        v
    }
}

fn render_instance(
    spec: &SynthSpec,
    action: &SynthAction,
    rng: &mut ChaCha8Rng,
) -> Result<FrameSequence> {
    let lengths = spec.instance_lengths(&action.motion)?;
    let len = lengths[rng.random_range(0..lengths.len())];
    let texture = Texture::random(
        &mut ChaCha8Rng::seed_from_u64(action.texture_seed),
        spec.texture_waves,
        spec.texture_contrast,
        spec.texture_wavelength,
        spec.width,
        spec.height,
    );
    let t0 = if spec.whole_cycles {
        0.0
    } else {
        rng.random_range(0.0..1.0)
    };
    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let (cx, cy) = (
        (spec.width as f64 - 1.0) / 2.0,
        (spec.height as f64 - 1.0) / 2.0,
    );
    let mut frames = Vec::with_capacity(len);
    for t in 0..len {
        let tf = t as f64;
        let warp: Box<dyn Fn(f64, f64) -> (f64, f64)> = match action.motion {
            MotionRecipe::Translate {
                vx,
                vy,
                surge,
                surge_period,
            } => {
                let speed = vx.hypot(vy);
                let k = if speed > 0.0 && surge != 0.0 {
                    tf + surge / speed * (TAU * (tf / surge_period + t0)).sin()
                } else {
                    tf
                };
                Box::new(move |x, y| (x - vx * k, y - vy * k))
            }
            MotionRecipe::Oscillate {
                amplitude,
                period,
                angle,
            } => {
                let d = amplitude * (TAU * (tf / period + t0)).sin();
                let (dx, dy) = (d * angle.cos(), d * angle.sin());
                Box::new(move |x, y| (x - dx, y - dy))
            }
            MotionRecipe::Dilate { amplitude, period } => {
                let s = (amplitude * (TAU * (tf / period + t0)).sin()).exp();
                Box::new(move |x, y| (cx + (x - cx) / s, cy + (y - cy) / s))
            }
        };
        let frame = Frame::from_fn(spec.width, spec.height, t, |x, y| {
            let (sx, sy) = warp(x as f64, y as f64);
            let mut v = texture.sample(sx, sy);
            if spec.noise_sigma > 0.0 {
                v += noise.sample(rng);
            }
            v.clamp(0.0, 255.0).round()
        })?;
        frames.push(frame);
    }
    FrameSequence::new(frames, spec.fps)
}

/// Renders `n_per_action` single-action clips per action, in action order.
/// Fully determined by `(spec, seed)`.
pub fn synth_generate(spec: &SynthSpec, n_per_action: usize, seed: u64) -> Result<Vec<LabelledVideo>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.actions.len())
        .flat_map(|a| (0..n_per_action).map(move |i| (a, i)))
        .collect();
    jobs.into_par_iter()
        .map(|(a, i)| {
            let action = &spec.actions[a];
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ ((a as u64) << 32 | i as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9),
            );
            Ok(LabelledVideo {
                frames: render_instance(spec, action, &mut rng)?,
                action: action.name.clone(),
                scenario: String::new(),
                group: action.group,
            })
        })
        .collect()
}

/// A multi-action video with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVideo {
    pub frames: FrameSequence,
    pub truth: LabelTrack,
}

/// Trains on single-action clips, segments every test video and pools the
/// frame-level results.
pub fn run_experiment(
    train: &[LabelledVideo],
    test: &[TestVideo],
    cfg: &PipelineConfig,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InvalidInput("no test videos".into()));
    }
    let bank = train_bank(train, cfg)?;
    for v in test {
        for name in v.truth.action_names() {
            if !bank.action_names().contains(name) {
                return Err(Error::NoTrainingData(name.clone()));
            }
        }
    }
    let reports = test
        .iter()
        .map(|v| {
            let seg = segment_sequence(&v.frames, &bank, cfg)?;
            let pred = segmentation_track(&seg, &bank)?;
            frame_accuracy(&pred, &v.truth.remap(bank.action_names())?)
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::combine(&reports)
}

/// Shape of the synthetic cross-validation benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthProtocol {
    pub folds: usize,
    pub instances_per_action: usize,
    pub test_sequences_per_fold: usize,
    pub instances_per_test_sequence: usize,
}

impl Default for SynthProtocol {
    fn default() -> Self {
        Self {
            folds: 3,
            instances_per_action: 12,
            test_sequences_per_fold: 4,
            instances_per_test_sequence: 4,
        }
    }
}

/// One cross-validation fold of a synthetic dataset. Indices refer to the
/// clip list returned alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFold {
    pub train: Vec<usize>,
    pub held_out: Vec<usize>,
    /// Stitched from the held-out clips.
    pub tests: Vec<TestVideo>,
}

/// Generates clips, splits each action's clips into folds, and stitches the
/// held-out clips of every fold into test sequences.
pub fn synthetic_folds(
    spec: &SynthSpec,
    protocol: &SynthProtocol,
    seed: u64,
) -> Result<(Vec<LabelledVideo>, Vec<SynthFold>)> {
    let clips = synth_generate(spec, protocol.instances_per_action, seed)?;
    let names: Vec<String> = spec.actions.iter().map(|a| a.name.clone()).collect();
    let per_action_folds = names
        .iter()
        .enumerate()
        .map(|(a, name)| {
            let ids: Vec<usize> = (0..clips.len()).filter(|&i| clips[i].action == *name).collect();
            kfold_split(&ids, protocol.folds, seed.wrapping_add(a as u64))
        })
        .collect::<Result<Vec<_>>>()?;

    let folds = (0..protocol.folds)
        .map(|f| {
            let train: Vec<usize> = per_action_folds.iter().flat_map(|p| p[f].train.clone()).collect();
            let held_out: Vec<usize> = per_action_folds.iter().flat_map(|p| p[f].test.clone()).collect();
            let pool: Vec<LabelledVideo> = held_out.iter().map(|&i| clips[i].clone()).collect();
            let tests = (0..protocol.test_sequences_per_fold)
                .map(|s| {
                    let stitch_seed = seed ^ ((f as u64) << 20 | s as u64).wrapping_mul(0x94D0_49BB_1331_11EB);
                    let (frames, truth) = stitch_sequences(
                        &pool,
                        &names,
                        stitch_seed,
                        protocol.instances_per_test_sequence,
                    )?;
                    Ok(TestVideo { frames, truth })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SynthFold {
                train,
                held_out,
                tests,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((clips, folds))
}

/// Runs every fold of [`synthetic_folds`]: train on the remaining clips, test
/// on the stitched held-out sequences.
pub fn synthetic_cross_validation(
    spec: &SynthSpec,
    protocol: &SynthProtocol,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<CrossValReport> {
    let (clips, folds) = synthetic_folds(spec, protocol, seed)?;
    let reports = folds
        .iter()
        .map(|fold| {
            let train: Vec<LabelledVideo> = fold.train.iter().map(|&i| clips[i].clone()).collect();
            run_experiment(&train, &fold.tests, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    CrossValReport::from_folds(reports)
}
