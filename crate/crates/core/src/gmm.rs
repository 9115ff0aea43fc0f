//! Diagonal-covariance Gaussian mixture models.
//!
//! Fitting is k-means++ seeding, a few Lloyd iterations, then batch EM. The
//! E-step runs over fixed-size chunks in parallel and reduces the partial
//! sufficient statistics in chunk order, so a fit is bit-reproducible for a
//! given seed regardless of thread count.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

const CHUNK: usize = 1024;

/// Components whose responsibility mass falls below this fraction of the
/// data are re-seeded.
const STARVED_MASS: f64 = 1e-8;

/// Numerically stable `ln Σ exp(xs)`; `-inf` for an empty slice or all `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub n_components: usize,
    pub max_iters: usize,
    /// Stop once the mean log-likelihood improves by less than this fraction.
    pub rel_tol: f64,
    pub var_floor: f64,
    pub seed: u64,
    pub kmeans_iters: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_components: 4,
            max_iters: 200,
            rel_tol: 1e-5,
            var_floor: 1e-3,
            seed: 0,
            kmeans_iters: 20,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::InvalidInput("n_components must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::InvalidInput("rel_tol must be > 0".into()));
        }
        if !(self.var_floor.is_finite() && self.var_floor > 0.0) {
            return Err(Error::InvalidInput("var_floor must be > 0".into()));
        }
        Ok(())
    }
}

/// Provenance stored alongside a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub tau: Option<f64>,
    pub stride: Option<usize>,
    pub fit_config: FitConfig,
    pub data_count: usize,
}

#[derive(Debug, Clone)]
pub struct GmmModel {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    pub action: String,
    pub scenario: String,
    pub meta: Option<TrainMeta>,
    // ln w_g - ½(D ln 2π + Σ ln σ²)
    log_consts: Vec<f64>,
    inv_vars: Vec<Vec<f64>>,
}

impl PartialEq for GmmModel {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.weights == other.weights
            && self.means == other.means
            && self.variances == other.variances
            && self.action == other.action
            && self.scenario == other.scenario
            && self.meta == other.meta
    }
}

impl GmmModel {
    /// Validates weights (non-negative, summing to 1 within 1e-9), shapes,
    /// finiteness and strictly positive variances.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidInput("model needs at least one component".into()));
        }
        if means.len() != k || variances.len() != k {
            return Err(Error::dims(
                format!("{k} components"),
                format!("{} means, {} variances", means.len(), variances.len()),
            ));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput("model dimension must be >= 1".into()));
        }
        for (m, v) in means.iter().zip(&variances) {
            if m.len() != dim || v.len() != dim {
                return Err(Error::dims(dim, format!("{}/{}", m.len(), v.len())));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite mean".into()));
            }
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::InvalidInput("variances must be finite and > 0".into()));
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0 && *w <= 1.0)) {
            return Err(Error::InvalidInput("weights must lie in [0, 1]".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        let half_d_ln_2pi = 0.5 * dim as f64 * (2.0 * PI).ln();
        let log_consts = weights
            .iter()
            .zip(&variances)
            .map(|(w, v)| w.ln() - half_d_ln_2pi - 0.5 * v.iter().map(|s| s.ln()).sum::<f64>())
            .collect();
        let inv_vars = variances
            .iter()
            .map(|v| v.iter().map(|s| 1.0 / s).collect())
            .collect();
        Ok(Self {
            dim,
            weights,
            means,
            variances,
            action: String::new(),
            scenario: String::new(),
            meta: None,
            log_consts,
            inv_vars,
        })
    }

    pub fn with_labels(mut self, action: impl Into<String>, scenario: impl Into<String>) -> Self {
        self.action = action.into();
        self.scenario = scenario.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<f64>] {
        &self.variances
    }

    #[inline]
    fn component_log_density(&self, g: usize, x: &[f64]) -> f64 {
        let mut q = 0.0;
        for ((xi, mi), iv) in x.iter().zip(&self.means[g]).zip(&self.inv_vars[g]) {
            let d = xi - mi;
            q += d * d * iv;
        }
        self.log_consts[g] - 0.5 * q
    }

    /// `ln p(x)` without dimension checks.
    pub(crate) fn log_pdf_unchecked(&self, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend((0..self.weights.len()).map(|g| self.component_log_density(g, x)));
        log_sum_exp(scratch)
    }

    /// Log of the mixture density at `x`.
    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::dims(self.dim, x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite point".into()));
        }
        Ok(self.log_pdf_unchecked(x, &mut Vec::with_capacity(self.weights.len())))
    }

    /// Sum of `ln p(x)` over `vectors` (no dimension checks).
    pub(crate) fn sum_log_pdf<V: AsRef<[f64]>>(&self, vectors: &[V]) -> f64 {
        let mut scratch = Vec::with_capacity(self.weights.len());
        vectors
            .iter()
            .map(|v| self.log_pdf_unchecked(v.as_ref(), &mut scratch))
            .sum()
    }

    /// Mean of `ln p(f_i)` over the vectors, treating them as independent.
    pub fn avg_log_likelihood<V: AsRef<[f64]>>(&self, vectors: &[V]) -> Result<f64> {
        if vectors.is_empty() {
            return Err(Error::InvalidInput(
                "average log-likelihood of an empty set".into(),
            ));
        }
        for v in vectors {
            let v = v.as_ref();
            if v.len() != self.dim {
                return Err(Error::dims(self.dim, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite point".into()));
            }
        }
        Ok(self.sum_log_pdf(vectors) / vectors.len() as f64)
    }

    fn to_file(&self) -> ModelFile {
        let mut file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            dim: self.dim,
            n_components: self.n_components(),
            action: self.action.clone(),
            scenario: self.scenario.clone(),
            weights: self.weights.clone(),
            means: self.means.clone(),
            variances: self.variances.clone(),
            train_meta: self.meta,
            checksum: String::new(),
        };
        file.checksum = file.compute_checksum();
        file
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: probe.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_str(text)?;
        if file.compute_checksum() != file.checksum {
            return Err(Error::ChecksumMismatch);
        }
        if file.n_components != file.weights.len() {
            return Err(Error::dims(file.n_components, file.weights.len()));
        }
        let mut model = GmmModel::new(file.weights, file.means, file.variances)?;
        if model.dim != file.dim {
            return Err(Error::dims(file.dim, model.dim));
        }
        if let Some(meta) = &file.train_meta {
            let floor = meta.fit_config.var_floor;
            if model.variances.iter().flatten().any(|&v| v < floor) {
                return Err(Error::InvalidInput(format!(
                    "variance below the recorded floor {floor}"
                )));
            }
        }
        model.action = file.action;
        model.scenario = file.scenario;
        model.meta = file.train_meta;
        Ok(model)
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    dim: usize,
    n_components: usize,
    action: String,
    scenario: String,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    train_meta: Option<TrainMeta>,
    /// Hex SHA-256 of the compact JSON of every other field.
    checksum: String,
}

impl ModelFile {
    fn compute_checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let payload = serde_json::json!({
            "format_version": self.format_version,
            "dim": self.dim,
            "n_components": self.n_components,
            "action": self.action,
            "scenario": self.scenario,
            "weights": self.weights,
            "means": self.means,
            "variances": self.variances,
            "train_meta": self.train_meta,
        });
        hex::encode(Sha256::digest(payload.to_string().as_bytes()))
    }
}

pub fn save_model(model: &GmmModel, path: &Path) -> Result<()> {
    fs::write(path, model.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<GmmModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GmmModel::from_json(&text)
}

/// Row-major `n × dim` matrix of training points.
struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    fn from_rows<V: AsRef<[f64]>>(rows: &[V]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::InvalidInput("no data points".into()))?;
        if dim == 0 {
            return Err(Error::InvalidInput("zero-dimensional data".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::dims(dim, r.len()));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("data contains NaN or infinite values".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { data, dim })
    }

    fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (a, x) in m.iter_mut().zip(self.row(i)) {
                *a += x;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    fn shifted(&self, by: &[f64]) -> Self {
        let data = self
            .data
            .chunks_exact(self.dim)
            .flat_map(|r| r.iter().zip(by).map(|(x, m)| x - m))
            .collect();
        Self {
            data,
            dim: self.dim,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Output of [`kmeans_init`]: cluster means, floored per-dimension variances,
/// cluster fractions and the final point-to-cluster assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansInit {
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub assignments: Vec<usize>,
}

/// k-means++ seeding followed by up to `kmeans_iters` Lloyd iterations.
pub fn kmeans_init<V: AsRef<[f64]>>(
    data: &[V],
    n_components: usize,
    seed: u64,
    kmeans_iters: usize,
    var_floor: f64,
) -> Result<KmeansInit> {
    let points = Points::from_rows(data)?;
    kmeans_points(&points, n_components, seed, kmeans_iters, var_floor)
}

fn kmeans_points(
    points: &Points,
    k: usize,
    seed: u64,
    iters: usize,
    var_floor: f64,
) -> Result<KmeansInit> {
    let n = points.len();
    if k == 0 {
        return Err(Error::InvalidInput("n_components must be >= 1".into()));
    }
    if n < k {
        return Err(Error::InvalidInput(format!(
            "{n} points cannot seed {k} components"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points.row(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), &c));
        }
        centers.push(c);
    }

    let assign = |centers: &[Vec<f64>]| -> Vec<(usize, f64)> {
        (0..n)
            .into_par_iter()
            .with_min_len(CHUNK)
            .map(|i| nearest(points.row(i), centers))
            .collect()
    };

    let mut assignments: Vec<usize> = Vec::new();
    for _ in 0..=iters {
        let near = assign(&centers);
        let mut next: Vec<usize> = near.iter().map(|p| p.0).collect();
        repair_empty(points, &mut next, &near, k);
        let converged = next == assignments;
        assignments = next;
        centers = cluster_means(points, &assignments, k);
        if converged {
            break;
        }
    }

    let mut counts = vec![0usize; k];
    let mut variances = vec![vec![0.0; points.dim]; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for ((v, x), m) in variances[a].iter_mut().zip(points.row(i)).zip(&centers[a]) {
            *v += (x - m) * (x - m);
        }
    }
    for (v, &c) in variances.iter_mut().zip(&counts) {
        for s in v.iter_mut() {
            *s = (*s / c as f64).max(var_floor);
        }
    }
    let weights = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(KmeansInit {
        means: centers,
        variances,
        weights,
        assignments,
    })
}

/// Gives every empty cluster the point lying farthest from its centroid,
/// taken from clusters that can spare one.
fn repair_empty(points: &Points, assignments: &mut [usize], near: &[(usize, f64)], k: usize) {
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    let mut taken = vec![false; assignments.len()];
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let donor = (0..assignments.len())
            .filter(|&i| !taken[i] && counts[assignments[i]] > 1)
            .max_by(|&i, &j| near[i].1.total_cmp(&near[j].1).then(j.cmp(&i)));
        if let Some(i) = donor {
            counts[assignments[i]] -= 1;
            assignments[i] = empty;
            counts[empty] = 1;
            taken[i] = true;
        }
    }
    debug_assert!(points.len() < k || counts.iter().all(|&c| c > 0));
}

fn cluster_means(points: &Points, assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; points.dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Everything an EM run produced.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: GmmModel,
    /// Mean training log-likelihood after 0, 1, 2, … M-steps.
    pub log_likelihoods: Vec<f64>,
    /// Indices into `log_likelihoods` whose preceding step re-seeded a starved component.
    pub reseeded: Vec<usize>,
    /// Σ w_g of the model behind each `log_likelihoods` entry.
    pub weight_sums: Vec<f64>,
    pub converged: bool,
}

struct SuffStats {
    mass: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    log_lik: f64,
}

impl SuffStats {
    fn zeros(k: usize, dim: usize) -> Self {
        Self {
            mass: vec![0.0; k],
            sum: vec![0.0; k * dim],
            sum_sq: vec![0.0; k * dim],
            log_lik: 0.0,
        }
    }

    fn add(&mut self, other: &SuffStats) {
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.mass, &other.mass);
        add(&mut self.sum, &other.sum);
        add(&mut self.sum_sq, &other.sum_sq);
        self.log_lik += other.log_lik;
    }
}

struct Params {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

fn e_step(points: &Points, model: &GmmModel) -> SuffStats {
    let k = model.n_components();
    let dim = points.dim;
    let partials: Vec<SuffStats> = points
        .data
        .par_chunks(CHUNK * dim)
        .map(|chunk| {
            let mut st = SuffStats::zeros(k, dim);
            let mut logp = vec![0.0; k];
            for x in chunk.chunks_exact(dim) {
                for (g, lp) in logp.iter_mut().enumerate() {
                    *lp = model.component_log_density(g, x);
                }
                let lse = log_sum_exp(&logp);
                st.log_lik += lse;
                for (g, lp) in logp.iter().enumerate() {
                    let r = (lp - lse).exp();
                    if r == 0.0 {
                        continue;
                    }
                    st.mass[g] += r;
                    let base = g * dim;
                    for (d, xi) in x.iter().enumerate() {
                        st.sum[base + d] += r * xi;
                        st.sum_sq[base + d] += r * xi * xi;
                    }
                }
            }
            st
        })
        .collect();
    let mut total = SuffStats::zeros(k, dim);
    for p in &partials {
        total.add(p);
    }
    total
}

/// Returns the re-estimated parameters and whether a starved component was re-seeded.
fn m_step(stats: &SuffStats, n: usize, dim: usize, var_floor: f64) -> (Params, bool) {
    let k = stats.mass.len();
    let nf = n as f64;
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    let mut starved = Vec::new();
    for g in 0..k {
        let m = stats.mass[g];
        if m < STARVED_MASS * nf {
            starved.push(g);
            weights.push(0.0);
            means.push(vec![0.0; dim]);
            variances.push(vec![var_floor; dim]);
            continue;
        }
        let mu: Vec<f64> = (0..dim).map(|d| stats.sum[g * dim + d] / m).collect();
        let var: Vec<f64> = (0..dim)
            .map(|d| (stats.sum_sq[g * dim + d] / m - mu[d] * mu[d]).max(var_floor))
            .collect();
        weights.push(m / nf);
        means.push(mu);
        variances.push(var);
    }
    let reseeded = !starved.is_empty();
    for s in starved {
        // split the component with the largest total variance along its widest axis
        let donor = (0..k)
            .filter(|&g| weights[g] > 0.0)
            .max_by(|&a, &b| {
                let ta: f64 = variances[a].iter().sum();
                let tb: f64 = variances[b].iter().sum();
                ta.total_cmp(&tb).then(b.cmp(&a))
            })
            .expect("at least one component keeps responsibility mass");
        let axis = (0..dim)
            .max_by(|&a, &b| variances[donor][a].total_cmp(&variances[donor][b]).then(b.cmp(&a)))
            .unwrap_or(0);
        let offset = 0.5 * variances[donor][axis].sqrt();
        let mut mu = means[donor].clone();
        mu[axis] += offset;
        means[donor][axis] -= offset;
        means[s] = mu;
        variances[s] = variances[donor].clone();
        weights[donor] *= 0.5;
        weights[s] = weights[donor];
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (
        Params {
            weights,
            means,
            variances,
        },
        reseeded,
    )
}

/// Fits a diagonal GMM with EM.
pub fn em_fit<V: AsRef<[f64]>>(data: &[V], cfg: &FitConfig) -> Result<GmmModel> {
    em_fit_traced(data, cfg).map(|r| r.model)
}

/// [`em_fit`] that also returns the per-iteration log-likelihood trace.
pub fn em_fit_traced<V: AsRef<[f64]>>(data: &[V], cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    let raw = Points::from_rows(data)?;
    let n = raw.len();
    if n < cfg.n_components {
        return Err(Error::InvalidInput(format!(
            "{n} points cannot fit {} components",
            cfg.n_components
        )));
    }
    // work in centred coordinates to keep Σx² − nμ² well conditioned
    let offset = raw.column_means();
    let points = raw.shifted(&offset);
    drop(raw);
    let dim = points.dim;

    let init = kmeans_points(
        &points,
        cfg.n_components,
        cfg.seed,
        cfg.kmeans_iters,
        cfg.var_floor,
    )?;
    let mut model = GmmModel::new(init.weights, init.means, init.variances)?;

    let mut stats = e_step(&points, &model);
    let mut history = vec![stats.log_lik / n as f64];
    let mut weight_sums = vec![model.weights.iter().sum::<f64>()];
    let mut reseeded = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let (params, did_reseed) = m_step(&stats, n, dim, cfg.var_floor);
        model = GmmModel::new(params.weights, params.means, params.variances)?;
        weight_sums.push(model.weights.iter().sum());
        stats = e_step(&points, &model);
        let ll = stats.log_lik / n as f64;
        let prev = *history.last().unwrap();
        history.push(ll);
        if did_reseed {
            reseeded.push(history.len() - 1);
            continue;
        }
        if ll - prev < cfg.rel_tol * prev.abs() {
            converged = true;
            break;
        }
    }

    let means = model
        .means
        .iter()
        .map(|m| m.iter().zip(&offset).map(|(a, b)| a + b).collect())
        .collect();
    let mut out = GmmModel::new(model.weights, means, model.variances)?;
    out.meta = Some(TrainMeta {
        tau: None,
        stride: None,
        fit_config: *cfg,
        data_count: n,
    });
    Ok(FitReport {
        model: out,
        log_likelihoods: history,
        reseeded,
        weight_sums,
        converged,
    })
}
