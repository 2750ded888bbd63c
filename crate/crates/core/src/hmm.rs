//! Finite-state channel model: hidden Markov model with 2-D Gaussian
//! emissions over (path loss, delta path loss), trained by
//! Expectation-Maximization with scaled forward-backward recursions.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HmmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate fit: a state lost all observation mass")]
    DegenerateFit,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// 2-D observation: (path loss dB, delta path loss dB).
pub type Obs = [f64; 2];

/// Gaussian-emission HMM over (path loss, delta path loss) observations.
///
/// States are kept sorted by mean path loss ascending so state indices are
/// stable across runs and serializations.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHmm {
    pub initial: Vec<f64>,
    /// Row-stochastic transition matrix, `trans[i][j] = P(j | i)`.
    pub trans: Vec<Vec<f64>>,
    pub means: Vec<Obs>,
    /// Symmetric positive-definite 2x2 emission covariances (dB^2).
    pub covs: Vec<[[f64; 2]; 2]>,
}

const MODEL_FORMAT_VERSION: u32 = 1;

/// Flat, version-tagged JSON form of a [`GaussianHmm`].
#[derive(Debug, Serialize, Deserialize)]
pub struct HmmJson {
    pub version: u32,
    pub n_states: usize,
    pub initial: Vec<f64>,
    /// Row-major n x n transition matrix.
    pub trans: Vec<f64>,
    /// Row-major n x 2 means.
    pub means: Vec<f64>,
    /// Row-major n x 4 covariances.
    pub covs: Vec<f64>,
}

impl GaussianHmm {
    pub fn n_states(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<(), HmmError> {
        let n = self.n_states();
        if n == 0 {
            return Err(HmmError::InvalidModel("no states".into()));
        }
        if self.initial.len() != n || self.trans.len() != n || self.covs.len() != n {
            return Err(HmmError::InvalidModel("inconsistent dimensions".into()));
        }
        let pi_sum: f64 = self.initial.iter().sum();
        if (pi_sum - 1.0).abs() > 1e-9 {
            return Err(HmmError::InvalidModel(format!(
                "initial distribution sums to {pi_sum}"
            )));
        }
        for (i, row) in self.trans.iter().enumerate() {
            if row.len() != n {
                return Err(HmmError::InvalidModel("ragged transition matrix".into()));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(HmmError::InvalidModel(format!("row {i} sums to {s}")));
            }
        }
        for (i, c) in self.covs.iter().enumerate() {
            if det2(c) <= 0.0 || c[0][0] <= 0.0 || c[1][1] <= 0.0 {
                return Err(HmmError::InvalidModel(format!(
                    "covariance of state {i} not positive-definite"
                )));
            }
        }
        Ok(())
    }

    /// Per-state (mean path loss, mean delta path loss) projection.
    pub fn state_summary(&self) -> Vec<(f64, f64)> {
        self.means.iter().map(|m| (m[0], m[1])).collect()
    }

    pub fn to_json(&self) -> Result<String, HmmError> {
        let n = self.n_states();
        let doc = HmmJson {
            version: MODEL_FORMAT_VERSION,
            n_states: n,
            initial: self.initial.clone(),
            trans: self.trans.iter().flatten().copied().collect(),
            means: self.means.iter().flatten().copied().collect(),
            covs: self
                .covs
                .iter()
                .flat_map(|c| [c[0][0], c[0][1], c[1][0], c[1][1]])
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(raw: &str) -> Result<Self, HmmError> {
        let doc: HmmJson = serde_json::from_str(raw)?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(HmmError::InvalidModel(format!(
                "unsupported model version {}",
                doc.version
            )));
        }
        let n = doc.n_states;
        if doc.initial.len() != n
            || doc.trans.len() != n * n
            || doc.means.len() != 2 * n
            || doc.covs.len() != 4 * n
        {
            return Err(HmmError::InvalidModel("array lengths do not match n_states".into()));
        }
        let model = GaussianHmm {
            initial: doc.initial,
            trans: doc.trans.chunks(n).map(|r| r.to_vec()).collect(),
            means: doc.means.chunks(2).map(|m| [m[0], m[1]]).collect(),
            covs: doc
                .covs
                .chunks(4)
                .map(|c| [[c[0], c[1]], [c[2], c[3]]])
                .collect(),
        };
        model.validate()?;
        Ok(model)
    }
}

fn det2(c: &[[f64; 2]; 2]) -> f64 {
    c[0][0] * c[1][1] - c[0][1] * c[1][0]
}

/// Per-state quantities for density evaluation.
struct EmissionCache {
    inv: Vec<[[f64; 2]; 2]>,
    log_norm: Vec<f64>,
}

impl EmissionCache {
    fn new(h: &GaussianHmm) -> Self {
        let mut inv = Vec::with_capacity(h.n_states());
        let mut log_norm = Vec::with_capacity(h.n_states());
        for c in &h.covs {
            let d = det2(c);
            inv.push([
                [c[1][1] / d, -c[0][1] / d],
                [-c[1][0] / d, c[0][0] / d],
            ]);
            log_norm.push(-(2.0 * std::f64::consts::PI).ln() - 0.5 * d.ln());
        }
        Self { inv, log_norm }
    }

    fn log_density(&self, state: usize, mean: &Obs, x: &Obs) -> f64 {
        let dx = [x[0] - mean[0], x[1] - mean[1]];
        let m = &self.inv[state];
        let quad = dx[0] * (m[0][0] * dx[0] + m[0][1] * dx[1])
            + dx[1] * (m[1][0] * dx[0] + m[1][1] * dx[1]);
        self.log_norm[state] - 0.5 * quad
    }
}

/// All per-time log emission densities, (T x N) row-major.
fn log_emissions(h: &GaussianHmm, obs: &[Obs]) -> Vec<f64> {
    let cache = EmissionCache::new(h);
    let n = h.n_states();
    let mut out = vec![0.0; obs.len() * n];
    for (t, x) in obs.iter().enumerate() {
        for i in 0..n {
            out[t * n + i] = cache.log_density(i, &h.means[i], x);
        }
    }
    out
}

struct ForwardBackward {
    /// Scaled forward variables, T x N.
    alpha: Vec<f64>,
    /// Scaled backward variables, T x N.
    beta: Vec<f64>,
    /// Shifted linear emission densities, T x N.
    b: Vec<f64>,
    /// Per-step scale factors (of the shifted densities).
    scale: Vec<f64>,
    log_likelihood: f64,
}

fn forward_backward(h: &GaussianHmm, obs: &[Obs]) -> Result<ForwardBackward, HmmError> {
    let n = h.n_states();
    let t_len = obs.len();
    let logb = log_emissions(h, obs);
    let mut b = vec![0.0; t_len * n];
    let mut shift = vec![0.0; t_len];
    for t in 0..t_len {
        let row = &logb[t * n..(t + 1) * n];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(HmmError::InvalidInput(format!(
                "non-finite emission density at t = {t}"
            )));
        }
        shift[t] = m;
        for i in 0..n {
            b[t * n + i] = (row[i] - m).exp();
        }
    }

    let mut alpha = vec![0.0; t_len * n];
    let mut scale = vec![0.0; t_len];
    let mut ll = 0.0;
    for i in 0..n {
        alpha[i] = h.initial[i] * b[i];
    }
    for t in 0..t_len {
        if t > 0 {
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += alpha[(t - 1) * n + j] * h.trans[j][i];
                }
                alpha[t * n + i] = s * b[t * n + i];
            }
        }
        let c: f64 = alpha[t * n..(t + 1) * n].iter().sum();
        if c <= 0.0 || !c.is_finite() {
            return Err(HmmError::DegenerateFit);
        }
        for i in 0..n {
            alpha[t * n + i] /= c;
        }
        scale[t] = c;
        ll += c.ln() + shift[t];
    }

    let mut beta = vec![0.0; t_len * n];
    for i in 0..n {
        beta[(t_len - 1) * n + i] = 1.0 / scale[t_len - 1];
    }
    for t in (0..t_len - 1).rev() {
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += h.trans[i][j] * b[(t + 1) * n + j] * beta[(t + 1) * n + j];
            }
            beta[t * n + i] = s / scale[t];
        }
    }

    Ok(ForwardBackward {
        alpha,
        beta,
        b,
        scale,
        log_likelihood: ll,
    })
}

/// Exact log-likelihood of the observation sequence under the model,
/// computed by the scaled forward recursion.
pub fn log_likelihood(h: &GaussianHmm, obs: &[Obs]) -> Result<f64, HmmError> {
    h.validate()?;
    if obs.is_empty() {
        return Err(HmmError::InvalidInput("empty observation sequence".into()));
    }
    Ok(forward_backward(h, obs)?.log_likelihood)
}

/// Online filtered-posterior decoder: feed observations one at a time and
/// read the current MAP state.
pub struct StateFilter<'a> {
    model: &'a GaussianHmm,
    cache: EmissionCache,
    posterior: Vec<f64>,
    started: bool,
}

impl<'a> StateFilter<'a> {
    pub fn new(model: &'a GaussianHmm) -> Self {
        Self {
            model,
            cache: EmissionCache::new(model),
            posterior: vec![0.0; model.n_states()],
            started: false,
        }
    }

    /// Advance one step and return the MAP state index; ties break toward
    /// the lowest index.
    pub fn push(&mut self, x: &Obs) -> usize {
        let n = self.model.n_states();
        let mut logw = vec![0.0; n];
        for i in 0..n {
            let prior = if self.started {
                let mut s = 0.0;
                for j in 0..n {
                    s += self.posterior[j] * self.model.trans[j][i];
                }
                s
            } else {
                self.model.initial[i]
            };
            logw[i] = prior.max(0.0).ln() + self.cache.log_density(i, &self.model.means[i], x);
        }
        let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for i in 0..n {
            self.posterior[i] = (logw[i] - m).exp();
            sum += self.posterior[i];
        }
        for p in &mut self.posterior {
            *p /= sum;
        }
        self.started = true;
        self.map_state()
    }

    pub fn map_state(&self) -> usize {
        let mut best = 0;
        for i in 1..self.posterior.len() {
            if self.posterior[i] > self.posterior[best] {
                best = i;
            }
        }
        best
    }

    pub fn posterior(&self) -> &[f64] {
        &self.posterior
    }
}

/// MAP state after observing the whole prefix: argmax_i P(c_t = i | o_1..o_t).
pub fn filter_state(h: &GaussianHmm, obs_prefix: &[Obs]) -> Result<usize, HmmError> {
    h.validate()?;
    if obs_prefix.is_empty() {
        return Err(HmmError::InvalidInput("empty prefix".into()));
    }
    let mut filter = StateFilter::new(h);
    let mut state = 0;
    for x in obs_prefix {
        state = filter.push(x);
    }
    Ok(state)
}

/// Maximum a posteriori state path (Viterbi, log domain).
pub fn viterbi(h: &GaussianHmm, obs: &[Obs]) -> Result<Vec<usize>, HmmError> {
    h.validate()?;
    if obs.is_empty() {
        return Err(HmmError::InvalidInput("empty observation sequence".into()));
    }
    let n = h.n_states();
    let t_len = obs.len();
    let logb = log_emissions(h, obs);
    let log_trans: Vec<Vec<f64>> = h
        .trans
        .iter()
        .map(|r| r.iter().map(|&p| p.max(0.0).ln()).collect())
        .collect();

    let mut delta: Vec<f64> = (0..n)
        .map(|i| h.initial[i].max(0.0).ln() + logb[i])
        .collect();
    let mut backptr = vec![0usize; t_len * n];
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; n];
        for i in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for j in 0..n {
                let v = delta[j] + log_trans[j][i];
                if v > best {
                    best = v;
                    arg = j;
                }
            }
            next[i] = best + logb[t * n + i];
            backptr[t * n + i] = arg;
        }
        delta = next;
    }
    let mut state = delta
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut path = vec![0usize; t_len];
    path[t_len - 1] = state;
    for t in (1..t_len).rev() {
        state = backptr[t * n + state];
        path[t - 1] = state;
    }
    Ok(path)
}

fn cholesky2(c: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let l00 = c[0][0].sqrt();
    let l10 = c[1][0] / l00;
    let l11 = (c[1][1] - l10 * l10).max(0.0).sqrt();
    [[l00, 0.0], [l10, l11]]
}

/// Draw an observation sequence and its hidden state path; deterministic
/// for a fixed seed.
pub fn sample(h: &GaussianHmm, length: usize, seed: u64) -> Result<(Vec<Obs>, Vec<usize>), HmmError> {
    h.validate()?;
    if length < 1 {
        return Err(HmmError::InvalidInput("length must be >= 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let chols: Vec<_> = h.covs.iter().map(cholesky2).collect();
    let draw_state = |weights: &[f64], rng: &mut ChaCha12Rng| -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        weights.len() - 1
    };
    let mut states = Vec::with_capacity(length);
    let mut obs = Vec::with_capacity(length);
    let mut state = draw_state(&h.initial, &mut rng);
    for _ in 0..length {
        let z0: f64 = rng.sample(rand_distr::StandardNormal);
        let z1: f64 = rng.sample(rand_distr::StandardNormal);
        let l = &chols[state];
        obs.push([
            h.means[state][0] + l[0][0] * z0,
            h.means[state][1] + l[1][0] * z0 + l[1][1] * z1,
        ]);
        states.push(state);
        state = draw_state(&h.trans[state], &mut rng);
    }
    Ok((obs, states))
}

/// EM training configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitConfig {
    pub n_states: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop when the log-likelihood improvement falls below this.
    pub tol: f64,
    /// Minimum covariance eigenvalue enforced every M-step (dB^2).
    pub cov_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_states: 15,
            seed: 0,
            max_iters: 500,
            tol: 1e-6,
            cov_floor: 1e-6,
        }
    }
}

/// Per-iteration training trace.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Clamp the smallest eigenvalue of a symmetric 2x2 matrix to `floor`.
fn floor_eigenvalues(c: &mut [[f64; 2]; 2], floor: f64) {
    let off = 0.5 * (c[0][1] + c[1][0]);
    c[0][1] = off;
    c[1][0] = off;
    let tr = c[0][0] + c[1][1];
    let gap = (0.25 * (c[0][0] - c[1][1]).powi(2) + off * off).sqrt();
    let l1 = 0.5 * tr - gap;
    let l2 = 0.5 * tr + gap;
    let (nl1, nl2) = (l1.max(floor), l2.max(floor));
    if nl1 == l1 && nl2 == l2 {
        return;
    }
    // eigenvector for l2
    let (vx, vy) = if off.abs() > 1e-300 {
        (off, l2 - c[0][0])
    } else if c[0][0] >= c[1][1] {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let norm = (vx * vx + vy * vy).sqrt();
    let (ux, uy) = (vx / norm, vy / norm);
    // reconstruct: nl2 * u u' + nl1 * (I - u u')
    c[0][0] = nl1 + (nl2 - nl1) * ux * ux;
    c[1][1] = nl1 + (nl2 - nl1) * uy * uy;
    c[0][1] = (nl2 - nl1) * ux * uy;
    c[1][0] = c[0][1];
}

/// Deterministic k-means-style seeding of the emission means: farthest-point
/// style center selection with a seeded RNG, then a few Lloyd refinements.
fn kmeans_init(
    obs: &[Obs],
    n_states: usize,
    seed: u64,
    cov_floor: f64,
) -> Result<(Vec<Obs>, Vec<[[f64; 2]; 2]>), HmmError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut centers: Vec<Obs> = vec![obs[rng.gen_range(0..obs.len())]];
    let dist2 = |a: &Obs, b: &Obs| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    while centers.len() < n_states {
        // k-means++ weighting by squared distance to the nearest center
        let weights: Vec<f64> = obs
            .iter()
            .map(|x| {
                centers
                    .iter()
                    .map(|c| dist2(x, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(HmmError::DegenerateFit);
        }
        let mut u = rng.gen::<f64>() * total;
        let mut pick = obs.len() - 1;
        for (i, &w) in weights.iter().enumerate() {
            u -= w;
            if u <= 0.0 {
                pick = i;
                break;
            }
        }
        centers.push(obs[pick]);
    }
    let mut assignment = vec![0usize; obs.len()];
    for _ in 0..20 {
        let mut changed = false;
        for (t, x) in obs.iter().enumerate() {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (i, c) in centers.iter().enumerate() {
                let d = dist2(x, c);
                if d < bd {
                    bd = d;
                    best = i;
                }
            }
            if assignment[t] != best {
                assignment[t] = best;
                changed = true;
            }
        }
        let mut sums = vec![[0.0f64; 2]; n_states];
        let mut counts = vec![0usize; n_states];
        for (t, x) in obs.iter().enumerate() {
            sums[assignment[t]][0] += x[0];
            sums[assignment[t]][1] += x[1];
            counts[assignment[t]] += 1;
        }
        for i in 0..n_states {
            if counts[i] == 0 {
                return Err(HmmError::DegenerateFit);
            }
            centers[i] = [sums[i][0] / counts[i] as f64, sums[i][1] / counts[i] as f64];
        }
        if !changed {
            break;
        }
    }
    let mut covs = vec![[[0.0f64; 2]; 2]; n_states];
    let mut counts = vec![0usize; n_states];
    for (t, x) in obs.iter().enumerate() {
        let i = assignment[t];
        let dx = [x[0] - centers[i][0], x[1] - centers[i][1]];
        covs[i][0][0] += dx[0] * dx[0];
        covs[i][0][1] += dx[0] * dx[1];
        covs[i][1][0] += dx[1] * dx[0];
        covs[i][1][1] += dx[1] * dx[1];
        counts[i] += 1;
    }
    for i in 0..n_states {
        let k = counts[i] as f64;
        for r in 0..2 {
            for c in 0..2 {
                covs[i][r][c] /= k;
            }
        }
        floor_eigenvalues(&mut covs[i], cov_floor);
    }
    Ok((centers, covs))
}

fn sort_states_by_mean_pl(h: &mut GaussianHmm) {
    let n = h.n_states();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h.means[a][0].partial_cmp(&h.means[b][0]).unwrap());
    h.initial = order.iter().map(|&o| h.initial[o]).collect();
    h.means = order.iter().map(|&o| h.means[o]).collect();
    h.covs = order.iter().map(|&o| h.covs[o]).collect();
    h.trans = order
        .iter()
        .map(|&o| order.iter().map(|&p| h.trans[o][p]).collect())
        .collect();
}

/// Fit a Gaussian HMM to the observation sequence with Baum-Welch.
///
/// Initialization is deterministic given `cfg.seed`: k-means seeding of the
/// emission parameters, uniform initial distribution, and a transition
/// matrix with 0.9 self-loop mass (path-loss states are strongly sticky).
/// The per-iteration log-likelihood is non-decreasing up to numerical
/// slack; training stops when the improvement drops below `cfg.tol`.
pub fn fit_em(obs: &[Obs], cfg: &FitConfig) -> Result<(GaussianHmm, FitReport), HmmError> {
    if cfg.n_states < 1 {
        return Err(HmmError::InvalidInput("n_states must be >= 1".into()));
    }
    if obs.len() < 10 * cfg.n_states {
        return Err(HmmError::InvalidInput(format!(
            "{} observations are too few for {} states (need {})",
            obs.len(),
            cfg.n_states,
            10 * cfg.n_states
        )));
    }
    if cfg.tol <= 0.0 {
        return Err(HmmError::InvalidInput("tol must be positive".into()));
    }
    if obs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(HmmError::InvalidInput("non-finite observation".into()));
    }
    let n = cfg.n_states;
    let (means, covs) = kmeans_init(obs, n, cfg.seed, cfg.cov_floor)?;
    let self_mass = if n == 1 { 1.0 } else { 0.9 };
    let off_mass = if n == 1 { 0.0 } else { 0.1 / (n - 1) as f64 };
    let mut model = GaussianHmm {
        initial: vec![1.0 / n as f64; n],
        trans: (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { self_mass } else { off_mass })
                    .collect()
            })
            .collect(),
        means,
        covs,
    };

    let t_len = obs.len();
    let mut history = Vec::new();
    let mut converged = false;
    for _iter in 0..cfg.max_iters {
        let fb = forward_backward(&model, obs)?;
        history.push(fb.log_likelihood);
        if history.len() >= 2 {
            let improvement = history[history.len() - 1] - history[history.len() - 2];
            if improvement.abs() < cfg.tol {
                converged = true;
                break;
            }
        }

        // E-step statistics
        let mut gamma = vec![0.0; t_len * n];
        for t in 0..t_len {
            let mut s = 0.0;
            for i in 0..n {
                let g = fb.alpha[t * n + i] * fb.beta[t * n + i] * fb.scale[t];
                gamma[t * n + i] = g;
                s += g;
            }
            for i in 0..n {
                gamma[t * n + i] /= s;
            }
        }
        let mut xi_sum = vec![vec![0.0; n]; n];
        for t in 0..t_len - 1 {
            let mut step = vec![0.0; n * n];
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let v = fb.alpha[t * n + i]
                        * model.trans[i][j]
                        * fb.b[(t + 1) * n + j]
                        * fb.beta[(t + 1) * n + j]
                        * fb.scale[t + 1];
                    step[i * n + j] = v;
                    s += v;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    xi_sum[i][j] += step[i * n + j] / s;
                }
            }
        }

        // M-step
        let pi_sum: f64 = (0..n).map(|i| gamma[i]).sum();
        for i in 0..n {
            model.initial[i] = gamma[i] / pi_sum;
        }
        for i in 0..n {
            let denom: f64 = (0..t_len - 1).map(|t| gamma[t * n + i]).sum();
            if denom <= 1e-12 {
                return Err(HmmError::DegenerateFit);
            }
            let row_sum: f64 = xi_sum[i].iter().sum();
            for j in 0..n {
                model.trans[i][j] = xi_sum[i][j] / row_sum;
            }
        }
        for i in 0..n {
            let w: f64 = (0..t_len).map(|t| gamma[t * n + i]).sum();
            if w <= 1e-12 {
                return Err(HmmError::DegenerateFit);
            }
            let mut mean = [0.0f64; 2];
            for (t, x) in obs.iter().enumerate() {
                mean[0] += gamma[t * n + i] * x[0];
                mean[1] += gamma[t * n + i] * x[1];
            }
            mean[0] /= w;
            mean[1] /= w;
            let mut cov = [[0.0f64; 2]; 2];
            for (t, x) in obs.iter().enumerate() {
                let g = gamma[t * n + i];
                let dx = [x[0] - mean[0], x[1] - mean[1]];
                cov[0][0] += g * dx[0] * dx[0];
                cov[0][1] += g * dx[0] * dx[1];
                cov[1][1] += g * dx[1] * dx[1];
            }
            cov[0][0] /= w;
            cov[0][1] /= w;
            cov[1][0] = cov[0][1];
            cov[1][1] /= w;
            floor_eigenvalues(&mut cov, cfg.cov_floor);
            model.means[i] = mean;
            model.covs[i] = cov;
        }
    }
    if history.is_empty() {
        history.push(forward_backward(&model, obs)?.log_likelihood);
    }
    sort_states_by_mean_pl(&mut model);
    model.validate()?;
    Ok((
        model,
        FitReport {
            iterations: history.len(),
            log_likelihood: history,
            converged,
        },
    ))
}
