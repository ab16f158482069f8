//! Full-covariance Gaussian mixtures fitted by EM, with BIC model selection.
//!
//! Initialization is k-means++ seeding driven by a `ChaCha8Rng` seeded from
//! the caller's `u64`. To make the fit independent of input order, points
//! are sorted lexicographically before seeding and responsibilities are
//! mapped back afterwards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusteringError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("component count must be at least 1")]
    ZeroComponents,
    #[error("points must share a positive dimension")]
    RaggedPoints,
    #[error("input contains non-finite coordinates")]
    NonFiniteInput,
    #[error("log-likelihood became non-finite at iteration {0}")]
    NonFiniteLikelihood(usize),
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
}

/// Added to every covariance diagonal in each M-step.
pub const REGULARIZATION: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 500;
/// Relative log-likelihood improvement that counts as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_K_MAX: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub dim: usize,
    #[serde(with = "crate::json::f17::vec")]
    pub weights: Vec<f64>,
    #[serde(with = "crate::json::f17::matrix")]
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Covariance>,
    #[serde(with = "crate::json::f17")]
    pub log_likelihood: f64,
    #[serde(with = "crate::json::f17")]
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(with = "crate::json::f17::vec")]
    pub log_likelihood_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_matrix")]
    pub responsibilities: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Covariance(#[serde(with = "crate::json::f17::matrix")] pub Vec<Vec<f64>>);

mod opt_matrix {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Vec<Vec<f64>>>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(rows) => crate::json::f17::matrix::serialize(rows, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Vec<f64>>>, D::Error> {
        Option::<Vec<Vec<f64>>>::deserialize(d)
    }
}

impl GmmModel {
    /// Number of free parameters: `(k−1) + k·dim + k·dim(dim+1)/2`.
    pub fn parameter_count(k: usize, dim: usize) -> usize {
        (k - 1) + k * dim + k * dim * (dim + 1) / 2
    }

    /// Copy without per-point responsibilities, for compact serialization.
    pub fn without_responsibilities(&self) -> Self {
        Self { responsibilities: None, ..self.clone() }
    }

    pub fn responsibilities(&self) -> &[Vec<f64>] {
        self.responsibilities.as_deref().unwrap_or(&[])
    }
}

fn validate(points: &[Vec<f64>]) -> Result<usize, ClusteringError> {
    let dim = points.first().map_or(0, Vec::len);
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(ClusteringError::RaggedPoints);
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ClusteringError::NonFiniteInput);
    }
    Ok(dim)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, later ones with probability
/// proportional to squared distance from the nearest chosen center.
fn kmeans_pp(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[idx].clone();
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Lower Cholesky factor, or `None` if not positive definite.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

struct Component {
    log_weight: f64,
    mean: Vec<f64>,
    chol: Vec<Vec<f64>>,
    log_norm: f64,
}

impl Component {
    fn new(weight: f64, mean: Vec<f64>, cov: &[Vec<f64>]) -> Result<Self, ClusteringError> {
        let chol = cholesky(cov).ok_or(ClusteringError::NotPositiveDefinite)?;
        let dim = mean.len() as f64;
        let log_det: f64 = 2.0 * (0..chol.len()).map(|i| chol[i][i].ln()).sum::<f64>();
        let log_norm = -0.5 * (dim * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self { log_weight: weight.ln(), mean, chol, log_norm })
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        // solve L z = x − μ
        let n = x.len();
        let mut z = vec![0.0; n];
        let mut maha = 0.0;
        for i in 0..n {
            let mut s = x[i] - self.mean[i];
            for k in 0..i {
                s -= self.chol[i][k] * z[k];
            }
            z[i] = s / self.chol[i][i];
            maha += z[i] * z[i];
        }
        self.log_norm - 0.5 * maha
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn e_step(points: &[Vec<f64>], comps: &[Component], resp: &mut [Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut row = vec![0.0; comps.len()];
    for (x, r) in points.iter().zip(resp.iter_mut()) {
        for (slot, c) in row.iter_mut().zip(comps) {
            *slot = c.log_weight + c.log_density(x);
        }
        let lse = log_sum_exp(&row);
        total += lse;
        for (out, v) in r.iter_mut().zip(&row) {
            *out = (v - lse).exp();
        }
    }
    total
}

struct Params {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<Vec<Vec<f64>>>,
}

fn m_step(points: &[Vec<f64>], resp: &[Vec<f64>], k: usize, dim: usize) -> Params {
    let n = points.len();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for c in 0..k {
        let nk: f64 = resp.iter().map(|r| r[c]).sum::<f64>() + 10.0 * f64::EPSILON;
        let mut mean = vec![0.0; dim];
        for (x, r) in points.iter().zip(resp) {
            for d in 0..dim {
                mean[d] += r[c] * x[d];
            }
        }
        for m in &mut mean {
            *m /= nk;
        }
        let mut cov = vec![vec![0.0; dim]; dim];
        for (x, r) in points.iter().zip(resp) {
            for a in 0..dim {
                let da = x[a] - mean[a];
                for b in 0..=a {
                    cov[a][b] += r[c] * da * (x[b] - mean[b]);
                }
            }
        }
        for a in 0..dim {
            for b in 0..=a {
                cov[a][b] /= nk;
                cov[b][a] = cov[a][b];
            }
            cov[a][a] += REGULARIZATION;
        }
        weights.push(nk / (n as f64 + 10.0 * f64::EPSILON * k as f64));
        means.push(mean);
        covs.push(cov);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Params { weights, means, covs }
}

fn components(p: &Params) -> Result<Vec<Component>, ClusteringError> {
    p.weights.iter().zip(&p.means).zip(&p.covs).map(|((&w, m), c)| Component::new(w, m.clone(), c)).collect()
}

fn sample_covariance(points: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let n = points.len() as f64;
    let mut mean = vec![0.0; dim];
    for p in points {
        for d in 0..dim {
            mean[d] += p[d];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for p in points {
        for a in 0..dim {
            for b in 0..dim {
                cov[a][b] += (p[a] - mean[a]) * (p[b] - mean[b]);
            }
        }
    }
    for (a, row) in cov.iter_mut().enumerate() {
        for x in row.iter_mut() {
            *x /= n;
        }
        row[a] += REGULARIZATION;
    }
    cov
}

/// Fits a `k`-component full-covariance mixture by EM.
pub fn fit_gmm(points: &[Vec<f64>], k: usize, seed: u64) -> Result<GmmModel, ClusteringError> {
    if k == 0 {
        return Err(ClusteringError::ZeroComponents);
    }
    if points.len() < k {
        return Err(ClusteringError::TooFewPoints { needed: k, got: points.len() });
    }
    let dim = validate(points)?;
    let n = points.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a].iter().zip(&points[b]).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let sorted: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = kmeans_pp(&sorted, k, &mut rng);
    let global = sample_covariance(&sorted, dim);
    let mut params = Params { weights: vec![1.0 / k as f64; k], means: centers, covs: vec![global; k] };

    let mut resp = vec![vec![0.0; k]; n];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut log_likelihood = f64::NEG_INFINITY;
    let mut accepted: Option<(Params, Vec<Vec<f64>>)> = None;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let comps = components(&params)?;
        let mut next_resp = vec![vec![0.0; k]; n];
        let ll = e_step(&sorted, &comps, &mut next_resp);
        if !ll.is_finite() {
            return Err(ClusteringError::NonFiniteLikelihood(iterations));
        }
        let prev = log_likelihood;
        if prev.is_finite() && ll < prev {
            // The regularized M-step is not an exact maximizer; keep the
            // previous parameters rather than record a decrease.
            if let Some((p, r)) = accepted.take() {
                params = p;
                resp = r;
            }
            converged = true;
            break;
        }
        trace.push(ll);
        log_likelihood = ll;
        resp = next_resp;
        if prev.is_finite() && (ll - prev) / prev.abs().max(f64::MIN_POSITIVE) < CONVERGENCE_TOLERANCE {
            converged = true;
            break;
        }
        if iterations == MAX_ITERATIONS {
            break;
        }
        let next = m_step(&sorted, &resp, k, dim);
        accepted = Some((std::mem::replace(&mut params, next), resp.clone()));
    }
    // `params` and `resp` are the last evaluated pair.
    let mut unsorted = vec![Vec::new(); n];
    for (row, &orig) in resp.into_iter().zip(&order) {
        unsorted[orig] = row;
    }
    let bic = -2.0 * log_likelihood + GmmModel::parameter_count(k, dim) as f64 * (n as f64).ln();
    Ok(GmmModel {
        k,
        dim,
        weights: params.weights,
        means: params.means,
        covariances: params.covs.into_iter().map(Covariance).collect(),
        log_likelihood,
        bic,
        iterations,
        converged,
        log_likelihood_trace: trace,
        responsibilities: Some(unsorted),
    })
}

/// Fits `k = 1..=min(k_max, n)` and keeps the lowest BIC, preferring the
/// smaller `k` on ties.
pub fn select_gmm(points: &[Vec<f64>], k_max: usize, seed: u64) -> Result<GmmModel, ClusteringError> {
    Ok(select_gmm_with_scores(points, k_max, seed)?.0)
}

/// As [`select_gmm`], also returning `(k, bic)` for every candidate.
pub fn select_gmm_with_scores(points: &[Vec<f64>], k_max: usize, seed: u64) -> Result<(GmmModel, Vec<(usize, f64)>), ClusteringError> {
    if k_max == 0 {
        return Err(ClusteringError::ZeroComponents);
    }
    if points.is_empty() {
        return Err(ClusteringError::TooFewPoints { needed: 1, got: 0 });
    }
    let mut best: Option<GmmModel> = None;
    let mut scores = Vec::new();
    for k in 1..=k_max.min(points.len()) {
        let model = fit_gmm(points, k, seed)?;
        scores.push((k, model.bic));
        if best.as_ref().is_none_or(|b| model.bic < b.bic) {
            best = Some(model);
        }
    }
    Ok((best.expect("at least one candidate"), scores))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ellipse {
    pub center: [f64; 2],
    /// Major then minor semi-axis.
    pub semi_axes: [f64; 2],
    /// Orientation of the major axis, in `(−π/2, π/2]`.
    pub angle: f64,
}

/// `n_sigma` contour of a 2-d Gaussian.
pub fn covariance_ellipse(mean: [f64; 2], cov: [[f64; 2]; 2], n_sigma: f64) -> Result<Ellipse, ClusteringError> {
    let (a, b, c) = (cov[0][0], cov[0][1], cov[1][1]);
    if !(n_sigma > 0.0) || [a, b, c, cov[1][0]].iter().any(|x| !x.is_finite()) {
        return Err(ClusteringError::NotPositiveDefinite);
    }
    if (b - cov[1][0]).abs() > 1e-12 * (1.0 + b.abs()) || a <= 0.0 || a * c - b * b <= 0.0 {
        return Err(ClusteringError::NotPositiveDefinite);
    }
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (mid + rad, (mid - rad).max(0.0));
    let mut angle = 0.5 * (2.0 * b).atan2(a - c);
    if angle <= -std::f64::consts::FRAC_PI_2 {
        angle += std::f64::consts::PI;
    }
    Ok(Ellipse { center: mean, semi_axes: [n_sigma * l1.sqrt(), n_sigma * l2.sqrt()], angle })
}
