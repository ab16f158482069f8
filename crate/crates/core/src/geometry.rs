//! Low-dimensional projection of distance matrices.
//!
//! [`classical_mds`] is the Torgerson construction: double-center the
//! squared distances, diagonalize, keep the top `k` eigenpairs.
//! [`smacof_refine`] then optionally minimizes raw stress with Guttman
//! transforms. Fidelity is scored by [`distance_correlation`], the Pearson
//! correlation between input and embedded pairwise distances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DistanceMatrix;
use crate::linalg::{symmetric_eigen, EigenError};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("target dimension {k} is outside 1..={max}")]
    InvalidDimension { k: usize, max: usize },
    #[error("distance matrix contains non-finite values")]
    NonFiniteInput,
    #[error("distance list has zero variance")]
    DegenerateDistribution,
    #[error("coordinates have {got} rows, distance matrix has {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("SMACOF produced a non-finite iterate at iteration {0}")]
    NonFiniteIterate(usize),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// Guards the relative-improvement ratio against 0/0.
pub const STRESS_EPSILON: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsSolution {
    pub k: usize,
    #[serde(with = "crate::json::f17::matrix")]
    pub coordinates: Vec<Vec<f64>>,
    #[serde(with = "crate::json::f17")]
    pub stress: f64,
    #[serde(with = "crate::json::f17")]
    pub r: f64,
    #[serde(with = "crate::json::f17::vec")]
    pub eigenvalues_used: Vec<f64>,
    #[serde(default)]
    pub negative_eigenvalues_clamped: usize,
}

impl MdsSolution {
    pub fn n(&self) -> usize {
        self.coordinates.len()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn embedded_upper(coordinates: &[Vec<f64>]) -> Vec<f64> {
    let n = coordinates.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(euclidean(&coordinates[i], &coordinates[j]));
        }
    }
    out
}

/// Raw stress `Σ_{i<j} (d_ij − ‖xᵢ − xⱼ‖)²`.
pub fn raw_stress(d: &DistanceMatrix, coordinates: &[Vec<f64>]) -> f64 {
    d.upper_triangle().iter().zip(embedded_upper(coordinates)).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, GeometryError> {
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(GeometryError::DegenerateDistribution);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(GeometryError::DegenerateDistribution);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between the upper-triangle input distances and the
/// corresponding embedded Euclidean distances.
pub fn distance_correlation(d: &DistanceMatrix, coordinates: &[Vec<f64>]) -> Result<f64, GeometryError> {
    if coordinates.len() != d.n() {
        return Err(GeometryError::ShapeMismatch { expected: d.n(), got: coordinates.len() });
    }
    if d.n() < 3 {
        return Err(GeometryError::TooFewPoints { needed: 3, got: d.n() });
    }
    pearson(&d.upper_triangle(), &embedded_upper(coordinates))
}

/// `r` as stored on a solution: the distance correlation, or exactly 1 when
/// the correlation is undefined but the embedding reproduces every input
/// distance (constant-distance inputs, two-point inputs).
fn fidelity(d: &DistanceMatrix, coordinates: &[Vec<f64>]) -> Result<f64, GeometryError> {
    match distance_correlation(d, coordinates) {
        Ok(r) => Ok(r),
        Err(GeometryError::DegenerateDistribution | GeometryError::TooFewPoints { .. }) => {
            let input = d.upper_triangle();
            let scale = input.iter().fold(1.0f64, |m, &x| m.max(x));
            let exact = input.iter().zip(embedded_upper(coordinates)).all(|(a, b)| (a - b).abs() <= 1e-9 * scale);
            if exact {
                Ok(1.0)
            } else {
                Err(GeometryError::DegenerateDistribution)
            }
        }
        Err(e) => Err(e),
    }
}

/// Double-centered Gram matrix `B = −½ J D⁽²⁾ J`.
pub fn double_center(d: &DistanceMatrix) -> Vec<Vec<f64>> {
    let n = d.n();
    let sq: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| d.get(i, j) * d.get(i, j)).collect()).collect();
    let row_mean: Vec<f64> = sq.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            // D² is symmetric, so column means equal row means
            let v = -0.5 * (sq[i][j] - row_mean[i] - row_mean[j] + grand);
            b[i][j] = v;
            b[j][i] = v;
        }
    }
    b
}

fn center_columns(coords: &mut [Vec<f64>]) {
    let n = coords.len();
    if n == 0 {
        return;
    }
    let k = coords[0].len();
    for c in 0..k {
        let mean = coords.iter().map(|row| row[c]).sum::<f64>() / n as f64;
        for row in coords.iter_mut() {
            row[c] -= mean;
        }
    }
}

// Makes the first clearly non-zero entry of each column positive.
fn fix_signs(coords: &mut [Vec<f64>]) {
    let Some(k) = coords.first().map(Vec::len) else { return };
    for c in 0..k {
        let max = coords.iter().map(|r| r[c].abs()).fold(0.0, f64::max);
        if max == 0.0 {
            continue;
        }
        if let Some(first) = coords.iter().map(|r| r[c]).find(|x| x.abs() > 1e-9 * max) {
            if first < 0.0 {
                for row in coords.iter_mut() {
                    row[c] = -row[c];
                }
            }
        }
    }
}

/// Classical (Torgerson) MDS into `k` dimensions.
///
/// Accepts `n ≥ 2` and `1 ≤ k ≤ n − 1`.
pub fn classical_mds(d: &DistanceMatrix, k: usize) -> Result<MdsSolution, GeometryError> {
    let n = d.n();
    if n < 2 {
        return Err(GeometryError::TooFewPoints { needed: 2, got: n });
    }
    if k == 0 || k > n - 1 {
        return Err(GeometryError::InvalidDimension { k, max: n - 1 });
    }
    if d.upper_triangle().iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::NonFiniteInput);
    }
    let eig = symmetric_eigen(&double_center(d))?;
    let eigenvalues_used: Vec<f64> = eig.values[..k].to_vec();
    let mut coordinates = vec![vec![0.0; k]; n];
    let mut clamped = 0;
    for (c, (&lambda, vector)) in eigenvalues_used.iter().zip(&eig.vectors).enumerate() {
        if lambda < 0.0 {
            clamped += 1;
        }
        let scale = lambda.max(0.0).sqrt();
        for i in 0..n {
            coordinates[i][c] = vector[i] * scale;
        }
    }
    center_columns(&mut coordinates);
    fix_signs(&mut coordinates);
    let stress = raw_stress(d, &coordinates);
    let r = fidelity(d, &coordinates)?;
    Ok(MdsSolution { k, coordinates, stress, r, eigenvalues_used, negative_eigenvalues_clamped: clamped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmacofOutcome {
    pub solution: MdsSolution,
    /// Stress of the initial configuration followed by each accepted iterate.
    pub stress_trace: Vec<f64>,
    pub iterations: usize,
}

// X ← (1/n) B(X) X for unit weights.
fn guttman_transform(d: &DistanceMatrix, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    let k = x.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; k]; n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let e = euclidean(&x[i], &x[j]);
            let b = if e > 0.0 { -d.get(i, j) / e } else { 0.0 };
            diag -= b;
            for c in 0..k {
                out[i][c] += b * x[j][c];
            }
        }
        for c in 0..k {
            out[i][c] = (out[i][c] + diag * x[i][c]) / n as f64;
        }
    }
    out
}

/// Refines `init` by SMACOF. Stops when the relative stress improvement
/// drops below `tol`, stress is numerically zero, or `max_iters` transforms
/// have run. An iterate that would increase stress is discarded, so the
/// recorded trace is non-increasing.
pub fn smacof_refine(d: &DistanceMatrix, init: &MdsSolution, max_iters: usize, tol: f64) -> Result<SmacofOutcome, GeometryError> {
    if !(tol > 0.0) {
        return Err(GeometryError::InvalidTolerance(tol));
    }
    if init.n() != d.n() {
        return Err(GeometryError::ShapeMismatch { expected: d.n(), got: init.n() });
    }
    let mut x = init.coordinates.clone();
    let mut stress = raw_stress(d, &x);
    let mut trace = vec![stress];
    // stress this small relative to Σd² means the fit is already exact
    let floor = STRESS_EPSILON * d.upper_triangle().iter().map(|x| x * x).sum::<f64>();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let candidate = guttman_transform(d, &x);
        if candidate.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFiniteIterate(iterations));
        }
        let next = raw_stress(d, &candidate);
        if !next.is_finite() {
            return Err(GeometryError::NonFiniteIterate(iterations));
        }
        if next >= stress {
            break;
        }
        let ratio = (stress - next) / stress.max(STRESS_EPSILON);
        x = candidate;
        stress = next;
        trace.push(stress);
        if ratio < tol || stress <= floor {
            break;
        }
    }
    center_columns(&mut x);
    let r = fidelity(d, &x)?;
    let solution = MdsSolution {
        k: init.k,
        stress: raw_stress(d, &x),
        coordinates: x,
        r,
        eigenvalues_used: init.eigenvalues_used.clone(),
        negative_eigenvalues_clamped: init.negative_eigenvalues_clamped,
    };
    Ok(SmacofOutcome { solution, stress_trace: trace, iterations })
}

/// Widens `sol` to `k` dimensions with zero columns (and zero eigenvalues).
pub fn pad_dimensions(sol: &MdsSolution, k: usize) -> MdsSolution {
    let mut out = sol.clone();
    if k > out.k {
        for row in &mut out.coordinates {
            row.resize(k, 0.0);
        }
        out.eigenvalues_used.resize(k, 0.0);
        out.k = k;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmacofParams {
    pub max_iters: usize,
    pub tol: f64,
}

/// Embeddings in 1..=`max_k` dimensions whose `r` never decreases with `k`.
///
/// Each k-dimensional result is the classical solution (optionally refined
/// by SMACOF) unless the previous result, padded with a zero axis, has a
/// higher `r`; a (k−1)-dimensional configuration is also a k-dimensional
/// one. Dimensions past `n − 1` carry no information and are zero padding.
pub fn nested_embeddings(d: &DistanceMatrix, max_k: usize, smacof: Option<SmacofParams>) -> Result<Vec<MdsSolution>, GeometryError> {
    let n = d.n();
    if n < 2 {
        return Err(GeometryError::TooFewPoints { needed: 2, got: n });
    }
    if max_k == 0 {
        return Err(GeometryError::InvalidDimension { k: 0, max: n - 1 });
    }
    let mut out: Vec<MdsSolution> = Vec::with_capacity(max_k);
    for k in 1..=max_k {
        let candidate = if k < n {
            let mut sol = classical_mds(d, k)?;
            if let Some(p) = smacof {
                sol = smacof_refine(d, &sol, p.max_iters, p.tol)?.solution;
            }
            Some(sol)
        } else {
            None
        };
        let chosen = match (candidate, out.last()) {
            (Some(c), Some(prev)) if prev.r > c.r => pad_dimensions(prev, k),
            (Some(c), _) => c,
            (None, Some(prev)) => pad_dimensions(prev, k),
            (None, None) => unreachable!("k = 1 is always at most n - 1"),
        };
        out.push(chosen);
    }
    Ok(out)
}
