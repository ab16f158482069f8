#![allow(dead_code)]

use std::path::PathBuf;

use proofspace::corpus::{Condition, ProofRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coefficients `c[0..=n]` of det(λI − A) = Σ c[i] λ^(n−i), by the
/// Faddeev–LeVerrier recursion.
pub fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    let mut m = vec![vec![0.0; n]; n];
    for k in 1..=n {
        // M_k = A M_{k−1} + c_{k−1} I
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| a[i][l] * m[l][j]).sum::<f64>();
            }
            next[i][i] += c[k - 1];
        }
        m = next;
        let am_trace: f64 = (0..n).map(|i| (0..n).map(|l| a[i][l] * m[l][i]).sum::<f64>()).sum();
        c[k] = -am_trace / k as f64;
    }
    c
}

fn horner(c: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &ci in c {
        dp = dp * x + p;
        p = p * x + ci;
    }
    (p, dp)
}

/// Real roots of a monic polynomial with only real, simple roots, found by
/// Durand–Kerner on the complex plane and polished with Newton steps.
pub fn real_roots(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    let bound = 1.0 + c[1..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let seed = (0.4f64, 0.9f64);
    let mut z: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut w = (1.0, 0.0);
    for _ in 0..n {
        z.push((w.0 * bound, w.1 * bound));
        w = (w.0 * seed.0 - w.1 * seed.1, w.0 * seed.1 + w.1 * seed.0);
    }
    let mul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
    let div = |a: (f64, f64), b: (f64, f64)| {
        let d = b.0 * b.0 + b.1 * b.1;
        ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
    };
    for _ in 0..2000 {
        let prev = z.clone();
        for i in 0..n {
            let mut p = (0.0, 0.0);
            for &ci in c {
                p = mul(p, prev[i]);
                p.0 += ci;
            }
            let mut q = (1.0, 0.0);
            for j in 0..n {
                if j != i {
                    q = mul(q, (prev[i].0 - z[j].0, prev[i].1 - z[j].1));
                }
            }
            let step = div(p, q);
            z[i] = (prev[i].0 - step.0, prev[i].1 - step.1);
        }
    }
    let mut roots: Vec<f64> = z
        .into_iter()
        .map(|(re, _)| {
            let mut x = re;
            for _ in 0..50 {
                let (p, dp) = horner(c, x);
                if dp == 0.0 {
                    break;
                }
                x -= p / dp;
            }
            x
        })
        .collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

pub fn random_symmetric(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = r.random_range(-3.0..3.0);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    a
}

pub fn euclidean_rows(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| points.iter().map(|q| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()).collect())
        .collect()
}

/// `n` points on a random 2-plane through the origin of `R^dim`, with
/// coordinates in the plane drawn uniformly from `[-1, 1]²`.
pub fn planar_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut basis: Vec<Vec<f64>> = (0..2).map(|_| (0..dim).map(|_| StandardNormal.sample(&mut r)).collect()).collect();
    // Gram–Schmidt
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n0 = norm(&basis[0]);
    basis[0].iter_mut().for_each(|x| *x /= n0);
    let proj: f64 = basis[0].iter().zip(&basis[1]).map(|(a, b)| a * b).sum();
    let b0 = basis[0].clone();
    basis[1].iter_mut().zip(&b0).for_each(|(x, e)| *x -= proj * e);
    let n1 = norm(&basis[1]);
    basis[1].iter_mut().for_each(|x| *x /= n1);
    (0..n)
        .map(|_| {
            let (u, v): (f64, f64) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
            (0..dim).map(|j| u * basis[0][j] + v * basis[1][j]).collect()
        })
        .collect()
}

/// Two isotropic unit-variance clusters of `per` points at (0,0) and (10,10).
pub fn two_clusters(per: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (label, c) in [0.0, 10.0].into_iter().enumerate() {
        for _ in 0..per {
            pts.push(vec![c + normal.sample(&mut r), c + normal.sample(&mut r)]);
            labels.push(label);
        }
    }
    (pts, labels)
}

pub fn gaussian_blob(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..n).map(|_| (0..dim).map(|_| StandardNormal.sample(&mut r)).collect()).collect()
}

/// Toy proof embedder: FNV-1a hashed bag of whitespace tokens.
pub fn toy_embed(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for tok in text.split_whitespace() {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in tok.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        v[(h % dim as u64) as usize] += 1.0;
    }
    v
}

pub fn record(proof_id: &str, theorem_id: &str, condition: Condition, lean_text: &str, embedding: Vec<f64>) -> ProofRecord {
    ProofRecord { proof_id: proof_id.into(), theorem_id: theorem_id.into(), condition, lean_text: lean_text.into(), embedding }
}
