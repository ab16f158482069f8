mod common;

use common::*;
use proofspace::clustering::{fit_gmm, select_gmm, select_gmm_with_scores, REGULARIZATION};
use proofspace::corpus::{kurtosis, select_layer, Layer};
use proofspace::geometry::{classical_mds, euclidean, nested_embeddings};
use proofspace::linalg::symmetric_eigen;
use proofspace::{DistanceMatrix, LayerStack};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn assert_reproduces(rows: &[Vec<f64>], k: usize) {
    let d = DistanceMatrix::from_rows(rows).unwrap();
    let sol = classical_mds(&d, k).unwrap();
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            let e = euclidean(&sol.coordinates[i], &sol.coordinates[j]);
            assert!((e - rows[i][j]).abs() < 1e-9, "({i},{j}): {e} vs {}", rows[i][j]);
        }
    }
}

#[test]
fn jacobi_matches_characteristic_polynomial_roots() {
    for n in 1..=4 {
        for seed in 0..25 {
            let a = random_symmetric(n, 100 * n as u64 + seed);
            let expected = real_roots(&char_poly(&a));
            let got = symmetric_eigen(&a).unwrap().values;
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() < 1e-9, "n={n} seed={seed}: {got:?} vs {expected:?}");
            }
        }
    }
}

#[test]
fn jacobi_matches_nalgebra_on_larger_matrices() {
    for n in [5, 8, 13, 21] {
        let a = random_symmetric(n, n as u64);
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
        let mut expected: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        expected.sort_by(|x, y| y.total_cmp(x));
        let got = symmetric_eigen(&a).unwrap();
        for (g, e) in got.values.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-9 * (1.0 + e.abs()), "n={n}: {g} vs {e}");
        }
        // A v = λ v
        for (lambda, v) in got.values.iter().zip(&got.vectors) {
            for i in 0..n {
                let av: f64 = (0..n).map(|j| a[i][j] * v[j]).sum();
                assert!((av - lambda * v[i]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn equilateral_triangle_is_reproduced() {
    let rows = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
    assert_reproduces(&rows, 2);
}

#[test]
fn unit_square_is_reproduced() {
    let s = 2f64.sqrt();
    let rows = vec![
        vec![0.0, 1.0, s, 1.0],
        vec![1.0, 0.0, 1.0, s],
        vec![s, 1.0, 0.0, 1.0],
        vec![1.0, s, 1.0, 0.0],
    ];
    assert_reproduces(&rows, 2);
    let d = DistanceMatrix::from_rows(&rows).unwrap();
    assert!((classical_mds(&d, 2).unwrap().r - 1.0).abs() < 1e-12);
}

#[test]
fn planar_points_are_recovered_in_two_dimensions() {
    for seed in 0..5 {
        let pts = planar_points(50, 100, seed);
        let d = DistanceMatrix::from_rows(&euclidean_rows(&pts)).unwrap();
        let sols = nested_embeddings(&d, 3, None).unwrap();
        assert!(sols[1].r >= 0.999, "seed {seed}: r_2d = {}", sols[1].r);
        assert!(sols[0].r < sols[1].r);
        assert!(sols[2].r >= sols[1].r - 1e-9);
        // planar data: classical 2-d reproduces every distance
        let exact = classical_mds(&d, 2).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                assert!((euclidean(&exact.coordinates[i], &exact.coordinates[j]) - d.get(i, j)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn kurtosis_of_alternating_signs_is_one() {
    assert!((kurtosis(&[-1.0, 1.0, -1.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn kurtosis_of_normal_samples_is_near_three() {
    let mut r = rng(7);
    let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut r)).collect();
    let k = kurtosis(&xs).unwrap();
    assert!((k - 3.0).abs() < 0.1, "{k}");
}

fn pearson_kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

fn jittered_uniform_layer(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 + r.random_range(-1e-3..1e-3);
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    rows
}

// One far proof and a tight group: a near/far split of pair distances.
fn near_far_layer(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let base = if i == 0 { 1.0 } else { 0.1 };
            let v = base + r.random_range(-1e-3..1e-3);
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    rows
}

pub fn two_layer_stack() -> (LayerStack, f64, f64) {
    let uniform = jittered_uniform_layer(10, 1);
    let bimodal = near_far_layer(10, 2);
    let upper = |rows: &[Vec<f64>]| -> Vec<f64> { (0..10).flat_map(|i| ((i + 1)..10).map(move |j| (i, j))).map(|(i, j)| rows[i][j]).collect() };
    let (ku, kb) = (pearson_kurtosis(&upper(&uniform)), pearson_kurtosis(&upper(&bimodal)));
    let stack = LayerStack::new(vec![
        Layer { index: 3, matrix: DistanceMatrix::from_rows(&uniform).unwrap() },
        Layer { index: 7, matrix: DistanceMatrix::from_rows(&bimodal).unwrap() },
    ])
    .unwrap();
    (stack, ku, kb)
}

#[test]
fn near_far_layer_beats_jittered_uniform_layer() {
    let (stack, ku, kb) = two_layer_stack();
    assert!(kb > ku, "oracle kurtoses: near/far {kb}, uniform {ku}");
    assert_eq!(select_layer(&stack).unwrap(), 7);
}

#[test]
fn layer_selection_ignores_proof_order() {
    let (stack, _, _) = two_layer_stack();
    let perm = [4, 9, 0, 2, 7, 1, 8, 3, 6, 5];
    let permuted = LayerStack::new(stack.layers().iter().map(|l| Layer { index: l.index, matrix: l.matrix.permuted(&perm) }).collect()).unwrap();
    assert_eq!(select_layer(&permuted).unwrap(), select_layer(&stack).unwrap());
}

#[test]
fn two_clusters_are_recovered() {
    let (pts, labels) = two_clusters(100, 11);
    let (model, scores) = select_gmm_with_scores(&pts, 4, 0).unwrap();
    assert_eq!(model.k, 2, "BIC scores {scores:?}");
    let mut means = model.means.clone();
    means.sort_by(|a, b| a[0].total_cmp(&b[0]));
    for (m, c) in means.iter().zip([0.0, 10.0]) {
        assert!((m[0] - c).abs() < 0.5 && (m[1] - c).abs() < 0.5, "{m:?}");
    }
    let resp = model.responsibilities();
    let low = if model.means[0][0] < model.means[1][0] { 0 } else { 1 };
    let correct = resp
        .iter()
        .zip(&labels)
        .filter(|(r, &l)| {
            let assigned = if r[0] >= r[1] { 0 } else { 1 };
            (assigned == low) == (l == 0)
        })
        .count();
    assert!(correct as f64 >= 0.99 * pts.len() as f64, "{correct}/{}", pts.len());
}

#[test]
fn single_blob_selects_one_component() {
    let pts = gaussian_blob(200, 2, 3);
    assert_eq!(select_gmm(&pts, 5, 0).unwrap().k, 1);
}

#[test]
fn one_component_matches_closed_form() {
    let mut pts = gaussian_blob(150, 3, 5);
    for p in &mut pts {
        p[1] = 0.5 * p[0] + 2.0 * p[1] - 1.0;
    }
    let n = pts.len() as f64;
    let mean: Vec<f64> = (0..3).map(|a| pts.iter().map(|p| p[a]).sum::<f64>() / n).collect();
    let mut cov = vec![vec![0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            cov[a][b] = pts.iter().map(|p| (p[a] - mean[a]) * (p[b] - mean[b])).sum::<f64>() / n;
        }
        cov[a][a] += REGULARIZATION;
    }
    let model = fit_gmm(&pts, 1, 0).unwrap();
    assert_eq!(model.weights, vec![1.0]);
    for a in 0..3 {
        assert!((model.means[0][a] - mean[a]).abs() < 1e-9);
        for b in 0..3 {
            assert!((model.covariances[0].0[a][b] - cov[a][b]).abs() < 1e-9);
        }
    }
    // log-likelihood from the nalgebra determinant and inverse
    let c = nalgebra::DMatrix::from_fn(3, 3, |i, j| cov[i][j]);
    let inv = c.clone().try_inverse().unwrap();
    let ll: f64 = pts
        .iter()
        .map(|p| {
            let d = nalgebra::DVector::from_fn(3, |i, _| p[i] - mean[i]);
            -0.5 * (3.0 * (2.0 * std::f64::consts::PI).ln() + c.determinant().ln() + (d.transpose() * &inv * &d)[(0, 0)])
        })
        .sum();
    assert!((model.log_likelihood - ll).abs() < 1e-9 * ll.abs().max(1.0), "{} vs {ll}", model.log_likelihood);
}

#[test]
fn em_log_likelihood_never_decreases() {
    for seed in 0..20u64 {
        let mut r = rng(1000 + seed);
        let k = 1 + (seed as usize % 4);
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let c = (i % 3) as f64 * 3.0;
                let z: f64 = StandardNormal.sample(&mut r);
                vec![c + z, r.random_range(-1.0..1.0) * (1.0 + c)]
            })
            .collect();
        let model = fit_gmm(&pts, k, seed).unwrap();
        for w in model.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn gmm_ignores_point_order() {
    let (pts, _) = two_clusters(40, 4);
    let mut shuffled = pts.clone();
    shuffled.reverse();
    shuffled.swap(3, 50);
    let a = fit_gmm(&pts, 2, 9).unwrap();
    let b = fit_gmm(&shuffled, 2, 9).unwrap();
    assert_eq!(a.means, b.means);
    assert_eq!(a.log_likelihood, b.log_likelihood);
    assert_eq!(a.bic, b.bic);
}
