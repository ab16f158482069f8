//! Synthetic inputs for the pipeline benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` vectors of dimension `dim` with coordinates uniform in `[-1, 1)`.
pub fn random_embeddings(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

/// Points scattered around `clusters` well-separated centers in the plane.
pub fn clustered_points(n: usize, clusters: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let c = (i % clusters) as f64 * 10.0;
            vec![c + rng.random_range(-1.0..1.0), c + rng.random_range(-1.0..1.0)]
        })
        .collect()
}

/// A Lean-like proof script of roughly `lines` lines with comments mixed in.
pub fn lean_source(lines: usize) -> String {
    let mut s = String::from("theorem t (a b : ℕ) : a + b = b + a := by\n");
    for i in 0..lines {
        match i % 4 {
            0 => s.push_str("  -- rewrite with commutativity\n"),
            1 => s.push_str("  rw [Nat.add_comm] /- nested /- block -/ comment -/\n"),
            2 => s.push_str("  simp only [Nat.succ_eq_add_one, \"not a lemma\"]\n"),
            _ => s.push_str("  exact Nat.le_refl _\n"),
        }
    }
    s
}
