#![allow(dead_code)]

pub mod brute;

use cgmres_core::linalg::{SparseMatrix, TripletBuilder};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random sparse matrix with a dominant diagonal and about `per_row`
/// off-diagonal entries per row.
pub fn random_sparse(rng: &mut ChaCha8Rng, n: usize, per_row: usize) -> SparseMatrix {
    let mut b = TripletBuilder::new(n, n);
    for i in 0..n {
        b.push(i, i, 4.0 + rng.gen_range(0.0..2.0));
        for _ in 0..per_row {
            let j = rng.gen_range(0..n);
            b.push(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    b.build()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn laplacian_1d(n: usize) -> SparseMatrix {
    let mut b = TripletBuilder::new(n, n);
    for i in 0..n {
        b.push(i, i, 2.0);
        if i > 0 {
            b.push(i, i - 1, -1.0);
        }
        if i + 1 < n {
            b.push(i, i + 1, -1.0);
        }
    }
    b.build()
}
