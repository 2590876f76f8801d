#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use salkit::{Categorical, LabeledDataset, LinearProbe, ProbeConfig};

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Centered dataset whose guarded block is a noisy linear image of the inputs.
pub fn random_dataset(seed: u64, n: usize, d: usize, dp: usize) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, n, d);
    let mix = gaussian(&mut rng, d, dp);
    let z = &x * mix + gaussian(&mut rng, n, dp);
    let task = Categorical::from_values(&(0..n).map(|i| (i % 2).to_string()).collect::<Vec<_>>());
    LabeledDataset::new(x, task, z).unwrap().center().unwrap()
}

/// Singular values of `m` from the eigenvalues of the smaller Gram matrix.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let g = if m.nrows() >= m.ncols() {
        m.tr_mul(m)
    } else {
        m * m.transpose()
    };
    let mut s: Vec<f64> = SymmetricEigen::new(g)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

pub fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    pred.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64
}

pub fn select(labels: &[usize], idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| labels[i]).collect()
}

/// Trains a linear probe on one split and scores it on the other.
pub fn held_out_accuracy(
    train_x: &DMatrix<f64>,
    train_y: &[usize],
    test_x: &DMatrix<f64>,
    test_y: &[usize],
) -> f64 {
    let probe = LinearProbe::train(train_x, train_y, &ProbeConfig::default()).unwrap();
    accuracy(&probe.predict(test_x).unwrap(), test_y)
}
