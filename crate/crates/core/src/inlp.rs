//! Iterative null-space projection baseline.
//!
//! Each round trains a linear attribute probe on the current inputs, removes the
//! probe's weight direction(s), and repeats until the probe is near chance.

use nalgebra::{DMatrix, DVector};

use crate::dataset::LabeledDataset;
use crate::eraser::ProjectionEraser;
use crate::error::{Result, SalError};
use crate::probe::{LinearProbe, ProbeConfig};

/// Probe accuracy within this margin of the majority rate stops the iteration.
pub const CHANCE_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct InlpEraser {
    directions: Vec<DVector<f64>>,
    iterations: usize,
    input_mean: DVector<f64>,
    probe_accuracies: Vec<f64>,
}

impl InlpEraser {
    /// Rebuilds an eraser from stored directions, re-checking unit norm and orthogonality.
    pub fn from_parts(
        directions: Vec<DVector<f64>>,
        iterations: usize,
        input_mean: DVector<f64>,
    ) -> Result<Self> {
        let d = input_mean.len();
        for (i, a) in directions.iter().enumerate() {
            if a.len() != d {
                return Err(SalError::contract(
                    "direction length does not match the input mean",
                ));
            }
            if (a.norm() - 1.0).abs() > 1e-10 {
                return Err(SalError::contract(format!(
                    "direction {i} is not unit norm"
                )));
            }
            for b in &directions[..i] {
                if a.dot(b).abs() > 1e-8 {
                    return Err(SalError::contract("stored directions are not orthogonal"));
                }
            }
        }
        Ok(InlpEraser {
            directions,
            iterations,
            input_mean,
            probe_accuracies: Vec::new(),
        })
    }

    pub fn directions(&self) -> &[DVector<f64>] {
        &self.directions
    }

    /// Rounds actually run (the last may have stopped early without removing anything).
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Training accuracy of each round's probe, before its direction was removed.
    pub fn probe_accuracies(&self) -> &[f64] {
        &self.probe_accuracies
    }
}

impl ProjectionEraser for InlpEraser {
    fn dim(&self) -> usize {
        self.input_mean.len()
    }

    fn input_mean(&self) -> &DVector<f64> {
        &self.input_mean
    }

    fn removed_basis(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.dim(), self.directions.len());
        for (j, v) in self.directions.iter().enumerate() {
            b.set_column(j, v);
        }
        b
    }
}

/// Fits on a centered dataset with a categorical guarded attribute. Multiclass
/// attributes remove one direction per class weight vector per round.
pub fn fit_inlp(
    dataset: &LabeledDataset,
    iterations: usize,
    config: &ProbeConfig,
) -> Result<InlpEraser> {
    let attribute = dataset
        .attribute()
        .ok_or_else(|| SalError::contract("INLP needs a categorical guarded attribute"))?;
    if !dataset.is_centered() {
        return Err(SalError::contract("INLP needs centered inputs"));
    }
    let labels = &attribute.codes;
    let n = labels.len() as f64;
    let mut counts = vec![0usize; attribute.n_classes()];
    labels.iter().for_each(|&l| counts[l] += 1);
    let chance = *counts.iter().max().unwrap_or(&0) as f64 / n;

    let d = dataset.dim();
    let mut current = dataset.inputs().clone();
    let mut directions: Vec<DVector<f64>> = Vec::new();
    let mut accuracies = Vec::new();
    let mut rounds = 0;
    for _ in 0..iterations {
        rounds += 1;
        let probe = LinearProbe::train_isotropic(&current, labels, config)?;
        accuracies.push(probe.train_accuracy());
        if probe.train_accuracy() <= chance + CHANCE_MARGIN {
            break;
        }
        let mut fresh: Vec<DVector<f64>> = Vec::new();
        for row in probe.weights().row_iter() {
            let mut w: DVector<f64> = row.transpose();
            let original = w.norm();
            // two passes of Gram–Schmidt against everything already removed
            for _ in 0..2 {
                for prev in directions.iter().chain(fresh.iter()) {
                    let c = prev.dot(&w);
                    w.axpy(-c, prev, 1.0);
                }
            }
            let norm = w.norm();
            if norm > 1e-10 * original.max(f64::MIN_POSITIVE) {
                fresh.push(w / norm);
            }
        }
        if fresh.is_empty() {
            break;
        }
        let mut basis = DMatrix::zeros(d, fresh.len());
        for (j, v) in fresh.iter().enumerate() {
            basis.set_column(j, v);
        }
        let coords = &current * &basis;
        current -= coords * basis.transpose();
        directions.extend(fresh);
    }
    Ok(InlpEraser {
        directions,
        iterations: rounds,
        input_mean: dataset.input_mean().clone(),
        probe_accuracies: accuracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Categorical, GuardedEncoding};

    #[test]
    fn zero_iterations_is_identity() {
        let n = 20;
        let x = DMatrix::from_fn(n, 3, |i, j| ((i * 3 + j) as f64).sin());
        let attr =
            Categorical::from_values(&(0..n).map(|i| (i % 2).to_string()).collect::<Vec<_>>());
        let ds = LabeledDataset::from_categorical(x, attr.clone(), attr, GuardedEncoding::Auto)
            .unwrap()
            .center()
            .unwrap();
        let e = fit_inlp(&ds, 0, &ProbeConfig::default()).unwrap();
        assert!(e.directions().is_empty());
        assert_eq!(e.projector(), DMatrix::identity(3, 3));
    }

    #[test]
    fn from_parts_checks_norms() {
        let v = DVector::from_vec(vec![1.0, 1.0]);
        assert!(InlpEraser::from_parts(vec![v], 1, DVector::zeros(2)).is_err());
    }
}
