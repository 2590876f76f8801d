//! Deterministic synthetic datasets with a planted attribute signal.
//!
//! The generator is a ChaCha8 stream seeded with `seed`. It draws, in order:
//! a d × (r + 1) standard-normal matrix (column-major) whose thin QR factor gives
//! the bias frame `B` (first r columns) and the task direction `T` (last column),
//! then per sample the task bit, the attribute draw and d noise values.
//!
//! Linear mode: the attribute has `bias_rank + 1` classes placed on the vertices
//! of a regular simplex inside span(B), so the cross-covariance has rank
//! `bias_rank`. A binary attribute sits at ±b.
//!
//! Nonlinear mode: two sign bits `a`, `b` shift the sample by `a·B₀ + b·B₁`; the
//! attribute is `a·b`, which no linear function of x predicts.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Categorical, GuardedEncoding, LabeledDataset};
use crate::error::{Result, SalError};
use crate::linalg::orthonormal_complement;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub bias_rank: usize,
    pub bias_strength: f64,
    pub task_strength: f64,
    pub nonlinear: bool,
    pub seed: u64,
    pub encoding: GuardedEncoding,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 2000,
            d: 50,
            bias_rank: 1,
            bias_strength: 3.0,
            task_strength: 3.0,
            nonlinear: false,
            seed: 0,
            encoding: GuardedEncoding::Auto,
        }
    }
}

impl SyntheticSpec {
    /// Number of frame directions carrying attribute signal.
    pub fn frame_rank(&self) -> usize {
        if self.nonlinear {
            2
        } else {
            self.bias_rank
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d == 0 {
            return Err(SalError::contract(format!(
                "need n >= 2 and d >= 1, got n={} d={}",
                self.n, self.d
            )));
        }
        if self.bias_rank > self.d {
            return Err(SalError::contract(format!(
                "bias_rank {} exceeds dimension {}",
                self.bias_rank, self.d
            )));
        }
        if self.bias_rank == 0 && !self.nonlinear {
            return Err(SalError::contract("bias_rank must be at least 1"));
        }
        if !(self.bias_strength >= 0.0 && self.task_strength >= 0.0)
            || !self.bias_strength.is_finite()
            || !self.task_strength.is_finite()
        {
            return Err(SalError::contract(
                "strengths must be finite and non-negative",
            ));
        }
        if self.frame_rank() + 1 > self.d {
            return Err(SalError::contract(format!(
                "dimension {} leaves no room for the task direction next to {} bias directions",
                self.d,
                self.frame_rank()
            )));
        }
        Ok(())
    }
}

/// Unit vertices of a regular simplex with `classes` vertices in R^(classes-1).
fn simplex_vertices(classes: usize) -> DMatrix<f64> {
    let r = classes - 1;
    let ones = DMatrix::from_element(classes, 1, 1.0 / (classes as f64).sqrt());
    let basis = orthonormal_complement(&ones);
    let scale = (classes as f64 / r as f64).sqrt();
    let mut v = basis * scale;
    if classes == 2 && v[(1, 0)] < 0.0 {
        v.neg_mut();
    }
    v
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let r = spec.frame_rank();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let g = DMatrix::from_fn(d, r + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let frame = q.columns(0, r).into_owned();
    let task_dir: DVector<f64> = q.column(r).into_owned();
    let vertices = (!spec.nonlinear).then(|| simplex_vertices(r + 1));

    let mut x = DMatrix::zeros(n, d);
    let mut task = Vec::with_capacity(n);
    let mut attr = Vec::with_capacity(n);
    for i in 0..n {
        let y = rng.random_bool(0.5);
        let mut row = task_dir.clone()
            * if y {
                spec.task_strength
            } else {
                -spec.task_strength
            };
        if let Some(vertices) = &vertices {
            let c = rng.random_range(0..=r);
            row += &frame * vertices.row(c).transpose() * spec.bias_strength;
            attr.push(c.to_string());
        } else {
            let a = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let b = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            row += (frame.column(0) * a + frame.column(1) * b) * spec.bias_strength;
            attr.push(if a * b > 0.0 { "1" } else { "0" }.to_string());
        }
        for j in 0..d {
            x[(i, j)] = row[j] + rng.sample::<f64, _>(StandardNormal);
        }
        task.push(if y { "1" } else { "0" }.to_string());
    }
    LabeledDataset::from_categorical(
        x,
        Categorical::from_values(&task),
        Categorical::from_values(&attr),
        spec.encoding,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_geometry() {
        for c in 2..6 {
            let v = simplex_vertices(c);
            let g = &v * v.transpose();
            for i in 0..c {
                for j in 0..c {
                    let want = if i == j { 1.0 } else { -1.0 / (c - 1) as f64 };
                    assert!((g[(i, j)] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec {
            n: 50,
            d: 5,
            seed: 11,
            ..Default::default()
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.inputs(), b.inputs());
        assert_eq!(a.guarded(), b.guarded());
    }

    #[test]
    fn rejects_bad_rank() {
        let spec = SyntheticSpec {
            n: 10,
            d: 3,
            bias_rank: 4,
            ..Default::default()
        };
        assert!(matches!(
            generate_synthetic(&spec),
            Err(SalError::Contract(_))
        ));
    }

    #[test]
    fn attribute_classes() {
        let spec = SyntheticSpec {
            n: 300,
            d: 8,
            bias_rank: 3,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec).unwrap();
        assert_eq!(ds.attribute().unwrap().n_classes(), 4);
        assert_eq!(ds.guarded_dim(), 4);
    }
}
