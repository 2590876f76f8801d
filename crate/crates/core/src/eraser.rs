//! Uniform transform interface shared by the projection-based erasers.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Result, SalError};

/// An eraser that removes an orthonormal set of directions from centered inputs.
pub trait ProjectionEraser {
    fn dim(&self) -> usize;

    fn input_mean(&self) -> &DVector<f64>;

    /// Orthonormal basis (d × r) of the removed subspace.
    fn removed_basis(&self) -> DMatrix<f64>;

    /// The d × d projector applied to centered inputs.
    fn projector(&self) -> DMatrix<f64> {
        let b = self.removed_basis();
        DMatrix::identity(self.dim(), self.dim()) - &b * b.transpose()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(SalError::contract(format!(
            "lambda {lambda} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `λ·P + (1 − λ)·I` for the eraser's projector `P`.
pub fn interpolated_projector<E: ProjectionEraser + ?Sized>(
    eraser: &E,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    let d = eraser.dim();
    Ok(eraser.projector() * lambda + DMatrix::identity(d, d) * (1.0 - lambda))
}

/// Applies the eraser to one sample: `x − λ·B·Bᵀ(x − μ)`.
pub fn erase_one<E: ProjectionEraser + ?Sized>(
    eraser: &E,
    x: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if x.len() != eraser.dim() {
        return Err(SalError::contract(format!(
            "vector has dimension {}, eraser expects {}",
            x.len(),
            eraser.dim()
        )));
    }
    let basis = eraser.removed_basis();
    Ok(erase_with_basis(&basis, eraser.input_mean(), x, lambda))
}

fn erase_with_basis(basis: &DMatrix<f64>, mean: &DVector<f64>, x: &[f64], lambda: f64) -> Vec<f64> {
    let centered: Vec<f64> = x.iter().zip(mean.iter()).map(|(a, m)| a - m).collect();
    let mut out = centered.clone();
    for col in basis.column_iter() {
        let coef: f64 = col.iter().zip(&centered).map(|(b, c)| b * c).sum::<f64>() * lambda;
        for (o, b) in out.iter_mut().zip(col.iter()) {
            *o -= coef * b;
        }
    }
    for (o, m) in out.iter_mut().zip(mean.iter()) {
        *o += m;
    }
    out
}

/// Applies the eraser's projector to every row (centered, then re-offset by the mean).
/// Rows are processed independently, so the result does not depend on thread count.
pub fn apply_eraser<E: ProjectionEraser + Sync + ?Sized>(
    eraser: &E,
    inputs: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    apply_interpolated(eraser, inputs, 1.0)
}

/// Row-wise `x − λ·B·Bᵀ(x − μ)`; `λ = 1` is the full projection.
pub fn apply_interpolated<E: ProjectionEraser + Sync + ?Sized>(
    eraser: &E,
    inputs: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    check_lambda(lambda)?;
    let (n, d) = inputs.shape();
    if d != eraser.dim() {
        return Err(SalError::contract(format!(
            "inputs have dimension {d}, eraser expects {}",
            eraser.dim()
        )));
    }
    let basis = eraser.removed_basis();
    let mean = eraser.input_mean();
    // samples become contiguous columns
    let by_sample = inputs.transpose();
    let mut out = vec![0.0; n * d];
    out.par_chunks_mut(d.max(1))
        .zip(by_sample.as_slice().par_chunks(d.max(1)))
        .for_each(|(dst, src)| dst.copy_from_slice(&erase_with_basis(&basis, mean, src, lambda)));
    Ok(DMatrix::from_column_slice(d, n, &out).transpose())
}
