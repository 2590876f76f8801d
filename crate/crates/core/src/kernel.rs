//! Kernel functions and Gram matrices.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, SalError};

/// Default RBF bandwidth.
pub const DEFAULT_GAMMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `xᵀx'`
    Linear,
    /// `(1 + xᵀx')²`
    Poly2,
    /// `exp(−γ‖x − x'‖²)`
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(SalError::contract(format!(
                "rbf gamma must be positive, got {gamma}"
            )));
        }
        Ok(KernelSpec::Rbf { gamma })
    }

    /// Parses a family name; `gamma` only applies to `rbf`.
    pub fn from_name(name: &str, gamma: Option<f64>) -> Result<Self> {
        match name {
            "linear" => Ok(KernelSpec::Linear),
            "poly2" => Ok(KernelSpec::Poly2),
            "rbf" => KernelSpec::rbf(gamma.unwrap_or(DEFAULT_GAMMA)),
            other => Err(SalError::contract(format!(
                "unknown kernel family '{other}'"
            ))),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Poly2 => "poly2",
            KernelSpec::Rbf { .. } => "rbf",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            KernelSpec::Rbf { gamma } => Some(*gamma),
            _ => None,
        }
    }

    /// Kernel value; slices must have equal length (checked by [`eval_kernel`]).
    #[inline]
    pub fn apply(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Poly2 => {
                let s = 1.0 + dot(x, y);
                s * s
            }
            KernelSpec::Rbf { gamma } => {
                let dist: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * dist).exp()
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Rbf { gamma } => write!(f, "rbf:{gamma}"),
            other => f.write_str(other.family()),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = SalError;

    /// Accepts `linear`, `poly2`, `rbf` and `rbf:<gamma>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("rbf", g)) => {
                let gamma = g
                    .parse::<f64>()
                    .map_err(|_| SalError::contract(format!("bad rbf gamma '{g}'")))?;
                KernelSpec::rbf(gamma)
            }
            Some(_) => Err(SalError::contract(format!("unknown kernel '{s}'"))),
            None => KernelSpec::from_name(s, None),
        }
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(SalError::contract(format!(
            "kernel arguments have dimensions {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(spec.apply(x, y))
}

/// Rows of `m` as owned contiguous vectors.
pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

/// Symmetric matrix of pairwise kernel values between the rows of `rows`.
/// Only the upper triangle is evaluated; the lower triangle is mirrored.
pub fn gram_matrix(spec: &KernelSpec, rows: &DMatrix<f64>) -> DMatrix<f64> {
    let n = rows.nrows();
    let data = rows_of(rows);
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| spec.apply(&data[i], &data[j])).collect())
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Kernel values between each row of `left` and each row of `right` (`left.nrows() × right.nrows()`).
pub fn cross_gram(
    spec: &KernelSpec,
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if left.ncols() != right.ncols() {
        return Err(SalError::contract(format!(
            "cross kernel between dimensions {} and {}",
            left.ncols(),
            right.ncols()
        )));
    }
    let l = rows_of(left);
    let r = rows_of(right);
    let values: Vec<Vec<f64>> = l
        .par_iter()
        .map(|a| r.iter().map(|b| spec.apply(a, b)).collect())
        .collect();
    Ok(DMatrix::from_fn(l.len(), r.len(), |i, j| values[i][j]))
}
