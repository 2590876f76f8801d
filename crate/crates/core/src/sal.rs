//! Linear spectral attribute removal.
//!
//! The eraser takes the SVD of the input/attribute cross-covariance
//! `Ω = (1/n) Σᵢ xᵢ zᵢᵀ`, drops the `k` left singular directions with the
//! largest singular values and keeps `Ū = U[:, k..d]`. Inputs are projected either
//! to the reduced coordinates `Ūᵀx` or back into the input space with `ŪŪᵀx`.

use nalgebra::{DMatrix, DVector, SVD};

use crate::dataset::{inputs_centered, LabeledDataset};
use crate::eraser::{interpolated_projector, ProjectionEraser};
use crate::error::{Result, SalError};
use crate::linalg::{
    canonicalize_sign, numerical_rank, orthonormal_complement, spectral_norm, RANK_EPS,
};

/// Orthonormality tolerance checked when an eraser is assembled from parts.
const ORTHO_TOL: f64 = 1e-8;

/// Empirical cross-covariance between centered inputs and guarded attributes.
#[derive(Debug, Clone)]
pub struct CrossCovariance {
    pub omega: DMatrix<f64>,
    pub n_samples: usize,
}

/// `(1/n) Xᵀ Z` over a centered dataset.
pub fn compute_cross_covariance(dataset: &LabeledDataset) -> Result<CrossCovariance> {
    if !dataset.is_centered() {
        return Err(SalError::contract("cross-covariance needs centered inputs"));
    }
    Ok(cross_covariance_of(dataset.inputs(), dataset.guarded()))
}

pub(crate) fn cross_covariance_of(x: &DMatrix<f64>, z: &DMatrix<f64>) -> CrossCovariance {
    let n = x.nrows();
    CrossCovariance {
        omega: x.tr_mul(z) / n as f64,
        n_samples: n,
    }
}

/// Smallest `k ≥ 1` with `σ₀/σ_k > α`, where a numerically zero `σ_k` always
/// qualifies; falls back to the numerical rank, and returns 0 when `σ₀ = 0`.
pub fn select_k(sigma: &[f64], alpha: f64) -> Result<usize> {
    if sigma.is_empty() {
        return Err(SalError::contract(
            "select_k needs at least one singular value",
        ));
    }
    if alpha.is_nan() || alpha < 1.0 {
        return Err(SalError::contract(format!(
            "alpha must be >= 1, got {alpha}"
        )));
    }
    let top = sigma[0];
    if top <= 0.0 {
        return Ok(0);
    }
    for (k, &s) in sigma.iter().enumerate().skip(1) {
        if s <= RANK_EPS * top || top / s > alpha {
            return Ok(k);
        }
    }
    Ok(numerical_rank(sigma))
}

/// A fitted linear eraser.
#[derive(Debug, Clone, PartialEq)]
pub struct SalEraser {
    u: DMatrix<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
    k: usize,
    alpha: f64,
    input_mean: DVector<f64>,
}

impl SalEraser {
    /// Fits on a centered dataset. `k_override` replaces the α rule.
    pub fn fit(dataset: &LabeledDataset, alpha: f64, k_override: Option<usize>) -> Result<Self> {
        if alpha.is_nan() || alpha < 1.0 {
            return Err(SalError::contract(format!(
                "alpha must be >= 1, got {alpha}"
            )));
        }
        let cov = compute_cross_covariance(dataset)?;
        let mut eraser = Self::from_cross_covariance(&cov.omega, alpha, k_override)?;
        eraser.input_mean = dataset.input_mean().clone();
        Ok(eraser)
    }

    /// Decomposes a given cross-covariance matrix (input mean taken as zero).
    pub fn from_cross_covariance(
        omega: &DMatrix<f64>,
        alpha: f64,
        k_override: Option<usize>,
    ) -> Result<Self> {
        let (d, dp) = omega.shape();
        if dp > d {
            return Err(SalError::contract(format!(
                "guarded width {dp} exceeds input dimension {d}"
            )));
        }
        if omega.iter().any(|x| !x.is_finite()) {
            return Err(SalError::numeric("cross-covariance has non-finite entries"));
        }
        let (u, sigma, v) = full_svd(omega)?;
        let rank = numerical_rank(sigma.as_slice());
        let k = match k_override {
            Some(k) if k > rank => {
                return Err(SalError::contract(format!(
                    "k = {k} exceeds the rank {rank} of the cross-covariance"
                )))
            }
            Some(k) => k,
            None if dp == 0 => 0,
            None => select_k(sigma.as_slice(), alpha)?,
        };
        Ok(SalEraser {
            u,
            sigma,
            v,
            k,
            alpha,
            input_mean: DVector::zeros(d),
        })
    }

    /// Reassembles an eraser, checking every structural invariant.
    pub fn from_parts(
        u: DMatrix<f64>,
        sigma: DVector<f64>,
        v: DMatrix<f64>,
        k: usize,
        alpha: f64,
        input_mean: DVector<f64>,
    ) -> Result<Self> {
        let d = u.nrows();
        let dp = v.nrows();
        if u.ncols() != d || v.ncols() != dp || sigma.len() != dp.min(d) || input_mean.len() != d {
            return Err(SalError::contract("eraser parts have inconsistent shapes"));
        }
        if alpha.is_nan() || alpha < 1.0 {
            return Err(SalError::contract(format!(
                "alpha must be >= 1, got {alpha}"
            )));
        }
        let eye_d = DMatrix::<f64>::identity(d, d);
        let eye_dp = DMatrix::<f64>::identity(dp, dp);
        if (u.tr_mul(&u) - eye_d).abs().max() > ORTHO_TOL
            || (v.tr_mul(&v) - eye_dp).abs().max() > ORTHO_TOL
        {
            return Err(SalError::contract("U or V is not orthonormal"));
        }
        if sigma.iter().any(|s| !(*s >= 0.0)) || sigma.as_slice().windows(2).any(|w| w[1] > w[0]) {
            return Err(SalError::contract(
                "singular values must be non-negative and non-increasing",
            ));
        }
        let rank = numerical_rank(sigma.as_slice());
        if k > rank {
            return Err(SalError::contract(format!("k = {k} exceeds rank {rank}")));
        }
        Ok(SalEraser {
            u,
            sigma,
            v,
            k,
            alpha,
            input_mean,
        })
    }

    /// Same decomposition with a different number of removed directions.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        let rank = self.rank();
        if k > rank {
            return Err(SalError::contract(format!("k = {k} exceeds rank {rank}")));
        }
        Ok(SalEraser { k, ..self.clone() })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn guarded_dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        numerical_rank(self.sigma.as_slice())
    }

    /// `Ū = U[:, k..d]`.
    pub fn kept_basis(&self) -> DMatrix<f64> {
        self.u.columns(self.k, self.dim() - self.k).into_owned()
    }

    /// `Ūᵀ(x − μ)`, a vector of length `d − k`.
    pub fn project_reduce(&self, x: &[f64]) -> Result<DVector<f64>> {
        let centered = self.centered(x)?;
        Ok(self
            .u
            .columns(self.k, self.dim() - self.k)
            .tr_mul(&centered))
    }

    /// `ŪŪᵀ(x − μ) + μ`.
    pub fn project_inplace(&self, x: &[f64]) -> Result<DVector<f64>> {
        let centered = self.centered(x)?;
        let kept = self.u.columns(self.k, self.dim() - self.k);
        Ok(kept * kept.tr_mul(&centered) + &self.input_mean)
    }

    /// `λ·ŪŪᵀ + (1 − λ)·I`.
    pub fn interpolate_projection(&self, lambda: f64) -> Result<DMatrix<f64>> {
        interpolated_projector(self, lambda)
    }

    /// Spectral norm of the cross-covariance between `ŪŪᵀ`-projected inputs and
    /// the guarded block. Equals `σ_{k+1}` (zero once every nonzero direction is gone).
    pub fn residual_covariance(&self, dataset: &LabeledDataset) -> Result<f64> {
        if dataset.dim() != self.dim() || dataset.guarded_dim() != self.guarded_dim() {
            return Err(SalError::contract(format!(
                "dataset shape {}x{} does not match eraser {}x{}",
                dataset.dim(),
                dataset.guarded_dim(),
                self.dim(),
                self.guarded_dim()
            )));
        }
        if !inputs_centered(dataset.inputs()) {
            return Err(SalError::contract(
                "residual covariance needs a centered dataset",
            ));
        }
        let projected = dataset.inputs() * self.projector();
        let cov = cross_covariance_of(&projected, dataset.guarded());
        Ok(spectral_norm(&cov.omega))
    }

    fn centered(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(SalError::contract(format!(
                "vector has dimension {}, eraser expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(DVector::from_column_slice(x) - &self.input_mean)
    }
}

impl ProjectionEraser for SalEraser {
    fn dim(&self) -> usize {
        self.u.nrows()
    }

    fn input_mean(&self) -> &DVector<f64> {
        &self.input_mean
    }

    fn removed_basis(&self) -> DMatrix<f64> {
        self.u.columns(0, self.k).into_owned()
    }

    fn projector(&self) -> DMatrix<f64> {
        let kept = self.kept_basis();
        &kept * kept.transpose()
    }
}

/// Full SVD `Ω = U·diag(σ)·Vᵀ` with U square, singular values sorted descending
/// and each U column signed so its largest-magnitude entry is positive.
fn full_svd(omega: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (d, dp) = omega.shape();
    if dp == 0 {
        return Ok((
            DMatrix::identity(d, d),
            DVector::zeros(0),
            DMatrix::zeros(0, 0),
        ));
    }
    let svd = SVD::try_new(omega.clone(), true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| SalError::numeric("SVD of the cross-covariance did not converge"))?;
    let thin_u = svd
        .u
        .ok_or_else(|| SalError::numeric("SVD returned no U"))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| SalError::numeric("SVD returned no V"))?;
    let mut order: Vec<usize> = (0..dp).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let sigma = DVector::from_iterator(dp, order.iter().map(|&i| svd.singular_values[i].max(0.0)));
    let mut u_head = DMatrix::zeros(d, dp);
    let mut v = DMatrix::zeros(dp, dp);
    for (dst, &src) in order.iter().enumerate() {
        u_head.set_column(dst, &thin_u.column(src));
        v.set_column(dst, &v_t.row(src).transpose());
    }
    let tail = orthonormal_complement(&u_head);
    let mut u = DMatrix::zeros(d, d);
    u.columns_mut(0, dp).copy_from(&u_head);
    u.columns_mut(dp, d - dp).copy_from(&tail);
    for j in 0..d {
        let mut col: Vec<f64> = u.column(j).iter().cloned().collect();
        if canonicalize_sign(&mut col) {
            u.set_column(j, &DVector::from_vec(col));
            if j < dp {
                let flipped = -v.column(j);
                v.set_column(j, &flipped);
            }
        }
    }
    Ok((u, sigma, v))
}
