//! Kernel spectral attribute removal.
//!
//! Works entirely with Gram matrices. The removed directions in feature space are
//! `Φw` for the top eigenvectors `w` of `Γ = K_ψ K_φ`, orthonormalized under the
//! `K_φ` inner product. Training points are debiased through the null space of
//! `(K_φ^{1/2} W)ᵀ`, giving the reduced kernel `K̂ = K^{1/2} L Lᵀ K^{1/2}ᵀ`.

use nalgebra::{DMatrix, DVector, SVD};

use crate::dataset::LabeledDataset;
use crate::eigen::top_eigenvectors;
use crate::error::{Result, SalError};
use crate::kernel::{cross_gram, gram_matrix, KernelSpec};
use crate::linalg::{orthonormal_complement, real_eigenpairs, symmetric_eigen_desc, RANK_EPS};

/// A fitted kernel eraser.
#[derive(Debug, Clone)]
pub struct KsalEraser {
    train_inputs: DMatrix<f64>,
    spec: KernelSpec,
    k_phi: DMatrix<f64>,
    w_block: DMatrix<f64>,
    k_sqrt: DMatrix<f64>,
    l_basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    input_mean: DVector<f64>,
    k_phi_norm: f64,
}

impl KsalEraser {
    /// Fits on a centered dataset, removing `k` feature-space directions. The
    /// attribute kernel is the dot product of the guarded rows.
    pub fn fit(dataset: &LabeledDataset, spec: KernelSpec, k: usize) -> Result<Self> {
        if !dataset.is_centered() {
            return Err(SalError::contract("kernel removal needs centered inputs"));
        }
        let n = dataset.n();
        if k > n {
            return Err(SalError::contract(format!(
                "k = {k} exceeds the sample count {n}"
            )));
        }
        let x = dataset.inputs().clone();
        let k_phi = gram_matrix(&spec, &x);
        let z = dataset.guarded();
        let k_psi = z * z.transpose();
        let gamma = &k_psi * &k_phi;
        let top = top_eigenvectors(&gamma, k)?;
        let lead = top.values.first().copied().unwrap_or(0.0).max(0.0);
        if let Some(pos) = top.values.iter().position(|&l| !(l > RANK_EPS * lead)) {
            return Err(SalError::contract(format!(
                "k = {k} exceeds the {pos} eigenvalues of K_psi*K_phi above tolerance"
            )));
        }
        let mut eraser = Self::from_eigenvectors(x, spec, k_phi, &top.vectors)?;
        eraser.eigenvalues = top.values;
        eraser.input_mean = dataset.input_mean().clone();
        Ok(eraser)
    }

    /// Builds the eraser from raw eigenvector columns (descending eigenvalue order).
    pub(crate) fn from_eigenvectors(
        train_inputs: DMatrix<f64>,
        spec: KernelSpec,
        k_phi: DMatrix<f64>,
        eigvecs: &DMatrix<f64>,
    ) -> Result<Self> {
        let (vals, vecs) = symmetric_eigen_desc(&k_phi);
        let k_phi_norm = vals.iter().cloned().fold(0.0, f64::max);
        let sqrt_vals = vals.map(|l| l.max(0.0).sqrt());
        let k_sqrt = &vecs * DMatrix::from_diagonal(&sqrt_vals) * vecs.transpose();

        let w_block = k_orthonormalize(&k_phi, eigvecs, k_phi_norm);
        let image = &k_sqrt * &w_block;
        let l_basis = null_space_of_transpose(&image)?;
        Ok(KsalEraser {
            input_mean: DVector::zeros(train_inputs.ncols()),
            train_inputs,
            spec,
            k_phi,
            w_block,
            k_sqrt,
            l_basis,
            eigenvalues: Vec::new(),
            k_phi_norm,
        })
    }

    /// Rebuilds a fitted eraser from its stored training inputs and `W` block.
    pub fn restore(
        train_inputs: DMatrix<f64>,
        spec: KernelSpec,
        w_block: &DMatrix<f64>,
        eigenvalues: Vec<f64>,
        input_mean: DVector<f64>,
    ) -> Result<Self> {
        if w_block.nrows() != train_inputs.nrows() || input_mean.len() != train_inputs.ncols() {
            return Err(SalError::contract(
                "stored kernel eraser parts have inconsistent shapes",
            ));
        }
        let k_phi = gram_matrix(&spec, &train_inputs);
        let mut eraser = Self::from_eigenvectors(train_inputs, spec, k_phi, w_block)?;
        if eraser.k() != w_block.ncols() {
            return Err(SalError::contract(
                "stored W block is degenerate under the kernel inner product",
            ));
        }
        eraser.eigenvalues = eigenvalues;
        eraser.input_mean = input_mean;
        Ok(eraser)
    }

    pub fn k(&self) -> usize {
        self.w_block.ncols()
    }

    pub fn n_train(&self) -> usize {
        self.train_inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.train_inputs.ncols()
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    /// Leading eigenvalues of `K_ψ K_φ`, in the order their directions were removed.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Centered training inputs.
    pub fn train_inputs(&self) -> &DMatrix<f64> {
        &self.train_inputs
    }

    pub fn input_mean(&self) -> &DVector<f64> {
        &self.input_mean
    }

    pub fn k_phi(&self) -> &DMatrix<f64> {
        &self.k_phi
    }

    /// `‖K_φ‖₂`.
    pub fn k_phi_norm(&self) -> f64 {
        self.k_phi_norm
    }

    /// `W`, with `WᵀK_φW = I`.
    pub fn w_block(&self) -> &DMatrix<f64> {
        &self.w_block
    }

    /// Symmetric square root of `K_φ`.
    pub fn k_sqrt(&self) -> &DMatrix<f64> {
        &self.k_sqrt
    }

    /// `L_φ`, an orthonormal basis of the null space of `(K_φ^{1/2} W)ᵀ`.
    pub fn l_basis(&self) -> &DMatrix<f64> {
        &self.l_basis
    }

    /// Kernel values `κ(x)_j = K(x_j, x − μ)` against the stored training inputs.
    pub fn kappa(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(SalError::contract(format!(
                "vector has dimension {}, eraser expects {}",
                x.len(),
                self.dim()
            )));
        }
        let centered: Vec<f64> = x
            .iter()
            .zip(self.input_mean.iter())
            .map(|(a, m)| a - m)
            .collect();
        Ok(DVector::from_iterator(
            self.n_train(),
            self.train_inputs.row_iter().map(|r| {
                let row: Vec<f64> = r.iter().cloned().collect();
                self.spec.apply(&row, &centered)
            }),
        ))
    }

    /// `Wᵀκ(x)`: coordinates of `φ(x)` inside the removed subspace.
    pub fn kernel_project_removed(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self.w_block.tr_mul(&self.kappa(x)?))
    }

    /// Rows are the debiased training representations `K_φ^{1/2} L_φ`.
    pub fn reduced_train_features(&self) -> DMatrix<f64> {
        &self.k_sqrt * &self.l_basis
    }

    /// `K̂_φ = K_φ^{1/2} L_φ L_φᵀ K_φ^{1/2}ᵀ`.
    pub fn reduced_kernel(&self) -> DMatrix<f64> {
        let b = self.reduced_train_features();
        let mut k_hat = &b * b.transpose();
        symmetrize(&mut k_hat);
        k_hat
    }

    /// Reduced kernel values between `x` and every training point:
    /// `κ(x) − K_φ W Wᵀ κ(x)`.
    pub fn reduced_cross_kernel(&self, x: &[f64]) -> Result<DVector<f64>> {
        let kappa = self.kappa(x)?;
        let coords = self.w_block.tr_mul(&kappa);
        Ok(&kappa - &self.k_phi * (&self.w_block * coords))
    }

    /// Reduced cross kernel for many points at once (`m × n`, one row per point).
    pub fn reduced_cross_kernel_rows(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let centered = self.centered_points(points)?;
        let kappa = cross_gram(&self.spec, &centered, &self.train_inputs)?;
        let kw = &self.k_phi * &self.w_block;
        Ok(&kappa - (&kappa * &self.w_block) * kw.transpose())
    }

    /// Reduced kernel between two sets of raw points (`m × m'`):
    /// `K(x, x') − λ(2 − λ)·(Wᵀκ(x))ᵀ(Wᵀκ(x'))`. With `λ = 1` this is the inner
    /// product of the debiased feature maps; smaller `λ` removes only part of the
    /// component along each direction.
    pub fn reduced_kernel_between(
        &self,
        left: &DMatrix<f64>,
        right: &DMatrix<f64>,
        lambda: f64,
    ) -> Result<DMatrix<f64>> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(SalError::contract(format!(
                "lambda {lambda} outside [0, 1]"
            )));
        }
        let a = self.centered_points(left)?;
        let b = self.centered_points(right)?;
        let coords_a = cross_gram(&self.spec, &a, &self.train_inputs)? * &self.w_block;
        let coords_b = cross_gram(&self.spec, &b, &self.train_inputs)? * &self.w_block;
        let base = cross_gram(&self.spec, &a, &b)?;
        Ok(base - coords_a * coords_b.transpose() * (lambda * (2.0 - lambda)))
    }

    fn centered_points(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if points.ncols() != self.dim() {
            return Err(SalError::contract(format!(
                "points have dimension {}, eraser expects {}",
                points.ncols(),
                self.dim()
            )));
        }
        let mut centered = points.clone();
        for mut row in centered.row_iter_mut() {
            row -= self.input_mean.transpose();
        }
        Ok(centered)
    }
}

/// Modified Gram–Schmidt under `⟨a, b⟩ = aᵀK b`; columns whose K-norm² falls
/// below `RANK_EPS·‖K‖` are dropped.
fn k_orthonormalize(k_phi: &DMatrix<f64>, vecs: &DMatrix<f64>, k_norm: f64) -> DMatrix<f64> {
    let n = k_phi.nrows();
    let mut kept: Vec<DVector<f64>> = Vec::new();
    let mut kept_k: Vec<DVector<f64>> = Vec::new();
    for col in vecs.column_iter() {
        let mut w: DVector<f64> = col.into_owned();
        for (prev, prev_k) in kept.iter().zip(&kept_k) {
            let c = prev_k.dot(&w);
            w.axpy(-c, prev, 1.0);
        }
        let kw = k_phi * &w;
        let norm2 = w.dot(&kw);
        if !(norm2 > RANK_EPS * k_norm) {
            continue;
        }
        let s = norm2.sqrt();
        kept.push(w / s);
        kept_k.push(kw / s);
    }
    let mut out = DMatrix::zeros(n, kept.len());
    for (j, w) in kept.iter().enumerate() {
        out.set_column(j, w);
    }
    out
}

/// Orthonormal basis of the null space of `aᵀ` (`a` is n × k).
fn null_space_of_transpose(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let svd = SVD::try_new(a.clone(), true, false, f64::EPSILON, 10_000)
        .ok_or_else(|| SalError::numeric("SVD for the null-space basis did not converge"))?;
    let u = svd
        .u
        .ok_or_else(|| SalError::numeric("SVD returned no U"))?;
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > RANK_EPS * top)
        .collect();
    let range = u.select_columns(&keep);
    Ok(orthonormal_complement(&range))
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `γ/ρ`: mean absolute entry change between `K̂` and `K`, over the population
/// standard deviation of the entries of `K`.
pub fn kernel_deviation_ratio(k_phi: &DMatrix<f64>, k_hat: &DMatrix<f64>) -> Result<f64> {
    if k_phi.shape() != k_hat.shape() {
        return Err(SalError::contract("kernel matrices have different shapes"));
    }
    let count = k_phi.len() as f64;
    if count == 0.0 {
        return Err(SalError::UndefinedMetric("empty kernel matrix".into()));
    }
    let mean = k_phi.sum() / count;
    let var = k_phi.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    let rho = var.sqrt();
    if rho == 0.0 {
        return Err(SalError::UndefinedMetric(
            "kernel matrix is constant; deviation ratio undefined".into(),
        ));
    }
    let gamma = k_phi
        .iter()
        .zip(k_hat.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / count;
    Ok(gamma / rho)
}

/// Outcome of checking that `Φw` is an eigenvector of `ΩΩᵀ` for eigenpairs of `K_ψK_φ`.
#[derive(Debug, Clone)]
pub struct LemmaCheck {
    /// Worst `‖ΩΩᵀΦw − λΦw‖ / (‖Φw‖·‖ΩΩᵀ‖)` over eigenpairs with nonzero eigenvalue.
    pub residual: f64,
    /// All real eigenvalues of `K_ψK_φ`, descending.
    pub eigenvalues: Vec<f64>,
}

/// Numeric check on explicit feature matrices `Φ` (m × n) and `Ψ` (m' × n).
///
/// Eigenpairs with eigenvalue at or below `RANK_EPS·λ_max` are skipped: for them
/// `ΩΩᵀΦw = ΦΓw = 0` holds trivially and the normalized residual is ill-conditioned.
pub fn verify_lemma_a(x_features: &DMatrix<f64>, z_features: &DMatrix<f64>) -> Result<LemmaCheck> {
    if x_features.ncols() != z_features.ncols() {
        return Err(SalError::contract(
            "feature matrices must have the same number of samples",
        ));
    }
    let k_phi = x_features.tr_mul(x_features);
    let k_psi = z_features.tr_mul(z_features);
    let gamma = &k_psi * &k_phi;
    let omega = x_features * z_features.transpose();
    let oo = &omega * omega.transpose();
    let oo_norm = oo.norm();

    let mut pairs = real_eigenpairs(&gamma)?;
    pairs.sort_by(|a, b| b.value.total_cmp(&a.value));
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.value).collect();
    let lead = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let mut residual = 0.0f64;
    if oo_norm > 0.0 {
        for pair in pairs.iter().filter(|p| p.value > RANK_EPS * lead) {
            let w = pair
                .vector
                .as_ref()
                .ok_or_else(|| SalError::numeric("complex eigenvalue in K_psi*K_phi"))?;
            let u = x_features * w;
            let r = (&oo * &u - &u * pair.value).norm() / (u.norm() * oo_norm);
            residual = residual.max(r);
        }
    }
    Ok(LemmaCheck {
        residual,
        eigenvalues,
    })
}
