//! Top-k eigenpairs of a dense, possibly nonsymmetric matrix with a real spectrum.
//!
//! Orthogonal (subspace) iteration with a Rayleigh–Ritz step: a block of
//! `p = min(n, 2k + 10)` orthonormal vectors is repeatedly multiplied by the
//! matrix and re-orthonormalized; Ritz pairs of the small projected matrix are
//! accepted once their residuals fall below tolerance. When `p` reaches `n` the
//! projected problem is the full problem and is solved directly.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SalError};
use crate::linalg::{canonicalize_sign, real_eigenpairs};

const OVERSAMPLE: usize = 10;
const MAX_ITERS: usize = 3000;
/// Target relative residual for convergence.
const CONVERGED_TOL: f64 = 1e-12;
/// Largest relative residual accepted when iterations run out.
const ACCEPT_TOL: f64 = 1e-6;
/// Imaginary parts above this fraction of ‖Γ‖ mean the spectrum is not real.
const IMAG_TOL: f64 = 1e-6;
const START_SEED: u64 = 0x5a1_c0de;

/// Eigenvalues in descending order with matching unit-norm eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Eigenvectors for the `k` largest real eigenvalues of `gamma`.
pub fn top_eigenvectors(gamma: &DMatrix<f64>, k: usize) -> Result<EigenPairs> {
    let n = gamma.nrows();
    if gamma.ncols() != n {
        return Err(SalError::contract("top_eigenvectors needs a square matrix"));
    }
    if k > n {
        return Err(SalError::contract(format!(
            "k = {k} exceeds matrix size {n}"
        )));
    }
    if gamma.iter().any(|x| !x.is_finite()) {
        return Err(SalError::numeric("matrix has non-finite entries"));
    }
    if k == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: DMatrix::zeros(n, 0),
        });
    }
    let scale = gamma.norm();
    if scale == 0.0 {
        // every vector is an eigenvector of the zero matrix
        return Ok(EigenPairs {
            values: vec![0.0; k],
            vectors: DMatrix::identity(n, k),
        });
    }
    let p = (2 * k + OVERSAMPLE).min(n);
    if p == n {
        return dense_top(gamma, k, scale);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let start = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let mut q = start.qr().q();
    let mut best: Option<(f64, EigenPairs)> = None;
    let mut last_err = None;
    for _ in 0..MAX_ITERS {
        let y = gamma * &q;
        let h = q.tr_mul(&y);
        // early Ritz values of a nonsymmetric matrix may be complex; keep iterating
        let ritz = match sorted_real(&h, k, scale) {
            Ok(r) => r,
            Err(e) => {
                last_err = Some(e);
                q = y.qr().q();
                continue;
            }
        };
        let vectors = &q * &ritz.vectors;
        let mut worst = 0.0f64;
        for j in 0..k {
            let s = ritz.vectors.column(j);
            let r = &y * s - vectors.column(j) * ritz.values[j];
            worst = worst.max(r.norm() / scale);
        }
        let candidate = EigenPairs {
            values: ritz.values,
            vectors: normalize_columns(vectors),
        };
        if worst <= CONVERGED_TOL {
            return Ok(candidate);
        }
        if best.as_ref().is_none_or(|(b, _)| worst < *b) {
            best = Some((worst, candidate));
        }
        q = y.qr().q();
    }
    match best {
        Some((res, pairs)) if res <= ACCEPT_TOL => Ok(pairs),
        Some((res, _)) => Err(SalError::numeric(format!(
            "eigensolver did not converge (relative residual {res:.2e})"
        ))),
        None => {
            Err(last_err.unwrap_or_else(|| SalError::numeric("eigensolver produced no iterate")))
        }
    }
}

fn dense_top(gamma: &DMatrix<f64>, k: usize, scale: f64) -> Result<EigenPairs> {
    let pairs = sorted_real(gamma, k, scale)?;
    Ok(EigenPairs {
        values: pairs.values,
        vectors: normalize_columns(pairs.vectors),
    })
}

/// The `k` eigenpairs of `h` with the largest real parts.
fn sorted_real(h: &DMatrix<f64>, k: usize, scale: f64) -> Result<EigenPairs> {
    let mut pairs = real_eigenpairs(h)?;
    pairs.sort_by(|a, b| b.value.total_cmp(&a.value));
    let m = h.nrows();
    let mut values = Vec::with_capacity(k);
    let mut vectors = DMatrix::zeros(m, k);
    for (j, pair) in pairs.iter().take(k).enumerate() {
        if pair.imag > IMAG_TOL * scale {
            return Err(SalError::numeric(format!(
                "eigenvalue {:.3e} has imaginary part {:.3e}; the spectrum is not real",
                pair.value, pair.imag
            )));
        }
        let v = match &pair.vector {
            Some(v) => v.clone(),
            // negligible imaginary part: take the real eigenvector of the nearest real matrix
            None => real_vector_for(h, pair.value)?,
        };
        values.push(pair.value);
        vectors.set_column(j, &v);
    }
    Ok(EigenPairs { values, vectors })
}

/// Null vector of `h − λI` from its smallest right singular vector.
fn real_vector_for(h: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    let m = h.nrows();
    let shifted = h - DMatrix::identity(m, m) * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| SalError::numeric("SVD returned no V"))?;
    let idx = svd.singular_values.imin();
    Ok(v_t.row(idx).transpose())
}

fn normalize_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
        canonicalize_sign(col.as_mut_slice());
    }
    m
}
