//! Dense linear-algebra helpers shared by the linear and kernel erasers.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Result, SalError};

/// Relative cutoff below which singular values and eigenvalues count as zero.
pub const RANK_EPS: f64 = 1e-10;

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Number of values above `RANK_EPS * values[0]`; assumes a non-increasing slice.
pub fn numerical_rank(values: &[f64]) -> usize {
    match values.first() {
        Some(&top) if top > 0.0 => values.iter().filter(|&&s| s > RANK_EPS * top).count(),
        _ => 0,
    }
}

pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Flips `v` so that its largest-magnitude entry is positive. Returns true if flipped.
pub fn canonicalize_sign(v: &mut [f64]) -> bool {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
        true
    } else {
        false
    }
}

/// Orthonormal basis (n × (n − r)) of the orthogonal complement of the span of the
/// orthonormal columns of `q` (n × r), built from Householder reflectors.
pub fn orthonormal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = q.shape();
    assert!(r <= n, "more columns than rows");
    let mut a = q.clone();
    let mut reflectors: Vec<(usize, DVector<f64>)> = Vec::with_capacity(r);
    for j in 0..r {
        let mut v: DVector<f64> = a.view((j, j), (n - j, 1)).column(0).into_owned();
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vn = v.norm();
        if vn == 0.0 {
            continue;
        }
        v /= vn;
        for c in j..r {
            let mut col = a.view_mut((j, c), (n - j, 1));
            let d = v.dot(&col.column(0));
            col.column_mut(0).axpy(-2.0 * d, &v, 1.0);
        }
        reflectors.push((j, v));
    }
    let mut out = DMatrix::zeros(n, n - r);
    for c in r..n {
        out[(c, c - r)] = 1.0;
    }
    for (j, v) in reflectors.iter().rev() {
        for c in 0..out.ncols() {
            let mut col = out.view_mut((*j, c), (n - j, 1));
            let d = v.dot(&col.column(0));
            col.column_mut(0).axpy(-2.0 * d, v, 1.0);
        }
    }
    out
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
pub fn symmetric_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// One eigenpair of a real, possibly nonsymmetric matrix.
#[derive(Debug, Clone)]
pub struct RealEigenPair {
    pub value: f64,
    /// Magnitude of the imaginary part; zero for real eigenvalues.
    pub imag: f64,
    /// Unit-norm eigenvector; `None` for complex eigenvalues.
    pub vector: Option<DVector<f64>>,
}

/// All eigenpairs of a small dense matrix via the real Schur form followed by
/// back-substitution on the quasi-triangular factor.
pub fn real_eigenpairs(h: &DMatrix<f64>) -> Result<Vec<RealEigenPair>> {
    let n = h.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(SalError::numeric(
            "eigensolver input contains non-finite entries",
        ));
    }
    // repeated eigenvalues can stall deflation at machine epsilon; retry looser
    let schur = [4.0 * f64::EPSILON, 1e-13]
        .iter()
        .find_map(|&eps| Schur::try_new(h.clone(), eps, 100_000))
        .ok_or_else(|| SalError::numeric("real Schur iteration did not converge"))?;
    let (q, t) = schur.unpack();
    let t_norm = t.norm().max(f64::MIN_POSITIVE);
    let smin = (f64::EPSILON * t_norm).max(f64::MIN_POSITIVE);

    // block starts: a 2x2 block begins at i when t[(i+1, i)] is nonzero
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }

    let mut pairs = Vec::with_capacity(n);
    for (bi, &(start, size)) in blocks.iter().enumerate() {
        if size == 1 {
            let lambda = t[(start, start)];
            let mut y = DVector::zeros(n);
            y[start] = 1.0;
            back_substitute(&t, &blocks[..bi], lambda, &mut y, smin);
            pairs.push(finish_pair(&q, y, lambda, 0.0));
            continue;
        }
        let (a, b, c, d) = (
            t[(start, start)],
            t[(start, start + 1)],
            t[(start + 1, start)],
            t[(start + 1, start + 1)],
        );
        let half_tr = 0.5 * (a + d);
        let disc = 0.25 * (a - d) * (a - d) + b * c;
        if disc < 0.0 {
            let im = (-disc).sqrt();
            for _ in 0..2 {
                pairs.push(RealEigenPair {
                    value: half_tr,
                    imag: im,
                    vector: None,
                });
            }
            continue;
        }
        let root = disc.sqrt();
        for lambda in [half_tr + root, half_tr - root] {
            // eigenvector of the 2x2 block for lambda
            let (v0, v1) = if (a - lambda).abs() + b.abs() >= (d - lambda).abs() + c.abs() {
                (b, lambda - a)
            } else {
                (lambda - d, c)
            };
            let (v0, v1) = if v0 == 0.0 && v1 == 0.0 {
                (1.0, 0.0)
            } else {
                (v0, v1)
            };
            let mut y = DVector::zeros(n);
            y[start] = v0;
            y[start + 1] = v1;
            back_substitute(&t, &blocks[..bi], lambda, &mut y, smin);
            pairs.push(finish_pair(&q, y, lambda, 0.0));
        }
    }
    Ok(pairs)
}

fn finish_pair(q: &DMatrix<f64>, y: DVector<f64>, value: f64, imag: f64) -> RealEigenPair {
    let mut x = q * y;
    let norm = x.norm();
    if norm > 0.0 {
        x /= norm;
    }
    canonicalize_sign(x.as_mut_slice());
    RealEigenPair {
        value,
        imag,
        vector: Some(x),
    }
}

/// Solves (T − λI) y = 0 for the entries of `y` in the blocks above the seed block.
fn back_substitute(
    t: &DMatrix<f64>,
    blocks_above: &[(usize, usize)],
    lambda: f64,
    y: &mut DVector<f64>,
    smin: f64,
) {
    let n = t.nrows();
    for &(start, size) in blocks_above.iter().rev() {
        let rhs = |row: usize, y: &DVector<f64>| -> f64 {
            let mut s = 0.0;
            for j in (start + size)..n {
                s += t[(row, j)] * y[j];
            }
            -s
        };
        if size == 1 {
            let mut denom = t[(start, start)] - lambda;
            if denom.abs() < smin {
                denom = smin;
            }
            y[start] = rhs(start, y) / denom;
        } else {
            let a = t[(start, start)] - lambda;
            let b = t[(start, start + 1)];
            let c = t[(start + 1, start)];
            let d = t[(start + 1, start + 1)] - lambda;
            let r0 = rhs(start, y);
            let r1 = rhs(start + 1, y);
            let mut det = a * d - b * c;
            if det.abs() < smin * smin {
                det = smin * smin;
            }
            y[start] = (d * r0 - b * r1) / det;
            y[start + 1] = (a * r1 - c * r0) / det;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let q = DMatrix::from_column_slice(4, 2, &[0.5, 0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5]);
        let c = orthonormal_complement(&q);
        assert_eq!(c.shape(), (4, 2));
        let gram = c.transpose() * &c;
        assert!((gram - DMatrix::identity(2, 2)).abs().max() < 1e-12);
        assert!((q.transpose() * &c).abs().max() < 1e-12);
    }

    #[test]
    fn complement_of_first_axis() {
        let q = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let c = orthonormal_complement(&q);
        assert!((c[(0, 0)]).abs() < 1e-15);
        assert!((c[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenpairs_of_upper_triangular() {
        let h = DMatrix::from_row_slice(3, 3, &[3.0, 1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 1.0]);
        let pairs = real_eigenpairs(&h).unwrap();
        let mut values: Vec<f64> = pairs.iter().map(|p| p.value).collect();
        values.sort_by(|a, b| b.total_cmp(a));
        for (v, e) in values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        for p in &pairs {
            let w = p.vector.as_ref().unwrap();
            assert!((&h * w - w * p.value).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_has_complex_pair() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let pairs = real_eigenpairs(&h).unwrap();
        assert!(pairs.iter().all(|p| p.imag > 0.9 && p.vector.is_none()));
    }

    #[test]
    fn nonsymmetric_real_spectrum() {
        // product of two PSD matrices has real eigenvalues
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.3, 0.2, 0.3, 1.0]);
        let h = &a * &b;
        for p in real_eigenpairs(&h).unwrap() {
            assert!(p.imag == 0.0);
            let w = p.vector.unwrap();
            assert!((&h * &w - &w * p.value).norm() < 1e-10 * h.norm());
        }
    }

    #[test]
    fn sign_convention() {
        let mut v = [0.1, -0.9, 0.3];
        assert!(canonicalize_sign(&mut v));
        assert_eq!(v, [-0.1, 0.9, -0.3]);
    }
}
