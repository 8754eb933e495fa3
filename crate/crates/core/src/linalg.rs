//! Dense linear-algebra primitives with explicit rank tolerances.
//!
//! The heavy lifting (bidiagonal SVD, symmetric tridiagonal QR) is done by
//! `nalgebra`; this module fixes the conventions the estimators rely on:
//! singular values and eigenvalues in descending order, a documented
//! rank cutoff for the pseudoinverse, and a sign rule that makes
//! eigenvectors reproducible.
//!
//! The bidiagonal SVD occasionally returns a factorization that does not
//! reproduce its input when the matrix is exactly rank deficient, so every
//! SVD is checked and redone by one-sided Jacobi rotations when it fails.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute symmetry tolerance, scaled by `max(1, max|S|)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Thin singular value decomposition `M = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × r` with orthonormal columns, `r = min(rows, cols)`.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub s: Vector,
    /// `r × cols` with orthonormal rows.
    pub vt: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (mut col, &sv) in us.column_iter_mut().zip(self.s.iter()) {
            col *= sv;
        }
        us * &self.vt
    }

    /// Number of singular values strictly above `rtol · σ₁`.
    pub fn rank(&self, rtol: f64) -> usize {
        match self.s.get(0) {
            Some(&top) if top > 0.0 => self.s.iter().filter(|&&v| v > rtol * top).count(),
            _ => 0,
        }
    }
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    for (c, col) in m.column_iter().enumerate() {
        if let Some(r) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: r, col: c });
        }
    }
    Ok(())
}

pub fn check_finite_vec(v: &Vector) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(r) => Err(Error::NonFinite { row: r, col: 0 }),
        None => Ok(()),
    }
}

/// Default pseudoinverse cutoff: machine epsilon times the larger dimension.
pub fn default_rtol(rows: usize, cols: usize) -> f64 {
    f64::EPSILON * rows.max(cols).max(1) as f64
}

pub fn svd(m: &Matrix) -> Result<SvdResult> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    let r = rows.min(cols);
    if r == 0 {
        return Ok(SvdResult {
            u: Matrix::zeros(rows, 0),
            s: Vector::zeros(0),
            vt: Matrix::zeros(0, cols),
        });
    }
    let dec = SVD::new(m.clone(), true, true);
    let mut u = dec.u.expect("left factor requested");
    let mut vt = dec.v_t.expect("right factor requested");
    let mut s = dec.singular_values;
    let norm = m.norm();
    let tol = 64.0 * f64::EPSILON * rows.max(cols) as f64 * norm;
    if reconstruction_error(&u, &s, &vt, m) > tol {
        (u, s, vt) = jacobi_svd(m);
    }

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let mut out = SvdResult {
        u: Matrix::zeros(rows, r),
        s: Vector::zeros(r),
        vt: Matrix::zeros(r, cols),
    };
    for (dst, &src) in order.iter().enumerate() {
        out.s[dst] = s[src].max(0.0);
        out.u.set_column(dst, &u.column(src));
        out.vt.set_row(dst, &vt.row(src));
    }
    Ok(out)
}

fn reconstruction_error(u: &Matrix, s: &Vector, vt: &Matrix, m: &Matrix) -> f64 {
    let mut us = u.clone();
    for (mut col, &sv) in us.column_iter_mut().zip(s.iter()) {
        col *= sv;
    }
    (us * vt - m).norm()
}

/// One-sided (Hestenes) Jacobi SVD; returns thin, unsorted factors.
fn jacobi_svd(m: &Matrix) -> (Matrix, Vector, Matrix) {
    let (rows, cols) = m.shape();
    if rows < cols {
        let (u, s, vt) = jacobi_svd(&m.transpose());
        return (vt.transpose(), s, u.transpose());
    }
    let mut a = m.clone();
    let mut v = Matrix::identity(cols, cols);
    for _ in 0..100 {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                rotate(&mut a, i, j, c, sn);
                rotate(&mut v, i, j, c, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    let s = Vector::from_iterator(cols, a.column_iter().map(|c| c.norm()));
    let top = s.amax();
    let mut u = Matrix::zeros(rows, cols);
    let mut missing = Vec::new();
    for k in 0..cols {
        if s[k] > f64::EPSILON * rows as f64 * top && s[k] > 0.0 {
            u.set_column(k, &(a.column(k) / s[k]));
        } else {
            missing.push(k);
        }
    }
    // complete the left factor for numerically zero singular values
    let mut basis = 0;
    for k in missing {
        loop {
            let mut e = Vector::zeros(rows);
            e[basis % rows] = 1.0;
            basis += 1;
            for _ in 0..2 {
                for other in 0..cols {
                    if other != k {
                        let col = u.column(other).into_owned();
                        e -= &col * col.dot(&e);
                    }
                }
            }
            let norm = e.norm();
            if norm > 0.5 {
                u.set_column(k, &(e / norm));
                break;
            }
        }
    }
    (u, s, v.transpose())
}

fn rotate(m: &mut Matrix, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * x - s * y;
        m[(r, j)] = s * x + c * y;
    }
}

/// Moore-Penrose pseudoinverse; singular values `σ ≤ rtol · σ₁` are treated as zero.
pub fn pinv(m: &Matrix, rtol: f64) -> Result<Matrix> {
    if rtol < 0.0 || !rtol.is_finite() {
        return Err(Error::InvalidParams(format!("rtol must be >= 0, got {rtol}")));
    }
    let dec = svd(m)?;
    let (rows, cols) = m.shape();
    let rank = dec.rank(rtol);
    let mut out = Matrix::zeros(cols, rows);
    for i in 0..rank {
        let inv = 1.0 / dec.s[i];
        // out += v_i u_iᵀ / σ_i
        out.ger(inv, &dec.vt.row(i).transpose(), &dec.u.column(i), 1.0);
    }
    Ok(out)
}

pub fn check_symmetric(s: &Matrix) -> Result<()> {
    if !s.is_square() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", s.nrows(), s.ncols()),
        });
    }
    check_finite(s)?;
    let scale = s.amax().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry: worst });
    }
    Ok(())
}

/// Flip each column so its first non-negligible entry is positive.
pub fn canonicalize_signs(v: &mut Matrix) {
    for mut col in v.column_iter_mut() {
        let cutoff = col.amax() * 1e-12;
        if let Some(&lead) = col.iter().find(|x| x.abs() > cutoff) {
            if lead < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Full symmetric eigendecomposition with eigenvalues in descending order
/// and sign-canonicalized eigenvectors (as columns).
pub fn sym_eigen_desc(s: &Matrix) -> Result<(Vector, Matrix)> {
    check_symmetric(s)?;
    let p = s.nrows();
    if p == 0 {
        return Ok((Vector::zeros(0), Matrix::zeros(0, 0)));
    }
    let sym = (s + s.transpose()) * 0.5;
    let dec = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        dec.eigenvalues[b]
            .total_cmp(&dec.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut values = Vector::zeros(p);
    let mut vectors = Matrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = dec.eigenvalues[src];
        vectors.set_column(dst, &dec.eigenvectors.column(src));
    }
    canonicalize_signs(&mut vectors);
    Ok((values, vectors))
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn sym_eigenvalues_desc(s: &Matrix) -> Result<Vector> {
    check_symmetric(s)?;
    if s.nrows() == 0 {
        return Ok(Vector::zeros(0));
    }
    let sym = (s + s.transpose()) * 0.5;
    let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(Vector::from_vec(vals))
}

/// Orthonormal basis (p×k) of the invariant subspace of the `k` largest
/// eigenvalues of a symmetric matrix.
pub fn top_k_eigvecs(s: &Matrix, k: usize) -> Result<Matrix> {
    let p = s.nrows();
    if k > p {
        return Err(Error::KTooLarge { k, max: p });
    }
    check_symmetric(s)?;
    if k == 0 {
        return Ok(Matrix::zeros(p, 0));
    }
    let (_, vectors) = sym_eigen_desc(s)?;
    Ok(vectors.columns(0, k).into_owned())
}

/// Principal square root of a symmetric positive definite matrix.
pub fn sqrt_spd(s: &Matrix) -> Result<Matrix> {
    let (values, vectors) = sym_eigen_desc(s)?;
    if let Some(min) = values.iter().copied().reduce(f64::min) {
        if min <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!(
                "smallest eigenvalue {min:e}"
            )));
        }
    }
    let mut scaled = vectors.clone();
    for (mut col, &v) in scaled.column_iter_mut().zip(values.iter()) {
        col *= v.sqrt();
    }
    Ok(scaled * vectors.transpose())
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.s.get(0).copied().unwrap_or(0.0))
}

/// Copy of `m` without column `j`.
pub fn drop_column(m: &Matrix, j: usize) -> Matrix {
    m.clone().remove_column(j)
}

/// Copy of `v` without entry `j`.
pub fn drop_entry(v: &Vector, j: usize) -> Vector {
    v.clone().remove_row(j)
}

/// Copy of a square matrix without row and column `j`.
pub fn drop_row_col(m: &Matrix, j: usize) -> Matrix {
    m.clone().remove_row(j).remove_column(j)
}

/// Maximum absolute entry of `a - b`.
pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svd_of_exactly_rank_deficient_product() {
        // a tall panel times a projector that removes three directions
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for (rows, cols) in [(50, 11), (11, 50), (30, 30)] {
            let y = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0));
            let b = Matrix::from_fn(cols, 3, |_, _| rng.random_range(-1.0..1.0));
            let q = b.qr().q();
            let x = &y * (Matrix::identity(cols, cols) - &q * q.transpose());
            let dec = svd(&x).unwrap();
            assert!((dec.reconstruct() - &x).norm() <= 1e-10 * x.norm());
            let r = rows.min(cols);
            let ev = sym_eigenvalues_desc(&(x.tr_mul(&x))).unwrap();
            for k in 0..r - 3 {
                assert!((dec.s[k] * dec.s[k] - ev[k]).abs() <= 1e-9 * ev[0]);
            }
            assert!((dec.u.tr_mul(&dec.u) - Matrix::identity(r, r)).amax() <= 1e-10);
            assert!((&dec.vt * dec.vt.transpose() - Matrix::identity(r, r)).amax() <= 1e-10);
        }
    }

    #[test]
    fn jacobi_matches_reference_on_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for (rows, cols) in [(7, 4), (4, 7)] {
            let m = Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
            let (u, s, vt) = jacobi_svd(&m);
            assert!(reconstruction_error(&u, &s, &vt, &m) <= 1e-12);
            let mut a: Vec<f64> = s.iter().copied().collect();
            a.sort_by(|x, y| y.total_cmp(x));
            let b = SVD::new(m.clone(), false, false).singular_values;
            let mut b: Vec<f64> = b.iter().copied().collect();
            b.sort_by(|x, y| y.total_cmp(x));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn svd_of_diagonal() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 3.0]));
        let d = svd(&m).unwrap();
        assert_eq!(d.s.as_slice(), &[3.0, 1.0]);
    }

    #[test]
    fn svd_of_zero_matrix() {
        let d = svd(&Matrix::zeros(2, 3)).unwrap();
        assert_eq!(d.s.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        let m = random_matrix(5, 3, 1);
        let d = svd(&m).unwrap();
        assert!((m - d.reconstruct()).norm() <= 1e-10);
        assert!(d.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_rejects_nan() {
        let mut m = Matrix::zeros(2, 2);
        m[(1, 0)] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::NonFinite { row: 1, col: 0 })));
    }

    #[test]
    fn pinv_identity_and_zeroed_singular_value() {
        let i3 = Matrix::identity(3, 3);
        assert!((pinv(&i3, default_rtol(3, 3)).unwrap() - &i3).amax() < 1e-15);

        let d = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 0.0]));
        let p = pinv(&d, default_rtol(2, 2)).unwrap();
        let expected = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 0.0]));
        assert!((p - expected).amax() < 1e-15);
    }

    #[test]
    fn pinv_rank_one_satisfies_penrose_conditions() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let p = pinv(&m, default_rtol(2, 2)).unwrap();
        let tol = 1e-8;
        assert!((&m * &p * &m - &m).amax() <= tol * m.amax());
        assert!((&p * &m * &p - &p).amax() <= tol * p.amax());
        let mp = &m * &p;
        let pm = &p * &m;
        assert!((&mp - mp.transpose()).amax() <= tol);
        assert!((&pm - pm.transpose()).amax() <= tol);
        // closed form for this matrix
        assert!((p - m / 25.0).amax() < 1e-14);
    }

    #[test]
    fn top_k_of_diagonal() {
        let s = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 2.0, 1.0]));
        let v = top_k_eigvecs(&s, 2).unwrap();
        assert!((v.column(0).into_owned() - Vector::from_vec(vec![1.0, 0.0, 0.0])).amax() < 1e-14);
        assert!((v.column(1).into_owned() - Vector::from_vec(vec![0.0, 1.0, 0.0])).amax() < 1e-14);
    }

    #[test]
    fn top_k_zero_is_empty() {
        let s = Matrix::identity(4, 4);
        let v = top_k_eigvecs(&s, 0).unwrap();
        assert_eq!(v.shape(), (4, 0));
    }

    #[test]
    fn top_k_random_symmetric_against_full_decomposition() {
        let a = random_matrix(6, 6, 2);
        let s = &a + a.transpose();
        let k = 3;
        let v = top_k_eigvecs(&s, k).unwrap();
        assert!((v.transpose() * &v - Matrix::identity(k, k)).amax() < 1e-12);
        let vals = sym_eigenvalues_desc(&s).unwrap();
        let lam = Matrix::from_diagonal(&vals.rows(0, k).into_owned());
        assert!((&s * &v - &v * lam).norm() <= 1e-9);
    }

    #[test]
    fn top_k_errors() {
        let mut s = Matrix::identity(3, 3);
        assert!(matches!(top_k_eigvecs(&s, 4), Err(Error::KTooLarge { .. })));
        s[(0, 1)] = 1.0;
        assert!(matches!(top_k_eigvecs(&s, 1), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn canonical_signs_are_positive_leading() {
        let a = random_matrix(5, 5, 3);
        let s = &a * a.transpose();
        let (_, v) = sym_eigen_desc(&s).unwrap();
        for col in v.column_iter() {
            let lead = col.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*lead > 0.0);
        }
    }

    #[test]
    fn sqrt_spd_squares_back() {
        let a = random_matrix(4, 4, 4);
        let s = &a * a.transpose() + Matrix::identity(4, 4);
        let r = sqrt_spd(&s).unwrap();
        assert!((&r * &r - &s).amax() < 1e-12);
    }
}
