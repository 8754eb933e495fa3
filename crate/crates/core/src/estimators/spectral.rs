//! Leave-one-column-out spectra from a single decomposition.
//!
//! Every row regression needs the spectrum of `Y_{-j}ᵀ Y_{-j}` (equivalently
//! of `Y_{-j} Y_{-j}ᵀ`). Instead of `p` fresh eigenproblems this module
//! decomposes one Gram matrix of the full panel and recovers each row's
//! spectrum exactly as the roots of a secular equation:
//!
//! * `p ≤ n`: `C = YᵀY` and `Y_{-j}ᵀY_{-j}` is `C` with row and column `j`
//!   deleted. Its eigenvalues solve `Σ_i q_{ji}² / (λ_i − x) = 0`.
//! * `p > n`: `G = YYᵀ` and `Y_{-j}Y_{-j}ᵀ = G − y_j y_jᵀ`. Its eigenvalues
//!   solve `−1 + Σ_i z_i² / (λ_i − x) = 0` with `z = Qᵀ y_j`.
//!
//! Both are `ρ + Σ_i w_i/(λ_i − x)`, increasing between consecutive poles,
//! with exactly one root per interval. Roots are found in coordinates
//! shifted to the nearer pole so that roots hugging a pole keep full
//! relative accuracy. Rows whose secular problem is degenerate (a zero
//! weight or coincident poles) are reported as unavailable and the caller
//! falls back to a dense computation.

use nalgebra::SymmetricEigen;

use crate::linalg::{Matrix, Vector};

const MAX_ITER: usize = 200;

/// Which Gram matrix was decomposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    /// `C = YᵀY` (`p × p`), used when `p ≤ n`.
    Columns,
    /// `G = YYᵀ` (`n × n`), used when `p > n`.
    Rows,
}

pub(crate) struct LeaveOneOut<'a> {
    y: &'a Matrix,
    side: Side,
    /// Ascending eigenvalues of the decomposed Gram matrix.
    values: Vec<f64>,
    /// Eigenvectors matching `values`, as columns.
    vectors: Matrix,
    col_sq: Vec<f64>,
    scale: f64,
}

/// A root of a row's secular equation kept in shifted form `x = origin + tau`.
#[derive(Debug, Clone, Copy)]
struct Root {
    pole: usize,
    tau: f64,
    value: f64,
}

/// Secular problem of one row.
pub(crate) struct RowSecular<'e, 'a> {
    engine: &'e LeaveOneOut<'a>,
    j: usize,
    weights: Vec<f64>,
    /// Coefficients of the row's reference vector in the eigenbasis
    /// (`z` on the row side, row `j` of `Q` on the column side).
    coeffs: Vec<f64>,
    rho: f64,
    weight_sum: f64,
}

/// Leading eigenpairs of one row, in the eigenbasis of the full Gram matrix.
pub(crate) struct RowEigen {
    /// Descending eigenvalues of `Y_{-j}ᵀ Y_{-j}`.
    pub values: Vec<f64>,
    /// Unit coefficient vectors (in the full eigenbasis) of the matching
    /// eigenvectors.
    pub coeffs: Vec<Vector>,
}

impl<'a> LeaveOneOut<'a> {
    pub fn new(y: &'a Matrix) -> Self {
        let (n, p) = y.shape();
        let (side, gram) = if p <= n {
            (Side::Columns, y.tr_mul(y))
        } else {
            (Side::Rows, y * y.transpose())
        };
        let gram = (&gram + gram.transpose()) * 0.5;
        let dec = SymmetricEigen::new(gram);
        let m = dec.eigenvalues.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            dec.eigenvalues[a]
                .total_cmp(&dec.eigenvalues[b])
                .then(a.cmp(&b))
        });
        let values: Vec<f64> = order.iter().map(|&i| dec.eigenvalues[i]).collect();
        let mut vectors = Matrix::zeros(m, m);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &dec.eigenvectors.column(src));
        }
        let col_sq = y.column_iter().map(|c| c.norm_squared()).collect();
        let scale = values.last().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
        Self {
            y,
            side,
            values,
            vectors,
            col_sq,
            scale,
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    /// `‖y_j‖²`.
    pub fn col_sq(&self, j: usize) -> f64 {
        self.col_sq[j]
    }

    /// `‖Y_{-j}‖_F²`.
    pub fn frob_sq_without(&self, j: usize) -> f64 {
        self.col_sq.iter().sum::<f64>() - self.col_sq[j]
    }

    pub fn smallest_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of eigenvalues of `Y_{-j}ᵀ Y_{-j}` that the row problem has.
    pub fn row_dim(&self) -> usize {
        match self.side {
            Side::Columns => self.p() - 1,
            Side::Rows => self.n(),
        }
    }

    pub fn row(&self, j: usize) -> Option<RowSecular<'_, 'a>> {
        let m = self.values.len();
        let (coeffs, rho): (Vec<f64>, f64) = match self.side {
            Side::Columns => ((0..m).map(|i| self.vectors[(j, i)]).collect(), 0.0),
            Side::Rows => {
                let z = self.vectors.tr_mul(&self.y.column(j));
                (z.iter().copied().collect(), -1.0)
            }
        };
        let weights: Vec<f64> = coeffs.iter().map(|c| c * c).collect();
        let weight_sum: f64 = weights.iter().sum();
        if !weight_sum.is_finite() || weight_sum <= 0.0 {
            return None;
        }
        // zero weights and coincident poles need deflation; leave those rows
        // to the dense path
        if weights.iter().any(|&w| w <= weight_sum * 1e-28) {
            return None;
        }
        let gap_tol = self.scale * 1e-13;
        if self.values.windows(2).any(|w| w[1] - w[0] <= gap_tol) {
            return None;
        }
        Some(RowSecular {
            engine: self,
            j,
            weights,
            coeffs,
            rho,
            weight_sum,
        })
    }

    /// `(CᵀC)⁻¹`-style inverse of the decomposed Gram matrix, or `None`
    /// when it is numerically singular.
    pub fn gram_inverse(&self) -> Option<Matrix> {
        if self.smallest_value() <= self.scale * 1e-11 {
            return None;
        }
        let mut scaled = self.vectors.clone();
        for (mut col, &v) in scaled.column_iter_mut().zip(&self.values) {
            col /= v;
        }
        Some(scaled * self.vectors.transpose())
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl RowSecular<'_, '_> {
    pub fn j(&self) -> usize {
        self.j
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Pole bracket of the `r`-th smallest root: `(lower pole or bound, upper pole)`.
    fn bracket(&self, r: usize) -> (Option<usize>, usize) {
        match self.engine.side {
            Side::Columns => (Some(r), r + 1),
            Side::Rows => {
                if r == 0 {
                    (None, 0)
                } else {
                    (Some(r - 1), r)
                }
            }
        }
    }

    /// `r`-th smallest root (0-based).
    fn root(&self, r: usize) -> Root {
        let d = &self.engine.values;
        let (lo, hi) = self.bracket(r);
        let lower = match lo {
            Some(i) => d[i],
            None => d[hi] - self.weight_sum,
        };
        let upper = d[hi];
        let mid = 0.5 * (lower + upper);

        let mid_h = self.rho
            + self
                .weights
                .iter()
                .zip(d)
                .map(|(&w, &di)| w / (di - mid))
                .sum::<f64>();

        // shift to the pole the root is closer to
        let (pole, t_lo, t_hi) = match lo {
            Some(i) if mid_h >= 0.0 => (i, 0.0, mid - d[i]),
            Some(_) => (hi, mid - d[hi], 0.0),
            None if mid_h >= 0.0 => (hi, lower - d[hi], mid - d[hi]),
            None => (hi, mid - d[hi], 0.0),
        };
        let origin = d[pole];
        let delta: Vec<f64> = d.iter().map(|&di| di - origin).collect();

        let tau = self.solve_shifted(&delta, lo, hi, t_lo, t_hi);
        Root {
            pole,
            tau,
            value: origin + tau,
        }
    }

    /// Root of `ρ + Σ w_i/(δ_i − τ)` inside `(t_lo, t_hi)`, using a two-pole
    /// rational model of the function with bisection as a safeguard.
    fn solve_shifted(
        &self,
        delta: &[f64],
        lo: Option<usize>,
        hi: usize,
        mut t_lo: f64,
        mut t_hi: f64,
    ) -> f64 {
        let mut tau = 0.5 * (t_lo + t_hi);
        for _ in 0..MAX_ITER {
            // split the sum into poles at or below `lo` and at or above `hi`
            let (mut psi, mut dpsi, mut phi, mut dphi) = (0.0, 0.0, self.rho, 0.0);
            for (i, (&w, &d)) in self.weights.iter().zip(delta).enumerate() {
                let inv = 1.0 / (d - tau);
                if i < hi {
                    psi += w * inv;
                    dpsi += w * inv * inv;
                } else {
                    phi += w * inv;
                    dphi += w * inv * inv;
                }
            }
            let h = psi + phi;
            if h == 0.0 {
                return tau;
            }
            if h < 0.0 {
                t_lo = tau;
            } else {
                t_hi = tau;
            }
            if t_hi - t_lo <= 4.0 * f64::EPSILON * t_lo.abs().max(t_hi.abs()) {
                break;
            }

            let d_hi = delta[hi];
            let b2 = dphi * (d_hi - tau) * (d_hi - tau);
            let a2 = phi - b2 / (d_hi - tau);
            let candidate = match lo {
                Some(l) => {
                    let d_lo = delta[l];
                    let b1 = dpsi * (d_lo - tau) * (d_lo - tau);
                    let a1 = psi - b1 / (d_lo - tau);
                    two_pole_root(a1 + a2, b1, d_lo, b2, d_hi, t_lo, t_hi)
                }
                None => {
                    // no pole below: model ψ by its tangent
                    let a = a2 + psi - dpsi * tau;
                    let slope = dpsi;
                    newton_like_root(a, slope, b2, d_hi, t_lo, t_hi)
                }
            };
            let next = match candidate {
                Some(t) if t > t_lo && t < t_hi => t,
                _ => 0.5 * (t_lo + t_hi),
            };
            if (next - tau).abs() <= 2.0 * f64::EPSILON * tau.abs().max(f64::MIN_POSITIVE) {
                tau = next;
                break;
            }
            tau = next;
        }
        tau
    }

    /// The `count` largest eigenvalues (descending) together with their
    /// eigenvector coefficients.
    pub fn top_eigen(&self, count: usize) -> RowEigen {
        let dim = self.engine.row_dim();
        let count = count.min(dim);
        let mut values = Vec::with_capacity(count);
        let mut coeffs = Vec::with_capacity(count);
        for k in 0..count {
            let root = self.root(dim - 1 - k);
            values.push(root.value);
            coeffs.push(self.vector(root));
        }
        RowEigen { values, coeffs }
    }

    /// The `count` largest eigenvalues, descending.
    pub fn top_values(&self, count: usize) -> Vec<f64> {
        let dim = self.engine.row_dim();
        (0..count.min(dim))
            .map(|k| self.root(dim - 1 - k).value)
            .collect()
    }

    /// Smallest eigenvalue of `Y_{-j}ᵀ Y_{-j}` (over its `row_dim` roots).
    pub fn smallest_value(&self) -> f64 {
        self.root(0).value
    }

    fn vector(&self, root: Root) -> Vector {
        let d = &self.engine.values;
        let origin = d[root.pole];
        let mut v = Vector::from_iterator(
            d.len(),
            d.iter()
                .zip(&self.coeffs)
                .map(|(&di, &c)| c / ((di - origin) - root.tau)),
        );
        let norm = v.norm();
        v /= norm;
        v
    }
}

/// Root of `a + b1/(d1 − t) + b2/(d2 − t)` in `(t_lo, t_hi)`.
fn two_pole_root(a: f64, b1: f64, d1: f64, b2: f64, d2: f64, t_lo: f64, t_hi: f64) -> Option<f64> {
    // a (d1 − t)(d2 − t) + b1 (d2 − t) + b2 (d1 − t) = 0
    let qa = a;
    let qb = -(a * (d1 + d2) + b1 + b2);
    let qc = a * d1 * d2 + b1 * d2 + b2 * d1;
    let roots = quadratic_roots(qa, qb, qc);
    roots.into_iter().flatten().find(|&t| t > t_lo && t < t_hi)
}

/// Root of the tangent-plus-pole model `a + s t + b2/(d2 − t)`.
fn newton_like_root(a: f64, s: f64, b2: f64, d2: f64, t_lo: f64, t_hi: f64) -> Option<f64> {
    // (a + s t)(d2 − t) + b2 = 0  →  −s t² + (s d2 − a) t + a d2 + b2 = 0
    let roots = quadratic_roots(-s, s * d2 - a, a * d2 + b2);
    roots.into_iter().flatten().find(|&t| t > t_lo && t < t_hi)
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> [Option<f64>; 2] {
    if a == 0.0 {
        if b == 0.0 {
            return [None, None];
        }
        return [Some(-c / b), None];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return [None, None];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let r1 = if q != 0.0 { Some(c / q) } else { None };
    let r2 = Some(q / a);
    [r1, r2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn panel(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        Matrix::from_fn(n, p, |i, j| {
            let e: f64 = StandardNormal.sample(&mut rng);
            (1.0 + 0.1 * j as f64) * f[i] + e
        })
    }

    fn dense_row_values(y: &Matrix, j: usize) -> Vec<f64> {
        let ym = linalg::drop_column(y, j);
        let s = linalg::svd(&ym).unwrap();
        s.s.iter().map(|v| v * v).collect()
    }

    fn check(n: usize, p: usize, seed: u64) {
        let y = panel(n, p, seed);
        let engine = LeaveOneOut::new(&y);
        for j in [0, p / 2, p - 1] {
            let row = engine.row(j).expect("generic panel");
            let dim = engine.row_dim();
            let fast = row.top_values(dim);
            let dense = dense_row_values(&y, j);
            for (a, b) in fast.iter().zip(&dense) {
                assert!((a - b).abs() <= 1e-9 * dense[0], "{a} vs {b}");
            }
            assert!((row.smallest_value() - fast[dim - 1]).abs() <= 1e-12 * dense[0]);
        }
    }

    #[test]
    fn column_side_matches_dense_spectrum() {
        check(30, 12, 1);
    }

    #[test]
    fn row_side_matches_dense_spectrum() {
        check(12, 30, 2);
    }

    #[test]
    fn square_boundary_matches_dense_spectrum() {
        check(15, 16, 3);
    }

    #[test]
    fn eigenvectors_are_eigenvectors() {
        for (n, p) in [(25, 10), (10, 25)] {
            let y = panel(n, p, 4);
            let engine = LeaveOneOut::new(&y);
            let j = 3;
            let row = engine.row(j).unwrap();
            let eig = row.top_eigen(4);
            let ym = linalg::drop_column(&y, j);
            for (val, c) in eig.values.iter().zip(&eig.coeffs) {
                let full = engine.vectors() * c;
                let (mat, vec) = match engine.side() {
                    Side::Columns => (ym.tr_mul(&ym), linalg::drop_entry(&full, j)),
                    Side::Rows => (&ym * ym.transpose(), full),
                };
                let resid = &mat * &vec - &vec * *val;
                assert!(resid.amax() <= 1e-9 * val, "residual {}", resid.amax());
            }
        }
    }

    #[test]
    fn quadratic_roots_are_stable() {
        let r = quadratic_roots(1.0, -1e8, 1.0);
        let small = r.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        assert!((small - 1e-8).abs() < 1e-20);
    }
}
