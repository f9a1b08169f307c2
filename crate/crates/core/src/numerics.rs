//! Dense complex linear algebra.
//!
//! Everything downstream is built on [`CMat`], a small row-major matrix of
//! `Complex<f64>`. Problem sizes here are tiny (tens of rows), so the kernel
//! favours clarity and determinism over blocking or SIMD. Hermitian inputs
//! are always symmetrized before they are factorized.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::math;

/// Double-precision complex scalar.
pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Relative tolerance used by the Hermitian input check.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMat { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "CMat::from_vec: length mismatch");
        CMat { rows, cols, data }
    }

    /// Real diagonal matrix.
    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    pub fn column_vector(v: &[C64]) -> Self {
        CMat::from_vec(v.len(), 1, v.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_col(&mut self, c: usize, v: &[C64]) {
        assert_eq!(v.len(), self.rows);
        for (r, &z) in v.iter().enumerate() {
            self[(r, c)] = z;
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        CMat::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &CMat) {
        assert_eq!(self.shape(), other.shape(), "axpy: shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &CMat) -> CMat {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᴴ * rhs` without materializing the adjoint.
    pub fn adjoint_mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.rows, rhs.rows, "adjoint_mul: row mismatch");
        let mut out = CMat::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let lhs_row = self.row(k);
            let rhs_row = rhs.row(k);
            for (i, &a) in lhs_row.iter().enumerate() {
                let a = a.conj();
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * rhsᴴ`.
    pub fn mul_adjoint(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.cols, "mul_adjoint: column mismatch");
        CMat::from_fn(self.rows, rhs.rows, |i, j| {
            self.row(i)
                .iter()
                .zip(rhs.row(j))
                .fold(ZERO, |acc, (&a, &b)| acc + a * b.conj())
        })
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "mul_vec: dimension mismatch");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(ZERO, |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `self * diag(d)`.
    pub fn mul_diag(&self, d: &[C64]) -> CMat {
        assert_eq!(self.cols, d.len(), "mul_diag: dimension mismatch");
        CMat::from_fn(self.rows, self.cols, |r, c| self[(r, c)] * d[c])
    }

    /// `diag(d) * self`.
    pub fn diag_mul(&self, d: &[C64]) -> CMat {
        assert_eq!(self.rows, d.len(), "diag_mul: dimension mismatch");
        CMat::from_fn(self.rows, self.cols, |r, c| d[r] * self[(r, c)])
    }

    /// Element-wise product.
    pub fn hadamard(&self, other: &CMat) -> CMat {
        assert_eq!(self.shape(), other.shape(), "hadamard: shape mismatch");
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a * b)
                .collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square(), "trace of non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// Squared Frobenius norm.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.norm_sqr())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&z| z == ZERO)
    }

    /// `(A + Aᴴ) / 2`.
    pub fn hermitian_part(&self) -> CMat {
        assert!(self.is_square(), "hermitian_part of non-square matrix");
        CMat::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        })
    }

    /// Maximum deviation from Hermitian symmetry relative to the largest entry.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst / scale
    }

    /// `self + mu * I`.
    pub fn add_real_diag(&self, mu: f64) -> CMat {
        assert!(self.is_square());
        let mut out = self.clone();
        for i in 0..self.rows {
            out[(i, i)] += mu;
        }
        out
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        self.matmul(rhs)
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.scale_real(-1.0)
    }
}

impl AddAssign<&CMat> for CMat {
    fn add_assign(&mut self, rhs: &CMat) {
        assert_eq!(self.shape(), rhs.shape(), "add: shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&CMat> for CMat {
    fn sub_assign(&mut self, rhs: &CMat) {
        assert_eq!(self.shape(), rhs.shape(), "sub: shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &[C64]) -> f64 {
    math::sqrt(vec_norm_sqr(v))
}

pub fn vec_norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `aᴴ b`.
pub fn vec_dot(a: &[C64], b: &[C64]) -> C64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

fn check_hermitian(a: &CMat) -> Result<CMat> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "hermitian input must be square",
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite {
            context: "hermitian input",
        });
    }
    let defect = a.hermitian_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    Ok(a.hermitian_part())
}

/// Cholesky factorization `A = L Lᴴ` of a Hermitian positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: CMat,
}

impl Cholesky {
    /// Factorizes `a` after checking and symmetrizing it.
    pub fn new(a: &CMat) -> Result<Self> {
        let a = check_hermitian(a)?;
        Self::factor_symmetrized(a)
    }

    fn factor_symmetrized(mut a: CMat) -> Result<Self> {
        let n = a.rows();
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= a[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = math::sqrt(d);
            a[(j, j)] = C64::new(d, 0.0);
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= a[(i, k)] * a[(j, k)].conj();
                }
                a[(i, j)] = s / d;
            }
        }
        for r in 0..n {
            for c in (r + 1)..n {
                a[(r, c)] = ZERO;
            }
        }
        Ok(Cholesky { l: a })
    }

    pub fn lower(&self) -> &CMat {
        &self.l
    }

    /// `log det A = 2 Σ log L_jj`.
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.l.rows())
            .map(|j| math::ln(self.l[(j, j)].re))
            .sum::<f64>()
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &CMat) -> CMat {
        let n = self.l.rows();
        assert_eq!(b.rows(), n, "Cholesky::solve: dimension mismatch");
        let mut x = b.clone();
        for col in 0..x.cols() {
            // forward: L y = b
            for i in 0..n {
                let mut s = x[(i, col)];
                for k in 0..i {
                    s -= self.l[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)].re;
            }
            // backward: Lᴴ x = y
            for i in (0..n).rev() {
                let mut s = x[(i, col)];
                for k in (i + 1)..n {
                    s -= self.l[(k, i)].conj() * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)].re;
            }
        }
        x
    }

    /// Solves `L Y = B`.
    pub fn lower_solve(&self, b: &CMat) -> CMat {
        let n = self.l.rows();
        assert_eq!(b.rows(), n, "Cholesky::lower_solve: dimension mismatch");
        let mut x = b.clone();
        for col in 0..x.cols() {
            for i in 0..n {
                let mut s = x[(i, col)];
                for k in 0..i {
                    s -= self.l[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = s / self.l[(i, i)].re;
            }
        }
        x
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        self.solve(&CMat::column_vector(b)).into_vec()
    }

    /// Hermitian inverse, symmetrized.
    pub fn inverse(&self) -> CMat {
        self.solve(&CMat::identity(self.l.rows())).hermitian_part()
    }
}

/// `log det A` for Hermitian positive-definite `A`, via Cholesky.
pub fn logdet_psd(a: &CMat) -> Result<f64> {
    Ok(Cholesky::new(a)?.logdet())
}

/// Inverse of a Hermitian positive-definite matrix.
pub fn hermitian_inverse(a: &CMat) -> Result<CMat> {
    Ok(Cholesky::new(a)?.inverse())
}

/// Solves `(A + μI) X = B` for Hermitian positive-semidefinite `A`.
///
/// Fails with [`Error::NotPositiveDefinite`] when `A + μI` is singular,
/// which for PSD `A` can only happen with `μ = 0`.
pub fn regularized_solve(a: &CMat, mu: f64, b: &CMat) -> Result<CMat> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument {
            context: "regularization must be finite and non-negative",
        });
    }
    let a = check_hermitian(a)?;
    if b.rows() != a.rows() {
        return Err(Error::DimensionMismatch {
            context: "regularized_solve: right-hand side rows",
        });
    }
    let chol = Cholesky::factor_symmetrized(a.add_real_diag(mu))?;
    Ok(chol.solve(b))
}

/// Thin singular value decomposition `A = U diag(s) Vᴴ`.
///
/// `s` is sorted in non-increasing order; `U` is `rows × k` and `V` is
/// `cols × k` with `k = min(rows, cols)`. Columns of `U` that belong to zero
/// singular values are left as zero vectors.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

const JACOBI_SWEEPS: usize = 60;

/// One-sided (Hestenes) Jacobi SVD for a tall matrix (`rows >= cols`).
fn jacobi_svd_tall(a: &CMat) -> Svd {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    // work on columns: store transposed so that columns are contiguous
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| a.col(j)).collect();
    let mut vcols: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![ZERO; n];
            e[j] = ONE;
            e
        })
        .collect();
    let eps = f64::EPSILON;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = vec_norm_sqr(&cols[p]);
                let beta = vec_norm_sqr(&cols[q]);
                let gamma = vec_dot(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= eps * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + math::sqrt(1.0 + zeta * zeta))
                } else {
                    -1.0 / (-zeta + math::sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                // a_q' = conj(phase) a_q makes the pair's inner product real;
                // then a real rotation zeroes it.
                let pc = phase.conj();
                for buf in [&mut cols, &mut vcols] {
                    let (lo, hi) = buf.split_at_mut(q);
                    let (cp, cq) = (&mut lo[p], &mut hi[0]);
                    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                        let yq = pc * *y;
                        let xp = *x;
                        *x = xp * c - yq * s;
                        *y = xp * s + yq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = cols.iter().map(|c| (vec_norm(c), 0)).collect();
    for (j, o) in order.iter_mut().enumerate() {
        o.1 = j;
    }
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(core::cmp::Ordering::Equal));
    let mut u = CMat::zeros(m, n);
    let mut v = CMat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (dst, &(sigma, src)) in order.iter().enumerate() {
        s.push(sigma);
        if sigma > 0.0 {
            let inv = 1.0 / sigma;
            let ucol: Vec<C64> = cols[src].iter().map(|&z| z * inv).collect();
            u.set_col(dst, &ucol);
        }
        v.set_col(dst, &vcols[src]);
    }
    Svd { u, s, v }
}

/// Thin SVD of an arbitrary finite matrix.
pub fn svd(a: &CMat) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NonFinite { context: "svd input" });
    }
    if a.rows() >= a.cols() {
        Ok(jacobi_svd_tall(a))
    } else {
        // A = U S Vᴴ  <=>  Aᴴ = V S Uᴴ
        let t = jacobi_svd_tall(&a.adjoint());
        Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

/// Singular values in non-increasing order; `min(rows, cols)` of them.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    Ok(svd(a)?.s)
}

/// Neumaier-compensated accumulator for complex sums.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: C64,
    comp: C64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: C64) {
        let (re, cre) = two_sum(self.sum.re, x.re);
        let (im, cim) = two_sum(self.sum.im, x.im);
        self.sum = C64::new(re, im);
        self.comp += C64::new(cre, cim);
    }

    pub fn value(&self) -> C64 {
        self.sum + self.comp
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Eigen-decomposition `A = U diag(λ) Uᴴ` of a Hermitian PSD matrix.
#[derive(Clone, Debug)]
pub struct PsdEigen {
    /// Non-increasing, non-negative.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: CMat,
}

/// Eigen-decomposition of a Hermitian positive-semidefinite matrix.
///
/// Computed from the SVD of the symmetrized input, which coincides with the
/// eigen-decomposition for PSD matrices.
pub fn psd_eigen(a: &CMat) -> Result<PsdEigen> {
    let a = check_hermitian(a)?;
    let Svd { s, v, .. } = svd(&a)?;
    Ok(PsdEigen { values: s, vectors: v })
}

/// Solution of a power-constrained quadratic problem.
#[derive(Clone, Debug)]
pub struct ConstrainedSolution {
    pub x: CMat,
    /// Lagrange multiplier of the norm constraint.
    pub mu: f64,
}

/// Relative size below which an eigenvalue is treated as zero.
const NULL_EIGEN_TOL: f64 = 1e-10;

const MAX_BISECTION: usize = 400;

/// Minimizes `tr(Xᴴ A X) − 2 Re tr(Rᴴ X)` subject to `‖X‖_F² ≤ budget`.
///
/// The minimizer is `X = (A + μI)⁻¹ R` with the smallest `μ ≥ 0` that meets
/// the budget. `μ` is found by bisection on the scalar power function in the
/// eigenbasis of `A`, starting from the bracket `[0, ‖R‖_F/√budget]`, which
/// always contains the root. When `R` lies in the range of a singular `A`
/// and the minimum-norm solution is feasible, that solution is returned with
/// `μ = 0`.
pub fn power_constrained_solve(a: &CMat, r: &CMat, budget: f64, what: &'static str) -> Result<ConstrainedSolution> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::InvalidArgument {
            context: "power budget must be positive and finite",
        });
    }
    if a.rows() != r.rows() {
        return Err(Error::DimensionMismatch {
            context: "power_constrained_solve: right-hand side rows",
        });
    }
    if !r.is_finite() {
        return Err(Error::NonFinite {
            context: "power_constrained_solve right-hand side",
        });
    }
    let total = r.norm_sqr();
    if total == 0.0 {
        return Ok(ConstrainedSolution {
            x: CMat::zeros(r.rows(), r.cols()),
            mu: 0.0,
        });
    }
    let PsdEigen { values, vectors } = psd_eigen(a)?;
    let y = vectors.adjoint_mul(r);
    let n = values.len();
    let tol = values.first().copied().unwrap_or(0.0) * NULL_EIGEN_TOL;
    let energy: Vec<f64> = (0..n).map(|m| y.row(m).iter().map(|z| z.norm_sqr()).sum()).collect();
    let null_energy: f64 = (0..n).filter(|&m| values[m] <= tol).map(|m| energy[m]).sum();
    // components of R outside the range of A are rounding noise unless they
    // carry a real share of its energy
    let in_range = null_energy <= 1e-16 * total;
    let active: Vec<bool> = (0..n).map(|m| values[m] > tol || !in_range).collect();
    let power = |mu: f64| -> f64 {
        let mut p = 0.0;
        for m in 0..n {
            if active[m] {
                let d = values[m] + mu;
                p += energy[m] / (d * d);
            }
        }
        p
    };
    let solution = |mu: f64| -> CMat {
        let mut z = y.clone();
        for m in 0..n {
            let s = if active[m] { 1.0 / (values[m] + mu) } else { 0.0 };
            for c in 0..z.cols() {
                z[(m, c)] = z[(m, c)] * s;
            }
        }
        vectors.matmul(&z)
    };

    if in_range && power(0.0) <= budget {
        return Ok(ConstrainedSolution {
            x: solution(0.0),
            mu: 0.0,
        });
    }
    let mut lo = 0.0;
    let mut hi = math::sqrt(total / budget);
    if !(power(hi) <= budget) {
        return Err(Error::Bisection { what, iterations: 0 });
    }
    for it in 0..MAX_BISECTION {
        let p_hi = power(hi);
        if budget - p_hi <= 1e-13 * budget {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if power(mid) <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if it + 1 == MAX_BISECTION {
            return Err(Error::Bisection {
                what,
                iterations: MAX_BISECTION,
            });
        }
    }
    let mut x = solution(hi);
    // guard the last ulp so the returned point is feasible as evaluated
    let p = x.norm_sqr();
    if p > budget {
        x = x.scale_real(math::sqrt(budget / p));
    }
    Ok(ConstrainedSolution { x, mu: hi })
}
