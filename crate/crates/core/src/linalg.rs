//! Small dense linear-algebra helpers shared by the network and optimizer modules.

use nalgebra::{DMatrix, DVector, Scalar};
use num_complex::Complex64;

use crate::error::{MilacError, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

/// Inputs whose 1-norm condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative rank tolerance on singular values.
pub const RANK_TOL: f64 = 1e-10;

/// Solves `a x = b` by LU, refusing matrices whose 1-norm condition number exceeds
/// [`MAX_CONDITION`].
pub fn solve_checked(a: &CMat, b: &CMat, what: &'static str) -> Result<CMat> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(MilacError::Dimension(format!(
            "{what}: cannot solve {}x{} system with {}x{} right-hand side",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let lu = a.clone().lu();
    let inv = lu.try_inverse().ok_or(MilacError::Singular {
        what,
        condition: f64::INFINITY,
    })?;
    let condition = norm1(a) * norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(MilacError::Singular { what, condition });
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or(MilacError::Singular { what, condition })
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `j * b` for a real matrix `b`.
pub fn times_j(b: &RMat) -> CMat {
    b.map(|x| Complex64::new(0.0, x))
}

pub fn complexify(b: &RMat) -> CMat {
    b.map(|x| Complex64::new(x, 0.0))
}

/// Thin SVD `m = u diag(s) v_t` with singular values in nonincreasing order.
pub struct SortedSvd<T: Scalar> {
    pub u: DMatrix<T>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<T>,
}

/// Scalars the SVD backend accepts.
pub trait SvdScalar: Scalar + Copy + faer::traits::ComplexField {
    fn real(self) -> f64;
    fn conj(self) -> Self;
}

impl SvdScalar for f64 {
    fn real(self) -> f64 {
        self
    }
    fn conj(self) -> Self {
        self
    }
}

impl SvdScalar for Complex64 {
    fn real(self) -> f64 {
        self.re
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
}

impl<T: SvdScalar> SortedSvd<T> {
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows == 0 || cols == 0 {
            return Ok(Self {
                u: DMatrix::from_vec(rows, 0, Vec::new()),
                singular_values: DVector::zeros(0),
                v_t: DMatrix::from_vec(0, cols, Vec::new()),
            });
        }
        let fm = faer::Mat::<T>::from_fn(rows, cols, |i, j| m[(i, j)]);
        let svd = fm
            .thin_svd()
            .map_err(|e| MilacError::Domain(format!("SVD did not converge: {e:?}")))?;
        let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
        let k = s.nrows();
        Ok(Self {
            u: DMatrix::from_fn(rows, k, |i, j| u[(i, j)]),
            singular_values: DVector::from_fn(k, |i, _| s[i].real()),
            v_t: DMatrix::from_fn(k, cols, |i, j| v[(j, i)].conj()),
        })
    }

    pub fn largest(&self) -> f64 {
        self.singular_values.iter().copied().fold(0.0, f64::max)
    }

    pub fn smallest(&self) -> f64 {
        self.singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of singular values above `tol * max(sigma_max, 1)`.
    pub fn rank(&self, tol: f64) -> usize {
        let threshold = tol * self.largest().max(1.0);
        self.singular_values.iter().filter(|&&s| s > threshold).count()
    }
}

impl SortedSvd<f64> {
    /// Minimum-norm least-squares solution, dropping singular values under
    /// `rel_tol * sigma_max`.
    pub fn pinv_solve(&self, rhs: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
        let threshold = rel_tol * self.largest();
        let proj = self.u.transpose() * rhs;
        let scaled = DVector::from_iterator(
            proj.len(),
            proj.iter()
                .zip(self.singular_values.iter())
                .map(|(p, &s)| if s > threshold { p / s } else { 0.0 }),
        );
        self.v_t.transpose() * scaled
    }
}

/// Solves a square real system through its SVD, failing when the smallest
/// singular value falls under `RANK_TOL * max(sigma_max, 1)`.
pub fn solve_square_svd(m: &RMat, rhs: &DVector<f64>) -> std::result::Result<DVector<f64>, f64> {
    let svd = SortedSvd::new(m.clone()).map_err(|_| f64::NAN)?;
    let scale = svd.largest().max(1.0);
    let smallest = svd.smallest();
    if smallest.is_nan() || smallest < RANK_TOL * scale {
        return Err(smallest / scale);
    }
    let proj = svd.u.transpose() * rhs;
    let scaled = DVector::from_iterator(
        proj.len(),
        proj.iter()
            .zip(svd.singular_values.iter())
            .map(|(p, s)| p / s),
    );
    Ok(svd.v_t.transpose() * scaled)
}

/// Copies `src` into `dst` with its top-left corner at `(row, col)`.
pub fn put_block(dst: &mut RMat, row: usize, col: usize, src: &RMat) {
    if src.is_empty() {
        return;
    }
    dst.view_mut((row, col), src.shape()).copy_from(src);
}

pub fn block(m: &RMat, row: usize, col: usize, rows: usize, cols: usize) -> RMat {
    m.view((row, col), (rows, cols)).into_owned()
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMat) -> RMat {
    m.map(|z| z.im)
}
