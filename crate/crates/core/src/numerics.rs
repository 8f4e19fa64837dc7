//! Dense complex linear algebra kernel.
//!
//! Every rank decision in the crate goes through [`Tolerance`]: a singular
//! value `s` counts as nonzero iff `s > rel_eps * s_max + abs_eps`.
//! Modules above this one never compare floats against ad-hoc constants.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<Complex64>;
pub type Vector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel_eps: f64,
    pub abs_eps: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel_eps: 1e-9,
            abs_eps: 1e-11,
        }
    }
}

impl Tolerance {
    pub fn new(rel_eps: f64, abs_eps: f64) -> Result<Self> {
        if !(rel_eps > 0.0 && abs_eps > 0.0 && rel_eps.is_finite() && abs_eps.is_finite()) {
            return Err(Error::InvalidTolerance { rel_eps, abs_eps });
        }
        Ok(Tolerance { rel_eps, abs_eps })
    }

    /// Threshold below which a singular value is treated as zero.
    pub fn cutoff(&self, scale: f64) -> f64 {
        self.rel_eps * scale + self.abs_eps
    }

    pub fn is_zero(&self, value: f64, scale: f64) -> bool {
        value <= self.cutoff(scale)
    }

    /// Acceptance test for a verification residual: looser than the rank
    /// cutoff so that accumulated rounding never flips a construction check.
    pub fn accepts(&self, residual: f64, scale: f64) -> bool {
        residual <= 1e3 * self.cutoff(scale)
    }

    /// Gap used to merge nearly equal eigenvalues into one cluster.
    pub fn cluster_gap(&self, scale: f64) -> f64 {
        1e3 * self.cutoff(scale)
    }
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> Matrix {
    Matrix::zeros(r, c)
}

/// Matrix unit `E_{ij}` of size `n`.
pub fn unit(n: usize, i: usize, j: usize) -> Matrix {
    let mut m = zeros(n, n);
    m[(i, j)] = ONE;
    m
}

pub fn from_real_rows(rows: &[&[f64]]) -> Matrix {
    let r = rows.len();
    let cols = rows.first().map_or(0, |row| row.len());
    Matrix::from_fn(r, cols, |i, j| re(rows[i][j]))
}

pub fn diag_real(values: &[f64]) -> Matrix {
    let n = values.len();
    Matrix::from_fn(n, n, |i, j| if i == j { re(values[i]) } else { ZERO })
}

pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Entrywise complex conjugate in the standard basis.
pub fn conj(m: &Matrix) -> Matrix {
    m.map(|z| z.conj())
}

pub fn hs_inner(a: &Matrix, b: &Matrix) -> Complex64 {
    // trace(b* a)
    b.iter().zip(a.iter()).map(|(y, x)| y.conj() * x).sum()
}

pub fn hs_norm(a: &Matrix) -> f64 {
    a.norm()
}

/// Column-major vectorization.
pub fn vec_of(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Matrix {
    Matrix::from_column_slice(rows, cols, v.as_slice())
}

/// Stack vectorized matrices as the columns of one matrix.
pub fn stack_columns(mats: &[Matrix]) -> Matrix {
    let len = mats.first().map_or(0, |m| m.len());
    let mut out = zeros(len, mats.len());
    for (j, m) in mats.iter().enumerate() {
        out.column_mut(j).copy_from_slice(m.as_slice());
    }
    out
}

fn to_faer(m: &Matrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, Complex64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Full singular value decomposition `m = u · diag(s) · v*`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Orthonormal columns, `rows × rows` (full) or `rows × k` (thin).
    pub u: Matrix,
    /// Length `min(rows, cols)`, same order as the columns of `u` and `v`.
    pub s: Vec<f64>,
    /// Orthonormal columns, `cols × cols` (full) or `cols × k` (thin).
    pub v: Matrix,
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    check_finite(m)?;
    let (r, cols) = m.shape();
    if r == 0 || cols == 0 {
        return Ok(Svd {
            u: Matrix::identity(r, r),
            s: Vec::new(),
            v: Matrix::identity(cols, cols),
        });
    }
    let f = to_faer(m)
        .svd()
        .map_err(|_| Error::NonConvergence("svd"))?;
    let diag = f.S().column_vector();
    Ok(Svd {
        u: from_faer(f.U()),
        s: (0..diag.nrows()).map(|k| diag[k].re).collect(),
        v: from_faer(f.V()),
    })
}

/// Thin decomposition: `u` is `rows × k`, `v` is `cols × k`, `k = min(rows, cols)`.
pub fn thin_svd(m: &Matrix) -> Result<Svd> {
    check_finite(m)?;
    let (r, cols) = m.shape();
    if r == 0 || cols == 0 {
        return Ok(Svd {
            u: zeros(r, 0),
            s: Vec::new(),
            v: zeros(cols, 0),
        });
    }
    let f = to_faer(m)
        .thin_svd()
        .map_err(|_| Error::NonConvergence("svd"))?;
    let diag = f.S().column_vector();
    Ok(Svd {
        u: from_faer(f.U()),
        s: (0..diag.nrows()).map(|k| diag[k].re).collect(),
        v: from_faer(f.V()),
    })
}

pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return vec![f64::NAN; m.nrows().min(m.ncols())];
    }
    to_faer(m).singular_values().unwrap_or_default()
}

pub fn op_norm(m: &Matrix) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

pub fn numerical_rank(m: &Matrix, tol: &Tolerance) -> usize {
    let s = singular_values(m);
    let smax = s.iter().copied().fold(0.0, f64::max);
    s.iter().filter(|&&x| !tol.is_zero(x, smax)).count()
}

pub fn hermitian_part(m: &Matrix) -> Matrix {
    (m + m.adjoint()) * re(0.5)
}

pub fn is_hermitian(m: &Matrix, tol: &Tolerance) -> bool {
    m.is_square() && (m - m.adjoint()).norm() <= tol.cutoff(m.norm())
}

pub fn is_projection(p: &Matrix, tol: &Tolerance) -> bool {
    let scale = p.norm().max(1.0);
    p.is_square()
        && (p - p.adjoint()).norm() <= tol.cutoff(scale)
        && (p * p - p).norm() <= 10.0 * tol.cutoff(scale)
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

pub fn hermitian_eig(m: &Matrix, tol: &Tolerance) -> Result<HermitianEigen> {
    check_finite(m)?;
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if !is_hermitian(m, tol) {
        return Err(Error::NotHermitian {
            residual: (m - m.adjoint()).norm(),
        });
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            eigenvalues: Vec::new(),
            eigenvectors: zeros(0, 0),
        });
    }
    let eig = to_faer(&hermitian_part(m))
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::NonConvergence("hermitian eigensolver"))?;
    let values = eig.S().column_vector();
    let vectors = from_faer(eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    let eigenvalues = order.iter().map(|&i| values[i].re).collect();
    let mut eigenvectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &vectors.column(src));
    }
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Groups ascending eigenvalues into clusters of numerically equal values.
pub fn cluster_eigenvalues(values: &[f64], tol: &Tolerance) -> Vec<std::ops::Range<usize>> {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let gap = tol.cluster_gap(scale);
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > gap {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// Projection onto the span of the given columns of `vectors`.
pub fn projection_from_columns(vectors: &Matrix, cols: std::ops::Range<usize>) -> Matrix {
    let q = vectors.columns(cols.start, cols.len());
    &q * q.adjoint()
}

/// Applies a real function to a Hermitian matrix through its spectrum.
pub fn hermitian_fn(m: &Matrix, tol: &Tolerance, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let eig = hermitian_eig(m, tol)?;
    let n = m.nrows();
    let d = Matrix::from_fn(n, n, |i, j| if i == j { re(f(eig.eigenvalues[i])) } else { ZERO });
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

#[derive(Debug, Clone)]
pub struct Polar {
    /// Partial isometry with initial projection = support of `positive`.
    pub isometry: Matrix,
    /// `(m* m)^{1/2}`.
    pub positive: Matrix,
}

pub fn polar_decompose(m: &Matrix, tol: &Tolerance) -> Result<Polar> {
    check_finite(m)?;
    let (r, cols) = m.shape();
    if r == 0 || cols == 0 {
        return Ok(Polar {
            isometry: zeros(r, cols),
            positive: zeros(cols, cols),
        });
    }
    let Svd { u, s, v } = thin_svd(m)?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let mut isometry = zeros(r, cols);
    let mut positive = zeros(cols, cols);
    for (k, &sk) in s.iter().enumerate() {
        let vk = v.column(k);
        positive += vk * vk.adjoint() * re(sk);
        if !tol.is_zero(sk, smax) {
            isometry += u.column(k) * vk.adjoint();
        }
    }
    Ok(Polar { isometry, positive })
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn nullspace(m: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    check_finite(m)?;
    let cols = m.ncols();
    if cols == 0 {
        return Ok(zeros(0, 0));
    }
    let Svd { s: sv, v, .. } = svd(m)?;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..cols)
        .filter(|&k| sv.get(k).is_none_or(|&x| tol.is_zero(x, smax)))
        .collect();
    let mut out = zeros(cols, kept.len());
    for (j, &k) in kept.iter().enumerate() {
        out.set_column(j, &v.column(k));
    }
    Ok(out)
}

pub fn nullspace_vectors(m: &Matrix, tol: &Tolerance) -> Result<Vec<Vector>> {
    let ns = nullspace(m, tol)?;
    Ok((0..ns.ncols()).map(|j| ns.column(j).into_owned()).collect())
}

/// Kernel of a positive semidefinite matrix, thresholded on its eigenvalues.
pub fn psd_kernel(k: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    let n = k.nrows();
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let eig = hermitian_eig(k, tol)?;
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let kept: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] <= tol.cutoff(lmax))
        .collect();
    let mut out = zeros(n, kept.len());
    for (j, &i) in kept.iter().enumerate() {
        out.set_column(j, &eig.eigenvectors.column(i));
    }
    Ok(out)
}

/// Orthonormal basis of the column span, via SVD.
pub fn column_span(m: &Matrix, tol: &Tolerance) -> Result<Matrix> {
    check_finite(m)?;
    let (r, cols) = m.shape();
    if r == 0 || cols == 0 {
        return Ok(zeros(r, 0));
    }
    let Svd { u, s, .. } = thin_svd(m)?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..s.len()).filter(|&k| !tol.is_zero(s[k], smax)).collect();
    let mut out = zeros(r, kept.len());
    for (j, &k) in kept.iter().enumerate() {
        out.set_column(j, &u.column(k));
    }
    Ok(out)
}

/// Least-squares solution of `a x = b` with a residual report.
pub fn least_squares(a: &Matrix, b: &Matrix, tol: &Tolerance) -> Result<(Matrix, f64)> {
    check_finite(a)?;
    check_finite(b)?;
    if a.ncols() == 0 {
        return Ok((zeros(0, b.ncols()), b.norm()));
    }
    let Svd { u, s, v } = thin_svd(a)?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let mut x = zeros(a.ncols(), b.ncols());
    for (k, &sk) in s.iter().enumerate() {
        if !tol.is_zero(sk, smax) {
            let coeff = u.column(k).adjoint() * b * re(1.0 / sk);
            x += v.column(k) * coeff;
        }
    }
    let residual = (a * &x - b).norm();
    Ok((x, residual))
}

/// Gram–Schmidt (two passes) under the Hilbert–Schmidt inner product.
///
/// Inputs whose residual after projection falls under the tolerance cutoff
/// relative to the largest input norm are dropped.
pub fn hs_orthonormalize(mats: &[Matrix], tol: &Tolerance) -> Result<Vec<Matrix>> {
    let mut basis: Vec<Matrix> = Vec::new();
    let scale = mats.iter().map(|m| m.norm()).fold(0.0, f64::max);
    extend_orthonormal(&mut basis, mats, scale, tol)?;
    Ok(basis)
}

/// Adds the components of `candidates` orthogonal to `basis`; returns how
/// many were added.
///
/// Residuals are taken largest first, so a small residual is only
/// normalized once every larger direction has been removed from it.
pub fn extend_orthonormal(
    basis: &mut Vec<Matrix>,
    candidates: &[Matrix],
    scale: f64,
    tol: &Tolerance,
) -> Result<usize> {
    let Some(shape) = basis.first().or(candidates.first()).map(|m| m.shape()) else {
        return Ok(0);
    };
    let mut residuals = Vec::with_capacity(candidates.len());
    for cand in candidates {
        check_finite(cand)?;
        if cand.shape() != shape {
            return Err(Error::DimensionMismatch {
                expected: shape.0,
                found: cand.nrows(),
            });
        }
        residuals.push(project_out(basis, cand.clone()));
    }
    if residuals.is_empty() {
        return Ok(0);
    }
    let (r, c) = shape;
    let mut flat = Matrix::from_fn(r * c, residuals.len(), |i, j| residuals[j].as_slice()[i]);
    let cutoff = tol.cutoff(scale);
    let before = basis.len();
    // Column-pivoted modified Gram-Schmidt: the largest remaining residual
    // wins, earlier candidates win near-ties.
    for _ in 0..flat.nrows().min(flat.ncols()) {
        let norms: Vec<f64> = flat.column_iter().map(|col| col.norm()).collect();
        let top = norms.iter().copied().fold(0.0, f64::max);
        if top <= cutoff {
            break;
        }
        let pick = norms
            .iter()
            .position(|&x| x >= (1.0 - 1e-6) * top)
            .expect("the maximum is attained");
        let v = flat.column(pick).unscale(norms[pick]);
        for _ in 0..2 {
            let coeffs = v.adjoint() * &flat;
            flat -= &v * coeffs;
        }
        let m = Matrix::from_fn(r, c, |i, j| v[i + j * r]);
        let m = project_out(basis, m);
        let norm = m.norm();
        basis.push(m.unscale(norm));
    }
    Ok(basis.len() - before)
}

fn project_out(basis: &[Matrix], mut v: Matrix) -> Matrix {
    for _ in 0..2 {
        for b in basis {
            let coef = hs_inner(&v, b);
            v -= b * coef;
        }
    }
    v
}

/// Gram–Schmidt with an arbitrary inner product.
pub fn extend_orthonormal_with(
    basis: &mut Vec<Matrix>,
    candidates: &[Matrix],
    scale: f64,
    tol: &Tolerance,
    inner: impl Fn(&Matrix, &Matrix) -> Complex64,
) -> Result<usize> {
    let before = basis.len();
    let cutoff = tol.cutoff(scale);
    for cand in candidates {
        check_finite(cand)?;
        if let Some(first) = basis.first() {
            if first.shape() != cand.shape() {
                return Err(Error::DimensionMismatch {
                    expected: first.nrows(),
                    found: cand.nrows(),
                });
            }
        }
        let mut v = cand.clone();
        for _ in 0..2 {
            for b in basis.iter() {
                let coef = inner(&v, b);
                v -= b * coef;
            }
        }
        let norm = inner(&v, &v).re.max(0.0).sqrt();
        if norm > cutoff {
            basis.push(v / re(norm));
        }
    }
    Ok(basis.len() - before)
}

/// Operator-norm distance between the orthogonal projections onto the spans
/// of two orthonormal families (columns of `q1`, `q2`).
pub fn span_distance(q1: &Matrix, q2: &Matrix) -> f64 {
    let one_sided = |a: &Matrix, b: &Matrix| -> f64 {
        if a.ncols() == 0 {
            return 0.0;
        }
        if b.ncols() == 0 {
            return 1.0;
        }
        let resid = a - b * (b.adjoint() * a);
        op_norm(&resid)
    };
    one_sided(q1, q2).max(one_sided(q2, q1))
}

/// Antilinear operator `xi -> mat * conj(xi)` in the standard basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AntilinearOperator {
    pub mat: Matrix,
}

impl AntilinearOperator {
    pub fn new(mat: Matrix) -> Self {
        AntilinearOperator { mat }
    }

    /// Entrywise complex conjugation on `C^n`.
    pub fn standard_conjugation(n: usize) -> Self {
        AntilinearOperator { mat: identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.mat * v.map(|z| z.conj())
    }

    /// `self ∘ other` as a linear operator.
    pub fn compose(&self, other: &AntilinearOperator) -> Matrix {
        &self.mat * conj(&other.mat)
    }

    /// `self ∘ x` for linear `x`: again antilinear.
    pub fn after_linear(&self, x: &Matrix) -> AntilinearOperator {
        AntilinearOperator {
            mat: &self.mat * conj(x),
        }
    }

    /// `x ∘ self` for linear `x`.
    pub fn before_linear(&self, x: &Matrix) -> AntilinearOperator {
        AntilinearOperator {
            mat: x * &self.mat,
        }
    }

    /// Adjoint in the antilinear sense: `<A xi, eta> = <A† eta, xi>`.
    pub fn adjoint(&self) -> AntilinearOperator {
        AntilinearOperator {
            mat: self.mat.transpose(),
        }
    }

    pub fn inverse(&self) -> Option<AntilinearOperator> {
        self.mat
            .clone()
            .try_inverse()
            .map(|inv| AntilinearOperator { mat: conj(&inv) })
    }

    /// `A x A^{-1}` for linear `x`.
    pub fn conjugate_linear(&self, x: &Matrix) -> Option<Matrix> {
        let inv = self.mat.clone().try_inverse()?;
        Some(&self.mat * conj(x) * inv)
    }

    /// `A x A` for linear `x` (equals `A x A^{-1}` when `A` is involutive).
    pub fn sandwich(&self, x: &Matrix) -> Matrix {
        &self.mat * conj(x) * conj(&self.mat)
    }

    pub fn involution_residual(&self) -> f64 {
        (self.compose(self) - identity(self.dim())).norm()
    }

    pub fn is_involutive(&self, tol: &Tolerance) -> bool {
        self.involution_residual() <= tol.cutoff(self.mat.norm().max(1.0)) * 10.0
    }

    /// Residual of `A† A = 1`.
    pub fn isometry_residual(&self) -> f64 {
        (self.adjoint().compose(self) - identity(self.dim())).norm()
    }
}

pub fn random_complex_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        c(a, b) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vector {
    let m = random_complex_matrix(rng, n, 1);
    m.column(0).into_owned()
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    hermitian_part(&random_complex_matrix(rng, n, n))
}

/// Haar-distributed unitary via QR of a Ginibre matrix with phase fix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let g = random_complex_matrix(rng, n, n);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q.clone();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        let col = out.column(j) * phase;
        out.set_column(j, &col);
    }
    out
}
