//! Dense complex matrices and a cyclic Jacobi eigensolver for Hermitian input.
//!
//! Everything here is sized for the operators of a truncated two-mode Fock
//! space (a few hundred rows at most). Storage is row-major.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub use num_complex::Complex64 as Complex;

/// Imaginary unit.
pub const I: Complex = Complex::new(0.0, 1.0);

/// Relative Hermiticity tolerance for a matrix flagged Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Maximum number of cyclic Jacobi sweeps.
pub const JACOBI_SWEEPS: usize = 100;

/// Off-diagonal convergence threshold, relative to the Frobenius norm.
pub const JACOBI_TOL: f64 = 1e-14;

/// Hybrid tolerance `tol * max(1, scale)`.
#[inline]
pub fn hybrid_tol(tol: f64, scale: f64) -> f64 {
    tol * scale.max(1.0)
}

#[inline]
pub fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

#[inline]
pub fn re(x: f64) -> Complex {
    Complex::new(x, 0.0)
}

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = re(1.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        let m = ComplexMatrix { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<Complex>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                op: "from_rows",
                left: (n, m),
                right: (1, bad.len()),
            });
        }
        Self::from_vec(n, m, rows.concat())
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| re(x)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = re(d);
        }
        m
    }

    /// Outer product `|u><v|`.
    pub fn outer(u: &[Complex], v: &[Complex]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
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

    pub fn as_slice(&self) -> &[Complex] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<Complex> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (k, z) in self.data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite {
                    row: k / self.cols.max(1),
                    col: k % self.cols.max(1),
                });
            }
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Complex {
        self.diagonal().iter().sum()
    }

    pub fn scale(&self, k: Complex) -> Self {
        self.map(|z| z * k)
    }

    pub fn scale_real(&self, k: f64) -> Self {
        self.map(|z| z * k)
    }

    pub fn map(&self, f: impl Fn(Complex) -> Complex) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise difference; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A - A^H|`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= hybrid_tol(tol, self.max_abs())
    }

    /// `(A + A^H) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.rows;
        Self::from_fn(n, n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Self,
        op: &'static str,
        f: impl Fn(Complex, Complex) -> Complex,
    ) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mat_vec(&self, v: &[Complex]) -> Result<Vec<Complex>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "mat_vec",
                left: self.shape(),
                right: (v.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    /// `<u|A|v>`.
    pub fn sandwich(&self, u: &[Complex], v: &[Complex]) -> Result<Complex> {
        let av = self.mat_vec(v)?;
        Ok(u.iter().zip(&av).map(|(a, b)| a.conj() * b).sum())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>10.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

// Operator sugar for same-shape arithmetic. Shape mismatches are programmer
// errors at these call sites; the checked `try_*` / `matmul` forms return them.

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_add(rhs).expect("matrix add")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_sub(rhs).expect("matrix sub")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        matmul(self, rhs).expect("matrix mul")
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.map(|z| -z)
    }
}

/// Standard matrix product.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    // Split real and imaginary planes so the inner loops are plain f64 axpys.
    let (n, m) = (a.rows, b.cols);
    let b_re: Vec<f64> = b.data.iter().map(|z| z.re).collect();
    let b_im: Vec<f64> = b.data.iter().map(|z| z.im).collect();
    let mut out_re = vec![0.0; m];
    let mut out_im = vec![0.0; m];
    let mut out = ComplexMatrix::zeros(n, m);
    for i in 0..n {
        out_re.iter_mut().for_each(|x| *x = 0.0);
        out_im.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let br = &b_re[k * m..(k + 1) * m];
            let bi = &b_im[k * m..(k + 1) * m];
            for (((or, oi), &x), &y) in out_re.iter_mut().zip(out_im.iter_mut()).zip(br).zip(bi) {
                *or += aik.re * x - aik.im * y;
                *oi += aik.re * y + aik.im * x;
            }
        }
        for (o, (&x, &y)) in out.data[i * m..(i + 1) * m]
            .iter_mut()
            .zip(out_re.iter().zip(&out_im))
        {
            *o = Complex::new(x, y);
        }
    }
    Ok(out)
}

fn same_square(op: &'static str, a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            op,
            rows: a.rows,
            cols: a.cols,
        });
    }
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// `AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    same_square("commutator", a, b)?;
    matmul(a, b)?.try_sub(&matmul(b, a)?)
}

/// `AB + BA`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    same_square("anticommutator", a, b)?;
    matmul(a, b)?.try_add(&matmul(b, a)?)
}

/// `U X U^H`.
pub fn conjugate_by(u: &ComplexMatrix, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    matmul(&matmul(u, x)?, &u.adjoint())
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    ComplexMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// `tr(AB)` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Complex> {
    if a.cols != b.rows || a.rows != b.cols {
        return Err(Error::DimensionMismatch {
            op: "trace_of_product",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut acc = Complex::new(0.0, 0.0);
    for i in 0..a.rows {
        for k in 0..a.cols {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    Ok(acc)
}

/// Eigenvalues in ascending order with the matching unitary eigenvector columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
    pub sweeps: usize,
}

impl EigenDecomposition {
    pub fn vector(&self, k: usize) -> Vec<Complex> {
        self.eigenvectors.column(k)
    }

    /// `V diag(λ) V^H`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let m = self.eigenvalues.len();
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..m)
                .map(|k| v[(i, k)] * self.eigenvalues[k] * v[(j, k)].conj())
                .sum()
        })
    }

    /// `max |A V - V diag(λ)|`.
    pub fn residual(&self, a: &ComplexMatrix) -> f64 {
        let av = matmul(a, &self.eigenvectors).expect("eigen residual shape");
        let v = &self.eigenvectors;
        let mut worst: f64 = 0.0;
        for i in 0..v.rows() {
            for k in 0..v.cols() {
                worst = worst.max((av[(i, k)] - v[(i, k)] * self.eigenvalues[k]).norm());
            }
        }
        worst
    }

    /// `max |V^H V - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let vhv = matmul(&self.eigenvectors.adjoint(), &self.eigenvectors).expect("square");
        vhv.max_abs_diff(&ComplexMatrix::identity(vhv.rows()))
    }
}

/// Tolerance used to accept an input as Hermitian before diagonalizing.
pub const EIGEN_INPUT_TOL: f64 = 1e-10;

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
///
/// Each rotation zeroes one off-diagonal pair `(p, q)` with the unitary
/// `[[c, s e^{iθ}], [-s e^{-iθ}, c]]`, where `θ = arg a_pq`. Sweeps stop once the
/// off-diagonal Frobenius mass drops below `JACOBI_TOL * ||A||_F`.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<EigenDecomposition> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            op: "hermitian_eigen",
            rows: a.rows,
            cols: a.cols,
        });
    }
    a.check_finite()?;
    let defect = a.hermiticity_defect();
    let tolerance = hybrid_tol(EIGEN_INPUT_TOL, a.max_abs());
    if defect > tolerance {
        return Err(Error::NotHermitian { defect, tolerance });
    }

    let n = a.rows;
    let mut m = a.hermitian_part();
    for i in 0..n {
        m[(i, i)].im = 0.0;
    }
    let mut v = ComplexMatrix::identity(n);
    let norm = m.frobenius_norm();
    let target = JACOBI_TOL * norm;

    let off_norm = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    let mut off = off_norm(&m);
    while off > target {
        if sweeps == JACOBI_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        // Pairs this small cannot keep the off-diagonal norm above the target.
        let skip = target / (2.0 * n as f64);
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r <= skip {
                    continue;
                }
                rotate(&mut m, &mut v, p, q);
            }
        }
        off = off_norm(&m);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let eigenvalues = order.iter().map(|&k| m[(k, k)].re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let n = m.rows;
    let apq = m[(p, q)];
    let r = apq.norm();
    let phase = apq / r; // e^{iθ}
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    let sn = t * cs;
    let s_phase = phase * sn; // s e^{iθ}
    let s_phase_conj = s_phase.conj(); // s e^{-iθ}

    // A <- A U
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * cs - akq * s_phase_conj;
        m[(k, q)] = akp * s_phase + akq * cs;
    }
    // A <- U^H A
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = apk * cs - aqk * s_phase;
        m[(q, k)] = apk * s_phase_conj + aqk * cs;
    }
    m[(p, q)] = Complex::new(0.0, 0.0);
    m[(q, p)] = Complex::new(0.0, 0.0);
    m[(p, p)].im = 0.0;
    m[(q, q)].im = 0.0;

    // V <- V U
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * cs - vkq * s_phase_conj;
        v[(k, q)] = vkp * s_phase + vkq * cs;
    }
}

/// Orthonormal basis for the joint column space of `mats`, found by
/// Gram-Schmidt with column pivoting.
///
/// A column is admitted only if its residual norm after projecting out the
/// basis so far exceeds `rel_tol` times the largest column norm of the matrix
/// it came from. Returns the basis as the columns of an `n x r` matrix.
pub fn joint_range(mats: &[&ComplexMatrix], rel_tol: f64) -> Result<ComplexMatrix> {
    let n = match mats.first() {
        Some(m) => m.rows(),
        None => return Ok(ComplexMatrix::zeros(0, 0)),
    };
    let mut basis: Vec<PlanarVec> = Vec::new();
    for m in mats {
        if m.rows() != n {
            return Err(Error::DimensionMismatch {
                op: "joint_range",
                left: (n, n),
                right: m.shape(),
            });
        }
        let mut cols: Vec<PlanarVec> = (0..m.cols()).map(|j| PlanarVec::column(m, j)).collect();
        let scale = cols.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max).sqrt();
        if scale == 0.0 {
            continue;
        }
        let threshold = rel_tol * scale;
        // Projection only shrinks a column, so one already below the threshold never qualifies.
        cols.retain(|c| c.norm_sqr().sqrt() > threshold);
        for col in cols.iter_mut() {
            col.project_out(&basis);
        }
        // Squared residual norms, downdated after each projection; a column is
        // re-measured once cancellation has eaten most of its last exact norm.
        let mut norms: Vec<f64> = cols.iter().map(|c| c.norm_sqr()).collect();
        let mut exact = norms.clone();
        loop {
            if basis.len() == n {
                break;
            }
            let (best, best_sq) =
                norms
                    .iter()
                    .enumerate()
                    .fold(
                        (usize::MAX, 0.0),
                        |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc },
                    );
            if best == usize::MAX || best_sq.sqrt() <= threshold {
                break;
            }
            let mut q = cols.swap_remove(best);
            norms.swap_remove(best);
            exact.swap_remove(best);
            // Second pass restores orthogonality lost to cancellation.
            q.project_out(&basis);
            let qn = q.norm_sqr().sqrt();
            if qn <= threshold {
                continue;
            }
            q.scale(1.0 / qn);
            for ((col, nrm), base) in cols.iter_mut().zip(norms.iter_mut()).zip(exact.iter_mut()) {
                let overlap = col.remove_component(&q);
                *nrm = (*nrm - overlap.norm_sqr()).max(0.0);
                if *nrm <= NORM_REFRESH * *base {
                    *nrm = col.norm_sqr();
                    *base = *nrm;
                }
            }
            basis.push(q);
        }
    }
    let r = basis.len();
    Ok(ComplexMatrix::from_fn(n, r, |i, k| {
        c(basis[k].re[i], basis[k].im[i])
    }))
}

/// Fraction of a column's last exact squared norm below which its downdated value is recomputed.
const NORM_REFRESH: f64 = 1e-8;

/// Complex vector stored as separate real and imaginary planes, so the
/// Gram-Schmidt kernels run on plain `f64` slices.
struct PlanarVec {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl PlanarVec {
    fn column(m: &ComplexMatrix, j: usize) -> Self {
        let (re, im) = (0..m.rows)
            .map(|i| (m.data[i * m.cols + j].re, m.data[i * m.cols + j].im))
            .unzip();
        PlanarVec { re, im }
    }

    fn norm_sqr(&self) -> f64 {
        dot4(&self.re, &self.re) + dot4(&self.im, &self.im)
    }

    fn scale(&mut self, k: f64) {
        self.re
            .iter_mut()
            .chain(self.im.iter_mut())
            .for_each(|x| *x *= k);
    }

    /// Subtracts `<q|self> q` for a unit `q` and returns the overlap.
    fn remove_component(&mut self, q: &PlanarVec) -> Complex {
        let o = c(
            dot4(&q.re, &self.re) + dot4(&q.im, &self.im),
            dot4(&q.re, &self.im) - dot4(&q.im, &self.re),
        );
        for (((zr, zi), &qr), &qi) in self
            .re
            .iter_mut()
            .zip(self.im.iter_mut())
            .zip(&q.re)
            .zip(&q.im)
        {
            *zr -= o.re * qr - o.im * qi;
            *zi -= o.re * qi + o.im * qr;
        }
        o
    }

    fn project_out(&mut self, basis: &[PlanarVec]) {
        for q in basis {
            self.remove_component(q);
        }
    }
}

/// Real dot product with four independent accumulators.
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    let mut acc = [0.0; 4];
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Real symmetric eigendecomposition through the complex Jacobi solver.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = ComplexMatrix::from_real_rows(a)?;
    let eig = hermitian_eigen(&m)?;
    let n = a.len();
    // Eigenvectors of a real symmetric matrix can be chosen real; rotate each
    // column so its largest entry is real before dropping the imaginary part.
    let vecs = (0..n)
        .map(|k| {
            let col = eig.vector(k);
            let pivot = col.iter().copied().fold(Complex::new(0.0, 0.0), |acc, z| {
                if z.norm() > acc.norm() {
                    z
                } else {
                    acc
                }
            });
            let phase = if pivot.norm() > 0.0 {
                pivot.conj() / pivot.norm()
            } else {
                re(1.0)
            };
            col.iter().map(|z| (z * phase).re).collect()
        })
        .collect();
    Ok((eig.eigenvalues, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic pseudo-random stream for matrix fixtures.
    pub(crate) fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random_matrix(n: usize, seed: &mut u64) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| c(lcg(seed), lcg(seed)))
    }

    fn random_hermitian(n: usize, seed: &mut u64) -> ComplexMatrix {
        random_matrix(n, seed).hermitian_part()
    }

    #[test]
    fn identity_is_neutral() {
        let mut seed = 7;
        let m = random_matrix(4, &mut seed);
        let i2 = ComplexMatrix::identity(4);
        assert_eq!(matmul(&i2, &m).unwrap(), m);
    }

    #[test]
    fn raising_times_lowering() {
        let raise = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let lower = ComplexMatrix::from_real_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(matmul(&raise, &lower).unwrap(), expected);
    }

    #[test]
    fn matmul_rejects_bad_shapes() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 3);
        match matmul(&a, &b) {
            Err(Error::DimensionMismatch { left, right, .. }) => {
                assert_eq!(left, (2, 3));
                assert_eq!(right, (2, 3));
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn cyclic_trace_matches_double_loop() {
        let mut seed = 11;
        let a = random_matrix(5, &mut seed);
        let b = random_matrix(5, &mut seed);
        // Oracle: tr(AB) = Σ_i Σ_k A_ik B_ki computed directly.
        let mut oracle = Complex::new(0.0, 0.0);
        for i in 0..5 {
            for k in 0..5 {
                oracle += a[(i, k)] * b[(k, i)];
            }
        }
        let ab = matmul(&a, &b).unwrap().trace();
        let ba = matmul(&b, &a).unwrap().trace();
        assert!((ab - oracle).norm() < 1e-12);
        assert!((ab - ba).norm() < 1e-12);
    }

    #[test]
    fn diagonal_eigen() {
        let d = ComplexMatrix::from_diag(&[0.7, 0.3]);
        let e = hermitian_eigen(&d).unwrap();
        assert_eq!(e.eigenvalues, vec![0.3, 0.7]);
        // Already diagonal: V is a permutation of the identity.
        assert!((e.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        let d = ComplexMatrix::from_diag(&[0.3, 0.7]);
        let e = hermitian_eigen(&d).unwrap();
        assert_eq!(e.eigenvectors, ComplexMatrix::identity(2));
    }

    #[test]
    fn pauli_y_spectrum() {
        let y =
            ComplexMatrix::from_rows(&[vec![re(0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), re(0.0)]])
                .unwrap();
        let e = hermitian_eigen(&y).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(e.residual(&y) < 1e-14);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut seed = 2024;
        let a = random_hermitian(9, &mut seed);
        let e = hermitian_eigen(&a).unwrap();
        assert!(e.reconstruct().max_abs_diff(&a) < 1e-10);
        assert!(e.residual(&a) <= 1e-10 * a.max_abs().max(1.0));
        assert!(e.orthonormality_defect() <= 1e-10);
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn degenerate_and_large_spectra() {
        let mut seed = 99;
        // Rank-2 projector-like matrix embedded in 40 dims: heavy degeneracy at 0.
        let u: Vec<Complex> = (0..40).map(|_| c(lcg(&mut seed), lcg(&mut seed))).collect();
        let w: Vec<Complex> = (0..40).map(|_| c(lcg(&mut seed), lcg(&mut seed))).collect();
        let a = ComplexMatrix::outer(&u, &u)
            .try_add(&ComplexMatrix::outer(&w, &w))
            .unwrap();
        let e = hermitian_eigen(&a).unwrap();
        assert!(e.residual(&a) <= 1e-10 * a.max_abs().max(1.0));
        assert!(e.orthonormality_defect() <= 1e-10);
        assert!(e.eigenvalues[..38].iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            hermitian_eigen(&a),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn rejects_non_finite() {
        let a = ComplexMatrix::from_vec(1, 1, vec![re(f64::NAN)]);
        assert!(matches!(a, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn self_commutator_vanishes() {
        let mut seed = 3;
        let a = random_matrix(6, &mut seed);
        assert_eq!(commutator(&a, &a).unwrap().max_abs(), 0.0);
        assert!(commutator(&a, &ComplexMatrix::zeros(5, 5)).is_err());
    }

    #[test]
    fn unitary_conjugation_keeps_hermiticity() {
        let mut seed = 17;
        let h = random_hermitian(6, &mut seed);
        let u = hermitian_eigen(&random_hermitian(6, &mut seed))
            .unwrap()
            .eigenvectors;
        let x = conjugate_by(&u, &h).unwrap();
        assert!(x.is_hermitian(HERMITIAN_TOL));
    }

    #[test]
    fn joint_range_finds_rank() {
        let mut seed = 5;
        let u: Vec<Complex> = (0..12).map(|_| c(lcg(&mut seed), lcg(&mut seed))).collect();
        let w: Vec<Complex> = (0..12).map(|_| c(lcg(&mut seed), lcg(&mut seed))).collect();
        let a = ComplexMatrix::outer(&u, &u);
        let b = ComplexMatrix::outer(&u, &w)
            .try_add(&ComplexMatrix::outer(&w, &u))
            .unwrap();
        let p = joint_range(&[&a], 1e-12).unwrap();
        assert_eq!(p.cols(), 1);
        let p = joint_range(&[&a, &b], 1e-12).unwrap();
        assert_eq!(p.cols(), 2);
        let gram = matmul(&p.adjoint(), &p).unwrap();
        assert!(gram.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-13);
    }

    #[test]
    fn kron_shapes() {
        let a = ComplexMatrix::identity(2);
        let b = ComplexMatrix::from_diag(&[1.0, 2.0, 3.0]);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 6));
        assert_eq!(k[(4, 4)], re(2.0));
    }
}
