//! Small dense complex linear algebra and combinatorial kernels.
//!
//! Everything here targets matrices of dimension ≤ 16. The routines favour
//! determinism and accuracy over asymptotic speed: singular value
//! decomposition uses one-sided (Hestenes) Jacobi rotations, which is
//! mathematically the Jacobi eigensolver applied implicitly to `M†M`, and
//! permanents use direct expansion or Ryser's formula with Gray-code updates.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Largest dimension accepted by [`svd`].
pub const MAX_SVD_DIM: usize = 16;
/// Largest dimension accepted by [`permanent`].
pub const MAX_PERMANENT_DIM: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {got}")]
    EntryCount {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {dim} exceeds the supported maximum {max}")]
    TooLarge { dim: usize, max: usize },
    #[error("dimension mismatch: {0}")]
    Mismatch(String),
    #[error("least-squares design matrix is rank deficient")]
    RankDeficient,
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::EntryCount {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(NumericsError::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for literals.
    pub fn from_rows<R: AsRef<[Complex64]>>(rows: &[R]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), n_cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::new(n_rows, n_cols, data).expect("finite literal matrix")
    }

    /// Builds a matrix from nested rows of real numbers.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let complex: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&complex)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self, NumericsError> {
        if self.cols != rhs.rows {
            return Err(NumericsError::Mismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>, NumericsError> {
        if v.len() != self.cols {
            return Err(NumericsError::Mismatch(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Submatrix picking the given rows and columns, repeats allowed.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                data.push(self[(i, j)]);
            }
        }
        Self {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }

    /// Embeds `self` into an `n`×`n` identity with its top-left corner at `(offset, offset)`.
    pub fn embed(&self, n: usize, offset: usize) -> Self {
        assert!(self.is_square() && offset + self.rows <= n);
        let mut out = Self::identity(n);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(offset + i, offset + j)] = self[(i, j)];
            }
        }
        out
    }

    /// Largest modulus of `m†m − I`; `None` for non-square input.
    pub fn unitarity_residual(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self[(k, i)].conj() * self[(k, j)];
                }
                if i == j {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        Some(worst)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_mul(rhs).expect("matrix dimensions must agree")
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// `true` iff the largest modulus of `m†m − I` is below `tol`.
pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    m.unitarity_residual().is_some_and(|r| r < tol)
}

/// Argument of `z`, with `arg(0) = 0`.
pub fn arg_or_zero(z: Complex64) -> f64 {
    if z.norm() < 1e-14 {
        0.0
    } else {
        z.arg()
    }
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_2pi(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = x.rem_euclid(tau);
    // rem_euclid can round up to exactly tau for tiny negative inputs
    if r >= tau {
        0.0
    } else {
        r
    }
}

/// Reduces an angle to `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let r = pi - wrap_2pi(pi - x);
    if r <= -pi {
        r + std::f64::consts::TAU
    } else {
        r
    }
}

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Unitary `U` whose columns are the left singular vectors.
    pub left: ComplexMatrix,
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// `V†`, so that `M = U · diag(σ) · V†`.
    pub right_conjugate: ComplexMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let sigma: Vec<Complex64> = self.singular_values.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        &(&self.left * &ComplexMatrix::from_diagonal(&sigma)) * &self.right_conjugate
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;
const JACOBI_TOL: f64 = 1e-15;
// Columns whose norm is below this fraction of the largest are treated as null.
const NULL_COLUMN_TOL: f64 = 1e-14;
const PHASE_TIE_TOL: f64 = 1e-12;

/// Singular value decomposition of a square matrix of dimension ≤ 16.
///
/// Singular values are sorted nonincreasing (stable with respect to the
/// Jacobi column order). Each right-singular vector is rotated so that its
/// first entry of largest modulus is real and nonnegative; the matching left
/// vector gets the same phase.
pub fn svd(m: &ComplexMatrix) -> Result<SvdResult, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n > MAX_SVD_DIM {
        return Err(NumericsError::TooLarge {
            dim: n,
            max: MAX_SVD_DIM,
        });
    }

    // Column-major working copies: a[j] is column j of M·V.
    let mut a: Vec<Vec<Complex64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[j] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = a[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: Complex64 = a[p].iter().zip(&a[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Phase-align to a real symmetric 2x2 problem, then a real rotation.
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let conj_phase = phase.conj();
                rotate_columns(&mut a, p, q, c, s, conj_phase);
                rotate_columns(&mut v, p, q, c, s, conj_phase);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = a
        .iter()
        .map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma_max = norms.iter().copied().fold(0.0, f64::max);

    let mut singular_values = Vec::with_capacity(n);
    let mut left_cols: Vec<Option<Vec<Complex64>>> = Vec::with_capacity(n);
    let mut right_cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for &k in &order {
        let sigma = norms[k];
        if sigma_max > 0.0 && sigma > NULL_COLUMN_TOL * sigma_max {
            singular_values.push(sigma);
            left_cols.push(Some(a[k].iter().map(|z| z / sigma).collect()));
        } else {
            singular_values.push(0.0);
            left_cols.push(None);
        }
        right_cols.push(v[k].clone());
    }
    let mut left_cols = complete_orthonormal(left_cols, n);

    for (u_col, v_col) in left_cols.iter_mut().zip(right_cols.iter_mut()) {
        let vmax = v_col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = v_col
            .iter()
            .find(|z| z.norm() >= vmax - PHASE_TIE_TOL)
            .copied()
            .unwrap_or(Complex64::new(1.0, 0.0));
        if pivot.norm() > 0.0 {
            let fix = pivot.conj() / pivot.norm();
            v_col.iter_mut().for_each(|z| *z *= fix);
            u_col.iter_mut().for_each(|z| *z *= fix);
        }
    }

    let mut left = ComplexMatrix::zeros(n, n);
    let mut right_conjugate = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        for i in 0..n {
            left[(i, k)] = left_cols[k][i];
            right_conjugate[(k, i)] = right_cols[k][i].conj();
        }
    }
    Ok(SvdResult {
        left,
        singular_values,
        right_conjugate,
    })
}

fn rotate_columns(cols: &mut [Vec<Complex64>], p: usize, q: usize, c: f64, s: f64, conj_phase: Complex64) {
    for i in 0..cols[p].len() {
        let x = cols[p][i];
        let y = cols[q][i] * conj_phase;
        cols[p][i] = x * c - y * s;
        cols[q][i] = x * s + y * c;
    }
}

/// Fills the `None` slots with unit vectors orthogonal to every other column,
/// taken from the standard basis by Gram-Schmidt in index order.
fn complete_orthonormal(cols: Vec<Option<Vec<Complex64>>>, n: usize) -> Vec<Vec<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = cols.iter().flatten().cloned().collect();
    let mut candidate = 0usize;
    let mut out = Vec::with_capacity(cols.len());
    for slot in cols {
        match slot {
            Some(c) => out.push(c),
            None => loop {
                assert!(candidate < n, "orthonormal completion ran out of candidates");
                let mut w = vec![Complex64::new(0.0, 0.0); n];
                w[candidate] = Complex64::new(1.0, 0.0);
                candidate += 1;
                // two passes of modified Gram-Schmidt
                for _ in 0..2 {
                    for b in &basis {
                        let proj: Complex64 = b.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                        for (wi, bi) in w.iter_mut().zip(b) {
                            *wi -= proj * bi;
                        }
                    }
                }
                let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    w.iter_mut().for_each(|z| *z /= norm);
                    basis.push(w.clone());
                    out.push(w);
                    break;
                }
            },
        }
    }
    out
}

/// Matrix permanent: direct expansion up to dimension 3, Ryser above.
pub fn permanent(m: &ComplexMatrix) -> Result<Complex64, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n > MAX_PERMANENT_DIM {
        return Err(NumericsError::TooLarge {
            dim: n,
            max: MAX_PERMANENT_DIM,
        });
    }
    Ok(match n {
        0 => Complex64::new(1.0, 0.0),
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] + m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] + m[(1, 2)] * m[(2, 1)])
                + m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] + m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] + m[(1, 1)] * m[(2, 0)])
        }
        _ => ryser(m),
    })
}

/// Ryser's inclusion-exclusion formula, visiting column subsets in Gray-code
/// order so each step updates the row sums with a single column.
pub fn permanent_ryser(m: &ComplexMatrix) -> Result<Complex64, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if m.rows() > MAX_PERMANENT_DIM {
        return Err(NumericsError::TooLarge {
            dim: m.rows(),
            max: MAX_PERMANENT_DIM,
        });
    }
    Ok(ryser(m))
}

fn ryser(m: &ComplexMatrix) -> Complex64 {
    let n = m.rows();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let bit = k.trailing_zeros() as usize;
        let adding = gray & (1 << bit) == 0;
        gray ^= 1 << bit;
        for (i, rs) in row_sums.iter_mut().enumerate() {
            if adding {
                *rs += m[(i, bit)];
            } else {
                *rs -= m[(i, bit)];
            }
        }
        let prod: Complex64 = row_sums.iter().product();
        if gray.count_ones().is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

/// Permanent by summing over all permutations. Exponential; for testing.
pub fn permanent_naive(m: &ComplexMatrix) -> Complex64 {
    fn go(m: &ComplexMatrix, row: usize, used: &mut [bool], acc: Complex64) -> Complex64 {
        let n = m.rows();
        if row == n {
            return acc;
        }
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                sum += go(m, row + 1, used, acc * m[(row, j)]);
                used[j] = false;
            }
        }
        sum
    }
    assert!(m.is_square());
    go(m, 0, &mut vec![false; m.rows()], Complex64::new(1.0, 0.0))
}

/// Real linear least squares `min ‖X·β − y‖` with `X` given column by column.
///
/// Uses modified Gram-Schmidt QR on the column-scaled design, so a column
/// whose remainder drops below `1e-12` of its original norm is reported as
/// rank deficient.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let p = columns.len();
    let n = y.len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(NumericsError::Mismatch(format!("design columns must have {n} rows")));
    }
    if p == 0 || n < p {
        return Err(NumericsError::RankDeficient);
    }
    if y.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite { row: 0, col: 0 });
    }
    let scales: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if scales.contains(&0.0) {
        return Err(NumericsError::RankDeficient);
    }
    let mut q: Vec<Vec<f64>> = columns
        .iter()
        .zip(&scales)
        .map(|(c, s)| c.iter().map(|v| v / s).collect())
        .collect();
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        for k in 0..j {
            let dot: f64 = q[k].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
            r[k][j] = dot;
            let (head, tail) = q.split_at_mut(j);
            tail[0].iter_mut().zip(&head[k]).for_each(|(b, a)| *b -= dot * a);
        }
        let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(NumericsError::RankDeficient);
        }
        r[j][j] = norm;
        q[j].iter_mut().for_each(|v| *v /= norm);
    }
    let qty: Vec<f64> = q.iter().map(|c| c.iter().zip(y).map(|(a, b)| a * b).sum()).collect();
    let mut beta = vec![0.0; p];
    for j in (0..p).rev() {
        let tail: f64 = (j + 1..p).map(|k| r[j][k] * beta[k]).sum();
        beta[j] = (qty[j] - tail) / r[j][j];
    }
    Ok(beta.iter().zip(&scales).map(|(b, s)| b / s).collect())
}

/// Haar-random unitary via QR of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let mut cols: Vec<Vec<Complex64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect();
    for j in 0..n {
        for _ in 0..2 {
            for k in 0..j {
                let proj: Complex64 = cols[k].iter().zip(&cols[j]).map(|(x, y)| x.conj() * y).sum();
                let (head, tail) = cols.split_at_mut(j);
                for (y, x) in tail[0].iter_mut().zip(&head[k]) {
                    *y -= proj * x;
                }
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|z| *z /= norm);
    }
    let mut u = ComplexMatrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        for (i, &z) in col.iter().enumerate() {
            u[(i, j)] = z;
        }
    }
    u
}

/// Random matrix with entries drawn uniformly from the closed unit disk.
pub fn random_unit_disk_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let data = (0..n * n)
        .map(|_| {
            let r = rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            Complex64::from_polar(r, theta)
        })
        .collect();
    ComplexMatrix::new(n, n, data).expect("finite entries")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn least_squares_fits_exact_polynomial() {
        let xs: Vec<f64> = (0..9).map(|i| i as f64 * 0.003 - 0.012).collect();
        let lin: Vec<f64> = xs.clone();
        let cub: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
        let y: Vec<f64> = xs.iter().map(|x| 100.0 * x + 5000.0 * x * x * x).collect();
        let beta = least_squares(&[lin.clone(), cub], &y).unwrap();
        assert!((beta[0] - 100.0).abs() < 1e-9 * 100.0);
        assert!((beta[1] - 5000.0).abs() < 1e-9 * 5000.0);
        let doubled: Vec<f64> = lin.iter().map(|x| 2.0 * x).collect();
        assert_eq!(least_squares(&[lin, doubled], &y), Err(NumericsError::RankDeficient));
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(
            ComplexMatrix::new(2, 2, vec![c(1.0, 0.0); 3]),
            Err(NumericsError::EntryCount { .. })
        ));
        assert!(matches!(
            ComplexMatrix::new(1, 2, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]),
            Err(NumericsError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn svd_identity() {
        let r = svd(&ComplexMatrix::identity(2)).unwrap();
        assert!((r.singular_values[0] - 1.0).abs() < 1e-15);
        assert!((r.singular_values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn svd_rank_one_projector() {
        // MᵀM = [[0.5,-0.5],[-0.5,0.5]] has characteristic polynomial λ² − λ = 0.
        let m = ComplexMatrix::from_real_rows(&[[0.5, -0.5], [-0.5, 0.5]]);
        let r = svd(&m).unwrap();
        assert!((r.singular_values[0] - 1.0).abs() < 1e-12);
        assert!(r.singular_values[1].abs() < 1e-12);
        assert!(r.reconstruct().max_abs_diff(&m) < 1e-12);
        assert!(is_unitary(&r.left, 1e-12));
        assert!(is_unitary(&r.right_conjugate, 1e-12));
    }

    #[test]
    fn svd_sorts_diagonal() {
        let m = ComplexMatrix::from_real_rows(&[[0.3, 0.0], [0.0, 0.7]]);
        let r = svd(&m).unwrap();
        assert!((r.singular_values[0] - 0.7).abs() < 1e-15);
        assert!((r.singular_values[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn svd_phase_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = random_unit_disk_matrix(&mut rng, 3);
            let r = svd(&m).unwrap();
            for k in 0..3 {
                // rows of V† are conjugated right-singular vectors
                let v: Vec<Complex64> = (0..3).map(|i| r.right_conjugate[(k, i)].conj()).collect();
                let vmax = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let pivot = v.iter().find(|z| z.norm() >= vmax - 1e-12).unwrap();
                assert!(pivot.im.abs() < 1e-12 && pivot.re >= 0.0);
            }
        }
    }

    #[test]
    fn svd_rejects_bad_shapes() {
        assert!(matches!(
            svd(&ComplexMatrix::zeros(2, 3)),
            Err(NumericsError::NotSquare { .. })
        ));
        assert!(matches!(
            svd(&ComplexMatrix::identity(17)),
            Err(NumericsError::TooLarge { .. })
        ));
    }

    #[test]
    fn svd_zero_matrix() {
        let r = svd(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert_eq!(r.singular_values, vec![0.0; 3]);
        assert!(is_unitary(&r.left, 1e-12));
    }

    #[test]
    fn svd_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_unit_disk_matrix(&mut rng, 4);
        let a = svd(&m).unwrap();
        let b = svd(&m).unwrap();
        assert_eq!(a.left, b.left);
        assert_eq!(a.right_conjugate, b.right_conjugate);
    }

    #[test]
    fn permanent_small_cases() {
        let (a, b, cc, d) = (c(1.0, 2.0), c(-0.5, 0.1), c(0.3, -0.7), c(2.0, 0.0));
        let m = ComplexMatrix::from_rows(&[[a, b], [cc, d]]);
        assert!((permanent(&m).unwrap() - (a * d + b * cc)).norm() < 1e-15);
        let ones = ComplexMatrix::from_real_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(permanent(&ones).unwrap(), c(2.0, 0.0));
        assert_eq!(permanent(&ComplexMatrix::identity(3)).unwrap(), c(1.0, 0.0));
        assert_eq!(permanent(&ComplexMatrix::zeros(0, 0)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn permanent_of_all_ones_is_factorial() {
        for n in 1..=8usize {
            let m = ComplexMatrix::new(n, n, vec![c(1.0, 0.0); n * n]).unwrap();
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            assert!((permanent(&m).unwrap().re - fact).abs() < 1e-9 * fact);
        }
    }

    #[test]
    fn permanent_rejects_non_square() {
        assert!(matches!(
            permanent(&ComplexMatrix::zeros(2, 3)),
            Err(NumericsError::NotSquare { .. })
        ));
    }

    #[test]
    fn unitarity_checks() {
        assert!(is_unitary(&ComplexMatrix::identity(2), 1e-12));
        let m = ComplexMatrix::from_real_rows(&[[0.5, 0.0], [0.0, 1.0]]);
        assert!(!is_unitary(&m, 1e-12));
        assert!(!is_unitary(&ComplexMatrix::zeros(2, 3), 1e-12));
    }

    #[test]
    fn angle_wrapping() {
        use std::f64::consts::PI;
        assert_eq!(wrap_2pi(-1e-300), 0.0);
        assert!((wrap_2pi(-PI / 2.0) - 1.5 * PI).abs() < 1e-15);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-15);
        assert!((wrap_pi(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix(n: usize) -> impl Strategy<Value = ComplexMatrix> {
            prop::collection::vec((0.0f64..=1.0, 0.0f64..std::f64::consts::TAU), n * n).prop_map(move |entries| {
                let data = entries.into_iter().map(|(r, t)| Complex64::from_polar(r, t)).collect();
                ComplexMatrix::new(n, n, data).unwrap()
            })
        }

        proptest! {
            #[test]
            fn ryser_matches_naive(m in (1usize..=4).prop_flat_map(matrix)) {
                let a = permanent_ryser(&m).unwrap();
                let b = permanent_naive(&m);
                prop_assert!((a - b).norm() < 1e-12);
                prop_assert!((permanent(&m).unwrap() - b).norm() < 1e-12);
            }

            #[test]
            fn permanent_is_transpose_invariant(m in (1usize..=6).prop_flat_map(matrix)) {
                let a = permanent(&m).unwrap();
                let b = permanent(&m.transpose()).unwrap();
                prop_assert!((a - b).norm() < 1e-10);
            }

            #[test]
            fn permanent_with_zero_row_vanishes(m in (1usize..=6).prop_flat_map(matrix), row in 0usize..6) {
                let mut m = m;
                let row = row % m.rows();
                for j in 0..m.cols() { m[(row, j)] = Complex64::new(0.0, 0.0); }
                prop_assert_eq!(permanent(&m).unwrap().norm(), 0.0);
            }
        }
    }

    #[test]
    fn svd_round_trip_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for k in 0..1000 {
            let n = 1 + k % 6;
            let m = random_unit_disk_matrix(&mut rng, n);
            let r = svd(&m).unwrap();
            let mut diff = r.reconstruct();
            for i in 0..n {
                for j in 0..n {
                    diff[(i, j)] -= m[(i, j)];
                }
            }
            let err = diff.frobenius_norm();
            assert!(err < 1e-12, "reconstruction error {err}");
            assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
            assert!(is_unitary(&r.left, 1e-12));
            assert!(is_unitary(&r.right_conjugate, 1e-12));
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=8 {
            assert!(is_unitary(&random_unitary(&mut rng, n), 1e-12));
        }
    }
}
