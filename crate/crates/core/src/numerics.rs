//! Dense linear algebra and seeded sampling at small dimension.
//!
//! Everything here is row-major and sized for feature counts in the low
//! hundreds. Factorisations track the row envelope (first structurally
//! nonzero column of each row) so block-diagonal Gram matrices, which is
//! what per-action feature blocks produce, factor at a fraction of the
//! dense cost.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry precondition of SPD routines.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Jitter levels tried, in order, when a covariance fails to factor.
pub const JITTER_LEVELS: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        if data.iter().all(|x| x.is_finite()) {
            Ok(Vector(data))
        } else {
            Err(Error::NonFinite)
        }
    }

    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        Vector(data)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|x| x * c).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        if !data.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Matrix::from_row_major(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &Vector) -> Result<Vector> {
        if v.dim() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: v.dim() });
        }
        Ok(Vector((0..self.rows).map(|i| dot(self.row(i), v.as_slice())).collect()))
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &Vector) -> Result<Vector> {
        if v.dim() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, found: v.dim() });
        }
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            axpy(v[i], self.row(i), &mut out);
        }
        Ok(Vector(out))
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if other.rows != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let (lhs, dst) = (self.row(i), &mut out.data[i * other.cols..(i + 1) * other.cols]);
            for (p, &a) in lhs.iter().enumerate() {
                if a != 0.0 {
                    axpy(a, other.row(p), dst);
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · self`, symmetric by construction.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for p in 0..n {
                let w = row[p];
                if w != 0.0 {
                    axpy(w, &row[p..], &mut g.data[p * n + p..(p + 1) * n]);
                }
            }
        }
        for p in 0..n {
            for q in 0..p {
                g.data[p * n + q] = g.data[q * n + p];
            }
        }
        g
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * c).collect() }
    }

    pub fn add_diagonal(&mut self, d: f64) {
        for i in 0..self.rows.min(self.cols) {
            self.data[i * self.cols + i] += d;
        }
    }

    pub fn with_added_diagonal(&self, d: f64) -> Matrix {
        let mut m = self.clone();
        m.add_diagonal(d);
        m
    }

    /// Rank-one update `self += c · x yᵀ` restricted to the rows where `x` is nonzero.
    pub fn add_outer(&mut self, c: f64, x: &[f64], y: &[f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(c * xi, y, self.row_mut(i));
            }
        }
    }

    /// `(self + selfᵀ) / 2`
    pub fn symmetrised(&self) -> Matrix {
        let mut m = self.clone();
        let n = self.rows;
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    fn check_spd_shape(&self, rhs: Option<usize>) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch { expected: self.rows, found: self.cols });
        }
        if let Some(d) = rhs {
            if d != self.rows {
                return Err(Error::DimensionMismatch { expected: self.rows, found: d });
            }
        }
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        for i in 0..self.rows {
            for j in 0..i {
                let gap = (self[(i, j)] - self[(j, i)]).abs();
                if gap > SYMMETRY_TOL * scale {
                    return Err(Error::NotSymmetric { row: i, col: j, gap });
                }
            }
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| self.row(i)).collect();
        f.debug_struct("Matrix").field("rows", &self.rows).field("cols", &self.cols).field("data", &rows).finish()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorise without reassociation.
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..n {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lower-triangular Cholesky factor together with its row envelope.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    lower: Matrix,
    first: Vec<usize>,
}

impl CholeskyFactor {
    /// Factors `m`, reading only its lower triangle.
    fn factor_lower(m: &Matrix) -> Result<Self> {
        let n = m.rows;
        let first: Vec<usize> =
            (0..n).map(|i| m.row(i)[..i].iter().position(|&x| x != 0.0).unwrap_or(i)).collect();
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in first[i]..=i {
                let lo = first[i].max(first[j]);
                let s = m[(i, j)] - dot(&l.row(i)[lo..j], &l.row(j)[lo..j]);
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(CholeskyFactor { lower: l, first })
    }

    /// Factors a symmetric positive-definite matrix.
    pub fn new(m: &Matrix) -> Result<Self> {
        m.check_spd_shape(None)?;
        Self::factor_lower(m)
    }

    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn into_lower(self) -> Matrix {
        self.lower
    }

    /// Solves `L y = v` in place.
    pub fn forward_in_place(&self, v: &mut [f64]) {
        let l = &self.lower;
        for i in 0..l.rows {
            let lo = self.first[i];
            let s = v[i] - dot(&l.row(i)[lo..i], &v[lo..i]);
            v[i] = s / l[(i, i)];
        }
    }

    /// Solves `Lᵀ x = v` in place.
    pub fn backward_in_place(&self, v: &mut [f64]) {
        let l = &self.lower;
        for i in (0..l.rows).rev() {
            v[i] /= l[(i, i)];
            let xi = v[i];
            let lo = self.first[i];
            axpy(-xi, &l.row(i)[lo..i], &mut v[lo..i]);
        }
    }

    /// `L⁻¹ B` for a matrix right-hand side.
    pub fn forward_matrix(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: b.rows });
        }
        let l = &self.lower;
        let cols = b.cols;
        let mut x = b.clone();
        for i in 0..l.rows {
            let (done, rest) = x.data.split_at_mut(i * cols);
            let xi = &mut rest[..cols];
            for j in self.first[i]..i {
                let lij = l[(i, j)];
                if lij != 0.0 {
                    axpy(-lij, &done[j * cols..(j + 1) * cols], xi);
                }
            }
            let d = 1.0 / l[(i, i)];
            xi.iter_mut().for_each(|v| *v *= d);
        }
        Ok(x)
    }

    pub fn solve(&self, v: &Vector) -> Result<Vector> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.dim() });
        }
        let mut x = v.as_slice().to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        finite_vector(x)
    }

    /// `M⁻¹ = L⁻ᵀ L⁻¹`, symmetric by construction.
    pub fn inverse(&self) -> Result<Matrix> {
        let linv = self.forward_matrix(&Matrix::identity(self.dim()))?;
        let inv = linv.gram();
        if inv.is_finite() {
            Ok(inv)
        } else {
            Err(Error::NonFinite)
        }
    }
}

fn finite_vector(x: Vec<f64>) -> Result<Vector> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(Vector(x))
    } else {
        Err(Error::NonFinite)
    }
}

/// Lower-triangular `L` with `L Lᵀ = m`. Strict upper entries are exactly zero.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    Ok(CholeskyFactor::new(m)?.into_lower())
}

pub fn solve_spd(m: &Matrix, v: &Vector) -> Result<Vector> {
    m.check_spd_shape(Some(v.dim()))?;
    CholeskyFactor::factor_lower(m)?.solve(v)
}

pub fn invert_spd(m: &Matrix) -> Result<Matrix> {
    CholeskyFactor::new(m)?.inverse()
}

/// Solves a general square system by Gaussian elimination with partial pivoting.
pub fn solve_general(m: &Matrix, v: &Vector) -> Result<Vector> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.rows, found: m.cols });
    }
    if v.dim() != m.rows {
        return Err(Error::DimensionMismatch { expected: m.rows, found: v.dim() });
    }
    let n = m.rows;
    let mut a = m.clone();
    let mut x = v.as_slice().to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[(p, col)].abs().total_cmp(&a[(q, col)].abs()))
            .unwrap_or(col);
        if a[(pivot, col)] == 0.0 || !a[(pivot, col)].is_finite() {
            return Err(Error::SingularSystem);
        }
        if pivot != col {
            for j in 0..n {
                a.data.swap(pivot * n + j, col * n + j);
            }
            x.swap(pivot, col);
        }
        let (upper, lower) = a.data.split_at_mut((col + 1) * n);
        let prow = &upper[col * n..];
        let d = prow[col];
        for r in 0..n - col - 1 {
            let row = &mut lower[r * n..(r + 1) * n];
            let f = row[col] / d;
            if f != 0.0 {
                axpy(-f, &prow[col..], &mut row[col..]);
                x[col + 1 + r] -= f * x[col];
            }
        }
    }
    for i in (0..n).rev() {
        let s = x[i] - dot(&a.row(i)[i + 1..], &x[i + 1..]);
        x[i] = s / a[(i, i)];
    }
    finite_vector(x).map_err(|_| Error::SingularSystem)
}

/// Seeded generator; identical seed and call sequence give identical output.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * rand::Rng::random::<f64>(&mut self.inner)
    }

    pub fn below(&mut self, n: usize) -> usize {
        rand::Rng::random_range(&mut self.inner, 0..n)
    }

    pub fn standard_normal_vector(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.standard_normal()).collect()
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Factors a covariance, escalating diagonal jitter through [`JITTER_LEVELS`] on failure.
pub fn covariance_factor(cov: &Matrix) -> Result<Matrix> {
    cov.check_spd_shape(None)?;
    let mut last = match CholeskyFactor::factor_lower(cov) {
        Ok(f) => return Ok(f.into_lower()),
        Err(e) => e,
    };
    for delta in JITTER_LEVELS {
        match CholeskyFactor::factor_lower(&cov.with_added_diagonal(delta)) {
            Ok(f) => return Ok(f.into_lower()),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Draws `mean + L z` with `L Lᵀ = cov` and `z` standard normal.
pub fn sample_mvn(mean: &Vector, cov: &Matrix, rng: &mut SeededRng) -> Result<Vector> {
    if cov.rows() != mean.dim() {
        return Err(Error::DimensionMismatch { expected: mean.dim(), found: cov.rows() });
    }
    let l = covariance_factor(cov)?;
    let z = rng.standard_normal_vector(mean.dim());
    let mut x = mean.as_slice().to_vec();
    for i in 0..x.len() {
        x[i] += dot(&l.row(i)[..=i], &z[..=i]);
    }
    finite_vector(x)
}

/// Draws from `N(mean, P⁻¹)` given the Cholesky factor of the precision `P`.
///
/// With `P = L Lᵀ`, `x = mean + L⁻ᵀ z` has covariance `L⁻ᵀ L⁻¹ = P⁻¹`.
pub fn sample_mvn_precision(
    mean: &Vector,
    precision: &CholeskyFactor,
    rng: &mut SeededRng,
) -> Result<Vector> {
    if precision.dim() != mean.dim() {
        return Err(Error::DimensionMismatch { expected: mean.dim(), found: precision.dim() });
    }
    let mut z = rng.standard_normal_vector(mean.dim());
    precision.backward_in_place(&mut z);
    finite_vector(mean.as_slice().iter().zip(&z).map(|(m, d)| m + d).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_spd(n: usize, rng: &mut SeededRng) -> Matrix {
        let g = Matrix::from_row_major(n, n, rng.standard_normal_vector(n * n)).unwrap();
        g.gram().with_added_diagonal(1.0)
    }

    fn residual_inf(m: &Matrix, x: &Vector, v: &Vector) -> f64 {
        m.mul_vec(x).unwrap().sub(v).norm_inf()
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let v = Vector::from_vec(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(solve_spd(&Matrix::identity(3), &v).unwrap(), v);

        let m = Matrix::diagonal(&[4.0, 9.0]);
        let x = solve_spd(&m, &Vector::from_vec(vec![8.0, 27.0]).unwrap()).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn solve_random_spd_residual() {
        let mut rng = SeededRng::new(7);
        let m = random_spd(5, &mut rng);
        let v = Vector::from_vec(rng.standard_normal_vector(5)).unwrap();
        let x = solve_spd(&m, &v).unwrap();
        assert!(residual_inf(&m, &x, &v) <= 1e-8 * (1.0 + v.norm_inf()));
    }

    #[test]
    fn cholesky_hand_case() {
        let m = Matrix::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]]).unwrap();
        let l = cholesky(&m).unwrap();
        assert_eq!(l, Matrix::from_rows(&[&[2.0, 0.0], &[1.0, 2.0]]).unwrap());
        assert_eq!(cholesky(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        let mut rng = SeededRng::new(11);
        let m = random_spd(10, &mut rng);
        let l = cholesky(&m).unwrap();
        let recon = l.mul(&l.transpose()).unwrap();
        let err = recon.add(&m.scaled(-1.0)).unwrap().norm_inf();
        assert!(err <= 1e-8 * m.norm_inf(), "err = {err}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&m), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
        assert!(matches!(solve_spd(&m, &Vector::zeros(2)), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn spd_routines_reject_asymmetric() {
        let m = Matrix::from_rows(&[&[2.0, 1.0], &[0.0, 2.0]]).unwrap();
        assert!(matches!(cholesky(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn block_diagonal_envelope_matches_dense_result() {
        let mut rng = SeededRng::new(3);
        let a = random_spd(4, &mut rng);
        let b = random_spd(3, &mut rng);
        let mut m = Matrix::zeros(7, 7);
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = a[(i, j)];
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                m[(4 + i, 4 + j)] = b[(i, j)];
            }
        }
        let l = cholesky(&m).unwrap();
        let la = cholesky(&a).unwrap();
        let lb = cholesky(&b).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((l[(4 + i, 4 + j)] - lb[(i, j)]).abs() < 1e-14);
            }
            for j in 0..4 {
                assert_eq!(l[(4 + i, j)], 0.0);
            }
        }
        assert!((l[(3, 2)] - la[(3, 2)]).abs() < 1e-14);
    }

    #[test]
    fn invert_cases() {
        assert_eq!(invert_spd(&Matrix::identity(4)).unwrap(), Matrix::identity(4));
        let inv = invert_spd(&Matrix::diagonal(&[2.0, 4.0])).unwrap();
        assert!(inv.add(&Matrix::diagonal(&[-0.5, -0.25])).unwrap().norm_inf() < 1e-15);

        let mut rng = SeededRng::new(5);
        let m = random_spd(8, &mut rng);
        let inv = invert_spd(&m).unwrap();
        let err = m.mul(&inv).unwrap().add(&Matrix::identity(8).scaled(-1.0)).unwrap().norm_inf();
        assert!(err < 1e-7);
        assert_eq!(inv, inv.transpose());
    }

    #[test]
    fn general_solve_handles_asymmetric_and_pivoting() {
        let m = Matrix::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]).unwrap();
        let x_true = Vector::from_vec(vec![1.0, -2.0, 0.5]).unwrap();
        let v = m.mul_vec(&x_true).unwrap();
        let x = solve_general(&m, &v).unwrap();
        assert!(x.sub(&x_true).norm_inf() < 1e-12);
        let singular = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(solve_general(&singular, &Vector::zeros(2)).is_err());
    }

    #[test]
    fn mvn_degenerate_covariance_returns_mean() {
        let mut rng = SeededRng::new(1);
        let m = Vector::from_vec(vec![1.0, -3.0]).unwrap();
        let x = sample_mvn(&m, &Matrix::zeros(2, 2), &mut rng).unwrap();
        assert!(x.sub(&m).norm_inf() < 1e-3);
    }

    #[test]
    fn mvn_is_seed_deterministic() {
        let m = Vector::zeros(2);
        let a = sample_mvn(&m, &Matrix::identity(2), &mut SeededRng::new(42)).unwrap();
        let b = sample_mvn(&m, &Matrix::identity(2), &mut SeededRng::new(42)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn mvn_moments_standard_normal() {
        let mut rng = SeededRng::new(2024);
        let n = 100_000;
        let (mut s, mut ss) = ([0.0; 2], [[0.0; 2]; 2]);
        let mean = Vector::zeros(2);
        let cov = Matrix::identity(2);
        for _ in 0..n {
            let x = sample_mvn(&mean, &cov, &mut rng).unwrap();
            for i in 0..2 {
                s[i] += x[i];
                for j in 0..2 {
                    ss[i][j] += x[i] * x[j];
                }
            }
        }
        for i in 0..2 {
            let mi = s[i] / n as f64;
            assert!(mi.abs() < 0.02, "mean {mi}");
            for j in 0..2 {
                let c = ss[i][j] / n as f64 - mi * s[j] / n as f64;
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((c - target).abs() < 0.05, "cov[{i}][{j}] = {c}");
            }
        }
    }

    #[test]
    fn precision_sampling_matches_covariance_sampling_in_distribution() {
        let p = Matrix::from_rows(&[&[4.0, 1.0], &[1.0, 2.0]]).unwrap();
        let cov = invert_spd(&p).unwrap();
        let factor = CholeskyFactor::new(&p).unwrap();
        let mut rng = SeededRng::new(9);
        let n = 100_000;
        let mut acc = [[0.0; 2]; 2];
        for _ in 0..n {
            let x = sample_mvn_precision(&Vector::zeros(2), &factor, &mut rng).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += x[i] * x[j] / n as f64;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!((acc[i][j] - cov[(i, j)]).abs() < 0.01, "{i}{j}: {} vs {}", acc[i][j], cov[(i, j)]);
            }
        }
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        assert!(matches!(Vector::from_vec(vec![1.0, f64::NAN]), Err(Error::NonFinite)));
        assert!(matches!(Matrix::from_row_major(1, 1, vec![f64::INFINITY]), Err(Error::NonFinite)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn solve_recovers_x(seed in any::<u64>(), n in 1usize..12) {
                let mut rng = SeededRng::new(seed);
                let m = random_spd(n, &mut rng);
                let x = Vector::from_vec(rng.standard_normal_vector(n)).unwrap();
                let v = m.mul_vec(&x).unwrap();
                let got = solve_spd(&m, &v).unwrap();
                prop_assert!(got.sub(&x).norm_inf() <= 1e-7 * (1.0 + x.norm_inf()));
            }

            #[test]
            fn cholesky_is_exactly_lower(seed in any::<u64>(), n in 1usize..10) {
                let mut rng = SeededRng::new(seed);
                let l = cholesky(&random_spd(n, &mut rng)).unwrap();
                for i in 0..n {
                    for j in i + 1..n {
                        prop_assert_eq!(l[(i, j)], 0.0);
                    }
                }
            }

            #[test]
            fn inverse_is_symmetric(seed in any::<u64>(), n in 1usize..10) {
                let mut rng = SeededRng::new(seed);
                let inv = invert_spd(&random_spd(n, &mut rng)).unwrap();
                prop_assert_eq!(inv.clone(), inv.transpose());
            }

            #[test]
            fn mvn_seed_reproducible(seed in any::<u64>()) {
                let cov = Matrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
                let a = sample_mvn(&Vector::zeros(2), &cov, &mut SeededRng::new(seed)).unwrap();
                let b = sample_mvn(&Vector::zeros(2), &cov, &mut SeededRng::new(seed)).unwrap();
                prop_assert_eq!(a.as_slice(), b.as_slice());
            }
        }
    }
}
