//! Small dense linear algebra kernels: partial-pivoted LU for the Newton
//! step and column-pivoted Householder QR for the Anderson least-squares
//! coefficients.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::LinalgError;

/// Relative threshold below which a pivoted `R` diagonal entry is treated
/// as zero in [`least_squares`].
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally sized rows.
    ///
    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let c = columns.len();
        let r = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), r, "ragged columns");
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
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

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "dimension mismatch in tr_mul_vec");
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    // scaled accumulation keeps tiny steps from underflowing to zero
    let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let ssq: f64 = a.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * ssq.sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// In-place LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactorization {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl LuFactorization {
    pub fn new(a: &DenseMatrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = f64::EPSILON * a.max_abs();

        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > threshold) {
                return Err(LinalgError::SingularMatrix { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pkk = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pkk;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu.data[i * n + j] -= factor * lu.data[k * n + j];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.lu.rows();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }
}

/// Solves `A x = b` by partial-pivoted LU.
///
/// Fails with [`LinalgError::SingularMatrix`] when a pivot magnitude drops
/// below `ε · max|A|`.
pub fn solve_linear(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    LuFactorization::new(a)?.solve(b)
}

/// Minimizes `‖b − F γ‖₂` by Householder QR with column pivoting.
///
/// Columns whose pivoted diagonal falls below `RANK_TOLERANCE · |R₁₁|` are
/// dropped and receive a zero coefficient. An all-zero `F` yields `γ = 0`.
pub fn least_squares(f: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let (n, m) = (f.rows(), f.cols());
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if m == 0 || n < m {
        return Err(LinalgError::Underdetermined { rows: n, cols: m });
    }

    // Column-major working copies: Householder sweeps touch whole columns.
    let mut cols: Vec<Vec<f64>> = (0..m).map(|j| f.column(j)).collect();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut col_norms: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    let mut rank = 0;
    let mut r11 = 0.0;

    for k in 0..m {
        let (p, _) = (k..m)
            .map(|j| (j, col_norms[j]))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if p != k {
            cols.swap(k, p);
            perm.swap(k, p);
            col_norms.swap(k, p);
        }

        let alpha = norm2(&cols[k][k..]);
        if k == 0 {
            r11 = alpha;
        }
        if alpha == 0.0 || alpha <= RANK_TOLERANCE * r11 {
            break;
        }

        // Householder vector v with v[0] = x[0] + sign(x[0])·‖x‖.
        let sign = if cols[k][k] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        v[0] += sign * alpha;
        let vnorm2 = dot(&v, &v);

        let reflect = |target: &mut [f64]| {
            let s = 2.0 * dot(&v, target) / vnorm2;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= s * vi;
            }
        };
        for col in cols.iter_mut().skip(k) {
            reflect(&mut col[k..]);
        }
        reflect(&mut rhs[k..]);
        rank = k + 1;

        for j in (k + 1)..m {
            col_norms[j] = norm2(&cols[j][k + 1..]);
        }
    }

    // Back substitution on the leading rank × rank block of R.
    let mut z = vec![0.0; rank];
    for i in (0..rank).rev() {
        let s: f64 = ((i + 1)..rank).map(|j| cols[j][i] * z[j]).sum();
        z[i] = (rhs[i] - s) / cols[i][i];
    }

    let mut gamma = vec![0.0; m];
    for (i, zi) in z.into_iter().enumerate() {
        gamma[perm[i]] = zi;
    }
    Ok(gamma)
}
