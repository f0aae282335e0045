//! Dense real matrices: storage, Kronecker products, trace inner products and
//! column stacking.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Default cap on the number of entries a Kronecker product may produce.
pub const DEFAULT_MAX_KRON_ENTRIES: usize = 10_000_000;

/// Row-major dense matrix, not necessarily square.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    pub fn identity(m: usize) -> Self {
        Self::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 })
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

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "vector length must match column count");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Submatrix with the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Square symmetric matrix. Symmetry is structural: every constructor either
/// fills the upper triangle and mirrors it, or checks it exactly.
#[derive(Clone, PartialEq)]
pub struct DenseSym(Matrix);

impl DenseSym {
    /// Builds from `f` evaluated on the upper triangle only.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        let mut m = Matrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        DenseSym(m)
    }

    /// Accepts `m` only if it is square and exactly symmetric.
    pub fn try_from_matrix(m: Matrix) -> Result<Self> {
        if !m.is_square() || m.rows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        for i in 0..m.rows() {
            for j in (i + 1)..m.cols() {
                if m[(i, j)] != m[(j, i)] {
                    return Err(invalid_sym(i, j));
                }
            }
        }
        Ok(DenseSym(m))
    }

    /// Symmetrises `(m + mᵀ)/2`.
    pub fn symmetrize(m: &Matrix) -> Result<Self> {
        if !m.is_square() || m.rows() == 0 {
            return Err(Error::DimensionMismatch(
                "symmetrize needs a square matrix".into(),
            ));
        }
        Ok(Self::from_upper(m.rows(), |i, j| {
            0.5 * (m[(i, j)] + m[(j, i)])
        }))
    }

    pub fn identity(dim: usize) -> Self {
        DenseSym(Matrix::identity(dim))
    }

    pub fn ones(dim: usize) -> Self {
        Self::from_upper(dim, |_, _| 1.0)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_upper(dim, |_, _| 0.0)
    }

    /// `E_ij + E_ji` scaled so that the diagonal case is `E_ii`.
    pub fn unit_pair(dim: usize, i: usize, j: usize) -> Self {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        Self::from_upper(dim, |a, b| if a == lo && b == hi { 1.0 } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> DenseSym {
        DenseSym(self.0.scale(s))
    }

    pub fn add(&self, other: &DenseSym) -> Result<DenseSym> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseSym) -> Result<DenseSym> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &DenseSym, f: impl Fn(f64, f64) -> f64) -> Result<DenseSym> {
        check_same_dim(self, other)?;
        let data = self
            .0
            .as_slice()
            .iter()
            .zip(other.0.as_slice())
            .map(|(a, b)| f(*a, *b))
            .collect();
        Ok(DenseSym(Matrix {
            rows: self.dim(),
            cols: self.dim(),
            data,
        }))
    }

    pub fn kron(&self, other: &DenseSym) -> Result<DenseSym> {
        // kron of symmetric matrices is symmetric entry for entry
        kron(&self.0, &other.0).map(DenseSym)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

impl Index<(usize, usize)> for DenseSym {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl fmt::Debug for DenseSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseSym({:?})", self.0)
    }
}

fn invalid_sym(i: usize, j: usize) -> Error {
    Error::InvalidArgument(format!("matrix is not symmetric at ({i}, {j})"))
}

fn check_same_dim(a: &DenseSym, b: &DenseSym) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Kronecker product with the default entry cap.
pub fn kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    kron_capped(a, b, DEFAULT_MAX_KRON_ENTRIES)
}

pub fn kron_capped(a: &Matrix, b: &Matrix, max_entries: usize) -> Result<Matrix> {
    let rows = a.rows().checked_mul(b.rows());
    let cols = a.cols().checked_mul(b.cols());
    let entries = rows.zip(cols).and_then(|(r, c)| r.checked_mul(c));
    let (rows, cols) = match entries {
        Some(e) if e <= max_entries => (rows.unwrap(), cols.unwrap()),
        _ => {
            return Err(Error::Sizing {
                what: "Kronecker product entries",
                requested: entries.unwrap_or(usize::MAX),
                cap: max_entries,
            })
        }
    };
    let (br, bc) = (b.rows(), b.cols());
    Ok(Matrix::from_fn(rows, cols, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    }))
}

/// `Σ_ij a_ij b_ij`, which is `trace(ab)` for symmetric inputs.
pub fn trace_inner(a: &DenseSym, b: &DenseSym) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(a.0
        .as_slice()
        .iter()
        .zip(b.0.as_slice())
        .map(|(x, y)| x * y)
        .sum())
}

/// Stacks the columns of a square matrix.
pub fn vec_stack(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(
            "vec_stack needs a square matrix".into(),
        ));
    }
    let n = m.rows();
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(m[(i, j)]);
        }
    }
    Ok(out)
}
