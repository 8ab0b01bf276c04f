use crate::error::{Error, Result};

/// Dense `f64` matrix stored column-major.
///
/// Column-major means a whole column is contiguous, so for a feature-by-frame
/// block every frame is a contiguous slice and for an `l × e` weight matrix
/// every hidden node's fan-in is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a list of rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(n_rows, n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::shape(format!(
                    "row {i} has {} values, expected {n_cols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    /// Builds a matrix whose columns are the given slices.
    pub fn from_columns<C: AsRef<[f64]>>(cols: &[C]) -> Result<Self> {
        let n_rows = cols.first().map_or(0, |c| c.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * cols.len());
        for (j, c) in cols.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != n_rows {
                return Err(Error::shape(format!(
                    "column {j} has {} values, expected {n_rows}",
                    c.len()
                )));
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows: n_rows,
            cols: cols.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Raw column-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on zero; an empty-row matrix has no data anyway
        self.data.chunks_exact(self.rows.max(1)).take(self.cols)
    }

    /// Copy of the columns `start..start + width`.
    pub fn column_range(&self, start: usize, width: usize) -> Result<Matrix> {
        if start + width > self.cols {
            return Err(Error::shape(format!(
                "columns {start}..{} out of range for {} columns",
                start + width,
                self.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: width,
            data: self.data[start * self.rows..(start + width) * self.rows].to_vec(),
        })
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `M · y` for `y` of length `cols`, giving a vector of length `rows`.
    pub fn mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.cols {
            return Err(Error::shape(format!(
                "mul_vec: matrix has {} columns, vector has {}",
                self.cols,
                y.len()
            )));
        }
        let mut out = vec![0.0; self.rows];
        self.mul_vec_acc(y, &mut out);
        Ok(out)
    }

    /// `out += M · y` without shape checks.
    pub(crate) fn mul_vec_acc(&self, y: &[f64], out: &mut [f64]) {
        for (col, &yj) in self.columns().zip(y) {
            if yj == 0.0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(col) {
                *o += m * yj;
            }
        }
    }

    /// `out += xᵀ · M` without shape checks.
    pub(crate) fn vec_mul_acc(&self, x: &[f64], out: &mut [f64]) {
        for (o, col) in out.iter_mut().zip(self.columns()) {
            *o += dot(col, x);
        }
    }

    /// `M += a · bᵀ` (rank-one update) without shape checks.
    pub(crate) fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        let r = self.rows;
        for (col, &bj) in self.data.chunks_exact_mut(r.max(1)).zip(b) {
            if bj == 0.0 {
                continue;
            }
            for (c, &ai) in col.iter_mut().zip(a) {
                *c += ai * bj;
            }
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-vector times matrix: `out[j] = Σ_i x[i] · m[i, j]`.
pub fn matvec(m: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != m.rows {
        return Err(Error::shape(format!(
            "matvec: matrix has {} rows, vector has {}",
            m.rows,
            x.len()
        )));
    }
    let mut out = vec![0.0; m.cols];
    m.vec_mul_acc(x, &mut out);
    debug_assert!(out.iter().all(|v| v.is_finite()));
    Ok(out)
}

/// Hadamard product of two equally shaped matrices.
pub fn elementwise_mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "elementwise_mul: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    })
}
