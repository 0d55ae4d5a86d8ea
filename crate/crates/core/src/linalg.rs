//! Small dense linear algebra over a [`Field`].
//!
//! Determinants use fraction-free (Bareiss) elimination; everything else is
//! Gauss–Jordan. In rational mode all results are exact. In float mode the
//! pivot is the largest entry in the column and entries negligible against
//! the column scale are treated as zero.

use crate::scalar::Field;
use crate::sparse::SparseVector;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Field> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, S::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    /// Builds the matrix whose columns are the given coordinate vectors, on coordinates `1..=window`.
    pub fn from_columns(columns: &[SparseVector<S>], window: usize) -> Self {
        let mut m = Self::zeros(window, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, v) in col.iter() {
                if i <= window {
                    m.set(i - 1, j, v.clone());
                }
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

    pub fn get(&self, r: usize, c: usize) -> &S {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> Vec<S> {
        self.data[r * self.cols..(r + 1) * self.cols].to_vec()
    }

    pub fn column(&self, c: usize) -> Vec<S> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn column_vector(&self, c: usize) -> SparseVector<S> {
        SparseVector::from_dense(&self.column(c))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let next = out.get(i, j).clone() + a.clone() * b.clone();
                    out.set(i, j, next);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(self.cols, x.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(S::zero(), |acc, j| acc + self.get(i, j).clone() * x[j].clone())
            })
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.clone() - b.clone()).collect(),
        }
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Leading principal `n × n` submatrix.
    pub fn leading(&self, n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                m.set(r, c, self.get(r, c).clone());
            }
        }
        m
    }

    fn column_scale(&self, c: usize, from_row: usize) -> S {
        (from_row..self.rows).fold(S::zero(), |acc, r| acc.max_of(self.get(r, c).magnitude()))
    }

    fn pick_pivot(&self, c: usize, from_row: usize) -> Option<usize> {
        if S::is_exact() {
            return (from_row..self.rows).find(|&r| !self.get(r, c).is_zero());
        }
        let scale = self.column_scale(c, from_row);
        let mut best: Option<usize> = None;
        for r in from_row..self.rows {
            let v = self.get(r, c).magnitude();
            if v.negligible_against(&scale) || v.is_zero() {
                continue;
            }
            if best.is_none_or(|b| v > self.get(b, c).magnitude()) {
                best = Some(r);
            }
        }
        best
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Determinant by fraction-free Bareiss elimination.
    pub fn determinant(&self) -> S {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        if n == 0 {
            return S::one();
        }
        let mut m = self.clone();
        let mut negate = false;
        let mut prev = S::one();
        for k in 0..n {
            let Some(p) = m.pick_pivot(k, k) else {
                return S::zero();
            };
            if p != k {
                m.swap_rows(p, k);
                negate = !negate;
            }
            let pivot = m.get(k, k).clone();
            for i in k + 1..n {
                let lead = m.get(i, k).clone();
                for j in k + 1..n {
                    let v = (m.get(i, j).clone() * pivot.clone() - lead.clone() * m.get(k, j).clone())
                        / prev.clone();
                    m.set(i, j, v);
                }
                m.set(i, k, S::zero());
            }
            prev = pivot;
        }
        let det = m.get(n - 1, n - 1).clone();
        if negate {
            -det
        } else {
            det
        }
    }

    /// Reduced row echelon form and the pivot columns.
    pub fn rref(&self) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for c in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = m.pick_pivot(c, row) else {
                for r in row..m.rows {
                    m.set(r, c, S::zero());
                }
                continue;
            };
            m.swap_rows(p, row);
            let pivot = m.get(row, c).clone();
            for j in c..m.cols {
                let v = m.get(row, j).clone() / pivot.clone();
                m.set(row, j, v);
            }
            for r in 0..m.rows {
                if r == row {
                    continue;
                }
                let factor = m.get(r, c).clone();
                if factor.is_zero() {
                    continue;
                }
                for j in c..m.cols {
                    let v = m.get(r, j).clone() - factor.clone() * m.get(row, j).clone();
                    m.set(r, j, v);
                }
                m.set(r, c, S::zero());
            }
            pivots.push(c);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of `{x : A x = 0}`, one vector per free column.
    pub fn nullspace(&self) -> Vec<Vec<S>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&fc| {
                let mut x = vec![S::zero(); self.cols];
                x[fc] = S::one();
                for (row, &pc) in pivots.iter().enumerate() {
                    x[pc] = -r.get(row, fc).clone();
                }
                x
            })
            .collect()
    }

    /// Some solution of `A x = b` (free variables set to zero), or `None` if inconsistent.
    pub fn solve_any(&self, b: &[S]) -> Option<Vec<S>> {
        assert_eq!(self.rows, b.len(), "dimension mismatch");
        let mut aug = Self::zeros(self.rows, self.cols + 1);
        for r in 0..self.rows {
            for c in 0..self.cols {
                aug.set(r, c, self.get(r, c).clone());
            }
            aug.set(r, self.cols, b[r].clone());
        }
        let (red, pivots) = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![S::zero(); self.cols];
        for (row, &pc) in pivots.iter().enumerate() {
            x[pc] = red.get(row, self.cols).clone();
        }
        Some(x)
    }

    /// Unique solution of a square nonsingular system.
    pub fn solve(&self, b: &[S]) -> Option<Vec<S>> {
        if !self.is_square() || self.rank() < self.rows {
            return None;
        }
        self.solve_any(b)
    }

    pub fn inverse(&self) -> Option<Self> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        if n == 0 {
            return Some(Self::zeros(0, 0));
        }
        let mut aug = Self::zeros(n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, self.get(r, c).clone());
            }
            aug.set(r, n + r, S::one());
        }
        let (red, pivots) = aug.rref();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        let mut inv = Self::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                inv.set(r, c, red.get(r, n + c).clone());
            }
        }
        Some(inv)
    }

    /// Basis of the column space, taken from the pivot columns of `self`.
    pub fn column_space(&self) -> Vec<Vec<S>> {
        let (_, pivots) = self.rref();
        pivots.into_iter().map(|c| self.column(c)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Field::is_zero)
    }
}

/// Rank of a family of sparse vectors.
pub fn rank_of<S: Field>(vectors: &[SparseVector<S>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let window = vectors.iter().map(SparseVector::max_index).max().unwrap_or(0);
    Matrix::from_columns(vectors, window).rank()
}

/// Whether `x` lies in the span of `vectors`.
pub fn in_span<S: Field>(vectors: &[SparseVector<S>], x: &SparseVector<S>) -> bool {
    let mut all = vectors.to_vec();
    all.push(x.clone());
    rank_of(&all) == rank_of(vectors)
}

/// Basis (as columns) of the intersection of two column spans in `K^n`.
pub fn intersect_spans<S: Field>(u: &[Vec<S>], w: &[Vec<S>]) -> Vec<Vec<S>> {
    if u.is_empty() || w.is_empty() {
        return Vec::new();
    }
    let n = u[0].len();
    let mut rows = Vec::with_capacity(n);
    for r in 0..n {
        let mut row: Vec<S> = u.iter().map(|col| col[r].clone()).collect();
        row.extend(w.iter().map(|col| -col[r].clone()));
        rows.push(row);
    }
    let system = Matrix::from_rows(rows);
    let combos: Vec<Vec<S>> = system
        .nullspace()
        .into_iter()
        .map(|coef| {
            (0..n)
                .map(|r| u.iter().zip(&coef).fold(S::zero(), |acc, (col, c)| acc + col[r].clone() * c.clone()))
                .collect()
        })
        .collect();
    if combos.is_empty() {
        return combos;
    }
    let mut cols = Matrix::zeros(n, combos.len());
    for (j, c) in combos.iter().enumerate() {
        for (r, v) in c.iter().enumerate() {
            cols.set(r, j, v.clone());
        }
    }
    cols.column_space()
}
