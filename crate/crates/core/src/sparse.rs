//! Compressed-sparse-row matrices with real entries acting on complex data.
//!
//! Every operator in the model (drive patterns, collapse operators, the
//! decay generator) has real matrix elements, so only the state is complex.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseReal {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseReal {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);
        let mut indptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            indptr[r + 1] += 1;
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        SparseReal {
            rows,
            cols,
            indptr,
            indices: merged.iter().map(|t| t.1).collect(),
            values: merged.iter().map(|t| t.2).collect(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_triplets(rows, cols, &[])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.push((r, self.indices[k], self.values[k]));
            }
        }
        out
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        (self.indptr[row]..self.indptr[row + 1])
            .find(|&k| self.indices[k] == col)
            .map_or(0.0, |k| self.values[k])
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.cols, self.rows, &t)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &SparseReal) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut t = Vec::new();
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let mid = self.indices[k];
                for l in other.indptr[mid]..other.indptr[mid + 1] {
                    t.push((r, other.indices[l], self.values[k] * other.values[l]));
                }
            }
        }
        Self::from_triplets(self.rows, other.cols, &t)
    }

    pub fn add(&self, other: &SparseReal) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut t = self.triplets();
        t.extend(other.triplets());
        Self::from_triplets(self.rows, self.cols, &t)
    }

    /// Largest |A − Aᵀ| entry.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.triplets()
            .into_iter()
            .chain(t.triplets())
            .map(|(r, c, _)| (self.get(r, c) - t.get(r, c)).abs())
            .fold(0.0, f64::max)
    }

    /// `y += alpha · A x`.
    #[inline]
    pub fn matvec_add(&self, alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += x[self.indices[k]] * self.values[k];
            }
            *yr += alpha * acc;
        }
    }

    /// `Y += alpha · A X` for a row-major dense `X` with `width` columns.
    #[inline]
    pub fn mul_dense_add(&self, alpha: Complex64, x: &[Complex64], width: usize, y: &mut [Complex64]) {
        for r in 0..self.rows {
            let yr = &mut y[r * width..(r + 1) * width];
            for k in self.indptr[r]..self.indptr[r + 1] {
                let a = alpha * self.values[k];
                let xr = &x[self.indices[k] * width..(self.indices[k] + 1) * width];
                for (yv, xv) in yr.iter_mut().zip(xr) {
                    *yv += a * xv;
                }
            }
        }
    }

    /// Row indices holding at least one nonzero.
    pub fn nonempty_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .filter(|&r| self.indptr[r + 1] > self.indptr[r])
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.cols]; self.rows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }
}
