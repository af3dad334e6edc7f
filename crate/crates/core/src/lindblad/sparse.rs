use num_complex::Complex64;

/// Square complex matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        SparseMatrix {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Assemble from `(row, col, value)` entries; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, Complex64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside {dim}x{dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix { dim, row_ptr, cols, vals }.pruned()
    }

    fn pruned(self) -> Self {
        if self.vals.iter().all(|v| *v != Complex64::new(0.0, 0.0)) {
            return self;
        }
        let mut entries = Vec::with_capacity(self.vals.len());
        for r in 0..self.dim {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[p] != Complex64::new(0.0, 0.0) {
                    entries.push((r, self.cols[p], self.vals[p]));
                }
            }
        }
        let mut row_ptr = vec![0; self.dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
        }
        for r in 0..self.dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            dim: self.dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (r, self.cols[p], self.vals[p]))
        })
    }

    pub fn adjoint(&self) -> Self {
        SparseMatrix::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        SparseMatrix::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (r, c, v * factor)).collect())
    }

    pub fn add(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.dim, other.dim);
        SparseMatrix::from_triplets(self.dim, self.triplets().chain(other.triplets()).collect())
    }

    pub fn matmul(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut entries = Vec::new();
        for r in 0..self.dim {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let k = self.cols[p];
                for q in other.row_ptr[k]..other.row_ptr[k + 1] {
                    entries.push((r, other.cols[q], self.vals[p] * other.vals[q]));
                }
            }
        }
        SparseMatrix::from_triplets(self.dim, entries)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim * self.dim];
        for (r, c, v) in self.triplets() {
            out[r * self.dim + c] = v;
        }
        out
    }

    /// `out = self · b` for a row-major dense `dim × dim` matrix `b`.
    pub fn mul_dense(&self, b: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim;
        debug_assert_eq!(b.len(), d * d);
        debug_assert_eq!(out.len(), d * d);
        for r in 0..d {
            let out_row = &mut out[r * d..(r + 1) * d];
            out_row.fill(Complex64::new(0.0, 0.0));
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[p];
                let b_row = &b[self.cols[p] * d..(self.cols[p] + 1) * d];
                for (o, x) in out_row.iter_mut().zip(b_row) {
                    *o += v * x;
                }
            }
        }
    }

    /// `y = self · x` for a vector.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|p| self.vals[p] * x[self.cols[p]])
                    .sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dense_mul(a: &[Complex64], b: &[Complex64], d: usize) -> Vec<Complex64> {
        let mut out = vec![c(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                for j in 0..d {
                    out[i * d + j] += a[i * d + k] * b[k * d + j];
                }
            }
        }
        out
    }

    fn sample() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            vec![
                (0, 1, c(1.0, 2.0)),
                (2, 0, c(-0.5, 0.0)),
                (1, 1, c(0.0, 3.0)),
                (0, 1, c(1.0, 0.0)),
                (2, 2, c(0.0, 0.0)),
            ],
        )
    }

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let m = sample();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.to_dense()[1], c(2.0, 2.0));
    }

    #[test]
    fn products_match_dense() {
        let a = sample();
        let b: Vec<Complex64> = (0..9).map(|i| c(i as f64 * 0.3 - 1.0, 1.0 / (i as f64 + 1.0))).collect();
        let mut out = vec![c(0.0, 0.0); 9];
        a.mul_dense(&b, &mut out);
        let expected = dense_mul(&a.to_dense(), &b, 3);
        for (x, y) in out.iter().zip(&expected) {
            assert!((x - y).norm() < 1e-14);
        }
        let sq = a.matmul(&a).to_dense();
        let expected = dense_mul(&a.to_dense(), &a.to_dense(), 3);
        assert_eq!(sq, expected);
    }

    #[test]
    fn adjoint_conjugates_and_transposes() {
        let a = sample();
        let ad = a.adjoint().to_dense();
        let dense = a.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(ad[i * 3 + j], dense[j * 3 + i].conj());
            }
        }
    }
}
