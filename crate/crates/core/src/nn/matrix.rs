use alloc::vec;
use alloc::vec::Vec;

/// Dense row-major matrix. Batches are stored one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_vec(1, 1, vec![value])
    }

    /// Column vector.
    pub fn column(data: Vec<f64>) -> Self {
        let rows = data.len();
        Self::from_vec(rows, 1, data)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|&x| f(x)).collect(),
        )
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.same_shape(other), "shape mismatch");
        Self::from_vec(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Columns `start..end` of every row.
    pub fn columns(&self, start: usize, end: usize) -> Self {
        let mut out = Matrix::zeros(self.rows, end - start);
        for r in 0..self.rows {
            out.row_mut(r).copy_from_slice(&self.row(r)[start..end]);
        }
        out
    }

    pub fn hconcat(parts: &[&Matrix]) -> Self {
        let rows = parts[0].rows;
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let mut c = 0;
            for p in parts {
                assert_eq!(p.rows, rows, "row mismatch in concat");
                out.row_mut(r)[c..c + p.cols].copy_from_slice(p.row(r));
                c += p.cols;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` where `op` optionally transposes.
pub(crate) fn gemm(
    alpha: f64,
    a: &Matrix,
    a_t: bool,
    b: &Matrix,
    b_t: bool,
    beta: f64,
    c: &mut Matrix,
) {
    let (m, k) = if a_t {
        (a.cols, a.rows)
    } else {
        (a.rows, a.cols)
    };
    let (kb, n) = if b_t {
        (b.cols, b.rows)
    } else {
        (b.rows, b.cols)
    };
    assert_eq!(k, kb, "inner dimensions");
    assert_eq!((c.rows, c.cols), (m, n), "output shape");
    let (rsa, csa) = if a_t {
        (1, a.cols as isize)
    } else {
        (a.cols as isize, 1)
    };
    let (rsb, csb) = if b_t {
        (1, b.cols as isize)
    } else {
        (b.cols as isize, 1)
    };
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the strides above describe the row-major buffers of `a`, `b`
    // and `c` exactly, and the shapes were checked.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows, b.cols);
    gemm(1.0, a, false, b, false, 0.0, &mut c);
    c
}

/// `c += a * w` where `w` is a row-major `a.cols × c.cols` block of a flat
/// parameter slice.
pub(crate) fn gemm_acc_block(a: &Matrix, w: &[f64], c: &mut Matrix) {
    assert_eq!(w.len(), a.cols * c.cols, "weight block shape");
    assert_eq!(a.rows, c.rows, "batch size");
    if a.rows == 0 || c.cols == 0 {
        return;
    }
    // SAFETY: `w` holds exactly `a.cols * c.cols` entries in row-major order.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            c.cols,
            1.0,
            a.data.as_ptr(),
            a.cols as isize,
            1,
            w.as_ptr(),
            c.cols as isize,
            1,
            1.0,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transposed_products_match_naive() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let b = Matrix::from_rows(&[[1.0, -1.0], [0.5, 2.0], [3.0, 0.0]]);
        let ab = matmul(&a, &b);
        assert_eq!(ab, Matrix::from_rows(&[[11.0, 3.0], [24.5, 6.0]]));
        let mut atab = Matrix::zeros(3, 3);
        gemm(1.0, &a, true, &a, false, 0.0, &mut atab);
        for i in 0..3 {
            for j in 0..3 {
                let naive = (0..2).map(|r| a.get(r, i) * a.get(r, j)).sum::<f64>();
                assert_eq!(atab.get(i, j), naive);
            }
        }
        let mut abt = Matrix::zeros(2, 3);
        gemm(1.0, &ab, false, &b, true, 0.0, &mut abt);
        assert_eq!(abt.get(1, 2), 24.5 * 3.0);
    }
}
