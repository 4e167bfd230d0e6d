//! Row-major dense matrix used for batches and layer weights.

use crate::error::{ReadoutError, Result};

#[derive(Debug, Clone, PartialEq)]
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(ReadoutError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Stack equally long rows. An empty iterator yields a 0 x 0 matrix.
    pub fn from_rows<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut data = Vec::new();
        let mut cols = None;
        let mut n = 0;
        for row in rows {
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(ReadoutError::DimensionMismatch {
                        expected: c,
                        got: row.len(),
                    })
                }
                _ => {}
            }
            data.extend_from_slice(row);
            n += 1;
        }
        Ok(Matrix {
            rows: n,
            cols: cols.unwrap_or(0),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// `out = a * b^T` where `a` is (m x k) and `b` is (n x k).
    pub fn mul_transposed_into(a: &Matrix, b: &Matrix, out: &mut Matrix) {
        assert_eq!(a.cols, b.cols);
        assert_eq!(out.rows, a.rows);
        assert_eq!(out.cols, b.rows);
        gemm(
            a.rows,
            a.cols,
            b.rows,
            1.0,
            (&a.data, a.cols as isize, 1),
            (&b.data, 1, b.cols as isize),
            0.0,
            (&mut out.data, out.cols as isize, 1),
        );
    }
}

/// Thin safe wrapper over `matrixmultiply::dgemm`:
/// `c = alpha * a(m x k) * b(k x n) + beta * c`, each operand given as
/// `(slice, row_stride, col_stride)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: (&[f64], isize, isize),
    b: (&[f64], isize, isize),
    beta: f64,
    c: (&mut [f64], isize, isize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let extent = |rows: usize, cols: usize, rs: isize, cs: isize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows as isize - 1) * rs + (cols as isize - 1) * cs + 1
        }
    };
    assert!(a.0.len() as isize >= extent(m, k, a.1, a.2));
    assert!(b.0.len() as isize >= extent(k, n, b.1, b.2));
    assert!(c.0.len() as isize >= extent(m, n, c.1, c.2));
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is a unique borrow that cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            beta,
            c.0.as_mut_ptr(),
            c.1,
            c.2,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mul_transposed_matches_naive() {
        let a = Matrix::from_vec(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Matrix::from_vec(2, 3, vec![1., 0., -1., 2., 1., 0.]).unwrap();
        let mut out = Matrix::zeros(2, 2);
        Matrix::mul_transposed_into(&a, &b, &mut out);
        assert_eq!(out.as_slice(), &[-2., 4., -2., 13.]);
    }

    #[test]
    fn from_rows_rejects_ragged() {
        let r1 = [1.0, 2.0];
        let r2 = [1.0];
        assert!(Matrix::from_rows([&r1[..], &r2[..]]).is_err());
    }
}
