use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
///
/// Activations are stored feature-major: one row per unit, one column per
/// sample in the batch.
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Contract(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Contract("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
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

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Clone, Copy)]
struct View<'a> {
    rows: usize,
    cols: usize,
    data: &'a [f64],
    row_stride: isize,
    col_stride: isize,
}

impl<'a> View<'a> {
    fn plain(m: &'a Matrix) -> Self {
        View {
            rows: m.rows,
            cols: m.cols,
            data: &m.data,
            row_stride: m.cols as isize,
            col_stride: 1,
        }
    }

    fn transposed(m: &'a Matrix) -> Self {
        View {
            rows: m.cols,
            cols: m.rows,
            data: &m.data,
            row_stride: 1,
            col_stride: m.cols as isize,
        }
    }
}

/// `c = a·b + beta·c` on strided views.
fn gemm(a: View<'_>, b: View<'_>, beta: f64, c: &mut Matrix) {
    assert_eq!(a.cols, b.rows, "inner dimensions");
    assert_eq!((c.rows, c.cols), (a.rows, b.cols), "output shape");
    if c.data.is_empty() {
        return;
    }
    if a.cols == 0 {
        for v in &mut c.data {
            *v *= beta;
        }
        return;
    }
    // SAFETY: the views cover exactly `rows x cols` elements of their
    // backing slices with the given strides, and `c` is a distinct,
    // correctly sized, exclusively borrowed buffer.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            1.0,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

/// `a · b`
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows, b.cols);
    gemm(View::plain(a), View::plain(b), 0.0, &mut c);
    c
}

/// `aᵀ · b`
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.cols, b.cols);
    gemm(View::transposed(a), View::plain(b), 0.0, &mut c);
    c
}

/// `a · bᵀ`
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows, b.rows);
    gemm(View::plain(a), View::transposed(b), 0.0, &mut c);
    c
}

/// `acc += a · bᵀ`
pub fn matmul_nt_acc(a: &Matrix, b: &Matrix, acc: &mut Matrix) {
    gemm(View::plain(a), View::transposed(b), 1.0, acc);
}

/// `acc += a · b`
pub fn matmul_acc(a: &Matrix, b: &Matrix, acc: &mut Matrix) {
    gemm(View::plain(a), View::plain(b), 1.0, acc);
}

/// `acc += aᵀ · b`
pub fn matmul_tn_acc(a: &Matrix, b: &Matrix, acc: &mut Matrix) {
    gemm(View::transposed(a), View::plain(b), 1.0, acc);
}

/// Adds `bias[i]` to every entry of row `i`.
pub fn add_row_bias(m: &mut Matrix, bias: &[f64]) {
    for (i, &b) in bias.iter().enumerate() {
        for v in m.row_mut(i) {
            *v += b;
        }
    }
}

/// Sums each row (over the batch), in column order.
pub fn row_sums(m: &Matrix) -> Vec<f64> {
    (0..m.rows).map(|i| m.row(i).iter().sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut c = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                for p in 0..a.cols() {
                    c[(i, j)] += a[(i, p)] * b[(p, j)];
                }
            }
        }
        c
    }

    fn transpose(m: &Matrix) -> Matrix {
        let mut t = Matrix::zeros(m.cols(), m.rows());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                t[(j, i)] = m[(i, j)];
            }
        }
        t
    }

    fn filled(rows: usize, cols: usize, seed: f64) -> Matrix {
        let data = (0..rows * cols).map(|k| ((k as f64 + seed) * 0.37).sin()).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn close(a: &Matrix, b: &Matrix) -> bool {
        a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn products_match_naive() {
        let a = filled(5, 7, 1.0);
        let b = filled(7, 3, 2.0);
        assert!(close(&matmul(&a, &b), &naive(&a, &b)));
        let at = transpose(&a);
        assert!(close(&matmul_tn(&at, &b), &naive(&a, &b)));
        let bt = transpose(&b);
        assert!(close(&matmul_nt(&a, &bt), &naive(&a, &b)));
        let mut acc = naive(&a, &b);
        matmul_acc(&a, &b, &mut acc);
        assert!(close(&acc, &naive(&a, &b).map(|v| 2.0 * v)));
    }

    #[test]
    fn shape_checked() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_rows(&[&[1.0, 2.0], &[3.0]]).is_err());
    }
}
