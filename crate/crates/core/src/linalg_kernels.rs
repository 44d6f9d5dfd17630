//! Small dense linear algebra: determinants with rank-one structure, the
//! Cramer-rule ratio identity, the second-order remainder of `√(1-|x|²)`, and
//! reflections taking a unit vector to the first coordinate axis.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Result, SchwarzError};

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(SchwarzError::domain("ragged rows"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Row vector times matrix, `v M`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "left_mul dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += vi * self[(i, j)];
            }
        }
        out
    }

    /// Matrix times column vector, `M v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Leading `k × k` block.
    pub fn leading(&self, k: usize) -> Self {
        let mut out = Self::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                out[(i, j)] = self[(i, j)];
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Determinant by LU factorization with partial pivoting.
    pub fn determinant(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        let n = self.rows;
        let mut lu = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| lu[i * n + col].abs().total_cmp(&lu[j * n + col].abs()))
                .unwrap_or(col);
            if lu[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let p = lu[col * n + col];
            det *= p;
            for i in col + 1..n {
                let f = lu[i * n + col] / p;
                if f == 0.0 {
                    continue;
                }
                for j in col + 1..n {
                    lu[i * n + j] -= f * lu[col * n + j];
                }
            }
        }
        det
    }

    /// Solves `M x = rhs` by Gaussian elimination with partial pivoting;
    /// `None` when a pivot vanishes.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(self.rows, self.cols, "solve with a non-square matrix");
        let n = self.rows;
        assert_eq!(rhs.len(), n, "right-hand side has the wrong length");
        let mut lu = self.data.clone();
        let mut x = rhs.to_vec();
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| lu[i * n + col].abs().total_cmp(&lu[j * n + col].abs()))?;
            if lu[pivot * n + col] == 0.0 {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot * n + j);
                }
                x.swap(col, pivot);
            }
            let p = lu[col * n + col];
            for i in col + 1..n {
                let f = lu[i * n + col] / p;
                for j in col..n {
                    lu[i * n + j] -= f * lu[col * n + j];
                }
                x[i] -= f * x[col];
            }
        }
        for i in (0..n).rev() {
            let tail: f64 = (i + 1..n).map(|j| lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - tail) / lu[i * n + i];
        }
        Some(x)
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
        f.debug_list().entries((0..self.rows).map(|i| self.row(i))).finish()
    }
}

/// Matrix `b I + A` where `A` has a free top-left entry `a11` and every other
/// entry `a_ij = -c_i c_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BorderedMatrixSpec {
    pub b: f64,
    pub a11: f64,
    pub c: Vec<f64>,
}

impl BorderedMatrixSpec {
    pub fn size(&self) -> usize {
        self.c.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let p = self.size();
        let mut m = Matrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                m[(i, j)] = if i == 0 && j == 0 { self.a11 } else { -self.c[i] * self.c[j] };
            }
            m[(i, i)] += self.b;
        }
        m
    }
}

/// Determinant of `b I + A` from its principal-minor expansion.
///
/// Every principal minor of order ≥ 3 of `A` vanishes, as does every 2×2
/// principal minor avoiding the first index, so only
/// `b^p + b^{p-1} tr A + b^{p-2} Σ_j det A[{1,j}]` survives.
pub fn bordered_det(spec: &BorderedMatrixSpec) -> f64 {
    let p = spec.size();
    match p {
        0 => 1.0,
        1 => spec.b + spec.a11,
        _ => {
            let c1 = spec.c[0];
            let tail = &spec.c[1..];
            let trace = spec.a11 - tail.iter().map(|c| c * c).sum::<f64>();
            let minors: f64 = tail
                .iter()
                .map(|cj| {
                    let ajj = -cj * cj;
                    let a1j = -c1 * cj;
                    spec.a11 * ajj - a1j * a1j
                })
                .sum();
            let bp2 = spec.b.powi(p as i32 - 2);
            bp2 * spec.b * spec.b + bp2 * spec.b * trace + bp2 * minors
        }
    }
}

/// Both sides of the identity `c·x + c_last = det(B) / det(A)` for a solution
/// of `A x + b = 0`, with `B = [[A, b], [c, c_last]]`.
pub fn cramer_ratio(
    a: &Matrix,
    x: &[f64],
    b: &[f64],
    c: &[f64],
    c_last: f64,
) -> Result<(f64, f64)> {
    let k = a.rows();
    if a.cols() != k || x.len() != k || b.len() != k || c.len() != k {
        return Err(SchwarzError::Precondition(format!(
            "cramer_ratio needs a square {k}x{k} matrix and length-{k} vectors"
        )));
    }
    let det_a = a.determinant();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    if det_a.abs() <= 1e-12 * scale {
        return Err(SchwarzError::Precondition(format!("matrix is singular (det = {det_a:e})")));
    }
    let ax = a.mul_vec(x);
    let residual = ax.iter().zip(b).map(|(u, v)| (u + v) * (u + v)).sum::<f64>().sqrt();
    let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let frob = (0..k).map(|i| a.row(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt();
    if residual > 1e-10 * (frob * x_norm + b_norm) {
        return Err(SchwarzError::Precondition(format!("A x + b = 0 fails (residual {residual:e})")));
    }

    let mut bordered = Matrix::zeros(k + 1, k + 1);
    for i in 0..k {
        for j in 0..k {
            bordered[(i, j)] = a[(i, j)];
        }
        bordered[(i, k)] = b[i];
        bordered[(k, i)] = c[i];
    }
    bordered[(k, k)] = c_last;

    let lhs = c.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() + c_last;
    Ok((lhs, bordered.determinant() / det_a))
}

/// Second-order remainder of `√(1-|·|²)` expanded at `y`:
/// `√(1-|y|²) - √(1-|x|²) - ⟨x-y, y⟩/√(1-|y|²)`, which is nonnegative by
/// concavity.
pub fn taylor_gap(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(SchwarzError::domain("taylor_gap needs vectors of equal length"));
    }
    let x_sq: f64 = x.iter().map(|v| v * v).sum();
    let y_sq: f64 = y.iter().map(|v| v * v).sum();
    if y_sq.sqrt() >= 1.0 - 1e-12 {
        return Err(SchwarzError::domain(format!("taylor_gap needs |y| < 1, got {}", y_sq.sqrt())));
    }
    if x_sq > 1.0 + 1e-12 {
        return Err(SchwarzError::domain(format!("taylor_gap needs |x| <= 1, got {}", x_sq.sqrt())));
    }
    let root_y = (1.0 - y_sq).sqrt();
    let root_x = (1.0 - x_sq).max(0.0).sqrt();
    let linear: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - yi) * yi).sum::<f64>() / root_y;
    Ok(root_y - root_x - linear)
}

/// Orthogonal `Q` with `v Q = e_0` for a unit row vector `v`.
///
/// `Q` is the Householder reflector along `w = v - e_0`. The first entry of
/// `w` is computed as `-|v_tail|²/(1 + v_0)` when `v_0 > 0` to avoid
/// cancellation, so `v = e_0` gives the identity exactly. For `v = -e_0` the
/// reflector is `diag(-1, 1, …, 1)`.
pub fn rotation_to_pole(v: &[f64]) -> Result<Matrix> {
    let d = v.len();
    if d == 0 {
        return Err(SchwarzError::domain("rotation_to_pole needs a non-empty vector"));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() >= 1e-12 {
        return Err(SchwarzError::domain(format!("rotation_to_pole needs a unit vector, got |v| = {norm}")));
    }
    let tail_sq: f64 = v[1..].iter().map(|x| x * x).sum();
    let mut w = v.to_vec();
    w[0] = if v[0] > 0.0 { -tail_sq / (1.0 + v[0]) } else { v[0] - 1.0 };
    let w_sq: f64 = w.iter().map(|x| x * x).sum();
    let mut q = Matrix::identity(d);
    if w_sq == 0.0 {
        return Ok(q);
    }
    for i in 0..d {
        for j in 0..d {
            q[(i, j)] -= 2.0 * w[i] * w[j] / w_sq;
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bordered_det_diagonal_case() {
        let spec = BorderedMatrixSpec { b: 1.7, a11: -0.4, c: vec![0.0; 5] };
        assert_abs_diff_eq!(bordered_det(&spec), 1.7f64.powi(4) * (1.7 - 0.4), epsilon = 1e-12);
    }

    #[test]
    fn bordered_det_two_by_two() {
        let spec = BorderedMatrixSpec { b: 1.0, a11: 0.0, c: vec![1.0, 1.0] };
        assert_abs_diff_eq!(spec.to_dense().determinant(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bordered_det(&spec), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn bordered_det_size_one() {
        let spec = BorderedMatrixSpec { b: 2.0, a11: 0.5, c: vec![3.0] };
        assert_eq!(bordered_det(&spec), 2.5);
    }

    #[test]
    fn cramer_identity_cases() {
        let a = Matrix::identity(3);
        let x = [0.3, -1.2, 2.0];
        let b: Vec<f64> = x.iter().map(|v| -v).collect();
        let (lhs, rhs) = cramer_ratio(&a, &x, &b, &[1.0, 2.0, 3.0], 0.5).unwrap();
        assert_abs_diff_eq!(lhs, 0.3 - 2.4 + 6.0 + 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);

        let (lhs, rhs) = cramer_ratio(&a, &x, &b, &[0.0; 3], 1.0).unwrap();
        assert_eq!(lhs, 1.0);
        assert_abs_diff_eq!(rhs, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cramer_rejects_bad_input() {
        let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            cramer_ratio(&singular, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0], 0.0),
            Err(SchwarzError::Precondition(_))
        ));
        let a = Matrix::identity(2);
        assert!(matches!(
            cramer_ratio(&a, &[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0], 0.0),
            Err(SchwarzError::Precondition(_))
        ));
    }

    #[test]
    fn taylor_gap_examples() {
        assert_abs_diff_eq!(taylor_gap(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(taylor_gap(&[1.0], &[0.0]).unwrap(), 1.0, epsilon = 1e-16);
        assert!(taylor_gap(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn rotation_special_cases() {
        assert_eq!(rotation_to_pole(&[1.0, 0.0, 0.0]).unwrap(), Matrix::identity(3));
        let q = rotation_to_pole(&[-1.0, 0.0, 0.0]).unwrap();
        let mut involution = Matrix::identity(3);
        involution[(0, 0)] = -1.0;
        assert_eq!(q, involution);
        assert_eq!(q.matmul(&q), Matrix::identity(3));
        assert!(rotation_to_pole(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn rotation_aligns_general_vector() {
        let v = [0.36, -0.48, 0.8];
        let q = rotation_to_pole(&v).unwrap();
        let image = q.left_mul(&v);
        assert_abs_diff_eq!(image[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(image[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(image[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn lu_determinant_small() {
        let m = Matrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]).unwrap();
        // 0(1) - 2(1 - 0) + 1(0 - 3) = -5
        assert_abs_diff_eq!(m.determinant(), -5.0, epsilon = 1e-14);
        let x = m.solve(&[3.0, 2.0, 4.0]).unwrap();
        for (got, want) in m.mul_vec(&x).iter().zip([3.0, 2.0, 4.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
        assert!(Matrix::zeros(2, 2).solve(&[1.0, 1.0]).is_none());
    }
}
