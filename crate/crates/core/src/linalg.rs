//! Small dense linear algebra: the systems here are at most a handful of rows
//! wide (regression Gram matrices, covariances of a few estimates).

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out = Matrix::zeros(self.rows, other.cols);
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

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// `(A + A') / 2`.
    pub fn symmetrized(&self) -> Matrix {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// Quadratic form `v' A v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        v.iter().zip(self.matvec(v)).map(|(a, b)| a * b).sum()
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

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
fn solve_many(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows;
    if a.cols != n || b.rows != n {
        return Err(Error::Numeric("solve: dimension mismatch".into()));
    }
    let mut m = a.clone();
    let mut x = b.clone();
    let scale = m.data.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Numeric("solve: zero matrix".into()));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        if m[(pivot, col)].abs() <= scale * 1e-15 {
            return Err(Error::Numeric("solve: matrix is singular".into()));
        }
        if pivot != col {
            for j in 0..n {
                m.data.swap(pivot * n + j, col * n + j);
            }
            for j in 0..x.cols {
                x.data.swap(pivot * x.cols + j, col * x.cols + j);
            }
        }
        let p = m[(col, col)];
        for row in col + 1..n {
            let f = m[(row, col)] / p;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[(row, j)] -= f * m[(col, j)];
            }
            for j in 0..x.cols {
                let v = x[(col, j)];
                x[(row, j)] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        for j in 0..x.cols {
            let mut s = x[(col, j)];
            for k in col + 1..n {
                s -= m[(col, k)] * x[(k, j)];
            }
            x[(col, j)] = s / m[(col, col)];
        }
    }
    Ok(x)
}

pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = Matrix {
        rows: b.len(),
        cols: 1,
        data: b.to_vec(),
    };
    Ok(solve_many(a, &rhs)?.data)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve_many(a, &Matrix::identity(a.rows))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (ascending) and the matching eigenvectors as columns.
pub fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows;
    let mut m = a.symmetrized();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let total: f64 = m.data.iter().map(|x| x * x).sum();
        if off <= total * 1e-32 || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new)] = v[(k, old)];
        }
    }
    (values, vectors)
}

pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    if a.rows == 3 {
        symmetric_eigenvalues_3x3(a).to_vec()
    } else {
        symmetric_eigen(a).0
    }
}

/// Eigenvalues (ascending) of a symmetric 3x3 matrix from the trigonometric
/// solution of its characteristic cubic, falling back to Jacobi rotations when
/// the closed form loses accuracy.
pub fn symmetric_eigenvalues_3x3(a: &Matrix) -> [f64; 3] {
    assert!(a.rows == 3 && a.cols == 3);
    let scale = a.data.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return [0.0; 3];
    }
    // work on A / scale so entries of order 1e6 do not overflow the cubic
    let m = a.scale(1.0 / scale);
    let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    let q = (m[(0, 0)] + m[(1, 1)] + m[(2, 2)]) / 3.0;
    let mut eig = if p1 == 0.0 {
        let mut d = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        d.sort_by(f64::total_cmp);
        d
    } else {
        let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = m.clone();
        for i in 0..3 {
            b[(i, i)] -= q;
        }
        let b = b.scale(1.0 / p);
        let det_b = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
            - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
            + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
        let r = (det_b / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        let mut e = [e1, e2, e3];
        e.sort_by(f64::total_cmp);
        e
    };
    // the smallest root suffers cancellation when the matrix is nearly
    // singular; det = product of eigenvalues pins it down, otherwise use Jacobi
    let det = determinant_3x3(&m);
    let largest = eig[2].abs().max(eig[1].abs());
    if eig[0].abs() < 1e-6 * largest {
        if eig[1] * eig[2] != 0.0 && det.abs() > 0.0 {
            eig[0] = det / (eig[1] * eig[2]);
        } else {
            let (v, _) = symmetric_eigen(&m);
            eig = [v[0], v[1], v[2]];
        }
    }
    [eig[0] * scale, eig[1] * scale, eig[2] * scale]
}

pub fn determinant_3x3(m: &Matrix) -> f64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// Symmetric positive semi-definite square root via the eigen-decomposition.
pub fn symmetric_sqrt(a: &Matrix) -> Matrix {
    let (vals, vecs) = symmetric_eigen(a);
    let d = Matrix::from_diag(&vals.iter().map(|v| v.max(0.0).sqrt()).collect::<Vec<_>>());
    vecs.matmul(&d).matmul(&vecs.transpose())
}

/// Spectral condition number of a symmetric matrix after rescaling it to unit
/// diagonal, so that badly scaled but well-posed designs are not flagged.
pub fn equilibrated_condition(a: &Matrix) -> f64 {
    let n = a.rows;
    let d: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    if d.iter().any(|v| *v <= 0.0) {
        return f64::INFINITY;
    }
    let mut s = a.clone();
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] /= (d[i] * d[j]).sqrt();
        }
    }
    let vals = symmetric_eigen(&s).0;
    let min = vals[0];
    let max = vals[n - 1];
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
