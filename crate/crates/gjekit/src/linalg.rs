//! Stack-allocated vectors and matrices of dimension at most [`MAX_DIM`].
//!
//! Every chart in the toolkit has dimension ≤ 3 and the joint target Newton
//! system has one extra unknown, so four slots suffice and no evaluation in
//! the hot loops touches the heap.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::scalar::Real;

pub const MAX_DIM: usize = 4;

#[derive(Clone, Copy, PartialEq)]
pub struct Vector<T> {
    len: usize,
    data: [T; MAX_DIM],
}

impl<T: Real> Vector<T> {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_DIM, "dimension {len} exceeds {MAX_DIM}");
        Vector { len, data: [T::zero(); MAX_DIM] }
    }

    pub fn from_slice(s: &[T]) -> Self {
        let mut v = Self::zeros(s.len());
        v.data[..s.len()].copy_from_slice(s);
        v
    }

    pub fn from_f64(s: &[f64]) -> Self {
        let mut v = Self::zeros(s.len());
        for (d, &x) in v.data.iter_mut().zip(s) {
            *d = T::lit(x);
        }
        v
    }

    pub fn from_fn(len: usize, f: impl Fn(usize) -> T) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            v.data[i] = f(i);
        }
        v
    }

    pub fn unit(len: usize, k: usize) -> Self {
        let mut v = Self::zeros(len);
        v.data[k] = T::one();
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data[..self.len]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.as_slice().iter().map(|x| x.as_f64()).collect()
    }

    pub fn cast<U: Real>(&self) -> Vector<U> {
        Vector::from_fn(self.len, |i| U::lit(self.data[i].as_f64()))
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        debug_assert_eq!(self.len, o.len);
        let mut s = T::zero();
        for i in 0..self.len {
            s += self.data[i] * o.data[i];
        }
        s
    }

    #[inline]
    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.as_slice().iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn scale(&self, a: T) -> Self {
        Vector::from_fn(self.len, |i| self.data[i] * a)
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    /// `self + a * o`
    pub fn axpy(&self, a: T, o: &Self) -> Self {
        Vector::from_fn(self.len, |i| self.data[i] + a * o.data[i])
    }

    /// `(1 - s) self + s o`
    pub fn lerp(&self, o: &Self, s: T) -> Self {
        Vector::from_fn(self.len, |i| (T::one() - s) * self.data[i] + s * o.data[i])
    }

    pub fn normalized(&self) -> Self {
        self.scale(T::one() / self.norm())
    }

    pub fn cross(&self, o: &Self) -> Self {
        assert!(self.len == 3 && o.len == 3);
        let (a, b) = (&self.data, &o.data);
        Vector::from_slice(&[
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ])
    }

    /// Concatenation; the result must still fit in `MAX_DIM`.
    pub fn concat(&self, o: &Self) -> Self {
        let mut v = Self::zeros(self.len + o.len);
        v.data[..self.len].copy_from_slice(self.as_slice());
        v.data[self.len..self.len + o.len].copy_from_slice(o.as_slice());
        v
    }

    pub fn head(&self, n: usize) -> Self {
        Vector::from_slice(&self.data[..n])
    }
}

impl<T: Real> Index<usize> for Vector<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        debug_assert!(i < self.len);
        &self.data[i]
    }
}

impl<T: Real> IndexMut<usize> for Vector<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        debug_assert!(i < self.len);
        &mut self.data[i]
    }
}

impl<T: Real> Add for Vector<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        debug_assert_eq!(self.len, o.len);
        Vector::from_fn(self.len, |i| self.data[i] + o.data[i])
    }
}

impl<T: Real> Sub for Vector<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        debug_assert_eq!(self.len, o.len);
        Vector::from_fn(self.len, |i| self.data[i] - o.data[i])
    }
}

impl<T: Real> AddAssign for Vector<T> {
    fn add_assign(&mut self, o: Self) {
        for i in 0..self.len {
            self.data[i] += o.data[i];
        }
    }
}

impl<T: Real> SubAssign for Vector<T> {
    fn sub_assign(&mut self, o: Self) {
        for i in 0..self.len {
            self.data[i] -= o.data[i];
        }
    }
}

impl<T: Real> Neg for Vector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul<T> for Vector<T> {
    type Output = Self;
    fn mul(self, a: T) -> Self {
        self.scale(a)
    }
}

impl<T: fmt::Debug> fmt::Debug for Vector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data[..self.len]).finish()
    }
}

/// Dense row-major matrix with at most `MAX_DIM` rows and columns.
#[derive(Clone, Copy, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: [[T; MAX_DIM]; MAX_DIM],
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows <= MAX_DIM && cols <= MAX_DIM);
        Matrix { rows, cols, data: [[T::zero(); MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i][i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    /// `a bᵀ`
    pub fn outer(a: &Vector<T>, b: &Vector<T>) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.data[j][i])
    }

    pub fn row(&self, i: usize) -> Vector<T> {
        Vector::from_slice(&self.data[i][..self.cols])
    }

    pub fn col(&self, j: usize) -> Vector<T> {
        Vector::from_fn(self.rows, |i| self.data[i][j])
    }

    pub fn matvec(&self, v: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.cols, v.len());
        Vector::from_fn(self.rows, |i| {
            let mut s = T::zero();
            for j in 0..self.cols {
                s += self.data[i][j] * v[j];
            }
            s
        })
    }

    pub fn matmul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.cols, o.rows);
        Self::from_fn(self.rows, o.cols, |i, j| {
            let mut s = T::zero();
            for k in 0..self.cols {
                s += self.data[i][k] * o.data[k][j];
            }
            s
        })
    }

    pub fn scale(&self, a: T) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self.data[i][j] * a)
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert!(self.rows == o.rows && self.cols == o.cols);
        Self::from_fn(self.rows, self.cols, |i, j| self.data[i][j] + o.data[i][j])
    }

    pub fn sub(&self, o: &Self) -> Self {
        debug_assert!(self.rows == o.rows && self.cols == o.cols);
        Self::from_fn(self.rows, self.cols, |i, j| self.data[i][j] - o.data[i][j])
    }

    /// `⟨M v, w⟩`
    pub fn bilinear(&self, v: &Vector<T>, w: &Vector<T>) -> T {
        self.matvec(w).dot(v)
    }

    pub fn norm_max(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                m = m.max(self.data[i][j].abs());
            }
        }
        m
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix::from_fn(self.rows, self.cols, |i, j| U::lit(self.data[i][j].as_f64()))
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.data[i][j].as_f64()).collect())
            .collect()
    }

    /// LU factorisation with partial pivoting. Returns `None` for a singular
    /// (or numerically singular) matrix.
    pub fn lu(&self) -> Option<Lu<T>> {
        assert_eq!(self.rows, self.cols, "LU of a non-square matrix");
        let n = self.rows;
        let mut a = self.data;
        let mut perm = [0usize; MAX_DIM];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = i;
        }
        let mut sign = T::one();
        let scale = self.norm_max();
        if scale == T::zero() || !scale.is_finite() {
            return None;
        }
        for k in 0..n {
            let mut piv = k;
            for i in k + 1..n {
                if a[i][k].abs() > a[piv][k].abs() {
                    piv = i;
                }
            }
            if a[piv][k].abs() <= scale * T::epsilon() * T::lit(8.0) {
                return None;
            }
            if piv != k {
                a.swap(piv, k);
                perm.swap(piv, k);
                sign = -sign;
            }
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                a[i][k] = f;
                for j in k + 1..n {
                    let akj = a[k][j];
                    a[i][j] -= f * akj;
                }
            }
        }
        Some(Lu { n, a, perm, sign })
    }

    pub fn solve(&self, b: &Vector<T>) -> Option<Vector<T>> {
        self.lu().map(|lu| lu.solve(b))
    }

    pub fn det(&self) -> T {
        match self.lu() {
            Some(lu) => lu.det(),
            None => self.det_exact_small(),
        }
    }

    // Cofactor fallback so that singular matrices report a (tiny) determinant
    // rather than a hard zero from the pivot guard.
    fn det_exact_small(&self) -> T {
        let m = &self.data;
        match self.rows {
            0 => T::one(),
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            3 => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
            n => {
                let mut s = T::zero();
                for j in 0..n {
                    let minor = Matrix::from_fn(n - 1, n - 1, |r, c| {
                        m[r + 1][if c < j { c } else { c + 1 }]
                    });
                    let term = m[0][j] * minor.det_exact_small();
                    s += if j % 2 == 0 { term } else { -term };
                }
                s
            }
        }
    }

    pub fn inverse(&self) -> Option<Self> {
        let lu = self.lu()?;
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for j in 0..n {
            let c = lu.solve(&Vector::unit(n, j));
            for i in 0..n {
                inv.data[i][j] = c[i];
            }
        }
        Some(inv)
    }

    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self.data[i][j] + self.data[j][i]) * T::lit(0.5)
        })
    }
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i][j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i][j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries((0..self.rows).map(|i| &self.data[i][..self.cols]))
            .finish()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Lu<T> {
    n: usize,
    a: [[T; MAX_DIM]; MAX_DIM],
    perm: [usize; MAX_DIM],
    sign: T,
}

impl<T: Real> Lu<T> {
    pub fn solve(&self, b: &Vector<T>) -> Vector<T> {
        let n = self.n;
        let mut x = Vector::from_fn(n, |i| b[self.perm[i]]);
        for i in 0..n {
            for k in 0..i {
                let v = self.a[i][k] * x[k];
                x[i] -= v;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let v = self.a[i][k] * x[k];
                x[i] -= v;
            }
            x[i] /= self.a[i][i];
        }
        x
    }

    pub fn det(&self) -> T {
        (0..self.n).fold(self.sign, |d, i| d * self.a[i][i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solve_and_det_3x3() {
        let m = Matrix::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 4.0]]);
        assert_relative_eq!(m.det(), 18.0, epsilon = 1e-12);
        let b = Vector::from_slice(&[1.0, 2.0, 3.0]);
        let x = m.solve(&b).unwrap();
        let r = m.matvec(&x) - b;
        assert!(r.norm_inf() < 1e-14);
    }

    #[test]
    fn singular_matrix_has_no_lu() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(m.lu().is_none());
        assert_eq!(m.det(), 0.0);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = Matrix::from_rows(&[
            &[4.0, 1.0, 0.0, 0.5],
            &[1.0, 3.0, 1.0, 0.0],
            &[0.0, 1.0, 2.0, 0.3],
            &[0.5, 0.0, 0.3, 1.0],
        ]);
        let p = m.matmul(&m.inverse().unwrap());
        assert!(p.sub(&Matrix::identity(4)).norm_max() < 1e-14);
    }

    #[test]
    fn cross_product_orientation() {
        let ex = Vector::<f64>::unit(3, 0);
        let ey = Vector::<f64>::unit(3, 1);
        assert_eq!(ex.cross(&ey), Vector::unit(3, 2));
    }
}
