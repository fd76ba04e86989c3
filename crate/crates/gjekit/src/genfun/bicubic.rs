//! Bicubic Hermite interpolation of tabulated height functions.
//!
//! Node derivatives come from second-order differences (central inside,
//! one-sided at the border), so quadratics are reproduced exactly.

use crate::error::{GjeError, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Bicubic<T> {
    lo: [T; 2],
    step: [T; 2],
    nx: usize,
    ny: usize,
    f: Vec<T>,
    fx: Vec<T>,
    fy: Vec<T>,
    fxy: Vec<T>,
}

fn diff<T: Real>(v: &[T], i: usize, h: T) -> T {
    let n = v.len();
    let two = T::lit(2.0);
    if n < 3 {
        return (v[n - 1] - v[0]) / (h * T::lit((n - 1).max(1) as f64));
    }
    if i == 0 {
        (-T::lit(3.0) * v[0] + T::lit(4.0) * v[1] - v[2]) / (two * h)
    } else if i == n - 1 {
        (T::lit(3.0) * v[n - 1] - T::lit(4.0) * v[n - 2] + v[n - 3]) / (two * h)
    } else {
        (v[i + 1] - v[i - 1]) / (two * h)
    }
}

impl<T: Real> Bicubic<T> {
    /// `values[j * nx + i]` is the height at `lo + (i·Δx, j·Δy)`.
    pub fn new(lo: [f64; 2], hi: [f64; 2], nx: usize, ny: usize, values: &[f64]) -> Result<Self> {
        if nx < 2 || ny < 2 || values.len() != nx * ny {
            return Err(GjeError::Config(format!(
                "tabulated grid needs nx, ny ≥ 2 and nx·ny values (got {nx}×{ny}, {})",
                values.len()
            )));
        }
        if !(hi[0] > lo[0] && hi[1] > lo[1]) || values.iter().any(|v| !v.is_finite()) {
            return Err(GjeError::Config("tabulated grid bounds or values are invalid".into()));
        }
        let step = [T::lit((hi[0] - lo[0]) / (nx - 1) as f64), T::lit((hi[1] - lo[1]) / (ny - 1) as f64)];
        let f: Vec<T> = values.iter().map(|&v| T::lit(v)).collect();
        let mut fx = vec![T::zero(); nx * ny];
        let mut fy = vec![T::zero(); nx * ny];
        let mut fxy = vec![T::zero(); nx * ny];
        for j in 0..ny {
            let row = &f[j * nx..(j + 1) * nx];
            for i in 0..nx {
                fx[j * nx + i] = diff(row, i, step[0]);
            }
        }
        let mut col = vec![T::zero(); ny];
        let mut colx = vec![T::zero(); ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = f[j * nx + i];
                colx[j] = fx[j * nx + i];
            }
            for j in 0..ny {
                fy[j * nx + i] = diff(&col, j, step[1]);
                fxy[j * nx + i] = diff(&colx, j, step[1]);
            }
        }
        Ok(Bicubic { lo: [T::lit(lo[0]), T::lit(lo[1])], step, nx, ny, f, fx, fy, fxy })
    }

    /// Value, gradient and Hessian at `p`. Points outside the table are
    /// extrapolated from the border patch.
    pub fn eval(&self, p: &Vector<T>) -> (T, Vector<T>, Matrix<T>) {
        let locate = |x: T, lo: T, h: T, n: usize| -> (usize, T) {
            let t = (x - lo) / h;
            let k = t.floor().to_isize().unwrap_or(0).clamp(0, n as isize - 2) as usize;
            (k, t - T::lit(k as f64))
        };
        let (i, s) = locate(p[0], self.lo[0], self.step[0], self.nx);
        let (j, t) = locate(p[1], self.lo[1], self.step[1], self.ny);
        // Hermite basis and its first two derivatives: [value, d, dd].
        let basis = |u: T| -> [[T; 3]; 4] {
            let (u2, u3) = (u * u, u * u * u);
            let c = |a: f64| T::lit(a);
            [
                [c(2.0) * u3 - c(3.0) * u2 + c(1.0), c(6.0) * u2 - c(6.0) * u, c(12.0) * u - c(6.0)],
                [-c(2.0) * u3 + c(3.0) * u2, -c(6.0) * u2 + c(6.0) * u, -c(12.0) * u + c(6.0)],
                [u3 - c(2.0) * u2 + u, c(3.0) * u2 - c(4.0) * u + c(1.0), c(6.0) * u - c(4.0)],
                [u3 - u2, c(3.0) * u2 - c(2.0) * u, c(6.0) * u - c(2.0)],
            ]
        };
        let bs = basis(s);
        let bt = basis(t);
        let (hx, hy) = (self.step[0], self.step[1]);
        // accum[a][b] = ∂ˢᵃ ∂ᵗᵇ of the patch in local coordinates.
        let mut acc = [[T::zero(); 3]; 3];
        for di in 0..2 {
            for dj in 0..2 {
                let k = (j + dj) * self.nx + (i + di);
                let coeffs = [
                    (self.f[k], di, dj),
                    (self.fx[k] * hx, 2 + di, dj),
                    (self.fy[k] * hy, di, 2 + dj),
                    (self.fxy[k] * hx * hy, 2 + di, 2 + dj),
                ];
                for (c, a, b) in coeffs {
                    for (da, row) in acc.iter_mut().enumerate() {
                        for (db, v) in row.iter_mut().enumerate() {
                            if da + db <= 2 {
                                *v += c * bs[a][da] * bt[b][db];
                            }
                        }
                    }
                }
            }
        }
        let g = Vector::from_slice(&[acc[1][0] / hx, acc[0][1] / hy]);
        let h = Matrix::from_rows(&[
            &[acc[2][0] / (hx * hx), acc[1][1] / (hx * hy)],
            &[acc[1][1] / (hx * hy), acc[0][2] / (hy * hy)],
        ]);
        (acc[0][0], g, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_quadratics() {
        let q = |x: f64, y: f64| 0.3 * x * x - 0.7 * x * y + 1.1 * y * y + 0.2 * x - y + 0.5;
        let (nx, ny) = (9, 7);
        let (lo, hi) = ([-1.0, -0.5], [1.0, 1.5]);
        let mut vals = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (nx - 1) as f64;
                let y = lo[1] + (hi[1] - lo[1]) * j as f64 / (ny - 1) as f64;
                vals[j * nx + i] = q(x, y);
            }
        }
        let b = Bicubic::<f64>::new(lo, hi, nx, ny, &vals).unwrap();
        for &(x, y) in &[(0.13, 0.77), (-0.9, -0.4), (0.99, 1.45), (0.0, 0.5)] {
            let (v, g, h) = b.eval(&Vector::from_slice(&[x, y]));
            assert!((v - q(x, y)).abs() < 1e-12);
            assert!((g[0] - (0.6 * x - 0.7 * y + 0.2)).abs() < 1e-11);
            assert!((g[1] - (-0.7 * x + 2.2 * y - 1.0)).abs() < 1e-11);
            assert!((h[(0, 0)] - 0.6).abs() < 1e-9);
            assert!((h[(0, 1)] + 0.7).abs() < 1e-9);
            assert!((h[(1, 1)] - 2.2).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_short_tables() {
        assert!(Bicubic::<f64>::new([0.0, 0.0], [1.0, 1.0], 2, 2, &[0.0; 3]).is_err());
    }
}
