//! Tensor grid: equispaced x-nodes on the unit torus, Chebyshev-Gauss-Lobatto
//! nodes in y mapped to [0,1]; FFT plans, differentiation matrix, quadrature
//! weights, and the LU factorization behind the vertical antiderivative.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    /// ascending CGL nodes in [0,1]; y[0] = 0, y[ny-1] = 1
    pub y: Vec<f64>,
    /// collocation differentiation matrix on `y`
    pub dmat: DMatrix<f64>,
    /// Clenshaw-Curtis quadrature weights on [0,1] (sum to 1)
    pub wy: Vec<f64>,
    pub(crate) fft_fwd: Arc<dyn Fft<f64>>,
    pub(crate) fft_inv: Arc<dyn Fft<f64>>,
    /// LU of dmat with the top row replaced by the y=1 evaluation row,
    /// used to solve d q / d y = f, q(1) = 0
    inty_lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Grid {
    pub fn new(nx: usize, ny: usize) -> Self {
        assert!(nx >= 4 && nx % 2 == 0, "nx must be even and >= 4");
        assert!(ny >= 4, "ny must be >= 4");
        let mut planner = FftPlanner::new();
        let fft_fwd = planner.plan_fft_forward(nx);
        let fft_inv = planner.plan_fft_inverse(nx);

        let n = ny - 1;
        let y: Vec<f64> = (0..ny)
            .map(|j| 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / n as f64).cos()))
            .collect();
        let dmat = barycentric_diff_matrix(&y);
        let wy = clenshaw_curtis_unit(ny);

        // replace the row at y=1 (last node) by the boundary-value row
        let mut m = dmat.clone();
        for k in 0..ny {
            m[(ny - 1, k)] = if k == ny - 1 { 1.0 } else { 0.0 };
        }
        let inty_lu = m.lu();

        Grid {
            nx,
            ny,
            y,
            dmat,
            wy,
            fft_fwd,
            fft_inv,
            inty_lu,
        }
    }

    /// Signed integer frequency of FFT bin `i` (0..nx).
    pub fn freq(&self, i: usize) -> i64 {
        let n = self.nx as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Forward FFT of a real x-row into normalized coefficients phi_hat_n.
    pub fn fft_row(&self, row: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(row.len(), self.nx);
        let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_fwd.process(&mut buf);
        let scale = 1.0 / self.nx as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Inverse of `fft_row`; returns the real part (imaginary residue discarded).
    pub fn ifft_row(&self, coeffs: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.nx);
        let mut buf = coeffs.to_vec();
        self.fft_inv.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Solve d q / d y = f with q(1) = 0, i.e. q = -int_y^1 f.
    pub fn antiderivative_column(&self, f: &[f64]) -> Vec<f64> {
        let mut rhs = DVector::from_column_slice(f);
        rhs[self.ny - 1] = 0.0;
        let sol = self.inty_lu.solve(&rhs).expect("antiderivative solve");
        sol.as_slice().to_vec()
    }

    /// Quadrature of a y-column over [0,1].
    pub fn integrate_column(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.wy).map(|(a, w)| a * w).sum()
    }
}

/// Differentiation matrix via barycentric weights; exact for polynomials of
/// degree < ny on the given distinct nodes.
fn barycentric_diff_matrix(y: &[f64]) -> DMatrix<f64> {
    let n = y.len();
    // CGL barycentric weights (up to a common factor): (-1)^j, halved at ends.
    let w: Vec<f64> = (0..n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (y[i] - y[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    d
}

/// Clenshaw-Curtis weights for `ny` CGL nodes mapped to [0,1], ordered to
/// match ascending nodes (symmetric, so the orientation flip is harmless).
fn clenshaw_curtis_unit(ny: usize) -> Vec<f64> {
    let n = ny - 1;
    let theta: Vec<f64> = (0..=n)
        .map(|j| std::f64::consts::PI * j as f64 / n as f64)
        .collect();
    let mut w = vec![0.0; ny];
    if n % 2 == 0 {
        w[0] = 1.0 / ((n * n - 1) as f64);
        w[n] = w[0];
        for (idx, &th) in theta.iter().enumerate().take(n).skip(1) {
            let mut v = 1.0;
            for k in 1..n / 2 {
                v -= 2.0 * (2.0 * k as f64 * th).cos() / ((4 * k * k - 1) as f64);
            }
            v -= (n as f64 * th).cos() / ((n * n - 1) as f64);
            w[idx] = 2.0 * v / n as f64;
        }
    } else {
        w[0] = 1.0 / ((n * n) as f64);
        w[n] = w[0];
        for (idx, &th) in theta.iter().enumerate().take(n).skip(1) {
            let mut v = 1.0;
            for k in 1..=(n - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * th).cos() / ((4 * k * k - 1) as f64);
            }
            w[idx] = 2.0 * v / n as f64;
        }
    }
    // [-1,1] weights sum to 2; halve for [0,1]
    for v in &mut w {
        *v *= 0.5;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_span_unit_interval() {
        let g = Grid::new(8, 9);
        assert!((g.y[0]).abs() < 1e-15);
        assert!((g.y[8] - 1.0).abs() < 1e-15);
        assert!(g.y.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn diff_matrix_exact_on_polynomials() {
        let g = Grid::new(8, 12);
        let f: Vec<f64> = g.y.iter().map(|&y| 2.0 * y - y * y).collect();
        let fv = DVector::from_column_slice(&f);
        let df = &g.dmat * fv;
        for (j, &yj) in g.y.iter().enumerate() {
            assert!((df[j] - (2.0 - 2.0 * yj)).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrature_exact_on_polynomials() {
        for ny in [9, 12, 16] {
            let g = Grid::new(8, ny);
            let f: Vec<f64> = g.y.iter().map(|&y| y * y * y).collect();
            assert!((g.integrate_column(&f) - 0.25).abs() < 1e-13, "ny={ny}");
            let one = vec![1.0; ny];
            assert!((g.integrate_column(&one) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn antiderivative_matches_integral() {
        let g = Grid::new(8, 16);
        // f = 2y -> -int_y^1 2z dz = y^2 - 1
        let f: Vec<f64> = g.y.iter().map(|&y| 2.0 * y).collect();
        let q = g.antiderivative_column(&f);
        for (j, &yj) in g.y.iter().enumerate() {
            assert!((q[j] - (yj * yj - 1.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn fft_round_trip() {
        let g = Grid::new(16, 8);
        let row: Vec<f64> = (0..16)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 16.0).sin() + 0.3)
            .collect();
        let back = g.ifft_row(&g.fft_row(&row));
        for (a, b) in row.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
