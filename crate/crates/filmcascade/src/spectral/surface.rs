//! Spectral surface fields on the unit torus and Fourier multipliers.
//!
//! Convention: D_x = -i d/dx has eigenvalue 2*pi*n on e^{2 pi i n x}. The
//! Sobolev norm |phi|_s uses the symbol (1+(2 pi n)^2)^{s/2}. The extension
//! multiplier (see `transform`) is the one place that uses the bare integer n.

use num_complex::Complex64;

use super::field::{Row, Row2};
use super::grid::Grid;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Complex Fourier coefficients in FFT bin order, normalized so that
/// coeffs[n] multiplies e^{2 pi i n x}; real fields are Hermitian-symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceField {
    pub nx: usize,
    pub coeffs: Vec<Complex64>,
}

impl SurfaceField {
    pub fn zeros(nx: usize) -> Self {
        SurfaceField {
            nx,
            coeffs: vec![Complex64::new(0.0, 0.0); nx],
        }
    }

    /// Build from physical grid values.
    pub fn from_grid(grid: &Grid, row: &Row) -> Self {
        let mut f = SurfaceField {
            nx: grid.nx,
            coeffs: grid.fft_row(&row.data),
        };
        f.enforce_real();
        f
    }

    /// Build from a sparse list of (n >= 0, complex amplitude of e^{2 pi i n x});
    /// negative-frequency partners are filled by conjugation.
    pub fn from_modes(nx: usize, modes: &[(usize, Complex64)]) -> Self {
        let mut f = SurfaceField::zeros(nx);
        for &(n, a) in modes {
            assert!(n < nx / 2, "mode index must be below Nyquist");
            f.coeffs[n] = a;
            if n > 0 {
                f.coeffs[nx - n] = a.conj();
            }
        }
        f
    }

    pub fn to_grid(&self, grid: &Grid) -> Row {
        Row2 {
            nx: self.nx,
            data: grid.ifft_row(&self.coeffs),
        }
    }

    fn freq(&self, i: usize) -> i64 {
        let n = self.nx as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Project onto the real-valued subspace: Hermitian symmetry plus a real
    /// (here: zeroed) Nyquist coefficient.
    pub fn enforce_real(&mut self) {
        let nx = self.nx;
        for i in 1..nx / 2 {
            let avg = 0.5 * (self.coeffs[i] + self.coeffs[nx - i].conj());
            self.coeffs[i] = avg;
            self.coeffs[nx - i] = avg.conj();
        }
        self.coeffs[0] = Complex64::new(self.coeffs[0].re, 0.0);
        self.coeffs[nx / 2] = Complex64::new(0.0, 0.0);
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let nx = self.nx;
        if self.coeffs[0].im.abs() > tol {
            return false;
        }
        (1..nx / 2).all(|i| (self.coeffs[i] - self.coeffs[nx - i].conj()).norm() <= tol)
    }

    pub fn apply_multiplier(&self, spec: &MultiplierSpec) -> Self {
        let mut out = self.clone();
        for i in 0..self.nx {
            let n = self.freq(i);
            out.coeffs[i] *= (spec.symbol)(n);
        }
        out
    }

    pub fn derivative(&self, order: usize) -> Self {
        let mut out = self.clone();
        for i in 0..self.nx {
            if order % 2 == 1 && i == self.nx / 2 {
                out.coeffs[i] = Complex64::new(0.0, 0.0);
            } else {
                out.coeffs[i] *= super::field::dx_symbol(self.freq(i), order);
            }
        }
        out
    }

    /// 2/3-rule truncation.
    pub fn dealias(&self) -> Self {
        let cutoff = self.nx as i64 / 3;
        let mut out = self.clone();
        for i in 0..self.nx {
            if self.freq(i).abs() > cutoff {
                out.coeffs[i] = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&o.coeffs) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&o.coeffs) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for a in &mut out.coeffs {
            *a *= c;
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Sobolev norm |phi|_s with symbol (1+(2 pi n)^2)^{s/2}.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.sobolev_norm_sq(s).sqrt()
    }

    pub fn sobolev_norm_sq(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = TWO_PI * self.freq(i) as f64;
                (1.0 + k * k).powf(s) * c.norm_sqr()
            })
            .sum()
    }

    /// Weighted norm |(1 + delta |D_x|)^a phi|_s.
    pub fn weighted_norm(&self, s: f64, a: f64, delta: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = TWO_PI * self.freq(i) as f64;
                let w = (1.0 + delta * k.abs()).powf(2.0 * a);
                (1.0 + k * k).powf(s) * w * c.norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Homogeneous norm ||D_x|^s phi|_0 (the n = 0 mode drops out for s > 0).
    pub fn homogeneous_norm(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = (TWO_PI * self.freq(i) as f64).abs();
                if k == 0.0 && s > 0.0 {
                    0.0
                } else {
                    k.powf(2.0 * s) * c.norm_sqr()
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    /// L2 inner product Re (phi, psi) on the torus.
    pub fn l2_inner(&self, o: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&o.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }
}

/// A Fourier multiplier P(D_x): symbol evaluated at integer frequencies,
/// with metadata recording the intended convention.
pub struct MultiplierSpec {
    pub name: String,
    /// growth order in |n| (metadata only)
    pub order: f64,
    pub symbol: Box<dyn Fn(i64) -> Complex64 + Send + Sync>,
}

impl MultiplierSpec {
    pub fn new(
        name: &str,
        order: f64,
        symbol: impl Fn(i64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        MultiplierSpec {
            name: name.to_string(),
            order,
            symbol: Box::new(symbol),
        }
    }

    pub fn identity() -> Self {
        Self::new("1", 0.0, |_| Complex64::new(1.0, 0.0))
    }

    /// |D_x|^s with D_x eigenvalue 2 pi n.
    pub fn abs_dx_pow(s: f64) -> Self {
        Self::new(&format!("|Dx|^{s}"), s, move |n| {
            Complex64::new((TWO_PI * n as f64).abs().powf(s), 0.0)
        })
    }

    /// (1 + delta |D_x|)^a.
    pub fn one_plus_delta_dx(a: f64, delta: f64) -> Self {
        Self::new(&format!("(1+{delta}|Dx|)^{a}"), a, move |n| {
            Complex64::new((1.0 + delta * (TWO_PI * n as f64).abs()).powf(a), 0.0)
        })
    }

    /// (1 + |D_x|)^a.
    pub fn one_plus_dx(a: f64) -> Self {
        Self::one_plus_delta_dx(a, 1.0)
    }

    /// Bessel symbol (1+(2 pi n)^2)^{s/2}.
    pub fn sobolev(s: f64) -> Self {
        Self::new(&format!("<Dx>^{s}"), s, move |n| {
            let k = TWO_PI * n as f64;
            Complex64::new((1.0 + k * k).powf(0.5 * s), 0.0)
        })
    }
}

/// Apply a multiplier x-mode-wise to a bulk field.
pub fn apply_multiplier_bulk(
    spec: &MultiplierSpec,
    f: &super::field::BulkField,
    grid: &Grid,
) -> super::field::BulkField {
    let (nx, ny) = (f.nx, f.ny);
    let mut out = vec![0.0; nx * ny];
    let mut row = vec![0.0; nx];
    for iy in 0..ny {
        for ix in 0..nx {
            row[ix] = f.data[ix * ny + iy];
        }
        let mut spec_row = grid.fft_row(&row);
        for (i, c) in spec_row.iter_mut().enumerate() {
            *c *= (spec.symbol)(grid.freq(i));
        }
        let back = grid.ifft_row(&spec_row);
        for ix in 0..nx {
            out[ix * ny + iy] = back[ix];
        }
    }
    super::field::Field2 { nx, ny, data: out }
}
