//! Grid-sampled fields. `Field2<T>` lives on the full strip (Nx x Ny tensor
//! grid), `Row2<T>` on a single horizontal line (traces, surface data in
//! physical space). Both are generic over the scalar so the same assembly
//! code runs on plain values or on value/time-derivative dual numbers.

use num_complex::Complex64;

use super::grid::Grid;
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const DENOM_GUARD: f64 = 1e-8;
pub const MAX_DERIV_ORDER: usize = 4;

/// Tensor-grid field; layout data[ix * ny + iy].
#[derive(Debug, Clone, PartialEq)]
pub struct Field2<T> {
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<T>,
}

/// Single x-row field (surface traces).
#[derive(Debug, Clone, PartialEq)]
pub struct Row2<T> {
    pub nx: usize,
    pub data: Vec<T>,
}

pub type BulkField = Field2<f64>;
pub type Row = Row2<f64>;

impl<T: Scalar> Field2<T> {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Field2 {
            nx,
            ny,
            data: vec![T::from_f64(0.0); nx * ny],
        }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> T) -> Self {
        let mut data = Vec::with_capacity(grid.nx * grid.ny);
        for ix in 0..grid.nx {
            let x = ix as f64 / grid.nx as f64;
            for &y in &grid.y {
                data.push(f(x, y));
            }
        }
        Field2 {
            nx: grid.nx,
            ny: grid.ny,
            data,
        }
    }

    /// Field depending on y only.
    pub fn from_profile(grid: &Grid, mut f: impl FnMut(f64) -> T) -> Self {
        Self::from_fn(grid, |_, y| f(y))
    }

    pub fn at(&self, ix: usize, iy: usize) -> T {
        self.data[ix * self.ny + iy]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Field2 {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        Field2 {
            nx: self.nx,
            ny: self.ny,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a + b)
    }
    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a - b)
    }
    pub fn mul(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a * b)
    }
    pub fn neg(&self) -> Self {
        self.map(|a| -a)
    }
    pub fn scale(&self, c: f64) -> Self {
        let c = T::from_f64(c);
        self.map(|a| a * c)
    }
    pub fn scale_t(&self, c: T) -> Self {
        self.map(|a| a * c)
    }
    pub fn add_scalar(&self, c: f64) -> Self {
        let c = T::from_f64(c);
        self.map(|a| a + c)
    }

    /// Pointwise reciprocal with a guard on the primal value.
    pub fn recip_guarded(&self, what: &str) -> Result<Self> {
        for v in &self.data {
            if v.val().abs() < DENOM_GUARD || !v.val().is_finite() {
                return Err(Error::DivisionDegenerate {
                    what: what.to_string(),
                    guard: DENOM_GUARD,
                });
            }
        }
        let one = T::from_f64(1.0);
        Ok(self.map(|a| one / a))
    }

    /// Extract real component `i` (0 = value, 1 = time derivative for duals).
    pub fn component(&self, i: usize) -> BulkField {
        Field2 {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|v| v.part(i)).collect(),
        }
    }

    pub fn from_components(parts: &[&BulkField]) -> Self {
        assert_eq!(parts.len(), T::PARTS);
        let nx = parts[0].nx;
        let ny = parts[0].ny;
        let mut buf = vec![0.0; T::PARTS];
        let data = (0..nx * ny)
            .map(|k| {
                for (i, p) in parts.iter().enumerate() {
                    buf[i] = p.data[k];
                }
                T::from_parts(&buf)
            })
            .collect();
        Field2 { nx, ny, data }
    }

    /// Lift a plain field to T with zero non-primal parts.
    pub fn lift(b: &BulkField) -> Self {
        Field2 {
            nx: b.nx,
            ny: b.ny,
            data: b.data.iter().map(|&v| T::from_f64(v)).collect(),
        }
    }

    pub fn trace_top(&self) -> Row2<T> {
        Row2 {
            nx: self.nx,
            data: (0..self.nx).map(|ix| self.at(ix, self.ny - 1)).collect(),
        }
    }

    pub fn trace_bottom(&self) -> Row2<T> {
        Row2 {
            nx: self.nx,
            data: (0..self.nx).map(|ix| self.at(ix, 0)).collect(),
        }
    }

    /// Spectral x-derivative of given order (exact on band-limited data).
    pub fn dx(&self, grid: &Grid, order: usize) -> Self {
        assert!(order <= MAX_DERIV_ORDER);
        if order == 0 {
            return self.clone();
        }
        let mut parts: Vec<BulkField> = Vec::with_capacity(T::PARTS);
        for i in 0..T::PARTS {
            parts.push(dx_real(&self.component(i), grid, order));
        }
        let refs: Vec<&BulkField> = parts.iter().collect();
        Self::from_components(&refs)
    }

    /// Collocation y-derivative of given order.
    pub fn dy(&self, grid: &Grid, order: usize) -> Self {
        assert!(order <= MAX_DERIV_ORDER);
        if order == 0 {
            return self.clone();
        }
        let mut parts: Vec<BulkField> = Vec::with_capacity(T::PARTS);
        for i in 0..T::PARTS {
            let mut p = self.component(i);
            for _ in 0..order {
                p = dy_real(&p, grid);
            }
            parts.push(p);
        }
        let refs: Vec<&BulkField> = parts.iter().collect();
        Self::from_components(&refs)
    }

    /// Zero x-modes above the 2/3 cutoff (|n| > nx/3) in every component.
    pub fn dealias(&self, grid: &Grid) -> Self {
        let mut parts: Vec<BulkField> = Vec::with_capacity(T::PARTS);
        for i in 0..T::PARTS {
            parts.push(dealias_real(&self.component(i), grid));
        }
        let refs: Vec<&BulkField> = parts.iter().collect();
        Self::from_components(&refs)
    }

    /// Vertical antiderivative -int_y^1 f dz per component.
    pub fn antiderivative_y(&self, grid: &Grid) -> Self {
        let mut parts: Vec<BulkField> = Vec::with_capacity(T::PARTS);
        for i in 0..T::PARTS {
            parts.push(antiderivative_real(&self.component(i), grid));
        }
        let refs: Vec<&BulkField> = parts.iter().collect();
        Self::from_components(&refs)
    }
}

impl<T: Scalar> Row2<T> {
    pub fn zeros(nx: usize) -> Self {
        Row2 {
            nx,
            data: vec![T::from_f64(0.0); nx],
        }
    }

    pub fn from_fn(nx: usize, mut f: impl FnMut(f64) -> T) -> Self {
        Row2 {
            nx,
            data: (0..nx).map(|i| f(i as f64 / nx as f64)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Row2 {
            nx: self.nx,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, o: &Self, f: impl Fn(T, T) -> T) -> Self {
        Row2 {
            nx: self.nx,
            data: self
                .data
                .iter()
                .zip(&o.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a + b)
    }
    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a - b)
    }
    pub fn mul(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a * b)
    }
    pub fn neg(&self) -> Self {
        self.map(|a| -a)
    }
    pub fn scale(&self, c: f64) -> Self {
        let c = T::from_f64(c);
        self.map(|a| a * c)
    }
    pub fn add_scalar(&self, c: f64) -> Self {
        let c = T::from_f64(c);
        self.map(|a| a + c)
    }

    pub fn recip_guarded(&self, what: &str) -> Result<Self> {
        for v in &self.data {
            if v.val().abs() < DENOM_GUARD || !v.val().is_finite() {
                return Err(Error::DivisionDegenerate {
                    what: what.to_string(),
                    guard: DENOM_GUARD,
                });
            }
        }
        let one = T::from_f64(1.0);
        Ok(self.map(|a| one / a))
    }

    pub fn component(&self, i: usize) -> Row {
        Row2 {
            nx: self.nx,
            data: self.data.iter().map(|v| v.part(i)).collect(),
        }
    }

    pub fn from_components(parts: &[&Row]) -> Self {
        assert_eq!(parts.len(), T::PARTS);
        let nx = parts[0].nx;
        let mut buf = vec![0.0; T::PARTS];
        let data = (0..nx)
            .map(|k| {
                for (i, p) in parts.iter().enumerate() {
                    buf[i] = p.data[k];
                }
                T::from_parts(&buf)
            })
            .collect();
        Row2 { nx, data }
    }

    pub fn lift(r: &Row) -> Self {
        Row2 {
            nx: r.nx,
            data: r.data.iter().map(|&v| T::from_f64(v)).collect(),
        }
    }

    pub fn dx(&self, grid: &Grid, order: usize) -> Self {
        assert!(order <= MAX_DERIV_ORDER);
        if order == 0 {
            return self.clone();
        }
        let mut parts: Vec<Row> = Vec::with_capacity(T::PARTS);
        for i in 0..T::PARTS {
            parts.push(dx_row(&self.component(i), grid, order));
        }
        let refs: Vec<&Row> = parts.iter().collect();
        Self::from_components(&refs)
    }

    pub fn dealias(&self, grid: &Grid) -> Self {
        let mut parts: Vec<Row> = Vec::with_capacity(T::PARTS);
        for i in 0..T::PARTS {
            parts.push(dealias_row(&self.component(i), grid));
        }
        let refs: Vec<&Row> = parts.iter().collect();
        Self::from_components(&refs)
    }
}

// --- real-valued kernels -------------------------------------------------

pub(crate) fn dx_symbol(n: i64, order: usize) -> Complex64 {
    let ik = Complex64::new(0.0, 2.0 * std::f64::consts::PI * n as f64);
    ik.powu(order as u32)
}

fn dx_real(f: &BulkField, grid: &Grid, order: usize) -> BulkField {
    let (nx, ny) = (f.nx, f.ny);
    let mut out = vec![0.0; nx * ny];
    let mut row = vec![0.0; nx];
    for iy in 0..ny {
        for ix in 0..nx {
            row[ix] = f.data[ix * ny + iy];
        }
        let mut spec = grid.fft_row(&row);
        for (i, c) in spec.iter_mut().enumerate() {
            let n = grid.freq(i);
            // the unmatched Nyquist mode is dropped for odd orders
            if order % 2 == 1 && i == nx / 2 {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c *= dx_symbol(n, order);
            }
        }
        let back = grid.ifft_row(&spec);
        for ix in 0..nx {
            out[ix * ny + iy] = back[ix];
        }
    }
    Field2 { nx, ny, data: out }
}

fn dx_row(f: &Row, grid: &Grid, order: usize) -> Row {
    let mut spec = grid.fft_row(&f.data);
    let nx = f.nx;
    for (i, c) in spec.iter_mut().enumerate() {
        let n = grid.freq(i);
        if order % 2 == 1 && i == nx / 2 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= dx_symbol(n, order);
        }
    }
    Row2 {
        nx,
        data: grid.ifft_row(&spec),
    }
}

fn dealias_real(f: &BulkField, grid: &Grid) -> BulkField {
    let (nx, ny) = (f.nx, f.ny);
    let cutoff = nx as i64 / 3;
    let mut out = vec![0.0; nx * ny];
    let mut row = vec![0.0; nx];
    for iy in 0..ny {
        for ix in 0..nx {
            row[ix] = f.data[ix * ny + iy];
        }
        let mut spec = grid.fft_row(&row);
        for (i, c) in spec.iter_mut().enumerate() {
            if grid.freq(i).abs() > cutoff {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        let back = grid.ifft_row(&spec);
        for ix in 0..nx {
            out[ix * ny + iy] = back[ix];
        }
    }
    Field2 { nx, ny, data: out }
}

fn dealias_row(f: &Row, grid: &Grid) -> Row {
    let cutoff = f.nx as i64 / 3;
    let mut spec = grid.fft_row(&f.data);
    for (i, c) in spec.iter_mut().enumerate() {
        if grid.freq(i).abs() > cutoff {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    Row2 {
        nx: f.nx,
        data: grid.ifft_row(&spec),
    }
}

fn dy_real(f: &BulkField, grid: &Grid) -> BulkField {
    let (nx, ny) = (f.nx, f.ny);
    let mut out = vec![0.0; nx * ny];
    for ix in 0..nx {
        let col = &f.data[ix * ny..(ix + 1) * ny];
        for i in 0..ny {
            let mut acc = 0.0;
            for j in 0..ny {
                acc += grid.dmat[(i, j)] * col[j];
            }
            out[ix * ny + i] = acc;
        }
    }
    Field2 { nx, ny, data: out }
}

fn antiderivative_real(f: &BulkField, grid: &Grid) -> BulkField {
    let (nx, ny) = (f.nx, f.ny);
    let mut out = vec![0.0; nx * ny];
    for ix in 0..nx {
        let col = &f.data[ix * ny..(ix + 1) * ny];
        let q = grid.antiderivative_column(col);
        out[ix * ny..(ix + 1) * ny].copy_from_slice(&q);
    }
    Field2 { nx, ny, data: out }
}

// --- norms & reductions on plain fields ----------------------------------

impl BulkField {
    /// L2(Omega) norm via Parseval in x (plain mean over equispaced nodes)
    /// and Clenshaw-Curtis in y.
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        self.l2_norm_sq(grid).sqrt()
    }

    pub fn l2_norm_sq(&self, grid: &Grid) -> f64 {
        let mut total = 0.0;
        for iy in 0..self.ny {
            let mut sx = 0.0;
            for ix in 0..self.nx {
                let v = self.data[ix * self.ny + iy];
                sx += v * v;
            }
            total += grid.wy[iy] * sx / self.nx as f64;
        }
        total
    }

    /// L2 inner product over the strip.
    pub fn l2_inner(&self, other: &BulkField, grid: &Grid) -> f64 {
        let mut total = 0.0;
        for iy in 0..self.ny {
            let mut sx = 0.0;
            for ix in 0..self.nx {
                sx += self.data[ix * self.ny + iy] * other.data[ix * self.ny + iy];
            }
            total += grid.wy[iy] * sx / self.nx as f64;
        }
        total
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Row {
    /// L2(torus) norm (mean of squares).
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.nx as f64).sqrt()
    }

    pub fn l2_inner(&self, other: &Row) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.nx as f64
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.nx as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
