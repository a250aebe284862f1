//! Geometry machinery for the flattened free-surface problem: the mode-wise
//! extension of the surface elevation into the strip, the flattening
//! diffeomorphism Phi(x,y) = (x, y(1+eps*eta_tilde)), the divergence-preserving
//! change of dependent variables (u' = J u o Phi, v' = v o Phi - y eps
//! eta_tilde_x u o Phi), and the assembly of every coefficient matrix and
//! nonlinear forcing term of the transformed system.
//!
//! All assembly code is generic over the `Scalar` type: running it on
//! second-order jets (`Dual2`) produces the exact time derivatives of every
//! assembled quantity from the time derivatives of the inputs, with no finite
//! differencing. Products are evaluated pointwise on the collocation grid and
//! are not dealiased here; callers dealias the evolved state instead, keeping
//! the assembly pointwise-exact and testable in isolation.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::params::ScalingParams;
use crate::spectral::field::DENOM_GUARD;
use crate::spectral::{BulkField, Field2, Grid, Row2, Scalar, SurfaceField};

// --------------------------------------------------------------------------
// small vector/matrix fields
// --------------------------------------------------------------------------

/// Two-component vector field on the strip.
#[derive(Debug, Clone)]
pub struct Vec2F<T> {
    pub x: Field2<T>,
    pub y: Field2<T>,
}

/// 2x2 matrix field on the strip.
#[derive(Debug, Clone)]
pub struct Mat2F<T> {
    pub xx: Field2<T>,
    pub xy: Field2<T>,
    pub yx: Field2<T>,
    pub yy: Field2<T>,
}

impl<T: Scalar> Vec2F<T> {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Vec2F {
            x: Field2::zeros(nx, ny),
            y: Field2::zeros(nx, ny),
        }
    }
    pub fn add(&self, o: &Self) -> Self {
        Vec2F {
            x: self.x.add(&o.x),
            y: self.y.add(&o.y),
        }
    }
    pub fn sub(&self, o: &Self) -> Self {
        Vec2F {
            x: self.x.sub(&o.x),
            y: self.y.sub(&o.y),
        }
    }
    pub fn neg(&self) -> Self {
        Vec2F {
            x: self.x.neg(),
            y: self.y.neg(),
        }
    }
    pub fn scale(&self, c: f64) -> Self {
        Vec2F {
            x: self.x.scale(c),
            y: self.y.scale(c),
        }
    }
    pub fn dt(&self) -> Self {
        Vec2F {
            x: self.x.map(|a| a.dt()),
            y: self.y.map(|a| a.dt()),
        }
    }
    pub fn dx(&self, grid: &Grid, order: usize) -> Self {
        Vec2F {
            x: self.x.dx(grid, order),
            y: self.y.dx(grid, order),
        }
    }
    pub fn dy(&self, grid: &Grid, order: usize) -> Self {
        Vec2F {
            x: self.x.dy(grid, order),
            y: self.y.dy(grid, order),
        }
    }
    /// Max |.| of the primal part over both components.
    pub fn max_abs(&self) -> f64 {
        self.x.component(0).max_abs().max(self.y.component(0).max_abs())
    }
    /// Value parts only (drops derivative components).
    pub fn primal(&self) -> Vec2F<f64> {
        Vec2F {
            x: self.x.component(0),
            y: self.y.component(0),
        }
    }
}

impl<T: Scalar> Mat2F<T> {
    pub fn identity(nx: usize, ny: usize) -> Self {
        let one = Field2::zeros(nx, ny).add_scalar(1.0);
        Mat2F {
            xx: one.clone(),
            xy: Field2::zeros(nx, ny),
            yx: Field2::zeros(nx, ny),
            yy: one,
        }
    }
    pub fn add(&self, o: &Self) -> Self {
        Mat2F {
            xx: self.xx.add(&o.xx),
            xy: self.xy.add(&o.xy),
            yx: self.yx.add(&o.yx),
            yy: self.yy.add(&o.yy),
        }
    }
    pub fn sub(&self, o: &Self) -> Self {
        Mat2F {
            xx: self.xx.sub(&o.xx),
            xy: self.xy.sub(&o.xy),
            yx: self.yx.sub(&o.yx),
            yy: self.yy.sub(&o.yy),
        }
    }
    pub fn scale(&self, c: f64) -> Self {
        Mat2F {
            xx: self.xx.scale(c),
            xy: self.xy.scale(c),
            yx: self.yx.scale(c),
            yy: self.yy.scale(c),
        }
    }
    pub fn transpose(&self) -> Self {
        Mat2F {
            xx: self.xx.clone(),
            xy: self.yx.clone(),
            yx: self.xy.clone(),
            yy: self.yy.clone(),
        }
    }
    pub fn dt(&self) -> Self {
        Mat2F {
            xx: self.xx.map(|a| a.dt()),
            xy: self.xy.map(|a| a.dt()),
            yx: self.yx.map(|a| a.dt()),
            yy: self.yy.map(|a| a.dt()),
        }
    }
    pub fn mul_vec(&self, v: &Vec2F<T>) -> Vec2F<T> {
        Vec2F {
            x: self.xx.mul(&v.x).add(&self.xy.mul(&v.y)),
            y: self.yx.mul(&v.x).add(&self.yy.mul(&v.y)),
        }
    }
    pub fn mul_mat(&self, o: &Self) -> Self {
        Mat2F {
            xx: self.xx.mul(&o.xx).add(&self.xy.mul(&o.yx)),
            xy: self.xx.mul(&o.xy).add(&self.xy.mul(&o.yy)),
            yx: self.yx.mul(&o.xx).add(&self.yy.mul(&o.yx)),
            yy: self.yx.mul(&o.xy).add(&self.yy.mul(&o.yy)),
        }
    }
    /// Pointwise inverse with a guard on the determinant.
    pub fn inverse(&self, what: &str) -> Result<Self> {
        let det = self.xx.mul(&self.yy).sub(&self.xy.mul(&self.yx));
        let dinv = det.recip_guarded(what)?;
        Ok(Mat2F {
            xx: self.yy.mul(&dinv),
            xy: self.xy.neg().mul(&dinv),
            yx: self.yx.neg().mul(&dinv),
            yy: self.xx.mul(&dinv),
        })
    }
    /// Max |A - A^T| of the primal part.
    pub fn asymmetry(&self) -> f64 {
        self.xy.sub(&self.yx).component(0).max_abs()
    }
    pub fn max_abs(&self) -> f64 {
        self.xx
            .component(0)
            .max_abs()
            .max(self.xy.component(0).max_abs())
            .max(self.yx.component(0).max_abs())
            .max(self.yy.component(0).max_abs())
    }
    /// Value parts only (drops derivative components).
    pub fn primal(&self) -> Mat2F<f64> {
        Mat2F {
            xx: self.xx.component(0),
            xy: self.xy.component(0),
            yx: self.yx.component(0),
            yy: self.yy.component(0),
        }
    }
}

/// delta-weighted gradient (delta f_x, f_y).
pub fn grad_delta<T: Scalar>(f: &Field2<T>, grid: &Grid, delta: f64) -> Vec2F<T> {
    Vec2F {
        x: f.dx(grid, 1).scale(delta),
        y: f.dy(grid, 1),
    }
}

/// Directional derivative (w . grad_delta) f of a scalar field.
fn dir_grad<T: Scalar>(w: &Vec2F<T>, f: &Field2<T>, grid: &Grid, delta: f64) -> Field2<T> {
    let g = grad_delta(f, grid, delta);
    w.x.mul(&g.x).add(&w.y.mul(&g.y))
}

/// (w . grad_delta) applied to each component of a vector field.
fn dir_grad_vec<T: Scalar>(w: &Vec2F<T>, v: &Vec2F<T>, grid: &Grid, delta: f64) -> Vec2F<T> {
    Vec2F {
        x: dir_grad(w, &v.x, grid, delta),
        y: dir_grad(w, &v.y, grid, delta),
    }
}

/// (w . M grad_delta) f = w^T M grad_delta f for a scalar field.
fn mat_dir_grad<T: Scalar>(
    w: &Vec2F<T>,
    m: &Mat2F<T>,
    f: &Field2<T>,
    grid: &Grid,
    delta: f64,
) -> Field2<T> {
    let g = m.mul_vec(&grad_delta(f, grid, delta));
    w.x.mul(&g.x).add(&w.y.mul(&g.y))
}

fn mat_dir_grad_vec<T: Scalar>(
    w: &Vec2F<T>,
    m: &Mat2F<T>,
    v: &Vec2F<T>,
    grid: &Grid,
    delta: f64,
) -> Vec2F<T> {
    Vec2F {
        x: mat_dir_grad(w, m, &v.x, grid, delta),
        y: mat_dir_grad(w, m, &v.y, grid, delta),
    }
}

/// grad_delta(w^T): row i applies the i-th gradient component, column j picks
/// the j-th vector component.
fn grad_mat<T: Scalar>(w: &Vec2F<T>, grid: &Grid, delta: f64) -> Mat2F<T> {
    Mat2F {
        xx: w.x.dx(grid, 1).scale(delta),
        xy: w.y.dx(grid, 1).scale(delta),
        yx: w.x.dy(grid, 1),
        yy: w.y.dy(grid, 1),
    }
}

// --------------------------------------------------------------------------
// extension operator
// --------------------------------------------------------------------------

/// Surface elevation extended into the strip by the per-mode multiplier
/// 1/(1 + (delta n (1-y) y)^4), together with its exact y-derivatives up to
/// order 4 and optional time-derivative jets of the surface data.
#[derive(Debug, Clone)]
pub struct ExtendedSurface {
    pub delta: f64,
    pub nx: usize,
    pub ny: usize,
    /// Time-derivative levels of the elevation: levels[0] = eta,
    /// levels[1] = eta_t, levels[2] = eta_tt (any tail may be omitted).
    pub levels: Vec<SurfaceField>,
    /// mult[j][bin * ny + iy] = d^j/dy^j of the extension multiplier.
    mult: Vec<Vec<f64>>,
}

/// Derivatives up to order 4 of 1/denom from derivatives of denom, via the
/// Taylor-coefficient recursion for reciprocals.
fn reciprocal_jet(denom: &[f64; 5]) -> [f64; 5] {
    const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];
    let mut a = [0.0; 5];
    for k in 0..5 {
        a[k] = denom[k] / FACT[k];
    }
    let mut b = [0.0; 5];
    b[0] = 1.0 / a[0];
    for k in 1..5 {
        let mut s = 0.0;
        for j in 1..=k {
            s += a[j] * b[k - j];
        }
        b[k] = -s / a[0];
    }
    let mut out = [0.0; 5];
    for k in 0..5 {
        out[k] = b[k] * FACT[k];
    }
    out
}

fn multiplier_table(delta: f64, grid: &Grid) -> Vec<Vec<f64>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut mult = vec![vec![0.0; nx * ny]; 5];
    for bin in 0..nx {
        let n = grid.freq(bin) as f64;
        // multiplier depends on (delta n)^4
        let c = (delta * n).powi(4);
        for (iy, &y) in grid.y.iter().enumerate() {
            let s = y - y * y;
            let sp = 1.0 - 2.0 * y;
            let spp = -2.0;
            // derivatives of u = c * s^4
            let u = [
                c * s.powi(4),
                c * 4.0 * s.powi(3) * sp,
                c * (12.0 * s * s * sp * sp + 4.0 * s.powi(3) * spp),
                c * (24.0 * s * sp.powi(3) + 36.0 * s * s * sp * spp),
                c * (24.0 * sp.powi(4) + 144.0 * s * sp * sp * spp + 36.0 * s * s * spp * spp),
            ];
            let denom = [1.0 + u[0], u[1], u[2], u[3], u[4]];
            let m = reciprocal_jet(&denom);
            for j in 0..5 {
                mult[j][bin * ny + iy] = m[j];
            }
        }
    }
    mult
}

impl ExtendedSurface {
    /// Extension with time-derivative jets of the surface data.
    pub fn new(levels: Vec<SurfaceField>, delta: f64, grid: &Grid) -> Self {
        assert!(!levels.is_empty());
        for l in &levels {
            assert_eq!(l.nx, grid.nx);
        }
        ExtendedSurface {
            delta,
            nx: grid.nx,
            ny: grid.ny,
            levels,
            mult: multiplier_table(delta, grid),
        }
    }

    /// d^i/dx^i d^j/dy^j of the extension of time-derivative level `level`
    /// (0 = elevation itself); exact per mode.
    pub fn deriv_part(&self, level: usize, i: usize, j: usize, grid: &Grid) -> BulkField {
        assert!(j <= 4, "y-derivative order limited to 4");
        let (nx, ny) = (self.nx, self.ny);
        let mut out = vec![0.0; nx * ny];
        if level >= self.levels.len() {
            return Field2 { nx, ny, data: out };
        }
        let coeffs = &self.levels[level].coeffs;
        let table = &self.mult[j];
        let mut spec = vec![Complex64::new(0.0, 0.0); nx];
        for iy in 0..ny {
            for bin in 0..nx {
                let n = grid.freq(bin);
                let sym = if i % 2 == 1 && bin == nx / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    crate::spectral::field::dx_symbol(n, i)
                };
                spec[bin] = coeffs[bin] * sym * table[bin * ny + iy];
            }
            let row = grid.ifft_row(&spec);
            for ix in 0..nx {
                out[ix * ny + iy] = row[ix];
            }
        }
        Field2 { nx, ny, data: out }
    }

    /// Generic field of the extension derivative, with the time-derivative
    /// jet filled from the stored levels (missing levels are zero).
    pub fn deriv<T: Scalar>(&self, i: usize, j: usize, grid: &Grid) -> Field2<T> {
        let parts: Vec<BulkField> = (0..T::PARTS)
            .map(|k| self.deriv_part(k, i, j, grid))
            .collect();
        let refs: Vec<&BulkField> = parts.iter().collect();
        Field2::from_components(&refs)
    }

    /// x-derivative of the surface elevation itself as a grid row (jet-valued).
    pub fn surface_deriv<T: Scalar>(&self, i: usize, grid: &Grid) -> Row2<T> {
        let parts: Vec<crate::spectral::Row> = (0..T::PARTS)
            .map(|k| {
                if k < self.levels.len() {
                    self.levels[k].derivative(i).to_grid(grid)
                } else {
                    Row2::zeros(self.nx)
                }
            })
            .collect();
        let refs: Vec<&crate::spectral::Row> = parts.iter().collect();
        Row2::from_components(&refs)
    }

    pub fn has_time_derivative(&self) -> bool {
        self.levels.len() >= 2
    }
}

/// Extension of a single time level.
pub fn extend_surface(eta: &SurfaceField, delta: f64, grid: &Grid) -> ExtendedSurface {
    ExtendedSurface::new(vec![eta.clone()], delta, grid)
}

/// Extension carrying (eta, eta_t) or (eta, eta_t, eta_tt).
pub fn extend_surface_jet(levels: &[SurfaceField], delta: f64, grid: &Grid) -> ExtendedSurface {
    ExtendedSurface::new(levels.to_vec(), delta, grid)
}

// --------------------------------------------------------------------------
// extension audit
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ExtensionAuditRow {
    pub delta: f64,
    pub i: usize,
    pub j: usize,
    /// max over trials of ||dx^i dy^j ext|| / (delta^j |dx^{i+j} eta|_0)
    pub ratio_plain: f64,
    /// max over trials of ||dx^i dy^j ext|| / (delta^{j-1/2} ||Dx|^{i+j-1/2} eta|_0),
    /// defined for i + j >= 1
    pub ratio_half: Option<f64>,
}

/// Empirical check of the extension-operator norm bounds: for random
/// band-limited surface data, the listed ratios must stay bounded by a single
/// constant across delta.
pub fn extension_audit(
    deltas: &[f64],
    i: usize,
    j: usize,
    trials: usize,
    nx: usize,
    ny: usize,
    seed: u64,
) -> Result<Vec<ExtensionAuditRow>> {
    if j > 4 {
        return Err(Error::UnsupportedOrder { order: j, max: 4 });
    }
    let grid = Grid::new(nx, ny);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::ParameterDomain(format!("delta = {delta}")));
        }
        let mut ratio_plain: f64 = 0.0;
        let mut ratio_half: f64 = 0.0;
        for _ in 0..trials {
            let modes: Vec<(usize, Complex64)> = (1..=nx / 4)
                .map(|n| {
                    let a = rng.gen_range(-1.0..1.0);
                    let b = rng.gen_range(-1.0..1.0);
                    (n, Complex64::new(a, b) / (1.0 + (n * n) as f64))
                })
                .collect();
            let eta = SurfaceField::from_modes(nx, &modes);
            let ext = extend_surface(&eta, delta, &grid);
            let num = ext.deriv_part(0, i, j, &grid).l2_norm(&grid);
            let den_plain = delta.powi(j as i32) * eta.derivative(i + j).sobolev_norm(0.0);
            if den_plain > 0.0 {
                ratio_plain = ratio_plain.max(num / den_plain);
            }
            if i + j >= 1 {
                let den_half =
                    delta.powf(j as f64 - 0.5) * eta.homogeneous_norm(i as f64 + j as f64 - 0.5);
                if den_half > 0.0 {
                    ratio_half = ratio_half.max(num / den_half);
                }
            }
        }
        out.push(ExtensionAuditRow {
            delta,
            i,
            j,
            ratio_plain,
            ratio_half: if i + j >= 1 { Some(ratio_half) } else { None },
        });
    }
    Ok(out)
}

// --------------------------------------------------------------------------
// transform assembly (geometry)
// --------------------------------------------------------------------------

/// All geometric coefficients of the flattened system, assembled from the
/// extended elevation:
/// J = 1 + eps (y eta~)_y, a1 = -y J^{-1} eps delta eta~_x, b1 = J^{-1} - 1,
/// b2 = a1^2 + 2 b1 + b1^2, and the matrices A1..A6 with their nonlinear
/// parts N1, N2, N6, N (= nonlinear part of A1^{-1}), plus the base-flow
/// fluctuation vector V.
#[derive(Debug, Clone)]
pub struct TransformAssembly<T> {
    pub delta: f64,
    pub epsilon: f64,
    pub j: Field2<T>,
    pub jinv: Field2<T>,
    pub a1: Field2<T>,
    pub b1: Field2<T>,
    pub b2: Field2<T>,
    pub a1x: Field2<T>,
    pub a1y: Field2<T>,
    pub b1y: Field2<T>,
    pub m_a1: Mat2F<T>,
    pub m_a1_inv: Mat2F<T>,
    pub m_n: Mat2F<T>,
    pub m_a2: Mat2F<T>,
    pub m_n1: Mat2F<T>,
    pub m_n2: Mat2F<T>,
    pub m_a3: Mat2F<T>,
    pub m_a4: Mat2F<T>,
    pub m_a5: Mat2F<T>,
    pub m_a6: Mat2F<T>,
    pub m_n6: Mat2F<T>,
    pub v_base: Vec2F<T>,
}

pub fn build_transform<T: Scalar>(
    ext: &ExtendedSurface,
    params: &ScalingParams,
    grid: &Grid,
) -> Result<TransformAssembly<T>> {
    let (d, eps) = (params.delta, params.epsilon);
    let (nx, ny) = (grid.nx, grid.ny);
    let eta: Field2<T> = ext.deriv(0, 0, grid);
    let eta_x: Field2<T> = ext.deriv(1, 0, grid);
    let eta_y: Field2<T> = ext.deriv(0, 1, grid);
    let yf: Field2<T> = Field2::from_fn(grid, |_, y| T::from_f64(y));

    // J = 1 + eps (eta~ + y eta~_y)
    let j = eta.add(&yf.mul(&eta_y)).scale(eps).add_scalar(1.0);
    let jmin = j
        .component(0)
        .data
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    if !(jmin > DENOM_GUARD) {
        return Err(Error::GeometryDegenerate);
    }
    let jinv = j.recip_guarded("J")?;

    let a1 = yf.mul(&jinv).mul(&eta_x).scale(-eps * d);
    let b1 = jinv.add_scalar(-1.0);
    let b2 = a1.mul(&a1).add(&b1.scale(2.0)).add(&b1.mul(&b1));
    let a1x = a1.dx(grid, 1);
    let a1y = a1.dy(grid, 1);
    let b1y = b1.dy(grid, 1);

    let zero = Field2::<T>::zeros(nx, ny);
    let one = zero.add_scalar(1.0);

    let m_a1 = Mat2F {
        xx: b1.add_scalar(1.0),
        xy: zero.clone(),
        yx: a1.neg(),
        yy: one.clone(),
    };
    // A1^{-1} = [[J, 0], [J a1, 1]] since det A1 = 1 + b1 = J^{-1}
    let m_a1_inv = Mat2F {
        xx: j.clone(),
        xy: zero.clone(),
        yx: j.mul(&a1),
        yy: one.clone(),
    };
    let ident = Mat2F::identity(nx, ny);
    let m_n = m_a1_inv.sub(&ident);
    let m_a2 = Mat2F {
        xx: one.clone(),
        xy: a1.clone(),
        yx: zero.clone(),
        yy: b1.add_scalar(1.0),
    };
    let m_n1 = m_a1.sub(&ident);
    let m_n2 = m_a2.sub(&ident);
    let m_a3 = Mat2F {
        xx: b2.clone(),
        xy: zero.clone(),
        yx: zero.clone(),
        yy: zero.clone(),
    };
    // A4 = [[J-1, J a1], [J a1, J^{-1}((J a1)^2 - (J-1))]]
    let ja1 = j.mul(&a1);
    let jm1 = j.add_scalar(-1.0);
    let m_a4 = Mat2F {
        xx: jm1.clone(),
        xy: ja1.clone(),
        yx: ja1.clone(),
        yy: jinv.mul(&ja1.mul(&ja1).sub(&jm1)),
    };
    let m_a5 = m_a4.mul_mat(&ident.add(&m_a4).inverse("det(I + A4)")?);
    let m_a6 = Mat2F {
        xx: j.clone(),
        xy: j.mul(&a1),
        yx: j.mul(&a1),
        yy: j.mul(&a1.mul(&a1).add(&b1.add_scalar(1.0).mul(&b1.add_scalar(1.0)))),
    };
    let m_n6 = m_a6.sub(&ident);

    // base-flow fluctuation: ubar(y(1+eps eta~)) - ubar(y)
    let ye = yf.mul(&eta).scale(eps);
    let v_base = Vec2F {
        x: ye.scale(2.0).sub(&yf.mul(&ye).scale(2.0)).sub(&ye.mul(&ye)),
        y: zero,
    };

    Ok(TransformAssembly {
        delta: d,
        epsilon: eps,
        j,
        jinv,
        a1,
        b1,
        b2,
        a1x,
        a1y,
        b1y,
        m_a1,
        m_a1_inv,
        m_n,
        m_a2,
        m_n1,
        m_n2,
        m_a3,
        m_a4,
        m_a5,
        m_a6,
        m_n6,
        v_base,
    })
}

// --------------------------------------------------------------------------
// boundary terms
// --------------------------------------------------------------------------

/// Nonlinear boundary terms on the free surface: the tangential-stress
/// right-hand side h1 with its coefficient correction b3 = -4 b4/(1+2 b4),
/// the normal-stress right-hand side h2 = h2_1 + delta^2 W h2_2, the
/// kinematic right-hand side h3 = eps^2 eta^2 eta_x, and the intermediate
/// quantities h4, h5, b4 plus the full surface stress vector h.
#[derive(Debug, Clone)]
pub struct BoundaryTerms<T> {
    pub h1: Row2<T>,
    pub h2: Row2<T>,
    pub h21: Row2<T>,
    pub h22: Row2<T>,
    pub h3: Row2<T>,
    pub h4: Row2<T>,
    pub h5: Row2<T>,
    pub b3: Row2<T>,
    pub b4: Row2<T>,
    /// components of the stress remainder vector h on the surface
    pub h_vec_x: Row2<T>,
    pub h_vec_y: Row2<T>,
}

pub fn assemble_boundary_terms<T: Scalar>(
    ta: &TransformAssembly<T>,
    ext: &ExtendedSurface,
    u: &Field2<T>,
    v: &Field2<T>,
    params: &ScalingParams,
    grid: &Grid,
) -> Result<BoundaryTerms<T>> {
    let (d, eps, w) = (params.delta, params.epsilon, params.weber);
    let sin_a = params.alpha.sin();

    let eta: Row2<T> = ext.surface_deriv(0, grid);
    let eta_x: Row2<T> = ext.surface_deriv(1, grid);
    let eta_xx: Row2<T> = ext.surface_deriv(2, grid);

    // traces of the state and its first derivatives
    let ug = u.trace_top();
    let ux = u.dx(grid, 1).trace_top();
    let uy = u.dy(grid, 1).trace_top();
    let vx = v.dx(grid, 1).trace_top();
    let vy = v.dy(grid, 1).trace_top();

    let a1g = ta.a1.trace_top();
    let b1g = ta.b1.trace_top();
    let a1yg = ta.a1y.trace_top();

    // t = eps delta eta_x; n_delta = (-t, 1), t_delta = (1, t)
    let t = eta_x.scale(eps * d);

    // b4 = -t^2/2 + (M1 n_delta) . t_delta
    let m11 = a1g.mul(&b1g.add_scalar(1.0));
    let m12 = b1g
        .mul(&b1g.add_scalar(2.0))
        .sub(&a1g.mul(&a1g))
        .scale(0.5);
    let m22 = m11.neg();
    // (M n).t with n = (-t, 1), tvec = (1, t):
    //   = (m11*(-t) + m12) + (m21*(-t) + m22)*t
    let mn_dot_t = |m11: &Row2<T>, m12: &Row2<T>, m21: &Row2<T>, m22: &Row2<T>| {
        m11.mul(&t).neg().add(m12).add(&m21.mul(&t).neg().add(m22).mul(&t))
    };
    let b4 = mn_dot_t(&m11, &m12, &m12, &m22).sub(&t.mul(&t).scale(0.5));

    // h5 = -eps delta^2 eta_x u_x - (t^2/2)(delta^2 v_x - 2 eta) + (M2 n).t
    let b1u_x = ta.b1.mul(u).dx(grid, 1).trace_top();
    let a1u_x = ta.a1.mul(u).dx(grid, 1).trace_top();
    let p11 = b1u_x.scale(d);
    let p12 = a1u_x
        .scale(-d)
        .sub(&a1g.mul(&a1yg).mul(&ug))
        .add(&a1g.mul(&vy).scale(d))
        .scale(0.5);
    let p22 = a1yg
        .mul(&b1g.add_scalar(1.0))
        .mul(&ug)
        .neg()
        .add(&b1g.mul(&vy).scale(d));
    let h5 = eta_x
        .mul(&ux)
        .scale(-eps * d * d)
        .sub(
            &t.mul(&t)
                .scale(0.5)
                .mul(&vx.scale(d * d).sub(&eta.scale(2.0))),
        )
        .add(&mn_dot_t(&p11, &p12, &p12, &p22));

    // stress remainder vector h = eps * h_over_eps with
    // h_over_eps = -eps (delta^2 eta_x u_x, (delta/2) eta_x (delta^2 v_x + u_y - 2 eta))
    //              + (1/2) S n_delta,
    // S the symmetrized gradient sum of the nonlinear velocity parts.
    let ud = Vec2F {
        x: u.clone(),
        y: v.scale(d),
    };
    let n1u = ta.m_n1.mul_vec(&ud);
    let a1u = ta.m_a1.mul_vec(&ud);
    let g1 = grad_mat(&n1u, grid, d);
    let g2 = ta.m_n2.mul_mat(&grad_mat(&a1u, grid, d));
    let s_bulk = g1.add(&g1.transpose()).add(&g2).add(&g2.transpose());
    let sxx = s_bulk.xx.trace_top();
    let sxy = s_bulk.xy.trace_top();
    let syx = s_bulk.yx.trace_top();
    let syy = s_bulk.yy.trace_top();
    // S n_delta with n = (-t, 1)
    let sn_x = sxy.sub(&sxx.mul(&t));
    let sn_y = syy.sub(&syx.mul(&t));
    let tang = vx.scale(d * d).add(&uy).sub(&eta.scale(2.0));
    let h_over_eps_x = eta_x.mul(&ux).scale(-eps * d * d).add(&sn_x.scale(0.5));
    let h_over_eps_y = eta_x
        .mul(&tang)
        .scale(-0.5 * eps * d)
        .add(&sn_y.scale(0.5));
    let h_vec_x = h_over_eps_x.scale(eps);
    let h_vec_y = h_over_eps_y.scale(eps);

    // b3, h1
    let denom = b4.scale(2.0).add_scalar(1.0);
    let denom_inv = denom.recip_guarded("1 + 2 b4")?;
    let b3 = b4.mul(&denom_inv).scale(-4.0);
    let h1 = b4
        .mul(&denom_inv)
        .scale(2.0)
        .mul(&vx.scale(d * d))
        .sub(
            &denom_inv
                .scale(2.0)
                .mul(&eta_x.mul(&vy).scale(eps * d * d).add(&h5)),
        );

    // h2 = h2_1 + delta^2 W h2_2 with the 1/eps factor cancelled analytically
    let t2 = t.mul(&t);
    let one_plus_t2_inv = t2.add_scalar(1.0).recip_guarded("1 + t^2")?;
    let h_n_over_eps = h_over_eps_y.sub(&h_over_eps_x.mul(&t));
    let h21 = t2
        .mul(&one_plus_t2_inv)
        .mul(&vy)
        .scale(-d)
        .add(&one_plus_t2_inv.mul(
            &eta_x
                .mul(&tang)
                .scale(-0.5 * eps * d)
                .add(&h_n_over_eps),
        ));
    // 1 - (1 + t^2)^{-3/2}
    let fac = t2
        .add_scalar(1.0)
        .mul(&t2.add_scalar(1.0).map(|a| a.sqrt()))
        .recip_guarded("(1 + t^2)^{3/2}")?
        .neg()
        .add_scalar(1.0);
    let h22 = fac.mul(&eta_xx).scale(1.0 / sin_a);
    let h2 = h21.add(&h22.scale(d * d * w));

    let h3 = eta.mul(&eta).mul(&eta_x).scale(eps * eps);
    // h4 = -2 (eps delta^2 eta_x v_y + b4 u_y + h5), using h.t = eps(b4 u_y + h5)
    let h4 = eta_x
        .mul(&vy)
        .scale(eps * d * d)
        .add(&b4.mul(&uy))
        .add(&h5)
        .scale(-2.0);

    Ok(BoundaryTerms {
        h1,
        h2,
        h21,
        h22,
        h3,
        h4,
        h5,
        b3,
        b4,
        h_vec_x,
        h_vec_y,
    })
}

// --------------------------------------------------------------------------
// bulk terms
// --------------------------------------------------------------------------

/// Nonlinear interior terms of the flattened momentum equation and the
/// derived forcings used by the energy machinery:
/// - `f`: momentum-equation right-hand side (contains no u_t, u_yy, grad p);
/// - `big_f1` = f - (2/R) A4 grad_delta p + (1/R)(b2 u_yy, 0)^T;
/// - `big_f3` = transport + viscous terms + f (the p-free acceleration);
/// - `big_f2` = f_t + (1/R)(b2 u_yy)_t e1 + (delta/2) A5_t u^delta_t - (A5 F3)_t;
/// - `g_comm[k-1]` = commutator forcing G_k, k = 1..=k_max;
/// - `f1_scalar`/`f3_scalar`: components of f - (2/R) A4 grad_delta p;
/// - `f2_scalar`: the vertical-mode forcing built from b2.
#[derive(Debug, Clone)]
pub struct BulkTerms<T> {
    pub f: Vec2F<T>,
    pub big_f1: Vec2F<T>,
    pub big_f2: Vec2F<T>,
    pub big_f3: Vec2F<T>,
    pub g_comm: Vec<Vec2F<T>>,
    pub f1_scalar: Field2<T>,
    pub f2_scalar: Field2<T>,
    pub f3_scalar: Field2<T>,
}

pub fn assemble_bulk_terms<T: Scalar>(
    ta: &TransformAssembly<T>,
    ext: &ExtendedSurface,
    u: &Field2<T>,
    v: &Field2<T>,
    p: &Field2<T>,
    params: &ScalingParams,
    grid: &Grid,
    k_max: usize,
) -> Result<BulkTerms<T>> {
    if !ext.has_time_derivative() {
        return Err(Error::Contract(
            "bulk-term assembly needs the time derivative of the surface elevation \
             (supply it via the kinematic equation)"
            .into(),
        ));
    }
    if T::PARTS < 2 {
        // With a plain scalar the derivative shift is identically zero, so the
        // surface-velocity terms of f would be silently dropped; the value of
        // every bulk term is exact only when the inputs carry first-order
        // jets, and big_f2/g_comm additionally need second-order jets.
        return Err(Error::Contract(
            "bulk-term assembly requires jet-valued inputs (Dual or Dual2), \
             not plain values"
                .into(),
        ));
    }
    let (d, eps, r) = (params.delta, params.epsilon, params.reynolds);
    let (nx, ny) = (grid.nx, grid.ny);

    let ud = Vec2F {
        x: u.clone(),
        y: v.scale(d),
    };
    let ubar: Field2<T> = Field2::from_profile(grid, |y| T::from_f64(2.0 * y - y * y));
    let ubar_y: Field2<T> = Field2::from_profile(grid, |y| T::from_f64(2.0 - 2.0 * y));
    let u_vec = Vec2F {
        x: ubar,
        y: Field2::zeros(nx, ny),
    };

    // transport terms the nonlinear part of A1^{-1} acts on
    let transport = dir_grad_vec(&u_vec, &ud, grid, d).add(&Vec2F {
        x: ud.y.mul(&ubar_y),
        y: Field2::zeros(nx, ny),
    });

    // time-shift remainder: delta A1_t u'^delta - y J^{-1} eps delta eta~_t (A1 u'^delta)_y
    let a1u = ta.m_a1.mul_vec(&ud);
    let eta_t: Field2<T> = ext.deriv::<T>(0, 0, grid).map(|a| a.dt());
    let yf: Field2<T> = Field2::from_fn(grid, |_, y| T::from_f64(y));
    let c = yf.mul(&ta.jinv).mul(&eta_t).scale(eps * d);
    let tshift = ta
        .m_a1
        .dt()
        .mul_vec(&ud)
        .scale(d)
        .sub(&a1u.dy(grid, 1).mul_c(&c));

    // advection remainder
    let advr = dir_grad_vec(&u_vec, &ta.m_n1.mul_vec(&ud), grid, d)
        .add(&mat_dir_grad_vec(&u_vec, &ta.m_n2, &a1u, grid, d))
        .add(&mat_dir_grad_vec(
            &ta.v_base.add(&a1u.scale(eps)),
            &ta.m_a2,
            &a1u,
            grid,
            d,
        ))
        .add(&mat_dir_grad_vec(&ud, &ta.m_n2, &u_vec, grid, d))
        .add(&mat_dir_grad_vec(
            &ta.m_n1.mul_vec(&ud),
            &ta.m_a2,
            &u_vec,
            grid,
            d,
        ))
        .add(&mat_dir_grad_vec(&a1u, &ta.m_a2, &ta.v_base, grid, d));

    // viscosity remainder:
    // [delta^2 dxx, A1]u + (1+b2)[dyy, A1]u + P_delta(A1 u) + A1 (0, delta b2 v_yy)
    let comm_xx = a1u
        .dx(grid, 2)
        .sub(&ta.m_a1.mul_vec(&ud.dx(grid, 2)))
        .scale(d * d);
    let comm_yy = a1u.dy(grid, 2).sub(&ta.m_a1.mul_vec(&ud.dy(grid, 2)));
    let one_plus_b2 = ta.b2.add_scalar(1.0);
    let p_coef = ta
        .a1x
        .scale(d)
        .add(&ta.a1.mul(&ta.a1y))
        .add(&ta.b1.add_scalar(1.0).mul(&ta.b1y));
    let p_delta = |g: &Vec2F<T>| -> Vec2F<T> {
        let fxy_x = g.x.dx(grid, 1).dy(grid, 1);
        let fxy_y = g.y.dx(grid, 1).dy(grid, 1);
        let gy = g.dy(grid, 1);
        Vec2F {
            x: ta.a1.mul(&fxy_x).scale(2.0 * d).add(&p_coef.mul(&gy.x)),
            y: ta.a1.mul(&fxy_y).scale(2.0 * d).add(&p_coef.mul(&gy.y)),
        }
    };
    let v_yy = v.dy(grid, 2);
    let viscr = comm_xx
        .add(&Vec2F {
            x: one_plus_b2.mul(&comm_yy.x),
            y: one_plus_b2.mul(&comm_yy.y),
        })
        .add(&p_delta(&a1u))
        .add(&ta.m_a1.mul_vec(&Vec2F {
            x: Field2::zeros(nx, ny),
            y: ta.b2.mul(&v_yy).scale(d),
        }));

    // f = -N(transport) + A1^{-1}(-tshift - advr + (1/R) viscr)
    let f = ta
        .m_n
        .mul_vec(&transport)
        .neg()
        .add(&ta.m_a1_inv.mul_vec(
            &tshift.neg().sub(&advr).add(&viscr.scale(1.0 / r)),
        ));

    // F1 = f - (2/R) A4 grad p + (1/R)(b2 u_yy, 0)
    let grad_p = grad_delta(p, grid, d);
    let a4_gp = ta.m_a4.mul_vec(&grad_p);
    let u_yy = u.dy(grid, 2);
    let b2uyy = ta.b2.mul(&u_yy);
    let big_f1 = f.sub(&a4_gp.scale(2.0 / r)).add(&Vec2F {
        x: b2uyy.scale(1.0 / r),
        y: Field2::zeros(nx, ny),
    });

    // F3 = -(U.grad)u - (u.grad)U + (1/R)(delta^2 u_xx + (I+A3) u_yy) + f
    let ud_yy = ud.dy(grid, 2);
    let big_f3 = transport
        .neg()
        .add(
            &ud.dx(grid, 2)
                .scale(d * d)
                .add(&Vec2F {
                    x: one_plus_b2.mul(&ud_yy.x),
                    y: ud_yy.y.clone(),
                })
                .scale(1.0 / r),
        )
        .add(&f);

    // F2 = d/dt{ f + (1/R)(b2 u_yy, 0) - A5 F3 } + (delta/2) A5_t u^delta_t
    let a5f3 = ta.m_a5.mul_vec(&big_f3);
    let core = f
        .add(&Vec2F {
            x: b2uyy.scale(1.0 / r),
            y: Field2::zeros(nx, ny),
        })
        .sub(&a5f3);
    let big_f2 = core
        .dt()
        .add(&ta.m_a5.dt().mul_vec(&ud.dt()).scale(0.5 * d));

    // G_k = [dx^k, A5] W + (delta/2) [dx^k, A5_t] u^delta_t, with
    // W = -(2/R)(I+A4) grad p_t - (2/R) A4_t grad p + F3_t
    let ident = Mat2F::identity(nx, ny);
    let p_t = p.map(|a| a.dt());
    let w_arg = ident
        .add(&ta.m_a4)
        .mul_vec(&grad_delta(&p_t, grid, d))
        .scale(-2.0 / r)
        .add(&ta.m_a4.dt().mul_vec(&grad_p).scale(-2.0 / r))
        .add(&big_f3.dt());
    let commutator = |m: &Mat2F<T>, w: &Vec2F<T>, k: usize| -> Vec2F<T> {
        m.mul_vec(w).dx(grid, k).sub(&m.mul_vec(&w.dx(grid, k)))
    };
    let a5t = ta.m_a5.dt();
    let ud_t = ud.dt();
    let g_comm: Vec<Vec2F<T>> = (1..=k_max)
        .map(|k| {
            commutator(&ta.m_a5, &w_arg, k).add(&commutator(&a5t, &ud_t, k).scale(0.5 * d))
        })
        .collect();

    // scalar forcings
    let base = f.sub(&a4_gp.scale(2.0 / r));
    let f1_scalar = base.y.clone();
    let f3_scalar = base.x.clone();
    let one_plus_b2_inv = one_plus_b2.recip_guarded("1 + b2")?;
    let u_t = u.map(|a| a.dt());
    let f2_scalar = ta
        .b2
        .mul(&one_plus_b2_inv)
        .mul(
            &u_t.scale(d)
                .add(&u_vec.x.mul(&u.dx(grid, 1)).scale(d))
                .add(&ubar_y.mul(&v).scale(d))
                .sub(&u.dx(grid, 2).scale(d * d / r)),
        )
        .neg()
        .sub(
            &ta.b2
                .mul(&one_plus_b2_inv)
                .mul(&p.dx(grid, 1))
                .scale(2.0 * d / r),
        )
        .sub(&one_plus_b2_inv.mul(&f3_scalar));

    Ok(BulkTerms {
        f,
        big_f1,
        big_f2,
        big_f3,
        g_comm,
        f1_scalar,
        f2_scalar,
        f3_scalar,
    })
}

impl<T: Scalar> Vec2F<T> {
    /// component-wise product with a scalar field
    pub fn mul_c(&self, c: &Field2<T>) -> Self {
        Vec2F {
            x: self.x.mul(c),
            y: self.y.mul(c),
        }
    }
}
