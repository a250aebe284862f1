//! Elliptic pressure solve on the flattened strip.
//!
//! The pressure of the transformed free-surface system satisfies the
//! divergence-form problem
//!
//! ```text
//!   div_d ( A6 grad_d p ) = g      in the strip,
//!   p = phi                        on the free surface (y = 1),
//!   (p + g0)_y = 0                 on the bottom wall (y = 0),
//! ```
//!
//! where `grad_d = (d d/dx, d/dy)`, `A6 = I + N6` is the metric of the
//! flattening map, `g` is quadratic in the velocity gradients, `g0` is the
//! wall slope term, and `phi` collects the normal-stress balance on the
//! surface. It is solved by the fixed-point reformulation in `q = p + g0`:
//!
//! ```text
//!   Lap_d q = g + div_d ( grad_d g0 - N6 grad_d p ),   q|_{y=1} = phi + g0,
//!   q_y|_{y=0} = 0,
//! ```
//!
//! iterating on `p` with a constant-coefficient Helmholtz solve per Fourier
//! mode in x (Chebyshev collocation in y), until the update norm drops below
//! `PRESSURE_TOL`.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::ScalingParams;
use crate::spectral::{BulkField, Field2, Grid, Row, Row2, Scalar, TWO_PI};
use crate::transform::{
    grad_delta, BoundaryTerms, ExtendedSurface, Mat2F, TransformAssembly,
};

/// Fixed-point convergence tolerance on the pressure update norm.
pub const PRESSURE_TOL: f64 = 1e-10;
/// Iteration cap for the pressure fixed point.
pub const PRESSURE_MAX_ITERS: usize = 200;

// ----------------------------------------------------------------------------
// constant-coefficient solver
// ----------------------------------------------------------------------------

/// Mode-wise solver for `Lap_d q = rhs` with a Dirichlet condition on the top
/// boundary and a homogeneous Neumann condition on the bottom boundary.
///
/// For each Fourier mode `n` in x the problem reduces to the two-point
/// boundary value problem `q_yy - (2 pi n d)^2 q = rhs_n` on the Chebyshev
/// nodes; the dense collocation matrices are LU-factorized once per `|n|`.
pub struct HelmholtzSolver {
    ny: usize,
    lus: Vec<LU<f64, Dyn, Dyn>>,
}

impl HelmholtzSolver {
    pub fn new(grid: &Grid, delta: f64) -> Self {
        let ny = grid.ny;
        let d2 = &grid.dmat * &grid.dmat;
        let mut lus = Vec::with_capacity(grid.nx / 2 + 1);
        for n in 0..=grid.nx / 2 {
            // The first-derivative operator zeroes the unpaired Nyquist bin,
            // so the composed d^2 dx^2 acts as zero there; the modal symbol
            // must match or converged solutions would not satisfy the
            // divergence-form equation evaluated with the same operators.
            let k = if n == grid.nx / 2 {
                0.0
            } else {
                TWO_PI * n as f64 * delta
            };
            let mut m: DMatrix<f64> = d2.clone();
            for i in 0..ny {
                m[(i, i)] -= k * k;
            }
            // bottom row: Neumann q_y(0) = 0
            for j in 0..ny {
                m[(0, j)] = grid.dmat[(0, j)];
            }
            // top row: Dirichlet q(1) = bc
            for j in 0..ny {
                m[(ny - 1, j)] = 0.0;
            }
            m[(ny - 1, ny - 1)] = 1.0;
            lus.push(m.lu());
        }
        HelmholtzSolver { ny, lus }
    }

    /// Solve `Lap_d q = rhs`, `q(x, 1) = top(x)`, `q_y(x, 0) = 0`.
    pub fn solve(&self, rhs: &BulkField, top: &Row, grid: &Grid) -> BulkField {
        let (nx, ny) = (grid.nx, grid.ny);
        debug_assert_eq!(ny, self.ny);

        // x-FFT of every horizontal level
        let mut hat = vec![Complex64::new(0.0, 0.0); nx * ny];
        for iy in 0..ny {
            let row: Vec<f64> = (0..nx).map(|ix| rhs.data[ix * ny + iy]).collect();
            let c = grid.fft_row(&row);
            for ix in 0..nx {
                hat[ix * ny + iy] = c[ix];
            }
        }
        let top_hat = grid.fft_row(&top.data);

        // per-mode two-point boundary value solves (real and imaginary parts
        // share the real LU factorization)
        for ix in 0..nx {
            let n = grid.freq(ix).unsigned_abs() as usize;
            let lu = &self.lus[n];
            let mut re = DVector::from_fn(ny, |i, _| hat[ix * ny + i].re);
            let mut im = DVector::from_fn(ny, |i, _| hat[ix * ny + i].im);
            re[0] = 0.0;
            im[0] = 0.0;
            re[ny - 1] = top_hat[ix].re;
            im[ny - 1] = top_hat[ix].im;
            let sre = lu.solve(&re).expect("helmholtz solve (real part)");
            let sim = lu.solve(&im).expect("helmholtz solve (imaginary part)");
            for i in 0..ny {
                hat[ix * ny + i] = Complex64::new(sre[i], sim[i]);
            }
        }

        // back to physical space
        let mut out = BulkField::zeros(nx, ny);
        for iy in 0..ny {
            let coeffs: Vec<Complex64> = (0..nx).map(|ix| hat[ix * ny + iy]).collect();
            let r = grid.ifft_row(&coeffs);
            for ix in 0..nx {
                out.data[ix * ny + iy] = r[ix];
            }
        }
        out
    }
}

// ----------------------------------------------------------------------------
// data assembly
// ----------------------------------------------------------------------------

/// Inputs of the divergence-form pressure problem, assembled from the current
/// transformed state. All entries are plain values (the elliptic solve does
/// not propagate jets).
pub struct PressureData {
    /// interior right-hand side, quadratic in the velocity gradients
    pub g: BulkField,
    /// wall slope term entering the Neumann condition `(p + g0)_y = 0`
    pub g0: BulkField,
    /// Dirichlet datum on the free surface
    pub phi: Row,
    /// nonlinear part of the metric, `A6 = I + N6`
    pub n6: Mat2F<f64>,
}

/// Jet-valued data of the pressure problem (interior right-hand side, wall
/// slope term, Dirichlet datum). With first-order jet inputs the derivative
/// parts carry the exact time derivatives of the respective data.
pub struct PressureJets<T> {
    pub g: Field2<T>,
    pub g0: Field2<T>,
    pub phi: Row2<T>,
}

/// Assemble the pressure problem data (jet-valued) from the transformed state.
pub fn pressure_jets<T: Scalar>(
    ta: &TransformAssembly<T>,
    ext: &ExtendedSurface,
    u: &Field2<T>,
    v: &Field2<T>,
    bt: &BoundaryTerms<T>,
    params: &ScalingParams,
    grid: &Grid,
) -> PressureJets<T> {
    let d = ta.delta;
    let eps = ta.epsilon;
    let r = params.reynolds;
    let w = params.weber;
    let tan_a = params.alpha.tan();
    let sin_a = params.alpha.sin();

    let jinv_u = ta.jinv.mul(u);
    let jinv_y = ta.jinv.dy(grid, 1);
    let v_y = v.dy(grid, 1);
    let u_y = u.dy(grid, 1);

    // Writing the mapped velocity-gradient matrix as  eps*F1*u_y + eps*F2t + E
    // with E carrying the base-flow shear, the interior right-hand side is
    //   g = -(R/2) J { 2 tr(F1 (eps F2t + E)) u_y + eps tr(F2t^2) + 2 tr(F2t E) },
    // which is the exact quadratic form with one epsilon factored out of the
    // singular-looking eps^{-1} tr(.^2) term.
    let a_t = jinv_u
        .dx(grid, 1)
        .scale(d)
        .add(&ta.a1.mul(&jinv_y).mul(u));
    let b_t = ta
        .a1
        .mul(u)
        .neg()
        .add(&v.scale(d))
        .dx(grid, 1)
        .scale(d)
        .sub(&ta.a1.mul(&ta.a1y).mul(u))
        .add(&ta.a1.mul(&v_y).scale(d));
    let c_t = ta.jinv.mul(&jinv_y).mul(u);
    let d_t = ta
        .jinv
        .mul(&ta.a1y)
        .mul(u)
        .neg()
        .add(&ta.jinv.mul(&v_y).scale(d));

    // base-flow shear mapped through the flattening: 2 - 2 y (1 + eps etab)
    let etab = ext.deriv::<T>(0, 0, grid);
    let yfield: Field2<T> = Field2::from_profile(grid, |y| T::from_f64(y));
    let e21 = yfield
        .mul(&etab.scale(eps).add_scalar(1.0))
        .scale(-2.0)
        .add_scalar(2.0);

    // F1 = [[a1/J, -a1^2], [1/J^2, -a1/J]] (nilpotent)
    let f11 = ta.a1.mul(&ta.jinv);
    let f12 = ta.a1.mul(&ta.a1).neg();
    let f21 = ta.jinv.mul(&ta.jinv);

    // tr(F1 (eps F2t + E)) = f11 (eps At) + f12 (eps Ct + E21)
    //                        + f21 (eps Bt) - f11 (eps Dt)
    let tr_f1f2 = f11
        .mul(&a_t.sub(&d_t))
        .add(&f21.mul(&b_t))
        .scale(eps)
        .add(&f12.mul(&c_t.scale(eps).add(&e21)));

    // eps tr(F2t^2) + 2 tr(F2t E) = eps (At^2 + Dt^2 + 2 Bt Ct) + 2 Bt E21
    let tr_f2sq = a_t
        .mul(&a_t)
        .add(&d_t.mul(&d_t))
        .add(&b_t.mul(&c_t).scale(2.0))
        .scale(eps)
        .add(&b_t.mul(&e21).scale(2.0));

    let g = ta
        .j
        .mul(&tr_f1f2.mul(&u_y).scale(2.0).add(&tr_f2sq))
        .scale(-0.5 * r);

    // g0 = (1/2) { d (u/J)_x + a1_y u / J }
    let g0 = jinv_u
        .dx(grid, 1)
        .scale(d)
        .add(&ta.jinv.mul(&ta.a1y).mul(u))
        .scale(0.5);

    // phi = -d u_x + eta/tan(alpha) - (d^2 W / sin(alpha)) eta_xx + h2 on y=1
    let eta = ext.surface_deriv::<T>(0, grid);
    let eta_xx = ext.surface_deriv::<T>(2, grid);
    let phi = u
        .dx(grid, 1)
        .trace_top()
        .scale(-d)
        .add(&eta.scale(1.0 / tan_a))
        .sub(&eta_xx.scale(d * d * w / sin_a))
        .add(&bt.h2);

    PressureJets { g, g0, phi }
}

/// Assemble the pressure problem data from the transformed state.
///
/// `u`, `v` are the transformed velocity components and `bt` the assembled
/// boundary terms at the same state (for the normal-stress remainder on the
/// surface). Jet inputs are accepted; only value parts are used.
pub fn assemble_pressure_data<T: Scalar>(
    ta: &TransformAssembly<T>,
    ext: &ExtendedSurface,
    u: &Field2<T>,
    v: &Field2<T>,
    bt: &BoundaryTerms<T>,
    params: &ScalingParams,
    grid: &Grid,
) -> PressureData {
    let jets = pressure_jets(ta, ext, u, v, bt, params, grid);
    PressureData {
        g: jets.g.component(0),
        g0: jets.g0.component(0),
        phi: jets.phi.component(0),
        n6: ta.m_n6.primal(),
    }
}

/// Assemble the data of the time-differentiated pressure problem.
///
/// Differentiating the divergence-form problem in time gives
///
/// ```text
///   div_d ( A6 grad_d p_t ) = g_t - div_d ( (A6)_t grad_d p )   in the strip,
///   p_t = phi_t                                                 on y = 1,
///   (p_t + (g0)_t)_y = 0                                        on y = 0,
/// ```
///
/// which has the same structure as the original problem and is solved by the
/// same fixed point. The inputs must carry first-order jets whose derivative
/// parts are the time derivatives of the state (surface levels `[eta, eta_t,
/// eta_tt]` and velocity jets with `u_t`, `v_t`); `p` is the synchronous
/// pressure of the value state.
pub fn assemble_pressure_rate_data<T: Scalar>(
    ta: &TransformAssembly<T>,
    ext: &ExtendedSurface,
    u: &Field2<T>,
    v: &Field2<T>,
    bt: &BoundaryTerms<T>,
    p: &BulkField,
    params: &ScalingParams,
    grid: &Grid,
) -> Result<PressureData> {
    if T::PARTS < 2 {
        return Err(Error::Contract(
            "pressure rate data requires jet-valued inputs carrying the state \
             time derivatives"
                .into(),
        ));
    }
    let jets = pressure_jets(ta, ext, u, v, bt, params, grid);
    let d = ta.delta;
    // metric rate (A6)_t = (N6)_t, entry-wise derivative part of the jets
    let n6_t = Mat2F {
        xx: ta.m_n6.xx.component(1),
        xy: ta.m_n6.xy.component(1),
        yx: ta.m_n6.yx.component(1),
        yy: ta.m_n6.yy.component(1),
    };
    let flux_t = n6_t.mul_vec(&grad_delta(p, grid, d));
    let g = jets
        .g
        .component(1)
        .sub(&flux_t.x.dx(grid, 1).scale(d))
        .sub(&flux_t.y.dy(grid, 1));
    Ok(PressureData {
        g,
        g0: jets.g0.component(1),
        phi: jets.phi.component(1),
        n6: ta.m_n6.primal(),
    })
}

// ----------------------------------------------------------------------------
// fixed point
// ----------------------------------------------------------------------------

/// Solve the divergence-form pressure problem by the `q = p + g0` fixed point.
///
/// Returns the pressure field, or a divergence error when the metric
/// perturbation is too large for the iteration to contract.
pub fn solve_pressure(
    data: &PressureData,
    solver: &HelmholtzSolver,
    grid: &Grid,
    delta: f64,
) -> Result<BulkField> {
    let grad_g0 = grad_delta(&data.g0, grid, delta);
    let top = data.phi.add(&data.g0.trace_top());

    let mut p = BulkField::zeros(grid.nx, grid.ny);
    let mut prev_update = f64::INFINITY;
    let mut update = f64::INFINITY;
    for iter in 1..=PRESSURE_MAX_ITERS {
        let flux = grad_g0.sub(&data.n6.mul_vec(&grad_delta(&p, grid, delta)));
        let rhs = data
            .g
            .add(&flux.x.dx(grid, 1).scale(delta))
            .add(&flux.y.dy(grid, 1));
        let p_new = solver.solve(&rhs, &top, grid).sub(&data.g0);
        update = p_new.sub(&p).l2_norm(grid);
        p = p_new;
        if !update.is_finite() || (iter >= 3 && update > 2.0 * prev_update) {
            return Err(Error::PressureDivergence { update, iters: iter });
        }
        if update < PRESSURE_TOL {
            return Ok(p);
        }
        prev_update = update;
    }
    Err(Error::PressureDivergence {
        update,
        iters: PRESSURE_MAX_ITERS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SurfaceField;
    use crate::transform::{assemble_boundary_terms, build_transform, ExtendedSurface};
    use num_complex::Complex64;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn params(delta: f64, eps: f64) -> ScalingParams {
        ScalingParams::from_nondimensional(delta, eps, 0.9, 1.2, FRAC_PI_4).unwrap()
    }

    fn zero_surface(nx: usize) -> SurfaceField {
        SurfaceField::from_modes(nx, &[])
    }

    #[test]
    fn helmholtz_recovers_manufactured_harmonic() {
        // q = cos(2 pi x) cosh(2 pi d y) is harmonic for the anisotropic
        // Laplacian and has q_y(.,0) = 0; the solver must reproduce it from
        // its top trace alone.
        let (nx, ny) = (16, 48);
        let grid = Grid::new(nx, ny);
        let d = 0.3;
        let solver = HelmholtzSolver::new(&grid, d);
        let top = Row::from_fn(nx, |x| (TWO_PI * x).cos() * (TWO_PI * d).cosh());
        let q = solver.solve(&BulkField::zeros(nx, ny), &top, &grid);
        let exact = BulkField::from_fn(&grid, |x, y| (TWO_PI * x).cos() * (TWO_PI * d * y).cosh());
        let err = q.sub(&exact).max_abs();
        assert!(err < 1e-8, "harmonic recovery error {err}");
    }

    #[test]
    fn helmholtz_solves_manufactured_poisson() {
        // q = cos(2 pi x) cos(pi y) + (1 - y^2); both terms satisfy the
        // bottom Neumann condition.
        let (nx, ny) = (16, 40);
        let grid = Grid::new(nx, ny);
        let d = 0.45;
        let solver = HelmholtzSolver::new(&grid, d);
        let k2 = (TWO_PI * d).powi(2);
        let rhs = BulkField::from_fn(&grid, |x, y| {
            -(k2 + PI * PI) * (TWO_PI * x).cos() * (PI * y).cos() - 2.0
        });
        let top = Row::from_fn(nx, |x| -(TWO_PI * x).cos());
        let q = solver.solve(&rhs, &top, &grid);
        let exact =
            BulkField::from_fn(&grid, |x, y| (TWO_PI * x).cos() * (PI * y).cos() + 1.0 - y * y);
        let err = q.sub(&exact).max_abs();
        assert!(err < 1e-9, "poisson error {err}");
    }

    #[test]
    fn zero_data_gives_zero_pressure() {
        let (nx, ny) = (16, 24);
        let grid = Grid::new(nx, ny);
        let d = 0.3;
        let solver = HelmholtzSolver::new(&grid, d);
        let data = PressureData {
            g: BulkField::zeros(nx, ny),
            g0: BulkField::zeros(nx, ny),
            phi: Row::zeros(nx),
            n6: Mat2F::identity(nx, ny).sub(&Mat2F::identity(nx, ny)),
        };
        let p = solve_pressure(&data, &solver, &grid, d).unwrap();
        assert!(p.max_abs() < 1e-14);
    }

    #[test]
    fn linearized_film_pressure_matches_mode_oracle() {
        // eps = 0, single-mode elevation, zero velocity: the data reduce to
        // g = g0 = 0, phi = a (1/tan(alpha) + d^2 W (2 pi)^2 / sin(alpha))
        // cos(2 pi x), and the pressure is the analytic cosh profile of the
        // single-mode two-point boundary value problem.
        let (nx, ny) = (32, 48);
        let grid = Grid::new(nx, ny);
        let p = params(0.25, 0.0);
        let a = 0.05;
        let eta = SurfaceField::from_modes(nx, &[(1, Complex64::new(0.5 * a, 0.0))]);
        let ext = ExtendedSurface::new(vec![eta, zero_surface(nx)], p.delta, &grid);
        let ta = build_transform::<f64>(&ext, &p, &grid).unwrap();
        let z = Field2::<f64>::zeros(nx, ny);
        let bt = assemble_boundary_terms(&ta, &ext, &z, &z, &p, &grid).unwrap();
        let data = assemble_pressure_data(&ta, &ext, &z, &z, &bt, &p, &grid);

        assert!(data.g.max_abs() < 1e-13);
        assert!(data.g0.max_abs() < 1e-13);
        assert!(data.n6.max_abs() < 1e-13);
        // Dirichlet datum reduces to the closed linearized form
        let amp = a * (1.0 / p.alpha.tan()
            + p.delta * p.delta * p.weber * (TWO_PI * TWO_PI) / p.alpha.sin());
        let phi_exact = Row::from_fn(nx, |x| amp * (TWO_PI * x).cos());
        assert!(data.phi.sub(&phi_exact).max_abs() < 1e-12);

        let solver = HelmholtzSolver::new(&grid, p.delta);
        let pr = solve_pressure(&data, &solver, &grid, p.delta).unwrap();
        let kd = TWO_PI * p.delta;
        let exact = BulkField::from_fn(&grid, |x, y| {
            amp * (TWO_PI * x).cos() * (kd * y).cosh() / kd.cosh()
        });
        let err = pr.sub(&exact).max_abs();
        assert!(err < 1e-8, "mode oracle error {err}");
    }

    #[test]
    fn fixed_point_satisfies_divergence_form() {
        // Nonzero elevation and state: the converged pressure must satisfy
        // div_d(A6 grad_d p) = g in the interior, p = phi on top, and
        // (p + g0)_y = 0 on the bottom, evaluated with the same spectral
        // operators.
        let (nx, ny) = (32, 40);
        let grid = Grid::new(nx, ny);
        let p = params(0.35, 0.4);
        let eta = SurfaceField::from_modes(
            nx,
            &[(1, Complex64::new(0.02, 0.01)), (3, Complex64::new(-0.01, 0.005))],
        );
        let ext = ExtendedSurface::new(vec![eta, zero_surface(nx)], p.delta, &grid);
        let ta = build_transform::<f64>(&ext, &p, &grid).unwrap();
        // no-slip state with u_y(0) != 0
        let u = Field2::from_fn(&grid, |x, y| 0.08 * (TWO_PI * x).sin() * (y * y + 0.5 * y));
        let v = Field2::from_fn(&grid, |x, y| 0.06 * (TWO_PI * x).cos() * y * y);
        let bt = assemble_boundary_terms(&ta, &ext, &u, &v, &p, &grid).unwrap();
        let data = assemble_pressure_data(&ta, &ext, &u, &v, &bt, &p, &grid);
        let solver = HelmholtzSolver::new(&grid, p.delta);
        let pr = solve_pressure(&data, &solver, &grid, p.delta).unwrap();

        let flux = Mat2F::identity(nx, ny)
            .add(&data.n6)
            .mul_vec(&grad_delta(&pr, &grid, p.delta));
        let resid = flux
            .x
            .dx(&grid, 1)
            .scale(p.delta)
            .add(&flux.y.dy(&grid, 1))
            .sub(&data.g);
        let scale = data.g.max_abs().max(pr.max_abs()).max(1e-12);
        // interior collocation rows only (boundary rows carry the BCs)
        let mut interior = 0.0f64;
        for ix in 0..nx {
            for iy in 1..ny - 1 {
                interior = interior.max(resid.data[ix * ny + iy].abs());
            }
        }
        assert!(interior / scale < 1e-7, "interior residual {interior} vs {scale}");

        let top_err = pr.trace_top().sub(&data.phi).max_abs();
        assert!(top_err < 1e-9, "Dirichlet residual {top_err}");
        let bot_err = pr.add(&data.g0).dy(&grid, 1).trace_bottom().max_abs();
        assert!(bot_err / scale < 1e-7, "Neumann residual {bot_err}");
    }

    #[test]
    fn oversized_metric_reports_divergence() {
        let (nx, ny) = (16, 24);
        let grid = Grid::new(nx, ny);
        let d = 0.3;
        let solver = HelmholtzSolver::new(&grid, d);
        // artificial metric perturbation far beyond the contraction regime
        let big = BulkField::from_fn(&grid, |x, _| 50.0 * (1.0 + 0.5 * (TWO_PI * x).cos()));
        let data = PressureData {
            g: BulkField::from_fn(&grid, |x, y| (TWO_PI * x).cos() * y),
            g0: BulkField::zeros(nx, ny),
            phi: Row::from_fn(nx, |x| 0.1 * (TWO_PI * x).cos()),
            n6: Mat2F {
                xx: big.clone(),
                xy: BulkField::zeros(nx, ny),
                yx: BulkField::zeros(nx, ny),
                yy: big,
            },
        };
        let err = solve_pressure(&data, &solver, &grid, d).unwrap_err();
        assert!(matches!(err, Error::PressureDivergence { .. }));
    }
}
