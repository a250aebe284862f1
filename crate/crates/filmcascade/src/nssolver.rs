//! Time integration of the transformed free-surface system on the fixed
//! strip.
//!
//! Prognostic fields are the surface elevation `eta` and the streamwise
//! velocity `u`. The vertical velocity is recovered from incompressibility
//! (`v = -int_0^y u_x`), which keeps the discrete divergence at spectral
//! accuracy by construction, and the pressure is obtained from the
//! divergence-form elliptic problem each step. The momentum update is IMEX:
//! the constant-coefficient viscous operator `(d^2 dx^2 + dy^2)/(R d)` is
//! treated implicitly per Fourier mode (backward Euler or Crank-Nicolson),
//! everything else explicitly (forward Euler or Adams-Bashforth 2). Boundary
//! conditions are imposed in the mode-wise solves: no-slip at the wall and
//! the tangential stress balance at the surface.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{nusselt_unchecked, ScalingParams};
use crate::pressure::{
    assemble_pressure_data, assemble_pressure_rate_data, solve_pressure, HelmholtzSolver,
};
use crate::spectral::{BulkField, Dual, Dual2, Field2, Grid, Row, SurfaceField, TWO_PI};
use crate::transform::{
    assemble_boundary_terms, assemble_bulk_terms, build_transform, ExtendedSurface,
};

// ----------------------------------------------------------------------------
// state
// ----------------------------------------------------------------------------

/// Snapshot of the transformed free-surface system.
#[derive(Debug, Clone)]
pub struct NSState {
    pub eta: SurfaceField,
    pub u: BulkField,
    /// vertical velocity recovered from incompressibility
    pub v: BulkField,
    /// pressure from the elliptic solve at the most recent assembly time
    /// (one step behind after `step`; recompute via `state_pressure` when an
    /// exactly synchronous pressure is needed)
    pub p: BulkField,
    pub t: f64,
}

impl NSState {
    pub fn zero(grid: &Grid) -> Self {
        NSState {
            eta: SurfaceField::zeros(grid.nx),
            u: BulkField::zeros(grid.nx, grid.ny),
            v: BulkField::zeros(grid.nx, grid.ny),
            p: BulkField::zeros(grid.nx, grid.ny),
            t: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.u.is_finite() && self.v.is_finite() && self.p.is_finite()
    }
}

/// Vertical velocity from incompressibility: `v(x,y) = -int_0^y u_x dy'`,
/// which satisfies `v(x,0) = 0` and `u_x + v_y = 0` to spectral accuracy.
pub fn lift_v(u: &BulkField, grid: &Grid) -> BulkField {
    let (nx, ny) = (u.nx, u.ny);
    let q = u.dx(grid, 1).antiderivative_y(grid); // dq/dy = u_x, q(1) = 0
    let mut v = BulkField::zeros(nx, ny);
    for ix in 0..nx {
        let q0 = q.data[ix * ny];
        for iy in 0..ny {
            v.data[ix * ny + iy] = q0 - q.data[ix * ny + iy];
        }
    }
    v
}

/// Time derivative of the elevation from the kinematic equation
/// `eta_t = -eta_x + v|_Gamma + h3` with `h3 = eps^2 eta^2 eta_x` evaluated
/// in the conservation form `d/dx (eps^2 eta^3 / 3)` so that the mean of
/// `eta` is conserved exactly.
pub fn kinematic_rate(
    eta: &SurfaceField,
    v_top: &Row,
    eps: f64,
    grid: &Grid,
) -> SurfaceField {
    let cubed = eta.to_grid(grid).map(|e| e * e * e);
    let h3 = SurfaceField::from_grid(grid, &cubed)
        .derivative(1)
        .scale(eps * eps / 3.0);
    let mut rate = SurfaceField::from_grid(grid, v_top)
        .sub(&eta.derivative(1))
        .add(&h3)
        .dealias();
    rate.enforce_real();
    rate
}

// ----------------------------------------------------------------------------
// compatibility
// ----------------------------------------------------------------------------

/// Residuals of the three initial-data conditions.
#[derive(Debug, Clone, Copy)]
pub struct CompatibilityReport {
    /// L2 norm of u_x + v_y
    pub divergence: f64,
    /// L2 norm on the surface of u_y + d^2 v_x - (2 + b3) eta - h1
    pub tangential: f64,
    /// max of the wall traces of u and v
    pub no_slip: f64,
    pub pass: bool,
}

pub const COMPAT_TOL: f64 = 1e-8;

pub fn check_compatibility(
    state: &NSState,
    params: &ScalingParams,
    grid: &Grid,
) -> Result<CompatibilityReport> {
    let d = params.delta;
    let divergence = state.u.dx(grid, 1).add(&state.v.dy(grid, 1)).l2_norm(grid);

    let ext = ExtendedSurface::new(vec![state.eta.clone()], d, grid);
    let ta = build_transform::<f64>(&ext, params, grid)?;
    let bt = assemble_boundary_terms(&ta, &ext, &state.u, &state.v, params, grid)?;
    let eta_row = state.eta.to_grid(grid);
    let resid = state
        .u
        .dy(grid, 1)
        .trace_top()
        .add(&state.v.dx(grid, 1).trace_top().scale(d * d))
        .sub(&bt.b3.add_scalar(2.0).mul(&eta_row))
        .sub(&bt.h1);
    let tangential = resid.l2_norm();

    let no_slip = state
        .u
        .trace_bottom()
        .max_abs()
        .max(state.v.trace_bottom().max_abs());

    let pass = divergence < COMPAT_TOL && tangential < COMPAT_TOL && no_slip < COMPAT_TOL;
    Ok(CompatibilityReport {
        divergence,
        tangential,
        no_slip,
        pass,
    })
}

/// Construct compatible initial data from an elevation alone.
///
/// The velocity ansatz `u = c(x) y` satisfies no-slip exactly and leaves the
/// single shear function `c` to absorb the tangential stress balance; with
/// `v` lifted from incompressibility that condition reads, per Fourier mode,
/// `c (1 + d^2 k^2 / 2) = s` where `s = (2 + b3) eta + h1`. Since `b3` and
/// `h1` depend weakly on the state the map is iterated to convergence.
pub fn compatible_initial_state(
    eta: &SurfaceField,
    params: &ScalingParams,
    grid: &Grid,
) -> Result<NSState> {
    let (nx, ny) = (grid.nx, grid.ny);
    let d = params.delta;
    let ext = ExtendedSurface::new(vec![eta.clone()], d, grid);
    let ta = build_transform::<f64>(&ext, params, grid)?;
    let eta_row = eta.to_grid(grid);

    let mut u = BulkField::zeros(nx, ny);
    let mut v = BulkField::zeros(nx, ny);
    for _ in 0..100 {
        let bt = assemble_boundary_terms(&ta, &ext, &u, &v, params, grid)?;
        let s = bt.b3.add_scalar(2.0).mul(&eta_row).add(&bt.h1);
        let mut s_hat = grid.fft_row(&s.data);
        for (i, c) in s_hat.iter_mut().enumerate() {
            let k = TWO_PI * grid.freq(i) as f64;
            *c /= 1.0 + 0.5 * d * d * k * k;
        }
        let c_row = grid.ifft_row(&s_hat);
        let mut u_new = BulkField::zeros(nx, ny);
        for ix in 0..nx {
            for iy in 0..ny {
                u_new.data[ix * ny + iy] = c_row[ix] * grid.y[iy];
            }
        }
        let diff = u_new.sub(&u).max_abs();
        u = u_new;
        v = lift_v(&u, grid);
        if diff < 1e-13 {
            break;
        }
    }

    let bt = assemble_boundary_terms(&ta, &ext, &u, &v, params, grid)?;
    let pd = assemble_pressure_data(&ta, &ext, &u, &v, &bt, params, grid);
    let helm = HelmholtzSolver::new(grid, d);
    let p = solve_pressure(&pd, &helm, grid, d)?;

    Ok(NSState {
        eta: eta.clone(),
        u,
        v,
        p,
        t: 0.0,
    })
}

// ----------------------------------------------------------------------------
// stepping
// ----------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// backward Euler viscous + forward Euler explicit (correctness baseline)
    Imex1,
    /// Crank-Nicolson viscous + Adams-Bashforth 2 explicit (default)
    CnAb2,
}

/// Default step size: safety factor 0.5 on the tightest of the streamwise
/// viscous, advective, and capillary explicit bounds (the vertical viscous
/// direction is implicit and imposes none).
pub fn default_dt(params: &ScalingParams, grid: &Grid) -> f64 {
    let dx = 1.0 / grid.nx as f64;
    let k_max = TWO_PI * (grid.nx as f64 / 3.0); // dealiased band edge
    let visc = params.reynolds * dx * dx / params.delta;
    let advect = dx / 2.0; // base-flow surface speed
    let capillary = if params.weber > 0.0 {
        params.alpha.sin() / (params.weber * k_max)
    } else {
        f64::INFINITY
    };
    0.5 * visc.min(advect).min(capillary)
}

pub struct NsStepper {
    pub params: ScalingParams,
    pub dt: f64,
    pub scheme: Scheme,
    helm: HelmholtzSolver,
    /// per-|k| LU of (I/dt - theta L_k) with boundary rows (Dirichlet at the
    /// wall, Neumann at the surface)
    visc_lus: Vec<LU<f64, Dyn, Dyn>>,
    ubar: BulkField,
    ubar_y: BulkField,
    steps_taken: usize,
    prev_explicit: Option<BulkField>,
    prev_eta_rate: Option<SurfaceField>,
    prev_s_lag: Option<Row>,
}

impl NsStepper {
    pub fn new(grid: &Grid, params: &ScalingParams, dt: f64, scheme: Scheme) -> Self {
        let (d, r) = (params.delta, params.reynolds);
        let ny = grid.ny;
        let theta = match scheme {
            Scheme::Imex1 => 1.0,
            Scheme::CnAb2 => 0.5,
        };
        let d2 = &grid.dmat * &grid.dmat;
        let mut visc_lus = Vec::with_capacity(grid.nx / 2 + 1);
        for n in 0..=grid.nx / 2 {
            let kk = (TWO_PI * n as f64).powi(2);
            let mut m = DMatrix::<f64>::zeros(ny, ny);
            for i in 0..ny {
                for j in 0..ny {
                    m[(i, j)] = -theta * d2[(i, j)] / (r * d);
                }
                m[(i, i)] += 1.0 / dt + theta * d * d * kk / (r * d);
            }
            // wall: no-slip
            for j in 0..ny {
                m[(0, j)] = 0.0;
            }
            m[(0, 0)] = 1.0;
            // surface: tangential stress balance. With v lifted from
            // incompressibility, d^2 v_x(1) = d^2 k^2 int_0^1 u dy is linear
            // in u per mode, so the full left-hand side u_y(1) + d^2 v_x(1)
            // is imposed implicitly: Neumann row plus a quadrature row.
            // (zero coefficient on the Nyquist bin, where the first
            // x-derivative operator vanishes)
            let kk_bc = if n == grid.nx / 2 { 0.0 } else { kk };
            for j in 0..ny {
                m[(ny - 1, j)] = grid.dmat[(ny - 1, j)] + d * d * kk_bc * grid.wy[j];
            }
            visc_lus.push(m.lu());
        }
        NsStepper {
            params: *params,
            dt,
            scheme,
            helm: HelmholtzSolver::new(grid, d),
            visc_lus,
            ubar: Field2::from_profile(grid, |y| nusselt_unchecked(y).0),
            ubar_y: Field2::from_profile(grid, |y| nusselt_unchecked(y).1),
            steps_taken: 0,
            prev_explicit: None,
            prev_eta_rate: None,
            prev_s_lag: None,
        }
    }

    /// Reset the multistep history (e.g. when restarting from a snapshot).
    pub fn reset_history(&mut self) {
        self.steps_taken = 0;
        self.prev_explicit = None;
        self.prev_eta_rate = None;
        self.prev_s_lag = None;
    }

    /// Advance one step.
    pub fn step(&mut self, state: &NSState, grid: &Grid) -> Result<NSState> {
        let p = &self.params;
        let (d, eps, r) = (p.delta, p.epsilon, p.reynolds);
        let (nx, ny) = (grid.nx, grid.ny);
        let dt = self.dt;

        if !state.is_finite() {
            return Err(Error::BlowUp {
                t: state.t,
                what: "non-finite state".into(),
            });
        }

        // ---- assemble everything at the current time ----
        let v = lift_v(&state.u, grid);
        let v_top = v.trace_top();
        let eta_rate = kinematic_rate(&state.eta, &v_top, eps, grid);

        let ext = ExtendedSurface::new(vec![state.eta.clone(), eta_rate.clone()], d, grid);
        let ta = build_transform::<Dual>(&ext, p, grid)?;
        let u_j = Field2::<Dual>::lift(&state.u);
        let v_j = Field2::<Dual>::lift(&v);
        let bt = assemble_boundary_terms(&ta, &ext, &u_j, &v_j, p, grid)?;
        let pd = assemble_pressure_data(&ta, &ext, &u_j, &v_j, &bt, p, grid);
        let pr = solve_pressure(&pd, &self.helm, grid, d)?;
        let bk = assemble_bulk_terms(
            &ta,
            &ext,
            &u_j,
            &v_j,
            &Field2::<Dual>::lift(&pr),
            p,
            grid,
            0,
        )?;
        let f_x = bk.f.x.component(0);
        let a4 = ta.m_a4.primal();
        let b2 = ta.b2.component(0);

        // explicit momentum forcing (everything except the constant-
        // coefficient viscous operator), divided through by delta
        let press_x = a4
            .xx
            .add_scalar(1.0)
            .mul(&pr.dx(grid, 1).scale(d))
            .add(&a4.xy.mul(&pr.dy(grid, 1)));
        let explicit = f_x
            .sub(&self.ubar.mul(&state.u.dx(grid, 1)).scale(d))
            .sub(&v.mul(&self.ubar_y).scale(d))
            .sub(&press_x.scale(2.0 / r))
            .add(&b2.mul(&state.u.dy(grid, 2)).scale(1.0 / r))
            .scale(1.0 / d)
            .dealias(grid);

        // ---- elevation update (AB2 after the first step) ----
        let rate_comb = match (&self.scheme, &self.prev_eta_rate) {
            (Scheme::CnAb2, Some(prev)) if self.steps_taken > 0 => {
                eta_rate.scale(1.5).sub(&prev.scale(0.5))
            }
            _ => eta_rate.clone(),
        };
        let mut eta_new = state.eta.add(&rate_comb.scale(dt)).dealias();
        eta_new.enforce_real();

        // ---- surface stress datum for the velocity solve ----
        // elevation part at the new time level, the v_x part implicit in the
        // boundary row; the remaining state-dependent term h1 is
        // extrapolated (AB2) or lagged (first order)
        let eta_new_row = eta_new.to_grid(grid);
        let eta_row = state.eta.to_grid(grid);
        let s_lag = bt.b3.component(0).mul(&eta_row).add(&bt.h1.component(0));
        let s_lag_comb = match (&self.scheme, &self.prev_s_lag) {
            (Scheme::CnAb2, Some(prev)) if self.steps_taken > 0 => {
                s_lag.scale(2.0).sub(prev)
            }
            _ => s_lag.clone(),
        };
        let s_bc = eta_new_row.scale(2.0).add(&s_lag_comb);

        // ---- implicit velocity solve per Fourier mode ----
        let theta_expl = match self.scheme {
            Scheme::Imex1 => 0.0,
            Scheme::CnAb2 => 0.5,
        };
        let mut rhs = state.u.scale(1.0 / dt);
        if theta_expl > 0.0 {
            let lu_field = state
                .u
                .dx(grid, 2)
                .scale(d * d)
                .add(&state.u.dy(grid, 2))
                .scale(1.0 / (r * d));
            rhs = rhs.add(&lu_field.scale(theta_expl));
        }
        let expl_comb = match (&self.scheme, &self.prev_explicit) {
            (Scheme::CnAb2, Some(prev)) if self.steps_taken > 0 => {
                explicit.scale(1.5).sub(&prev.scale(0.5))
            }
            _ => explicit.clone(),
        };
        rhs = rhs.add(&expl_comb);

        let mut hat = vec![Complex64::new(0.0, 0.0); nx * ny];
        for iy in 0..ny {
            let row: Vec<f64> = (0..nx).map(|ix| rhs.data[ix * ny + iy]).collect();
            let c = grid.fft_row(&row);
            for ix in 0..nx {
                hat[ix * ny + iy] = c[ix];
            }
        }
        let s_hat = grid.fft_row(&s_bc.data);
        for ix in 0..nx {
            let n = grid.freq(ix).unsigned_abs() as usize;
            let lu = &self.visc_lus[n];
            let mut re = DVector::from_fn(ny, |i, _| hat[ix * ny + i].re);
            let mut im = DVector::from_fn(ny, |i, _| hat[ix * ny + i].im);
            re[0] = 0.0;
            im[0] = 0.0;
            re[ny - 1] = s_hat[ix].re;
            im[ny - 1] = s_hat[ix].im;
            let sre = lu.solve(&re).expect("viscous solve (real part)");
            let sim = lu.solve(&im).expect("viscous solve (imaginary part)");
            for i in 0..ny {
                hat[ix * ny + i] = Complex64::new(sre[i], sim[i]);
            }
        }
        let mut u_new = BulkField::zeros(nx, ny);
        for iy in 0..ny {
            let coeffs: Vec<Complex64> = (0..nx).map(|ix| hat[ix * ny + iy]).collect();
            let row = grid.ifft_row(&coeffs);
            for ix in 0..nx {
                u_new.data[ix * ny + iy] = row[ix];
            }
        }

        if !u_new.is_finite() || !eta_new.is_finite() {
            return Err(Error::BlowUp {
                t: state.t + dt,
                what: "NaN in velocity or elevation update".into(),
            });
        }

        let v_new = lift_v(&u_new, grid);
        self.prev_explicit = Some(explicit);
        self.prev_eta_rate = Some(eta_rate);
        self.prev_s_lag = Some(s_lag);
        self.steps_taken += 1;

        Ok(NSState {
            eta: eta_new,
            u: u_new,
            v: v_new,
            p: pr,
            t: state.t + dt,
        })
    }
}

// ----------------------------------------------------------------------------
// state rates
// ----------------------------------------------------------------------------

/// Time derivatives of a snapshot, obtained by evaluating the right-hand
/// sides of the evolution equations (not finite differences): the kinematic
/// equation for `eta_t`, the momentum equation for `u_t`, incompressibility
/// for `v_t`, and the time-differentiated elliptic problem for `p_t`.
#[derive(Debug, Clone)]
pub struct StateRates {
    pub eta_t: SurfaceField,
    /// second time derivative of the elevation (differentiated kinematic
    /// equation), needed by the jet-valued nonlinear-term assembly
    pub eta_tt: SurfaceField,
    pub u_t: BulkField,
    pub v_t: BulkField,
    /// synchronous pressure of the snapshot (the elliptic solve at its time)
    pub p: BulkField,
    pub p_t: BulkField,
}

/// Time derivative of `u` from the momentum equation evaluated pointwise,
/// given the synchronous pressure `pr` and the assembled forcing `f_x`,
/// metric block `a4`, and viscosity coefficient `b2` at the same state.
/// Mirrors the stepper's splitting: explicit forcing plus the constant-
/// coefficient viscous operator. Exact at the interior collocation rows; the
/// discrete dynamics replace the wall and surface rows by boundary
/// conditions, which `state_rates` accounts for separately.
pub fn momentum_rate(
    u: &BulkField,
    v: &BulkField,
    pr: &BulkField,
    f_x: &BulkField,
    a4: &crate::transform::Mat2F<f64>,
    b2: &BulkField,
    params: &ScalingParams,
    grid: &Grid,
) -> BulkField {
    let (d, r) = (params.delta, params.reynolds);
    let ubar: BulkField = Field2::from_profile(grid, |y| nusselt_unchecked(y).0);
    let ubar_y: BulkField = Field2::from_profile(grid, |y| nusselt_unchecked(y).1);
    let press_x = a4
        .xx
        .add_scalar(1.0)
        .mul(&pr.dx(grid, 1).scale(d))
        .add(&a4.xy.mul(&pr.dy(grid, 1)));
    f_x.sub(&ubar.mul(&u.dx(grid, 1)).scale(d))
        .sub(&v.mul(&ubar_y).scale(d))
        .sub(&press_x.scale(2.0 / r))
        .add(&b2.mul(&u.dy(grid, 2)).scale(1.0 / r))
        .add(&u.dx(grid, 2).scale(d * d).add(&u.dy(grid, 2)).scale(1.0 / r))
        .scale(1.0 / d)
        .dealias(grid)
}

/// Replace the boundary collocation rows of a pointwise momentum rate by the
/// rates the discrete dynamics impose there: zero at the wall (no-slip holds
/// for all time) and, at the surface row, the time-differentiated tangential
/// stress balance `u_ty(1) + d^2 k^2 int_0^1 u_t dy = s_rate` per Fourier
/// mode (solved for the surface node value, the interior values being fixed).
fn impose_rate_boundary_rows(u_t: &BulkField, s_rate: &Row, delta: f64, grid: &Grid) -> BulkField {
    let (nx, ny) = (u_t.nx, u_t.ny);
    let mut hat = vec![Complex64::new(0.0, 0.0); nx * ny];
    for iy in 0..ny {
        let row: Vec<f64> = (0..nx).map(|ix| u_t.data[ix * ny + iy]).collect();
        let c = grid.fft_row(&row);
        for ix in 0..nx {
            hat[ix * ny + iy] = c[ix];
        }
    }
    let s_hat = grid.fft_row(&s_rate.data);
    for ix in 0..nx {
        let n = grid.freq(ix).unsigned_abs() as usize;
        let kk_bc = if n == grid.nx / 2 {
            0.0
        } else {
            (TWO_PI * n as f64).powi(2)
        };
        hat[ix * ny] = Complex64::new(0.0, 0.0); // wall
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..ny - 1 {
            let b = grid.dmat[(ny - 1, j)] + delta * delta * kk_bc * grid.wy[j];
            acc += b * hat[ix * ny + j];
        }
        let b_top = grid.dmat[(ny - 1, ny - 1)] + delta * delta * kk_bc * grid.wy[ny - 1];
        hat[ix * ny + ny - 1] = (s_hat[ix] - acc) / b_top;
    }
    let mut out = BulkField::zeros(nx, ny);
    for iy in 0..ny {
        let coeffs: Vec<Complex64> = (0..nx).map(|ix| hat[ix * ny + iy]).collect();
        let row = grid.ifft_row(&coeffs);
        for ix in 0..nx {
            out.data[ix * ny + iy] = row[ix];
        }
    }
    out
}

/// Compute all cached time derivatives of a snapshot from the evolution
/// equations evaluated at its time.
pub fn state_rates(state: &NSState, params: &ScalingParams, grid: &Grid) -> Result<StateRates> {
    let (d, eps) = (params.delta, params.epsilon);
    let v = &state.v;
    let eta_t = kinematic_rate(&state.eta, &v.trace_top(), eps, grid);

    // synchronous pressure and momentum right-hand side with first-order jets
    let ext = ExtendedSurface::new(vec![state.eta.clone(), eta_t.clone()], d, grid);
    let ta = build_transform::<Dual>(&ext, params, grid)?;
    let u_j = Field2::<Dual>::lift(&state.u);
    let v_j = Field2::<Dual>::lift(v);
    let bt = assemble_boundary_terms(&ta, &ext, &u_j, &v_j, params, grid)?;
    let pd = assemble_pressure_data(&ta, &ext, &u_j, &v_j, &bt, params, grid);
    let helm = HelmholtzSolver::new(grid, d);
    let pr = solve_pressure(&pd, &helm, grid, d)?;
    let bk = assemble_bulk_terms(
        &ta,
        &ext,
        &u_j,
        &v_j,
        &Field2::<Dual>::lift(&pr),
        params,
        grid,
        0,
    )?;
    let raw = momentum_rate(
        &state.u,
        v,
        &pr,
        &bk.f.x.component(0),
        &ta.m_a4.primal(),
        &ta.b2.component(0),
        params,
        grid,
    );

    // Boundary rows carry the boundary-condition rates instead of the PDE.
    // The surface datum is s = (2 + b3) eta + h1 differentiated in time;
    // h1 and b3 depend on the velocities, so the correction is iterated with
    // the corrected rate feeding back into the jets.
    let eta_jet = ext.surface_deriv::<Dual>(0, grid);
    let mut u_t = raw.clone();
    let mut v_t = lift_v(&u_t, grid);
    for _ in 0..2 {
        let u2 = Field2::<Dual>::from_components(&[&state.u, &u_t]);
        let v2 = Field2::<Dual>::from_components(&[v, &v_t]);
        let bt_r = assemble_boundary_terms(&ta, &ext, &u2, &v2, params, grid)?;
        let s_jet = bt_r.b3.mul(&eta_jet).add(&bt_r.h1);
        let s_rate = eta_t.to_grid(grid).scale(2.0).add(&s_jet.component(1));
        u_t = impose_rate_boundary_rows(&raw, &s_rate, d, grid);
        v_t = lift_v(&u_t, grid);
    }

    // differentiated kinematic equation:
    // eta_tt = v_t|_Gamma - eta_tx + eps^2 d/dx (eta^2 eta_t)
    let eta_g = state.eta.to_grid(grid);
    let etat_g = eta_t.to_grid(grid);
    let h3_t = SurfaceField::from_grid(grid, &eta_g.mul(&eta_g).mul(&etat_g))
        .derivative(1)
        .scale(eps * eps);
    let mut eta_tt = SurfaceField::from_grid(grid, &v_t.trace_top())
        .sub(&eta_t.derivative(1))
        .add(&h3_t)
        .dealias();
    eta_tt.enforce_real();

    // pressure rate from the time-differentiated elliptic problem, assembled
    // with second-order jets so the data rates are exact
    let ext2 = ExtendedSurface::new(
        vec![state.eta.clone(), eta_t.clone(), eta_tt.clone()],
        d,
        grid,
    );
    let ta2 = build_transform::<Dual2>(&ext2, params, grid)?;
    let zed = BulkField::zeros(grid.nx, grid.ny);
    let u2 = Field2::<Dual2>::from_components(&[&state.u, &u_t, &zed]);
    let v2 = Field2::<Dual2>::from_components(&[v, &v_t, &zed]);
    let bt2 = assemble_boundary_terms(&ta2, &ext2, &u2, &v2, params, grid)?;
    let pdr = assemble_pressure_rate_data(&ta2, &ext2, &u2, &v2, &bt2, &pr, params, grid)?;
    let p_t = solve_pressure(&pdr, &helm, grid, d)?;

    Ok(StateRates {
        eta_t,
        eta_tt,
        u_t,
        v_t,
        p: pr,
        p_t,
    })
}

/// Single first-order step with default settings (convenience wrapper; runs
/// use `NsStepper` to retain multistep history and factorizations).
pub fn step_ns(state: &NSState, dt: f64, params: &ScalingParams, grid: &Grid) -> Result<NSState> {
    let mut stepper = NsStepper::new(grid, params, dt, Scheme::Imex1);
    stepper.step(state, grid)
}

/// Pressure consistent with the given state (re-solves the elliptic problem).
pub fn state_pressure(state: &NSState, params: &ScalingParams, grid: &Grid) -> Result<BulkField> {
    let ext = ExtendedSurface::new(vec![state.eta.clone()], params.delta, grid);
    let ta = build_transform::<f64>(&ext, params, grid)?;
    let bt = assemble_boundary_terms(&ta, &ext, &state.u, &state.v, params, grid)?;
    let pd = assemble_pressure_data(&ta, &ext, &state.u, &state.v, &bt, params, grid);
    let helm = HelmholtzSolver::new(grid, params.delta);
    solve_pressure(&pd, &helm, grid, params.delta)
}

// ----------------------------------------------------------------------------
// runs
// ----------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub t_final: f64,
    /// step size; `None` selects `default_dt`
    pub dt: Option<f64>,
    /// record every n-th step (initial and final states always included)
    pub record_every: usize,
    pub scheme: Scheme,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            t_final: 1.0,
            dt: None,
            record_every: 10,
            scheme: Scheme::CnAb2,
        }
    }
}

/// Advance the state to the final time, recording snapshots at the given
/// cadence. Deterministic: identical inputs produce identical trajectories.
pub fn run_ns(
    init: &NSState,
    params: &ScalingParams,
    grid: &Grid,
    opts: &RunOptions,
) -> Result<Vec<NSState>> {
    let dt = opts.dt.unwrap_or_else(|| default_dt(params, grid));
    let n_steps = (opts.t_final / dt).ceil() as usize;
    let mut stepper = NsStepper::new(grid, params, dt, opts.scheme);
    let mut out = vec![init.clone()];
    let mut state = init.clone();
    for step in 0..n_steps {
        state = stepper.step(&state, grid)?;
        let last = step + 1 == n_steps;
        if last || (step + 1) % opts.record_every.max(1) == 0 {
            out.push(state.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::{leading_eigenvalue, OSProblem};
    use std::f64::consts::FRAC_PI_4;

    fn params(delta: f64, eps: f64, r: f64, w: f64) -> ScalingParams {
        ScalingParams::from_nondimensional(delta, eps, r, w, FRAC_PI_4).unwrap()
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let grid = Grid::new(16, 16);
        let p = params(0.2, 0.3, 0.9, 1.2);
        let mut stepper = NsStepper::new(&grid, &p, 1e-3, Scheme::CnAb2);
        let mut state = NSState::zero(&grid);
        for _ in 0..1000 {
            state = stepper.step(&state, &grid).unwrap();
        }
        assert!(state.eta.sobolev_norm(0.0) < 1e-12);
        assert!(state.u.max_abs() < 1e-12);
        assert!(state.v.max_abs() < 1e-12);
        assert!(state.p.max_abs() < 1e-12);
    }

    #[test]
    fn compatibility_zero_state_passes() {
        let grid = Grid::new(16, 16);
        let p = params(0.2, 0.3, 0.9, 1.2);
        let rep = check_compatibility(&NSState::zero(&grid), &p, &grid).unwrap();
        assert!(rep.pass);
        assert!(rep.divergence == 0.0 && rep.tangential == 0.0 && rep.no_slip == 0.0);
    }

    #[test]
    fn compatible_initializer_passes_check() {
        let grid = Grid::new(32, 32);
        let p = params(0.2, 0.3, 0.9, 1.2);
        let eta = SurfaceField::from_modes(
            32,
            &[(1, Complex64::new(0.01, 0.0)), (2, Complex64::new(0.0, 0.004))],
        );
        let state = compatible_initial_state(&eta, &p, &grid).unwrap();
        let rep = check_compatibility(&state, &p, &grid).unwrap();
        assert!(
            rep.pass,
            "div {} tan {} slip {}",
            rep.divergence, rep.tangential, rep.no_slip
        );
    }

    #[test]
    fn incompatible_data_fails_on_divergence() {
        let grid = Grid::new(16, 24);
        let p = params(0.2, 0.3, 0.9, 1.2);
        let mut state = NSState::zero(&grid);
        state.u = Field2::from_fn(&grid, |x, y| (TWO_PI * x).sin() * y);
        let rep = check_compatibility(&state, &p, &grid).unwrap();
        assert!(!rep.pass);
        assert!(rep.divergence > 1e-3);
    }

    #[test]
    fn mass_is_conserved() {
        let grid = Grid::new(32, 24);
        let p = params(0.2, 0.3, 0.9, 1.2);
        let eta = SurfaceField::from_modes(
            32,
            &[(1, Complex64::new(0.008, 0.0)), (3, Complex64::new(0.0, 0.003))],
        );
        let init = compatible_initial_state(&eta, &p, &grid).unwrap();
        let mass0 = init.eta.mean();
        let mut stepper = NsStepper::new(&grid, &p, 5e-4, Scheme::CnAb2);
        let mut state = init;
        for _ in 0..200 {
            state = stepper.step(&state, &grid).unwrap();
        }
        assert!(
            (state.eta.mean() - mass0).abs() < 1e-10,
            "mass drift {}",
            (state.eta.mean() - mass0).abs()
        );
    }

    #[test]
    fn post_step_residuals_meet_gates() {
        let grid = Grid::new(32, 48);
        let p = params(0.2, 0.3, 0.9, 1.2);
        let eta = SurfaceField::from_modes(32, &[(1, Complex64::new(0.002, 0.0))]);
        let init = compatible_initial_state(&eta, &p, &grid).unwrap();
        let mut stepper = NsStepper::new(&grid, &p, 2e-4, Scheme::CnAb2);
        let mut state = init;
        for _ in 0..20 {
            state = stepper.step(&state, &grid).unwrap();
        }
        // incompressibility
        let div = state.u.dx(&grid, 1).add(&state.v.dy(&grid, 1)).l2_norm(&grid);
        assert!(div < 1e-9, "divergence {div}");
        // no-slip is exact in the mode-wise solve
        assert!(state.u.trace_bottom().max_abs() < 1e-13);
        assert!(state.v.trace_bottom().max_abs() < 1e-13);
        // tangential stress balance evaluated at the new state
        let rep = check_compatibility(&state, &p, &grid).unwrap();
        assert!(rep.tangential < 1e-8, "tangential {}", rep.tangential);
        // normal stress: the surface trace of the synchronous pressure
        // matches its Dirichlet datum by construction of the elliptic solve
        let pr = state_pressure(&state, &p, &grid).unwrap();
        let ext = ExtendedSurface::new(vec![state.eta.clone()], p.delta, &grid);
        let ta = build_transform::<f64>(&ext, &p, &grid).unwrap();
        let bt = assemble_boundary_terms(&ta, &ext, &state.u, &state.v, &p, &grid).unwrap();
        let pd = assemble_pressure_data(&ta, &ext, &state.u, &state.v, &bt, &p, &grid);
        let normal = pr.trace_top().sub(&pd.phi).max_abs();
        assert!(normal < 1e-8, "normal stress {normal}");
    }

    #[test]
    fn linear_growth_rate_matches_eigenvalue_oracle() {
        // eps = 0 freezes the nonlinearity, so a single-mode elevation
        // evolves as a superposition of the linearized system's eigenmodes;
        // after a transient the leading eigenvalue dominates and the decay
        // or growth of |eta_1| must match its real part.
        let grid = Grid::new(8, 32);
        let p = params(0.1, 0.0, 2.0, 1.2);
        let lam = leading_eigenvalue(&OSProblem::new(TWO_PI, p, 32).unwrap()).unwrap();

        let eta = SurfaceField::from_modes(8, &[(1, Complex64::new(1e-3, 0.0))]);
        let init = compatible_initial_state(&eta, &p, &grid).unwrap();
        let dt = 5e-4;
        let mut stepper = NsStepper::new(&grid, &p, dt, Scheme::CnAb2);
        let mut state = init;
        let mut samples: Vec<(f64, f64)> = Vec::new();
        let t_final = 2.0;
        let n = (t_final / dt) as usize;
        for step in 0..n {
            state = stepper.step(&state, &grid).unwrap();
            if state.t >= 1.0 && step % 20 == 0 {
                samples.push((state.t, state.eta.coeffs[1].norm().ln()));
            }
        }
        // least-squares slope of ln |eta_1|
        let m = samples.len() as f64;
        let sx: f64 = samples.iter().map(|s| s.0).sum();
        let sy: f64 = samples.iter().map(|s| s.1).sum();
        let sxx: f64 = samples.iter().map(|s| s.0 * s.0).sum();
        let sxy: f64 = samples.iter().map(|s| s.0 * s.1).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        let rel = (slope - lam.re).abs() / lam.re.abs().max(1e-12);
        assert!(
            rel < 0.05,
            "growth rate {slope} vs eigenvalue {} (rel {rel})",
            lam.re
        );
    }

    #[test]
    fn zero_state_has_zero_rates() {
        let grid = Grid::new(16, 16);
        let p = params(0.2, 0.3, 0.9, 1.2);
        let rates = state_rates(&NSState::zero(&grid), &p, &grid).unwrap();
        assert!(rates.eta_t.sobolev_norm(0.0) < 1e-14);
        assert!(rates.eta_tt.sobolev_norm(0.0) < 1e-14);
        assert!(rates.u_t.max_abs() < 1e-14);
        assert!(rates.v_t.max_abs() < 1e-14);
        assert!(rates.p.max_abs() < 1e-14);
        assert!(rates.p_t.max_abs() < 1e-14);
    }

    #[test]
    fn pressure_rate_matches_finite_difference() {
        // Parametrize a state family (eta + s deta, u + s du) and compare the
        // rate-problem solve against a centered difference of the plain
        // pressure solve in s. Isolates the time-differentiated elliptic
        // machinery with an analytic direction.
        use crate::pressure::assemble_pressure_rate_data;
        let (nx, ny) = (24, 32);
        let grid = Grid::new(nx, ny);
        let p = params(0.3, 0.4, 0.9, 1.2);
        let eta0 = SurfaceField::from_modes(
            nx,
            &[(1, Complex64::new(0.02, 0.01)), (3, Complex64::new(-0.008, 0.004))],
        );
        let eta1 = SurfaceField::from_modes(
            nx,
            &[(1, Complex64::new(-0.01, 0.006)), (2, Complex64::new(0.007, 0.0))],
        );
        let u0 = Field2::from_fn(&grid, |x, y| 0.05 * (TWO_PI * x).sin() * (y * y + 0.3 * y));
        let u1 = Field2::from_fn(&grid, |x, y| 0.04 * (TWO_PI * x).cos() * (0.5 * y * y + 0.2 * y));
        let v0 = lift_v(&u0, &grid);
        let v1 = lift_v(&u1, &grid);

        let solve_at = |s: f64| -> BulkField {
            let eta = eta0.add(&eta1.scale(s));
            let u = u0.add(&u1.scale(s));
            let v = lift_v(&u, &grid);
            let ext = ExtendedSurface::new(vec![eta], p.delta, &grid);
            let ta = build_transform::<f64>(&ext, &p, &grid).unwrap();
            let bt = assemble_boundary_terms(&ta, &ext, &u, &v, &p, &grid).unwrap();
            let pd = assemble_pressure_data(&ta, &ext, &u, &v, &bt, &p, &grid);
            let helm = HelmholtzSolver::new(&grid, p.delta);
            solve_pressure(&pd, &helm, &grid, p.delta).unwrap()
        };
        let pr0 = solve_at(0.0);

        // rate solve with jets carrying the direction (second derivative of
        // the linear family is zero)
        let zsurf = SurfaceField::zeros(nx);
        let ext2 = ExtendedSurface::new(vec![eta0.clone(), eta1.clone(), zsurf], p.delta, &grid);
        let ta2 = build_transform::<Dual2>(&ext2, &p, &grid).unwrap();
        let zed = BulkField::zeros(nx, ny);
        let u2 = Field2::<Dual2>::from_components(&[&u0, &u1, &zed]);
        let v2 = Field2::<Dual2>::from_components(&[&v0, &v1, &zed]);
        let bt2 = assemble_boundary_terms(&ta2, &ext2, &u2, &v2, &p, &grid).unwrap();
        let pdr =
            assemble_pressure_rate_data(&ta2, &ext2, &u2, &v2, &bt2, &pr0, &p, &grid).unwrap();
        let helm = HelmholtzSolver::new(&grid, p.delta);
        let rate = solve_pressure(&pdr, &helm, &grid, p.delta).unwrap();

        let h = 1e-4;
        let fd = solve_at(h).sub(&solve_at(-h)).scale(0.5 / h);
        let scale = rate.max_abs().max(1e-12);
        let err = fd.sub(&rate).max_abs() / scale;
        assert!(err < 1e-5, "pressure rate vs FD: rel {err} (scale {scale})");
    }

    #[test]
    fn state_rates_match_trajectory_differences() {
        // Centered differences along a computed trajectory must agree with
        // the evaluated right-hand sides to stepping accuracy.
        let grid = Grid::new(32, 40);
        let p = params(0.2, 0.3, 0.9, 1.2);
        let eta = SurfaceField::from_modes(
            32,
            &[(1, Complex64::new(0.005, 0.0)), (2, Complex64::new(0.0, 0.002))],
        );
        let init = compatible_initial_state(&eta, &p, &grid).unwrap();
        let dt = 1e-4;
        // backward Euler damps the stiff near-wall transients excited by the
        // constructed initial data; Crank-Nicolson would keep them ringing
        // and contaminate the finite differences
        let mut relax = NsStepper::new(&grid, &p, dt, Scheme::Imex1);
        let mut state = init;
        for _ in 0..40 {
            state = relax.step(&state, &grid).unwrap();
        }
        // then switch to the second-order scheme so the centered differences
        // see O(dt^2) trajectory error
        let mut stepper = NsStepper::new(&grid, &p, dt, Scheme::CnAb2);
        let mut states = vec![state];
        for _ in 0..6 {
            let next = stepper.step(states.last().unwrap(), &grid).unwrap();
            states.push(next);
        }
        let (before, mid, after) = (&states[4], &states[5], &states[6]);
        let rates = state_rates(mid, &p, &grid).unwrap();

        let eta_fd = after.eta.sub(&before.eta).scale(0.5 / dt);
        let eta_err = eta_fd.sub(&rates.eta_t).sobolev_norm(0.0)
            / rates.eta_t.sobolev_norm(0.0).max(1e-12);
        assert!(eta_err < 1e-4, "eta_t vs FD rel {eta_err}");

        let u_fd = after.u.sub(&before.u).scale(0.5 / dt);
        let u_err = u_fd.sub(&rates.u_t).l2_norm(&grid) / rates.u_t.l2_norm(&grid).max(1e-12);
        assert!(u_err < 1e-3, "u_t vs FD rel {u_err}");

        let p_before = state_pressure(before, &p, &grid).unwrap();
        let p_after = state_pressure(after, &p, &grid).unwrap();
        let p_mid = state_pressure(mid, &p, &grid).unwrap();
        assert!(rates.p.sub(&p_mid).max_abs() < 1e-9);
        let p_fd = p_after.sub(&p_before).scale(0.5 / dt);
        let p_err = p_fd.sub(&rates.p_t).l2_norm(&grid) / rates.p_t.l2_norm(&grid).max(1e-12);
        assert!(p_err < 1e-2, "p_t vs FD rel {p_err}");
    }

    #[test]
    fn run_is_deterministic_and_t_zero_is_identity() {
        let grid = Grid::new(16, 16);
        let p = params(0.2, 0.3, 0.9, 1.2);
        let eta = SurfaceField::from_modes(16, &[(1, Complex64::new(0.005, 0.0))]);
        let init = compatible_initial_state(&eta, &p, &grid).unwrap();

        let zero = run_ns(
            &init,
            &p,
            &grid,
            &RunOptions {
                t_final: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(zero.len(), 1);
        assert_eq!(zero[0].u.data, init.u.data);

        let opts = RunOptions {
            t_final: 0.02,
            dt: Some(1e-3),
            record_every: 5,
            scheme: Scheme::CnAb2,
        };
        let a = run_ns(&init, &p, &grid, &opts).unwrap();
        let b = run_ns(&init, &p, &grid, &opts).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.u.data, y.u.data);
            assert_eq!(x.eta.coeffs, y.eta.coeffs);
        }
    }
}
