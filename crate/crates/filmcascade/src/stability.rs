//! Linear stability: model dispersion relations, the critical Reynolds
//! number, and an eigenvalue solver for the linearized free-surface system
//! in primitive variables (u, v, p, eta per x-wavenumber), used to
//! cross-validate both the model hierarchy and the Navier-Stokes stepper.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::{benney_coefficients, linear_symbol, ModelKind};
use crate::params::ScalingParams;
use crate::spectral::Grid;

/// Fourier symbol of the linearized model at real wavenumber k.
pub fn dispersion(kind: ModelKind, k: f64, params: &ScalingParams) -> Complex64 {
    linear_symbol(kind, k, params)
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalReynolds {
    /// the printed closed form 5/(4 tan alpha)
    pub formula: f64,
    /// the root of B1(alpha, R) = 0 located by bisection
    pub bisection: f64,
}

pub fn critical_reynolds(alpha: f64) -> Result<CriticalReynolds> {
    if !(alpha > 0.0 && alpha < std::f64::consts::FRAC_PI_2) {
        return Err(Error::ParameterDomain(format!(
            "alpha = {alpha} outside (0, pi/2)"
        )));
    }
    let formula = 1.25 / alpha.tan();
    let b1 = |r: f64| benney_coefficients(alpha, r, 1.0).unwrap().b1;
    let (mut lo, mut hi) = (0.0, 2.0 * formula + 1.0);
    debug_assert!(b1(lo) > 0.0 && b1(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if b1(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * formula.max(1.0) {
            break;
        }
    }
    Ok(CriticalReynolds {
        formula,
        bisection: 0.5 * (lo + hi),
    })
}

/// Discretized linearization of the flattened free-surface system about the
/// laminar flow, at a single real wavenumber k.
#[derive(Debug, Clone)]
pub struct OSProblem {
    pub k: f64,
    pub params: ScalingParams,
    pub ny: usize,
}

impl OSProblem {
    pub fn new(k: f64, params: ScalingParams, ny: usize) -> Result<Self> {
        if k == 0.0 {
            return Err(Error::ParameterDomain("k = 0".into()));
        }
        if ny < 24 {
            return Err(Error::ParameterDomain(format!("ny = {ny} < 24")));
        }
        if !(params.alpha < std::f64::consts::FRAC_PI_2) {
            return Err(Error::ParameterDomain(
                "free-surface solver needs alpha < pi/2".into(),
            ));
        }
        Ok(OSProblem { k, params, ny })
    }
}

/// Assemble the generalized pencil: rows are ordered u-block, v-block,
/// divergence block (pressure rows), kinematic row; returns (A, B) with the
/// eigenproblem  A x = lambda B x, where dynamic rows carry the paper's
/// delta-weighted time derivatives in B and boundary/divergence rows are
/// pure constraints (zero rows of B).
fn assemble_pencil(prob: &OSProblem) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let ny = prob.ny;
    let p = &prob.params;
    let (d, r) = (p.delta, p.reynolds);
    let k = prob.k;
    let ik = Complex64::new(0.0, k);
    let dim = 3 * ny + 1;
    let grid = Grid::new(4, ny);
    let dm = &grid.dmat;
    // second-derivative matrix
    let dm2 = dm * dm;
    let iu = |j: usize| j;
    let iv = |j: usize| ny + j;
    let ip = |j: usize| 2 * ny + j;
    let ie = 3 * ny;
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    let mut b = DMatrix::<Complex64>::zeros(dim, dim);
    let c = |x: f64| Complex64::new(x, 0.0);

    for j in 0..ny {
        let y = grid.y[j];
        let (ubar, ubar_y) = crate::params::nusselt_unchecked(y);
        if j == 0 {
            // no-slip
            a[(iu(0), iu(0))] = c(1.0);
            a[(iv(0) , iv(0))] = c(1.0);
        } else if j == ny - 1 {
            // tangential stress: u_y + delta^2 ik v - 2 eta = 0
            for l in 0..ny {
                a[(iu(j), iu(l))] = c(dm[(j, l)]);
            }
            a[(iu(j), iv(j))] = ik * c(d * d);
            a[(iu(j), ie)] = c(-2.0);
            // normal stress: p - delta v_y - eta/tan(alpha) - (delta^2 W/sin alpha) k^2 eta = 0
            a[(iv(j), ip(j))] = c(1.0);
            for l in 0..ny {
                a[(iv(j), iv(l))] -= c(d * dm[(j, l)]);
            }
            a[(iv(j), ie)] =
                c(-1.0 / p.alpha.tan() - d * d * p.weber / p.alpha.sin() * k * k);
        } else {
            // u-momentum: delta u_t = -(ubar ik delta u + delta ubar_y v
            //   + (2 delta/R) ik p) + (1/R)(u_yy - delta^2 k^2 u)
            b[(iu(j), iu(j))] = c(d);
            a[(iu(j), iu(j))] = -ik * c(ubar * d) - c(d * d * k * k / r);
            for l in 0..ny {
                a[(iu(j), iu(l))] += c(dm2[(j, l)] / r);
            }
            a[(iu(j), iv(j))] = c(-d * ubar_y);
            a[(iu(j), ip(j))] = -ik * c(2.0 * d / r);
            // v-momentum: delta^2 v_t = -(delta^2 ubar ik v + (2/R) p_y)
            //   + (1/R)(delta v_yy - delta^3 k^2 v)
            b[(iv(j), iv(j))] = c(d * d);
            a[(iv(j), iv(j))] = -ik * c(ubar * d * d) - c(d * d * d * k * k / r);
            for l in 0..ny {
                a[(iv(j), iv(l))] += c(d * dm2[(j, l)] / r);
                a[(iv(j), ip(l))] -= c(2.0 / r * dm[(j, l)]);
            }
        }
        // divergence at every node: ik u + v_y = 0
        a[(ip(j), iu(j))] = ik;
        for l in 0..ny {
            a[(ip(j), iv(l))] += c(dm[(j, l)]);
        }
    }
    // kinematic: eta_t = -ik eta + v(1)
    b[(ie, ie)] = c(1.0);
    a[(ie, ie)] = -ik;
    a[(ie, iv(ny - 1))] = c(1.0);

    (a, b)
}

/// All finite eigenvalues of the pencil via shift-invert around `sigma`.
fn pencil_eigenvalues(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    sigma: Complex64,
) -> Result<Vec<Complex64>> {
    let dim = a.nrows();
    let mut t = a.clone();
    for i in 0..dim {
        for j in 0..dim {
            t[(i, j)] -= sigma * b[(i, j)];
        }
    }
    let lu = t.lu();
    let m = lu
        .solve(b)
        .ok_or(Error::Contract("shift-invert matrix is singular; perturb sigma".into()))?;
    let schur = m.schur();
    let tri = schur.unpack().1;
    let mut out = Vec::new();
    for i in 0..dim {
        let mu: Complex64 = tri[(i, i)];
        if mu.norm() > 1e-12 {
            out.push(sigma + 1.0 / mu);
        }
    }
    Ok(out)
}

/// Eigenvalues of the linearized system, spurious modes filtered by
/// agreement between Ny and 3Ny/2 discretizations, sorted by real part
/// (descending).
pub fn os_spectrum(prob: &OSProblem) -> Result<Vec<Complex64>> {
    let (a1, b1) = assemble_pencil(prob);
    let fine = OSProblem {
        k: prob.k,
        params: prob.params,
        ny: (3 * prob.ny) / 2,
    };
    let (a2, b2) = assemble_pencil(&fine);
    let d = prob.params.delta;
    let k = prob.k;
    let sigma = Complex64::new(0.1 * k.abs() + d * k * k, -2.0 * k);
    let coarse_eigs = pencil_eigenvalues(&a1, &b1, sigma)?;
    let fine_eigs = pencil_eigenvalues(&a2, &b2, sigma)?;
    let mut kept: Vec<Complex64> = coarse_eigs
        .into_iter()
        .filter(|lam| {
            fine_eigs
                .iter()
                .any(|f| (f - lam).norm() < 1e-6 * (1.0 + lam.norm()))
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::Resolution { drift: f64::NAN });
    }
    kept.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap());
    Ok(kept)
}

/// Leading eigenvalue (largest real part).
pub fn leading_eigenvalue(prob: &OSProblem) -> Result<Complex64> {
    Ok(os_spectrum(prob)?[0])
}

/// Locate the neutral Reynolds number (Re lambda_max = 0) by bisection in R.
pub fn neutral_reynolds(
    k: f64,
    delta: f64,
    weber: f64,
    alpha: f64,
    ny: usize,
    r_lo: f64,
    r_hi: f64,
) -> Result<f64> {
    let rate = |r: f64| -> Result<f64> {
        let p = ScalingParams::from_nondimensional(delta, 0.0, r, weber, alpha)?;
        Ok(leading_eigenvalue(&OSProblem::new(k, p, ny)?)?.re)
    };
    let (mut lo, mut hi) = (r_lo, r_hi);
    let (flo, fhi) = (rate(lo)?, rate(hi)?);
    if flo * fhi > 0.0 {
        return Err(Error::Contract(format!(
            "neutral R not bracketed: rate({lo}) = {flo}, rate({hi}) = {fhi}"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f = rate(mid)?;
        if f * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn critical_reynolds_golden() {
        let rc = critical_reynolds(FRAC_PI_4).unwrap();
        assert!((rc.formula - 1.25).abs() < 1e-14);
        assert!((rc.bisection - rc.formula).abs() < 1e-12);
        let rc2 = critical_reynolds((5.0f64 / 4.0).atan()).unwrap();
        assert!((rc2.formula - 1.0).abs() < 1e-13);
    }

    #[test]
    fn dispersion_conjugate_symmetry() {
        let p = ScalingParams::from_nondimensional(0.1, 0.5, 0.8, 2.0, FRAC_PI_4).unwrap();
        for kind in [
            ModelKind::Burgers,
            ModelKind::KdVBurgers,
            ModelKind::Kawahara,
            ModelKind::Benney,
        ] {
            assert_eq!(dispersion(kind, 0.0, &p), Complex64::new(0.0, 0.0));
            let a = dispersion(kind, 3.0, &p);
            let b = dispersion(kind, -3.0, &p);
            assert!((a - b.conj()).norm() < 1e-13);
        }
    }
}
