//! Eigenvalue-solver checks: neutral-threshold bracketing, agreement with
//! the model dispersion at small delta*k, and monotonicity in R.

use std::f64::consts::FRAC_PI_4;

use filmcascade::models::ModelKind;
use filmcascade::params::ScalingParams;
use filmcascade::stability::{dispersion, leading_eigenvalue, neutral_reynolds, OSProblem};

fn nd(delta: f64, r: f64, w: f64) -> ScalingParams {
    ScalingParams::from_nondimensional(delta, 0.0, r, w, FRAC_PI_4).unwrap()
}

#[test]
fn neutral_threshold_bracketing() {
    let k = 0.1;
    let (delta, w) = (0.05, 1.0);
    let lam_lo = leading_eigenvalue(&OSProblem::new(k, nd(delta, 1.10, w), 32).unwrap()).unwrap();
    let lam_hi = leading_eigenvalue(&OSProblem::new(k, nd(delta, 1.40, w), 32).unwrap()).unwrap();
    assert!(lam_lo.re < 0.0, "rate at R=1.10 was {}", lam_lo.re);
    assert!(lam_hi.re > 0.0, "rate at R=1.40 was {}", lam_hi.re);
    let rn = neutral_reynolds(k, delta, w, FRAC_PI_4, 32, 1.10, 1.40).unwrap();
    assert!(
        (rn - 1.25).abs() / 1.25 < 0.03,
        "neutral R = {rn}, expected within 3% of 1.25"
    );
}

#[test]
fn leading_mode_matches_model_dispersion() {
    // small delta*k regime: the surface mode of the full system agrees with
    // the fourth-order model symbol to a few percent
    let (delta, r, w) = (0.05, 0.8, 1.0);
    let k = 0.2;
    let p = nd(delta, r, w);
    let lam = leading_eigenvalue(&OSProblem::new(k, p, 32).unwrap()).unwrap();
    let model = dispersion(ModelKind::Kawahara, k, &p);
    assert!(
        (lam - model).norm() / model.norm() < 0.05,
        "eig {lam} vs model {model}"
    );
}

#[test]
fn growth_rate_monotone_in_reynolds() {
    let (delta, w, k) = (0.05, 1.0, 0.1);
    let rc = 1.25;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..10 {
        let r = 0.5 * rc + (i as f64 / 9.0) * rc;
        let lam = leading_eigenvalue(&OSProblem::new(k, nd(delta, r, w), 32).unwrap()).unwrap();
        assert!(
            lam.re > prev,
            "rate not increasing at R={r}: {} <= {prev}",
            lam.re
        );
        prev = lam.re;
    }
}
