//! Scalar abstraction used by the geometric assembly: plain `f64`, or a
//! first-order dual number carrying a time derivative alongside the value.
//! Running the same assembly code on dual inputs yields the time derivatives
//! of every assembled quantity exactly (product/quotient rules), with no
//! finite differencing.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// Number of real components (1 for f64, 2 for Dual, 3 for Dual2).
    const PARTS: usize;
    fn part(&self, i: usize) -> f64;
    fn from_parts(parts: &[f64]) -> Self;
    fn from_f64(x: f64) -> Self;
    /// The primal value.
    fn val(&self) -> f64;
    /// Derivative shift: the jet of d/dt of the quantity, with the highest
    /// coefficient padded by zero. For plain f64 the value is treated as
    /// time-independent (returns 0); for jets the top component is only
    /// trustworthy when the discarded derivative order genuinely vanishes
    /// or is not consumed downstream.
    fn dt(&self) -> Self;
    /// Square root, propagated through all derivative components.
    fn sqrt(&self) -> Self;
}

impl Scalar for f64 {
    const PARTS: usize = 1;
    fn part(&self, _i: usize) -> f64 {
        *self
    }
    fn from_parts(parts: &[f64]) -> Self {
        parts[0]
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn val(&self) -> f64 {
        *self
    }
    fn dt(&self) -> Self {
        0.0
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
}

/// Value + time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub dt: f64,
}

impl Dual {
    pub fn new(v: f64, dt: f64) -> Self {
        Dual { v, dt }
    }
    pub fn constant(v: f64) -> Self {
        Dual { v, dt: 0.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.dt + o.dt)
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.dt - o.dt)
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.v * o.dt + self.dt * o.v)
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual::new(self.v / o.v, (self.dt * o.v - self.v * o.dt) / (o.v * o.v))
    }
}
impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.dt)
    }
}

impl Scalar for Dual {
    const PARTS: usize = 2;
    fn part(&self, i: usize) -> f64 {
        if i == 0 {
            self.v
        } else {
            self.dt
        }
    }
    fn from_parts(parts: &[f64]) -> Self {
        Dual::new(parts[0], parts[1])
    }
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn dt(&self) -> Self {
        Dual::new(self.dt, 0.0)
    }
    fn sqrt(&self) -> Self {
        let s = f64::sqrt(self.v);
        Dual::new(s, self.dt / (2.0 * s))
    }
}

/// Value + first and second time derivatives (stored as derivatives, not
/// Taylor coefficients). Used by the geometric assembly so that time
/// derivatives of first-derivative objects (e.g. the time derivative of a
/// term that itself contains a time derivative of the geometry) come out
/// exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Dual2 {
    pub fn new(v: f64, d1: f64, d2: f64) -> Self {
        Dual2 { v, d1, d2 }
    }
    pub fn constant(v: f64) -> Self {
        Dual2 { v, d1: 0.0, d2: 0.0 }
    }
}

impl Add for Dual2 {
    type Output = Dual2;
    fn add(self, o: Dual2) -> Dual2 {
        Dual2::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)
    }
}
impl Sub for Dual2 {
    type Output = Dual2;
    fn sub(self, o: Dual2) -> Dual2 {
        Dual2::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)
    }
}
impl Mul for Dual2 {
    type Output = Dual2;
    fn mul(self, o: Dual2) -> Dual2 {
        Dual2::new(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        )
    }
}
impl Div for Dual2 {
    type Output = Dual2;
    // from a = q*b: a' = q'b + qb', a'' = q''b + 2q'b' + qb''
    fn div(self, o: Dual2) -> Dual2 {
        let v = self.v / o.v;
        let d1 = (self.d1 - v * o.d1) / o.v;
        let d2 = (self.d2 - v * o.d2 - 2.0 * d1 * o.d1) / o.v;
        Dual2::new(v, d1, d2)
    }
}
impl Neg for Dual2 {
    type Output = Dual2;
    fn neg(self) -> Dual2 {
        Dual2::new(-self.v, -self.d1, -self.d2)
    }
}

impl Scalar for Dual2 {
    const PARTS: usize = 3;
    fn part(&self, i: usize) -> f64 {
        match i {
            0 => self.v,
            1 => self.d1,
            _ => self.d2,
        }
    }
    fn from_parts(parts: &[f64]) -> Self {
        Dual2::new(parts[0], parts[1], parts[2])
    }
    fn from_f64(x: f64) -> Self {
        Dual2::constant(x)
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn dt(&self) -> Self {
        Dual2::new(self.d1, self.d2, 0.0)
    }
    // from a = s*s: a' = 2ss', a'' = 2ss'' + 2s'^2
    fn sqrt(&self) -> Self {
        let s = f64::sqrt(self.v);
        let d1 = self.d1 / (2.0 * s);
        let d2 = (self.d2 - 2.0 * d1 * d1) / (2.0 * s);
        Dual2::new(s, d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual2_matches_analytic_jet() {
        // f(t) = t^2 / sqrt(1 + t^2) at t = 0.5
        let t = Dual2::new(0.5, 1.0, 0.0);
        let f = (t * t) / (Dual2::constant(1.0) + t * t).sqrt();
        let g = |t: f64| t * t / (1.0 + t * t).sqrt();
        let h = 1e-5;
        let d1 = (g(0.5 + h) - g(0.5 - h)) / (2.0 * h);
        let d2 = (g(0.5 + h) - 2.0 * g(0.5) + g(0.5 - h)) / (h * h);
        assert!((f.v - g(0.5)).abs() < 1e-14);
        assert!((f.d1 - d1).abs() < 1e-9);
        assert!((f.d2 - d2).abs() < 1e-5);
    }

    #[test]
    fn dt_shift_is_exact_on_products() {
        // d/dt (fg) carried one order down: value of dt(fg) = f'g + fg'
        let f = Dual2::new(2.0, 3.0, 5.0);
        let g = Dual2::new(7.0, 11.0, 13.0);
        let p = f * g;
        assert!((p.dt().v - (3.0 * 7.0 + 2.0 * 11.0)).abs() < 1e-14);
        // and its first derivative (= second derivative of fg) as well
        assert!((p.dt().d1 - (5.0 * 7.0 + 2.0 * 3.0 * 11.0 + 2.0 * 13.0)).abs() < 1e-14);
    }

    #[test]
    fn dual_quotient_rule() {
        // d/dt [x/y] with x=(2,3), y=(4,5): (3*4 - 2*5)/16 = 2/16
        let q = Dual::new(2.0, 3.0) / Dual::new(4.0, 5.0);
        assert!((q.v - 0.5).abs() < 1e-15);
        assert!((q.dt - 0.125).abs() < 1e-15);
    }
}
