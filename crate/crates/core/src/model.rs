use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dimensionless parameters (r, a, c, m, p).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub r: f64,
    pub a: f64,
    pub c: f64,
    pub m: f64,
    pub p: f64,
}

impl ModelParams {
    pub fn new(r: f64, a: f64, c: f64, m: f64, p: f64) -> Result<Self> {
        let s = Self { r, a, c, m, p };
        s.validate()?;
        Ok(s)
    }

    /// The fixed (r, a, m) = (1.1, 0.23, 0.31) family used throughout the examples.
    pub fn reference(c: f64, p: f64) -> Self {
        Self { r: 1.1, a: 0.23, c, m: 0.31, p }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.r, self.a, self.c, self.m, self.p];
        if all.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidParams(format!("all of r, a, c, m, p must be positive: {self:?}")));
        }
        if self.a >= 1.0 {
            return Err(Error::InvalidParams(format!("Allee threshold a = {} must be below 1", self.a)));
        }
        Ok(())
    }

    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..*self }
    }

    pub fn with_c(&self, c: f64) -> Self {
        Self { c, ..*self }
    }

    pub fn regime(&self) -> CooperationRegime {
        cooperation_regime(self)
    }
}

/// Dimensional parameters before rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RawParams {
    pub r1: f64,
    pub K1: f64,
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub p1: f64,
    pub m1: f64,
}

pub fn nondimensionalize(raw: &RawParams) -> Result<ModelParams> {
    let all = [raw.r1, raw.K1, raw.a1, raw.b1, raw.c1, raw.p1, raw.m1];
    if all.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::InvalidParams("dimensional parameters must be positive".into()));
    }
    if raw.a1 >= raw.K1 {
        return Err(Error::InvalidParams(format!("a1 = {} must be below K1 = {}", raw.a1, raw.K1)));
    }
    ModelParams::new(raw.K1 * raw.r1, raw.a1 / raw.K1, raw.c1 / (raw.b1 * raw.b1), raw.m1, raw.b1 * raw.p1 * raw.K1 / raw.m1)
}

/// Diffusivities and domain scale; the domain is (0, l*pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub d1: f64,
    pub d2: f64,
    pub l: f64,
}

impl DiffusionParams {
    pub fn new(d1: f64, d2: f64, l: f64) -> Result<Self> {
        let s = Self { d1, d2, l };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad_d = [self.d1, self.d2].iter().any(|x| !x.is_finite() || *x < 0.0);
        if bad_d || !self.l.is_finite() || self.l <= 0.0 {
            return Err(Error::InvalidParams(format!("need d1, d2 >= 0 and l > 0: {self:?}")));
        }
        Ok(())
    }

    /// Wavenumber squared n^2 / l^2 of the cosine mode cos(n x / l).
    pub fn k(&self, n: usize) -> f64 {
        let nf = n as f64;
        nf * nf / (self.l * self.l)
    }
}

/// Prey maturation delay tau1 and predator gestation delay tau2.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DelayParams {
    pub tau1: f64,
    pub tau2: f64,
}

impl DelayParams {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self> {
        let s = Self { tau1, tau2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 >= 0.0 && self.tau2 >= 0.0 && self.tau1.is_finite() && self.tau2.is_finite()) {
            return Err(Error::InvalidParams(format!("delays must be nonnegative: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub u: f64,
    pub v: f64,
}

impl State {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.u, self.v]
    }

    pub fn from_array(x: [f64; 2]) -> Self {
        Self { u: x[0], v: x[1] }
    }

    pub fn norm(self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn dist(self, other: State) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

pub fn rhs(s: State, q: &ModelParams) -> (f64, f64) {
    let State { u, v } = s;
    let du = q.r * u * (1.0 - u) * (u - q.a) - (1.0 + q.c * v) * u * v;
    let dv = q.m * v * (q.p * u * (1.0 + q.c * v) - 1.0);
    (du, dv)
}

pub fn rhs_array(x: [f64; 2], q: &ModelParams) -> [f64; 2] {
    let (du, dv) = rhs(State::from_array(x), q);
    [du, dv]
}

/// Exact Jacobian of [`rhs`], row-major.
pub fn jacobian(s: State, q: &ModelParams) -> [[f64; 2]; 2] {
    let State { u, v } = s;
    let h1 = -3.0 * u * u + 2.0 * (1.0 + q.a) * u - q.a;
    [[q.r * h1 - v - q.c * v * v, -u - 2.0 * q.c * u * v], [q.m * q.p * v * (1.0 + q.c * v), q.m * (q.p * u * (1.0 + 2.0 * q.c * v) - 1.0)]]
}

/// Second and third partial derivatives of the vector field.
///
/// `second[i][j][k]` is d^2 F_i / dx_j dx_k and `third[i][j][k][l]` the
/// corresponding third derivative, with x = (u, v).
#[derive(Debug, Clone, Copy)]
pub struct HigherDerivatives {
    pub second: [[[f64; 2]; 2]; 2],
    pub third: [[[[f64; 2]; 2]; 2]; 2],
}

pub fn higher_derivatives(s: State, q: &ModelParams) -> HigherDerivatives {
    let State { u, v } = s;
    let f_uu = q.r * (2.0 * (1.0 + q.a) - 6.0 * u);
    let f_uv = -1.0 - 2.0 * q.c * v;
    let f_vv = -2.0 * q.c * u;
    let g_uu = 0.0;
    let g_uv = q.m * q.p * (1.0 + 2.0 * q.c * v);
    let g_vv = 2.0 * q.m * q.p * q.c * u;
    let second = [[[f_uu, f_uv], [f_uv, f_vv]], [[g_uu, g_uv], [g_uv, g_vv]]];

    let mut third = [[[[0.0; 2]; 2]; 2]; 2];
    third[0][0][0][0] = -6.0 * q.r;
    // d^3 f / du dv dv in every index order
    for (j, k, l) in [(0, 1, 1), (1, 0, 1), (1, 1, 0)] {
        third[0][j][k][l] = -2.0 * q.c;
        third[1][j][k][l] = 2.0 * q.m * q.p * q.c;
    }
    HigherDerivatives { second, third }
}

/// Prey and predator nullclines in the open first quadrant.
#[derive(Debug, Clone, Copy)]
pub struct Nullclines {
    params: ModelParams,
}

pub fn nullclines(params: &ModelParams) -> Nullclines {
    Nullclines { params: *params }
}

impl Nullclines {
    /// Nonnegative root of c v^2 + v = r (1 - u)(u - a), defined on [a, 1].
    pub fn f(&self, u: f64) -> Result<f64> {
        let q = &self.params;
        if !(q.a..=1.0).contains(&u) {
            return Err(Error::Domain(format!("f(u) needs a <= u <= 1, got u = {u}")));
        }
        let w = (q.r * (1.0 - u) * (u - q.a)).max(0.0);
        // rationalised root; no cancellation as c -> 0
        Ok(2.0 * w / (1.0 + (1.0 + 4.0 * q.c * w).sqrt()))
    }

    /// g(u) = (1 - p u) / (c p u), defined on (0, 1/p].
    pub fn g(&self, u: f64) -> Result<f64> {
        let q = &self.params;
        if !(u > 0.0 && u * q.p <= 1.0) {
            return Err(Error::Domain(format!("g(u) needs 0 < u <= 1/p, got u = {u}")));
        }
        Ok((1.0 - q.p * u) / (q.c * q.p * u))
    }

    /// Signed distance-like indicator of the predator nullcline: p u (1 + c v) - 1.
    pub fn g_indicator(&self, s: State) -> f64 {
        let q = &self.params;
        q.p * s.u * (1.0 + q.c * s.v) - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CooperationRegime {
    Weak,
    Strong,
    Critical,
}

pub fn critical_cooperation(r: f64, a: f64) -> f64 {
    1.0 / (r * (1.0 - a))
}

pub fn cooperation_regime(q: &ModelParams) -> CooperationRegime {
    let cc = critical_cooperation(q.r, q.a);
    if ((q.c - cc) / cc).abs() <= 1e-12 {
        CooperationRegime::Critical
    } else if q.c < cc {
        CooperationRegime::Weak
    } else {
        CooperationRegime::Strong
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nondimensionalize_scales() {
        let raw = RawParams { r1: 0.55, K1: 2.0, a1: 0.46, b1: 2.0, c1: 1.0, p1: 0.7, m1: 0.31 };
        let q = nondimensionalize(&raw).unwrap();
        assert!((q.a - 0.23).abs() < 1e-15);
        assert!((q.c - 0.25).abs() < 1e-15);
        assert!((q.r - 1.1).abs() < 1e-15);
        assert!((q.p - 2.0 * 0.7 * 2.0 / 0.31).abs() < 1e-12);
        let unit = RawParams { r1: 1.0, K1: 1.0, a1: 0.23, b1: 1.0, c1: 0.25, p1: 1.4, m1: 1.0 };
        let q = nondimensionalize(&unit).unwrap();
        assert_eq!((q.r, q.a, q.c, q.m, q.p), (1.0, 0.23, 0.25, 1.0, 1.4));
        let bad = RawParams { a1: 2.0, ..raw };
        assert!(nondimensionalize(&bad).is_err());
    }

    #[test]
    fn boundary_points_are_equilibria() {
        let q = ModelParams::reference(0.25, 1.4);
        for s in [State::new(0.0, 0.0), State::new(q.a, 0.0), State::new(1.0, 0.0)] {
            assert_eq!(rhs(s, &q), (0.0, 0.0));
        }
    }

    #[test]
    fn boundary_jacobians() {
        let q = ModelParams::reference(0.25, 1.4);
        let j0 = jacobian(State::new(0.0, 0.0), &q);
        assert_eq!(j0, [[-q.r * q.a, 0.0], [0.0, -q.m]]);
        let j1 = jacobian(State::new(1.0, 0.0), &q);
        assert!((j1[0][0] + q.r * (1.0 - q.a)).abs() < 1e-15);
        assert_eq!(j1[0][1], -1.0);
        assert!((j1[1][1] - q.m * (q.p - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn regimes() {
        assert_eq!(ModelParams::reference(0.25, 1.0).regime(), CooperationRegime::Weak);
        assert_eq!(ModelParams::reference(8.0, 1.0).regime(), CooperationRegime::Strong);
        let cc = critical_cooperation(1.1, 0.23);
        assert_eq!(ModelParams::reference(cc, 1.0).regime(), CooperationRegime::Critical);
    }

    #[test]
    fn nullcline_endpoints() {
        let q = ModelParams::reference(0.25, 1.4);
        let n = nullclines(&q);
        assert_eq!(n.f(q.a).unwrap(), 0.0);
        assert_eq!(n.f(1.0).unwrap(), 0.0);
        assert!(n.g(1.0 / q.p).unwrap().abs() < 1e-15);
        assert!(n.f(0.1).is_err());
        assert!(n.g(0.0).is_err());
        assert!(n.g(0.9).is_err());
        let w = q.r * 0.4 * (0.6 - q.a);
        let v = n.f(0.6).unwrap();
        assert!((q.c * v * v + v - w).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(1.1, 1.2, 0.25, 0.31, 1.4).is_err());
        assert!(ModelParams::new(1.1, 0.23, -1.0, 0.31, 1.4).is_err());
        assert!(DiffusionParams::new(0.1, -1e-3, 2.0).is_err());
        assert!(DiffusionParams::new(0.1, 0.2, 0.0).is_err());
        assert!(DelayParams::new(-1.0, 0.0).is_err());
    }
}
