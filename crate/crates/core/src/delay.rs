//! Two-delay linear analysis at E*: per-mode characteristic quasi-polynomials
//!
//!   D_n(lambda) = P0 + P1 e^{-lambda tau1} + P2 e^{-lambda tau2} + P3 e^{-lambda (tau1 + tau2)},
//!
//! their crossing sets, stability switching curves, crossing directions, a
//! stability map over the (tau1, tau2) plane and double-Hopf points.

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::equilibria::{Equilibrium, EquilibriumKind};
use crate::model::{DiffusionParams, ModelParams};
use crate::roots::bisect;
use crate::{Error, Result};

/// Crossing-set scan resolution.
pub const POINTS_PER_DECADE: usize = 4000;
pub const SCAN_DECADES: usize = 7;
/// Samples along each crossing interval when tracing a curve.
pub const CURVE_SAMPLES: usize = 3000;
pub const SIMPLE_ROOT_TOL: f64 = 1e-12;
pub const THETA_CLAMP_TOL: f64 = 1e-10;

/// Non-fatal report on the assumptions behind the switching-curve method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreconditionReport {
    pub below_hopf: bool,
    pub turing_stable: bool,
    /// (i): deg P0 >= deg of the others.
    pub degree_ok: bool,
    /// (ii): P0(0) + P1(0) + P2(0) + P3(0) = J_n != 0.
    pub sum_at_zero: f64,
    /// (iii)
    pub coprime: bool,
    /// (iv): limit of |P1/P0| + |P2/P0| + |P3/P0| as lambda -> infinity.
    pub ratio_limit: f64,
}

impl PreconditionReport {
    pub fn all_hold(&self) -> bool {
        self.below_hopf && self.turing_stable && self.degree_ok && self.sum_at_zero != 0.0 && self.coprime && self.ratio_limit < 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharQuasiPolynomial {
    pub n: usize,
    /// n^2 / l^2
    pub k: f64,
    pub d1: f64,
    pub d2: f64,
    pub a11: f64,
    pub a12: f64,
    pub b11: f64,
    pub c21: f64,
    pub c22: f64,
    /// Coefficients in ascending powers of lambda.
    pub p0: [f64; 3],
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub p3: f64,
    pub report: PreconditionReport,
}

/// The four polynomials evaluated at one point.
#[derive(Debug, Clone, Copy)]
pub struct PValues {
    pub p0: C,
    pub p1: C,
    pub p2: C,
    pub p3: C,
}

impl CharQuasiPolynomial {
    pub fn eval(&self, z: C) -> PValues {
        PValues {
            p0: self.p0[0] + z * (self.p0[1] + z * self.p0[2]),
            p1: self.p1[0] + z * self.p1[1],
            p2: self.p2[0] + z * self.p2[1],
            p3: C::new(self.p3, 0.0),
        }
    }

    pub fn d(&self, z: C, tau1: f64, tau2: f64) -> C {
        let p = self.eval(z);
        let e1 = (-z * tau1).exp();
        let e2 = (-z * tau2).exp();
        p.p0 + p.p1 * e1 + p.p2 * e2 + p.p3 * e1 * e2
    }

    /// dD/dlambda.
    pub fn d_lambda(&self, z: C, tau1: f64, tau2: f64) -> C {
        let p = self.eval(z);
        let dp0 = self.p0[1] + 2.0 * self.p0[2] * z;
        let dp1 = C::new(self.p1[1], 0.0);
        let dp2 = C::new(self.p2[1], 0.0);
        let e1 = (-z * tau1).exp();
        let e2 = (-z * tau2).exp();
        dp0 + (dp1 - tau1 * p.p1) * e1 + (dp2 - tau2 * p.p2) * e2 - (tau1 + tau2) * p.p3 * e1 * e2
    }

    /// (dD/dtau1, dD/dtau2).
    pub fn d_tau(&self, z: C, tau1: f64, tau2: f64) -> (C, C) {
        let p = self.eval(z);
        let e1 = (-z * tau1).exp();
        let e2 = (-z * tau2).exp();
        (-z * (p.p1 * e1 + p.p3 * e1 * e2), -z * (p.p2 * e2 + p.p3 * e1 * e2))
    }

    /// Delay-free trace and determinant: D(lambda; 0, 0) = lambda^2 - T lambda + J.
    pub fn delay_free(&self) -> (f64, f64) {
        let c1 = self.p0[1] + self.p1[1] + self.p2[1];
        let c0 = self.p0[0] + self.p1[0] + self.p2[0] + self.p3;
        (-c1, c0)
    }

    /// Radius beyond which no root with Re lambda >= 0 exists: there
    /// |P0| > |P1| + |P2| + |P3| >= |sum of the delayed terms|.
    pub fn root_bound(&self) -> f64 {
        // Cauchy bound on the roots of P0, so |P0(z)| >= (|z| - al)^2
        let al = 1.0 + self.p0[0].abs().max(self.p0[1].abs());
        let excess = |r: f64| {
            let lhs = (r - al).max(0.0).powi(2);
            let rhs = self.p1[0].abs() + self.p1[1].abs() * r + self.p2[0].abs() + self.p2[1].abs() * r + self.p3.abs();
            lhs - rhs
        };
        let mut r = 1.0 + al;
        while excess(r) <= 0.0 {
            r *= 2.0;
        }
        r
    }

    /// F_n(omega) in the tau1 form.
    pub fn f(&self, omega: f64) -> f64 {
        let h = self.harmonics(omega);
        h.lhs1 * h.lhs1 - 4.0 * h.w1.norm_sqr()
    }

    /// F_n(omega) built from the tau2 form of the crossing condition.
    pub fn f_alt(&self, omega: f64) -> f64 {
        let h = self.harmonics(omega);
        h.lhs2 * h.lhs2 - 4.0 * h.w2.norm_sqr()
    }

    pub fn harmonics(&self, omega: f64) -> Harmonics {
        let p = self.eval(C::new(0.0, omega));
        let (s0, s1, s2, s3) = (p.p0.norm_sqr(), p.p1.norm_sqr(), p.p2.norm_sqr(), p.p3.norm_sqr());
        Harmonics {
            lhs1: s0 + s1 - s2 - s3,
            lhs2: s0 - s1 + s2 - s3,
            w1: p.p2 * p.p3.conj() - p.p0 * p.p1.conj(),
            w2: p.p1 * p.p3.conj() - p.p0 * p.p2.conj(),
        }
    }

    /// Frequency above which F_n > 0: |P0(i w)| = |i w + x||i w + y| >= w^2
    /// and the others are bounded linearly, so w^2 > beta w + gamma suffices.
    pub fn omega_max(&self) -> f64 {
        let beta = self.p1[1].abs() + self.p2[1].abs();
        let gamma = self.p1[0].abs() + self.p2[0].abs() + self.p3.abs();
        1.01 * 0.5 * (beta + (beta * beta + 4.0 * gamma).sqrt()) + 1e-3
    }
}

/// Terms of the crossing condition at one frequency: lhs1 = 2|w1| cos(phi1 + w tau1)
/// and lhs2 = 2|w2| cos(phi2 + w tau2).
#[derive(Debug, Clone, Copy)]
pub struct Harmonics {
    pub lhs1: f64,
    pub lhs2: f64,
    pub w1: C,
    pub w2: C,
}

/// Entries of A, B, C and the four polynomials for mode n.
pub fn char_quasi_poly(n: usize, params: &ModelParams, diff: &DiffusionParams, eq: &Equilibrium) -> Result<CharQuasiPolynomial> {
    if eq.kind != EquilibriumKind::InteriorPrimary {
        return Err(Error::Domain("delay analysis needs the primary interior equilibrium".into()));
    }
    let q = params;
    let (u, v) = (eq.u, eq.v);
    let a11 = q.r * u * (1.0 - u);
    let a12 = -2.0 * q.c * u * v - u;
    let b11 = -q.r * u * (u - q.a);
    let c21 = q.m * q.p * (1.0 + q.c * v) * v;
    let c22 = q.m * q.p * q.c * u * v;
    let k = diff.k(n);
    let x = diff.d1 * k - a11;
    let y = diff.d2 * k;
    let p0 = [x * y, x + y, 1.0];
    let p1 = [-b11 * y, -b11];
    let p2 = [-c22 * x - a12 * c21, -c22];
    let p3 = b11 * c22;

    let turing_stable =
        (1..=crate::turing::N_MAX.max(n)).all(|m| crate::turing::d2_critical(m, diff.d1, q, diff.l, eq).is_none_or(|t| diff.d2 > t));
    let below_hopf = eq.trace < 0.0;
    // P3 is a nonzero constant unless b11 c22 = 0; then test the roots of P0
    let coprime = p3 != 0.0 || {
        let roots = [-x, -y];
        !roots.iter().any(|&r| {
            let z = C::new(r, 0.0);
            let pv = CharQuasiPolynomial::eval_static(&p1, &p2, z);
            pv.0.norm() < 1e-14 && pv.1.norm() < 1e-14
        })
    };
    let report = PreconditionReport {
        below_hopf,
        turing_stable,
        degree_ok: true,
        sum_at_zero: p0[0] + p1[0] + p2[0] + p3,
        coprime,
        ratio_limit: 0.0,
    };
    Ok(CharQuasiPolynomial { n, k, d1: diff.d1, d2: diff.d2, a11, a12, b11, c21, c22, p0, p1, p2, p3, report })
}

impl CharQuasiPolynomial {
    fn eval_static(p1: &[f64; 2], p2: &[f64; 2], z: C) -> (C, C) {
        (p1[0] + z * p1[1], p2[0] + z * p2[1])
    }
}

/// Modes 0..=n_max.
pub fn char_quasi_family(params: &ModelParams, diff: &DiffusionParams, eq: &Equilibrium, n_max: usize) -> Result<Vec<CharQuasiPolynomial>> {
    (0..=n_max).map(|n| char_quasi_poly(n, params, diff, eq)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSet {
    pub n: usize,
    pub f_at_zero: f64,
    /// True when F_n(0) <= 0, so the first interval is (0, b_1].
    pub open_at_zero: bool,
    /// [a_k, b_k]; a_1 = 0 when `open_at_zero`.
    pub intervals: Vec<(f64, f64)>,
}

impl CrossingSet {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

fn crossing_set_of(cqp: &CharQuasiPolynomial, f: impl Fn(f64) -> f64) -> CrossingSet {
    let w_max = cqp.omega_max();
    let w_min = w_max * 10f64.powi(-(SCAN_DECADES as i32));
    let total = POINTS_PER_DECADE * SCAN_DECADES;
    let grid: Vec<f64> = (0..=total).map(|i| w_min * (w_max / w_min).powf(i as f64 / total as f64)).collect();
    let f0 = f(0.0);
    let mut roots = Vec::new();
    let mut prev = f(grid[0]);
    for w in grid.windows(2) {
        let cur = f(w[1]);
        if (prev <= 0.0) != (cur <= 0.0) {
            roots.push(bisect(&f, w[0], w[1], 1e-13).unwrap_or(0.5 * (w[0] + w[1])));
        }
        prev = cur;
    }
    let open = f0 <= 0.0;
    let mut intervals = Vec::new();
    let mut it = roots.into_iter();
    if open {
        if let Some(b) = it.next() {
            intervals.push((0.0, b));
        }
    }
    while let Some(a) = it.next() {
        let b = it.next().unwrap_or(w_max);
        intervals.push((a, b));
    }
    CrossingSet { n: cqp.n, f_at_zero: f0, open_at_zero: open, intervals }
}

/// Omega_n = { omega > 0 : F_n(omega) <= 0 }.
pub fn crossing_set(cqp: &CharQuasiPolynomial) -> CrossingSet {
    crossing_set_of(cqp, |w| cqp.f(w))
}

/// The same set computed from the tau2 form of the condition.
pub fn crossing_set_alt(cqp: &CharQuasiPolynomial) -> CrossingSet {
    crossing_set_of(cqp, |w| cqp.f_alt(w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    /// tau1 uses +theta1, tau2 uses -theta2.
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub omega: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CurveId {
    pub n: usize,
    /// 1-based interval index within the crossing set.
    pub j: usize,
    pub branch: Branch,
    pub j1: i64,
    pub j2: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingCurve {
    pub id: CurveId,
    /// Ordered by increasing omega (the positive direction).
    pub points: Vec<CurvePoint>,
}

/// Angles at one frequency; `None` outside the crossing set.
#[derive(Debug, Clone, Copy)]
pub struct Angles {
    pub theta1: f64,
    pub theta2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub h: Harmonics,
}

fn clamped_acos(x: f64) -> Option<f64> {
    if x.is_finite() && x.abs() <= 1.0 + THETA_CLAMP_TOL {
        Some(x.clamp(-1.0, 1.0).acos())
    } else {
        None
    }
}

/// Principal angle in (-pi, pi].
fn principal_arg(z: C) -> f64 {
    let a = z.arg();
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

pub fn angles(cqp: &CharQuasiPolynomial, omega: f64) -> Option<Angles> {
    let h = cqp.harmonics(omega);
    let (r1, r2) = (h.w1.norm(), h.w2.norm());
    if r1 == 0.0 || r2 == 0.0 {
        return None;
    }
    Some(Angles {
        theta1: clamped_acos(h.lhs1 / (2.0 * r1))?,
        theta2: clamped_acos(h.lhs2 / (2.0 * r2))?,
        phi1: principal_arg(h.w1),
        phi2: principal_arg(h.w2),
        h,
    })
}

fn point_at(ang: &Angles, omega: f64, branch: Branch, j1: i64, j2: i64) -> CurvePoint {
    let s = if branch == Branch::Plus { 1.0 } else { -1.0 };
    CurvePoint {
        omega,
        tau1: (s * ang.theta1 - ang.phi1 + 2.0 * PI * j1 as f64) / omega,
        tau2: (-s * ang.theta2 - ang.phi2 + 2.0 * PI * j2 as f64) / omega,
        theta1: ang.theta1,
        theta2: ang.theta2,
        phi1: ang.phi1,
        phi2: ang.phi2,
        a1: ang.h.w1.re,
        b1: ang.h.w1.im,
        a2: ang.h.w2.re,
        b2: ang.h.w2.im,
    }
}

/// Curve point for the given id at frequency omega.
pub fn curve_point(cqp: &CharQuasiPolynomial, id: &CurveId, omega: f64) -> Option<CurvePoint> {
    angles(cqp, omega).map(|a| point_at(&a, omega, id.branch, id.j1, id.j2))
}

fn interval_samples(a: f64, b: f64, open: bool) -> Vec<f64> {
    let m = CURVE_SAMPLES;
    let mut out = Vec::with_capacity(m + 200);
    if open {
        // geometric approach to omega = 0, where tau grows like 1/omega
        let lo = b * 1e-5;
        let first = 0.5 * b * (1.0 - (PI / m as f64).cos());
        for i in 0..200 {
            let w = lo * (first / lo).powf(i as f64 / 200.0);
            out.push(w);
        }
        for i in 1..=m {
            out.push(0.5 * b * (1.0 - (PI * i as f64 / m as f64).cos()));
        }
    } else {
        for i in 0..=m {
            out.push(a + 0.5 * (b - a) * (1.0 - (PI * i as f64 / m as f64).cos()));
        }
    }
    out
}

/// Box (tau1_lo, tau1_hi, tau2_lo, tau2_hi).
pub type TauBox = (f64, f64, f64, f64);

fn in_box(p: &CurvePoint, bx: &TauBox) -> bool {
    p.tau1 >= bx.0 && p.tau1 <= bx.1 && p.tau2 >= bx.2 && p.tau2 <= bx.3
}

/// Full polylines (all sampled omegas) of every curve with a point in `bx`.
pub fn curves_meeting_box(cqp: &CharQuasiPolynomial, set: &CrossingSet, bx: TauBox) -> Vec<SwitchingCurve> {
    let mut out = Vec::new();
    for (jx, &(a, b)) in set.intervals.iter().enumerate() {
        let open = set.open_at_zero && jx == 0;
        let ws = interval_samples(a, b, open);
        let last = ws.len() - 1;
        let samples: Vec<(f64, Angles)> = ws
            .into_iter()
            .enumerate()
            .filter_map(|(i, w)| {
                let mut g = angles(cqp, w)?;
                // F = 0 at the interval ends, where theta is exactly 0 or pi
                if (i == 0 && !open) || i == last {
                    g.theta1 = (g.theta1 / PI).round() * PI;
                    g.theta2 = (g.theta2 / PI).round() * PI;
                }
                Some((w, g))
            })
            .collect();
        let mut ids = std::collections::BTreeSet::new();
        for (w, g) in &samples {
            for branch in [Branch::Plus, Branch::Minus] {
                let base = point_at(g, *w, branch, 0, 0);
                let per = 2.0 * PI / w;
                let j1s = ((bx.0 - base.tau1) / per).ceil() as i64..=((bx.1 - base.tau1) / per).floor() as i64;
                let j2s = ((bx.2 - base.tau2) / per).ceil() as i64..=((bx.3 - base.tau2) / per).floor() as i64;
                for j1 in j1s {
                    for j2 in j2s.clone() {
                        ids.insert((branch, j1, j2));
                    }
                }
            }
        }
        for (branch, j1, j2) in ids {
            let points: Vec<CurvePoint> = samples.iter().map(|(w, g)| point_at(g, *w, branch, j1, j2)).collect();
            if points.iter().any(|p| in_box(p, &bx)) {
                out.push(SwitchingCurve { id: CurveId { n: cqp.n, j: jx + 1, branch, j1, j2 }, points });
            }
        }
    }
    out
}

/// Switching curves of mode n meeting the window [0, tau1_max] x [0, tau2_max],
/// restricted to tau1, tau2 >= 0; a curve leaving the quadrant is split into
/// separate runs.
pub fn switching_curves(cqp: &CharQuasiPolynomial, window: (f64, f64)) -> Vec<SwitchingCurve> {
    let set = crossing_set(cqp);
    let bx = (0.0, window.0, 0.0, window.1);
    let mut out = Vec::new();
    for c in curves_meeting_box(cqp, &set, bx) {
        let mut run: Vec<CurvePoint> = Vec::new();
        for p in c.points {
            if p.tau1 >= 0.0 && p.tau2 >= 0.0 {
                run.push(p);
            } else if !run.is_empty() {
                out.push(SwitchingCurve { id: c.id, points: std::mem::take(&mut run) });
            }
        }
        if !run.is_empty() {
            out.push(SwitchingCurve { id: c.id, points: run });
        }
    }
    out.retain(|c| c.points.iter().any(|p| in_box(p, &bx)));
    out
}

/// Result of checking the endpoint connection rule at one end of an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub omega: f64,
    pub delta1: i64,
    pub delta2: i64,
    /// Distance between the Plus(j1, j2) and Minus(j1 + delta1, j2 - delta2)
    /// endpoints before theta is snapped; theta ~ sqrt(error in F) makes this
    /// much larger than the root tolerance.
    pub gap: f64,
}

/// Endpoint connection at omega = a or b of an interval: theta_i is 0 or pi
/// there, and Plus(j1, j2) meets Minus(j1 + delta1, j2 - delta2).
pub fn junction(cqp: &CharQuasiPolynomial, omega: f64, j1: i64, j2: i64) -> Option<Junction> {
    let g = angles(cqp, omega)?;
    let delta1 = (g.theta1 / PI).round() as i64;
    let delta2 = (g.theta2 / PI).round() as i64;
    let p = point_at(&g, omega, Branch::Plus, j1, j2);
    let m = point_at(&g, omega, Branch::Minus, j1 + delta1, j2 - delta2);
    Some(Junction { omega, delta1, delta2, gap: (p.tau1 - m.tau1).hypot(p.tau2 - m.tau2) })
}

/// Groups curves into chains joined at shared endpoints.
pub fn stitch(curves: &[SwitchingCurve], tol: f64) -> Vec<Vec<CurveId>> {
    let n = curves.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    let ends = |c: &SwitchingCurve| [c.points[0], *c.points.last().unwrap()];
    for i in 0..n {
        for k in i + 1..n {
            let close = ends(&curves[i]).iter().any(|a| {
                ends(&curves[k]).iter().any(|b| (a.tau1 - b.tau1).hypot(a.tau2 - b.tau2) < tol && (a.omega - b.omega).abs() < 1e-9)
            });
            if close {
                let (ri, rk) = (find(&mut parent, i), find(&mut parent, k));
                parent[ri] = rk;
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<CurveId>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(curves[i].id);
    }
    groups.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingDirection {
    TwoMoreRight,
    TwoFewerRight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionCheck {
    pub predicted: CrossingDirection,
    /// sign(R1 I2 - R2 I1) agrees with the branch rule
    pub delta: f64,
    /// Root tracked to the right side of the curve.
    pub root_right: C,
    pub root_left: C,
    pub observed: CrossingDirection,
}

/// Newton iteration on D(lambda) = 0.
pub fn refine_root(cqp: &CharQuasiPolynomial, z0: C, tau1: f64, tau2: f64) -> Result<C> {
    let mut z = z0;
    for _ in 0..100 {
        let f = cqp.d(z, tau1, tau2);
        let df = cqp.d_lambda(z, tau1, tau2);
        if df.norm() == 0.0 {
            return Err(Error::MultipleRoot(z.im));
        }
        let step = f / df;
        z -= step;
        if step.norm() < 1e-14 * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    if cqp.d(z, tau1, tau2).norm() < 1e-10 {
        Ok(z)
    } else {
        Err(Error::Inconclusive(format!("Newton did not converge from {z0}")))
    }
}

/// Crossing direction at an interior curve point: the analytic sign of delta
/// and a numerical check by root continuation along the right normal
/// (dtau2/domega, -dtau1/domega).
pub fn crossing_direction(cqp: &CharQuasiPolynomial, id: &CurveId, omega: f64, step: f64) -> Result<DirectionCheck> {
    let p = curve_point(cqp, id, omega).ok_or(Error::Domain(format!("omega = {omega} outside the crossing set")))?;
    let z = C::new(0.0, omega);
    let dl = cqp.d_lambda(z, p.tau1, p.tau2);
    if dl.norm_sqr() <= SIMPLE_ROOT_TOL {
        return Err(Error::MultipleRoot(omega));
    }
    let (dt1, dt2) = cqp.d_tau(z, p.tau1, p.tau2);
    let delta = dt1.re * dt2.im - dt2.re * dt1.im;
    let predicted = match id.branch {
        Branch::Plus => CrossingDirection::TwoMoreRight,
        Branch::Minus => CrossingDirection::TwoFewerRight,
    };
    let hw = 1e-6 * omega.max(1e-3);
    let pa = curve_point(cqp, id, omega - hw).ok_or(Error::Domain("tangent outside the crossing set".into()))?;
    let pb = curve_point(cqp, id, omega + hw).ok_or(Error::Domain("tangent outside the crossing set".into()))?;
    let (tx, ty) = (pb.tau1 - pa.tau1, pb.tau2 - pa.tau2);
    let norm = tx.hypot(ty);
    let (nx, ny) = (ty / norm, -tx / norm);
    let track = |s: f64| -> Result<C> {
        // continue the root in small steps from the curve point
        let mut zz = z;
        let k = 10;
        for i in 1..=k {
            let f = s * i as f64 / k as f64;
            zz = refine_root(cqp, zz, p.tau1 + f * nx, p.tau2 + f * ny)?;
        }
        Ok(zz)
    };
    let root_right = track(step)?;
    let root_left = track(-step)?;
    let observed = if root_right.re > 0.0 && root_left.re < 0.0 {
        CrossingDirection::TwoMoreRight
    } else if root_right.re < 0.0 && root_left.re > 0.0 {
        CrossingDirection::TwoFewerRight
    } else {
        return Err(Error::Inconclusive(format!("root does not cross at omega = {omega}: {root_left} / {root_right}")));
    };
    Ok(DirectionCheck { predicted, delta, root_right, root_left, observed })
}

/// Number of roots of D_n with Re lambda > 0 by the argument principle on
/// the rectangle [0, R] x [-R, R], R from `root_bound`.
pub fn count_rhp_roots(cqp: &CharQuasiPolynomial, tau1: f64, tau2: f64) -> Result<usize> {
    let r = cqp.root_bound() * 1.05 + 0.1;
    let corners = [C::new(0.0, -r), C::new(r, -r), C::new(r, r), C::new(0.0, r), C::new(0.0, -r)];
    let mut total = 0.0;
    for e in corners.windows(2) {
        total += arg_change(cqp, e[0], e[1], tau1, tau2, 0)?;
    }
    let w = total / (2.0 * PI);
    let k = w.round();
    if (w - k).abs() > 0.05 || k < 0.0 {
        return Err(Error::Inconclusive(format!("winding number {w} at ({tau1}, {tau2})")));
    }
    Ok(k as usize)
}

fn arg_change(cqp: &CharQuasiPolynomial, a: C, b: C, t1: f64, t2: f64, depth: usize) -> Result<f64> {
    let pieces = 64;
    let mut sum = 0.0;
    let mut za = a;
    let mut fa = cqp.d(a, t1, t2);
    for i in 1..=pieces {
        let zb = a + (b - a) * (i as f64 / pieces as f64);
        let fb = cqp.d(zb, t1, t2);
        if fb.norm() < 1e-13 {
            return Err(Error::Inconclusive(format!("root on the contour near {zb}")));
        }
        let d = (fb / fa).arg();
        if d.abs() > 0.5 {
            if depth > 12 {
                return Err(Error::Inconclusive("contour refinement limit".into()));
            }
            sum += arg_change(cqp, za, zb, t1, t2, depth + 1)?;
        } else {
            sum += d;
        }
        za = zb;
        fa = fb;
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMap {
    /// Cell-centre abscissae.
    pub tau1: Vec<f64>,
    pub tau2: Vec<f64>,
    /// counts[i][k]: roots with Re > 0 summed over modes at (tau1[i], tau2[k]).
    pub counts: Vec<Vec<i64>>,
}

impl StabilityMap {
    pub fn count_at(&self, tau1: f64, tau2: f64) -> Option<i64> {
        let d1 = self.tau1.get(1).map_or(1.0, |x| x - self.tau1[0]);
        let d2 = self.tau2.get(1).map_or(1.0, |x| x - self.tau2[0]);
        let i = ((tau1 - self.tau1[0]) / d1 + 0.5).floor();
        let k = ((tau2 - self.tau2[0]) / d2 + 0.5).floor();
        if i < 0.0 || k < 0.0 {
            return None;
        }
        self.counts.get(i as usize)?.get(k as usize).copied()
    }
}

/// A curve traced with a margin around the window, as used for path counting.
struct Traced {
    branch: Branch,
    pts: Vec<(f64, f64)>,
}

/// Signed crossings of the segment from `from` to `to` with the traced curves.
fn path_crossings(curves: &[Traced], from: (f64, f64), to: (f64, f64)) -> Result<Vec<(f64, i64)>> {
    let d = (to.0 - from.0, to.1 - from.1);
    let len = d.0.hypot(d.1);
    let mut out = Vec::new();
    for c in curves {
        let sgn = if c.branch == Branch::Plus { 2 } else { -2 };
        for w in c.pts.windows(2) {
            let (p, q) = (w[0], w[1]);
            let e = (q.0 - p.0, q.1 - p.1);
            let den = d.0 * e.1 - d.1 * e.0;
            let rx = (p.0 - from.0, p.1 - from.1);
            if den == 0.0 {
                continue;
            }
            let s = (rx.0 * e.1 - rx.1 * e.0) / den;
            let t = (rx.0 * d.1 - rx.1 * d.0) / den;
            if !(0.0..1.0).contains(&t) || !(0.0..=1.0).contains(&s) {
                continue;
            }
            // right normal of the curve at this segment
            let nrm = (e.1, -e.0);
            let dot = (d.0 * nrm.0 + d.1 * nrm.1) / (len * e.0.hypot(e.1));
            if dot.abs() < 1e-6 {
                return Err(Error::PathAmbiguous(from.0 + s * d.0, from.1 + s * d.1));
            }
            out.push((s, if dot > 0.0 { sgn } else { -sgn }));
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}

/// Per-cell count of characteristic roots with positive real part over all
/// modes, accumulated from (0, 0) along the tau1 axis and then up each
/// column, +-2 per signed curve crossing.
pub fn stability_map(family: &[CharQuasiPolynomial], window: (f64, f64), grid: (usize, usize)) -> Result<StabilityMap> {
    for c in family {
        let (t, j) = c.delay_free();
        if !(t < 0.0 && j > 0.0) {
            return Err(Error::Domain(format!("mode {} is unstable without delays", c.n)));
        }
    }
    let margin = 0.05 * window.0.max(window.1) + 0.5;
    let bx = (-margin, window.0 + margin, -margin, window.1 + margin);
    let mut traced = Vec::new();
    for c in family {
        let set = crossing_set(c);
        for sc in curves_meeting_box(c, &set, bx) {
            traced.push(Traced { branch: sc.id.branch, pts: sc.points.iter().map(|p| (p.tau1, p.tau2)).collect() });
        }
    }
    let (n1, n2) = grid;
    let c1: Vec<f64> = (0..n1).map(|i| (i as f64 + 0.5) * window.0 / n1 as f64).collect();
    let c2: Vec<f64> = (0..n2).map(|k| (k as f64 + 0.5) * window.1 / n2 as f64).collect();
    let mut counts = vec![vec![0i64; n2]; n1];
    for (i, &x) in c1.iter().enumerate() {
        // re-route by nudging the column inside its cell when a path grazes a curve
        let mut col = None;
        for nudge in [0.0, 0.13, -0.17, 0.29, -0.31] {
            let xx = x + nudge * window.0 / n1 as f64;
            let base = path_crossings(&traced, (0.0, 0.0), (xx, 0.0));
            let up = path_crossings(&traced, (xx, 0.0), (xx, window.1));
            if let (Ok(b), Ok(u)) = (base, up) {
                col = Some((b.iter().map(|c| c.1).sum::<i64>(), u));
                break;
            }
        }
        let (base, up) = col.ok_or(Error::PathAmbiguous(x, 0.0))?;
        for (k, &y) in c2.iter().enumerate() {
            let s = y / window.1;
            counts[i][k] = base + up.iter().filter(|c| c.0 < s).map(|c| c.1).sum::<i64>();
        }
    }
    Ok(StabilityMap { tau1: c1, tau2: c2, counts })
}

/// Total right-half-plane root count over the family at one point.
pub fn count_rhp_family(family: &[CharQuasiPolynomial], tau1: f64, tau2: f64) -> Result<usize> {
    family.iter().map(|c| count_rhp_roots(c, tau1, tau2)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleHopfPoint {
    pub tau1: f64,
    pub tau2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub curves: (CurveId, CurveId),
    /// max |D_n(i omega_k; tau1, tau2)| over both frequencies.
    pub residual: f64,
}

/// Pairwise intersections of switching curves inside the window, refined by
/// Newton on tau(curve A, omega1) = tau(curve B, omega2).
pub fn double_hopf_points(family: &[CharQuasiPolynomial], window: (f64, f64)) -> Vec<DoubleHopfPoint> {
    let mut curves = Vec::new();
    for c in family {
        for sc in switching_curves(c, window) {
            curves.push(sc);
        }
    }
    let bx = (0.0, window.0, 0.0, window.1);
    let cqp_of = |n: usize| family.iter().find(|c| c.n == n).unwrap();
    let mut out: Vec<DoubleHopfPoint> = Vec::new();
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            let (ca, cb) = (&curves[a], &curves[b]);
            for wa in ca.points.windows(2) {
                if !in_box(&wa[0], &bx) && !in_box(&wa[1], &bx) {
                    continue;
                }
                for wb in cb.points.windows(2) {
                    let Some((sa, sb)) = seg_intersect(&wa[0], &wa[1], &wb[0], &wb[1]) else { continue };
                    let w1 = wa[0].omega + sa * (wa[1].omega - wa[0].omega);
                    let w2 = wb[0].omega + sb * (wb[1].omega - wb[0].omega);
                    if ca.id.n == cb.id.n && (w1 - w2).abs() < 1e-6 {
                        continue;
                    }
                    let (qa, qb) = (cqp_of(ca.id.n), cqp_of(cb.id.n));
                    if let Some(hh) = newton_intersection(qa, &ca.id, qb, &cb.id, w1, w2) {
                        if in_box(&CurvePoint { tau1: hh.tau1, tau2: hh.tau2, ..wa[0] }, &bx)
                            && !out.iter().any(|o| (o.tau1 - hh.tau1).hypot(o.tau2 - hh.tau2) < 1e-7 && (o.omega1 - hh.omega1).abs() < 1e-7)
                        {
                            out.push(hh);
                        }
                    }
                }
            }
        }
    }
    out.sort_by(|x, y| x.tau2.partial_cmp(&y.tau2).unwrap());
    out
}

fn seg_intersect(p: &CurvePoint, q: &CurvePoint, r: &CurvePoint, s: &CurvePoint) -> Option<(f64, f64)> {
    let d = (q.tau1 - p.tau1, q.tau2 - p.tau2);
    let e = (s.tau1 - r.tau1, s.tau2 - r.tau2);
    let den = d.0 * e.1 - d.1 * e.0;
    if den == 0.0 {
        return None;
    }
    let rx = (r.tau1 - p.tau1, r.tau2 - p.tau2);
    let sa = (rx.0 * e.1 - rx.1 * e.0) / den;
    let sb = (rx.0 * d.1 - rx.1 * d.0) / den;
    ((0.0..=1.0).contains(&sa) && (0.0..=1.0).contains(&sb)).then_some((sa, sb))
}

fn newton_intersection(
    qa: &CharQuasiPolynomial,
    ia: &CurveId,
    qb: &CharQuasiPolynomial,
    ib: &CurveId,
    w1: f64,
    w2: f64,
) -> Option<DoubleHopfPoint> {
    let (mut w1, mut w2) = (w1, w2);
    let f = |w1: f64, w2: f64| -> Option<(f64, f64)> {
        let a = curve_point(qa, ia, w1)?;
        let b = curve_point(qb, ib, w2)?;
        Some((a.tau1 - b.tau1, a.tau2 - b.tau2))
    };
    for _ in 0..60 {
        let (r1, r2) = f(w1, w2)?;
        if r1.hypot(r2) < 1e-12 {
            break;
        }
        let h1 = 1e-7 * w1;
        let h2 = 1e-7 * w2;
        let (a1, a2) = f(w1 + h1, w2)?;
        let (b1, b2) = f(w1 - h1, w2)?;
        let (c1, c2) = f(w1, w2 + h2)?;
        let (d1, d2) = f(w1, w2 - h2)?;
        let j = [[(a1 - b1) / (2.0 * h1), (c1 - d1) / (2.0 * h2)], [(a2 - b2) / (2.0 * h1), (c2 - d2) / (2.0 * h2)]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 {
            return None;
        }
        w1 -= (j[1][1] * r1 - j[0][1] * r2) / det;
        w2 -= (-j[1][0] * r1 + j[0][0] * r2) / det;
    }
    let (r1, r2) = f(w1, w2)?;
    if r1.hypot(r2) > 1e-10 {
        return None;
    }
    let p = curve_point(qa, ia, w1)?;
    let res = qa.d(C::new(0.0, w1), p.tau1, p.tau2).norm().max(qb.d(C::new(0.0, w2), p.tau1, p.tau2).norm());
    Some(DoubleHopfPoint { tau1: p.tau1, tau2: p.tau2, omega1: w1, omega2: w2, curves: (*ia, *ib), residual: res })
}
