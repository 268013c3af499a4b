//! Boundary and interior equilibria, Hopf and saddle-node points, first Lyapunov coefficient.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{higher_derivatives, jacobian, rhs, CooperationRegime, HigherDerivatives, ModelParams, State};
use crate::roots::{bisect, golden_max};
use crate::{Error, Result};

pub const HYPERBOLIC_TOL: f64 = 1e-9;
const SCAN_CELLS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    Origin,
    Allee,
    CarryingCapacity,
    InteriorPrimary,
    InteriorSaddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    StableNode,
    UnstableNode,
    Saddle,
    StableFocus,
    UnstableFocus,
    NonHyperbolic,
}

impl Classification {
    pub fn is_stable(self) -> bool {
        matches!(self, Classification::StableNode | Classification::StableFocus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub u: f64,
    pub v: f64,
    pub kind: EquilibriumKind,
    pub trace: f64,
    pub det: f64,
    pub classification: Classification,
}

impl Equilibrium {
    pub fn state(&self) -> State {
        State::new(self.u, self.v)
    }
}

pub fn classify_trace_det(trace: f64, det: f64) -> Classification {
    if det.abs() < HYPERBOLIC_TOL || (det > 0.0 && trace.abs() < HYPERBOLIC_TOL) {
        return Classification::NonHyperbolic;
    }
    if det < 0.0 {
        return Classification::Saddle;
    }
    let focus = trace * trace - 4.0 * det < 0.0;
    match (trace < 0.0, focus) {
        (true, true) => Classification::StableFocus,
        (true, false) => Classification::StableNode,
        (false, true) => Classification::UnstableFocus,
        (false, false) => Classification::UnstableNode,
    }
}

/// Trace and determinant at an interior equilibrium, using the equilibrium relations.
pub fn interior_trace_det(u: f64, v: f64, q: &ModelParams) -> (f64, f64) {
    let trace = -q.r * u * (2.0 * u - q.a - 1.0) + q.m * (1.0 - q.p * u);
    let det = q.m * q.p * u * v * (q.r * q.c * u * (1.0 + q.a - 2.0 * u) + (1.0 + q.c * v) * (1.0 + 2.0 * q.c * v));
    (trace, det)
}

/// Classifies a candidate equilibrium. Points on the u-axis are matched to
/// E0, Ea, E1; anything else is treated as interior.
pub fn classify(s: State, q: &ModelParams) -> Result<Equilibrium> {
    let (du, dv) = rhs(s, q);
    if du.abs().max(dv.abs()) > 1e-10 {
        return Err(Error::Domain(format!("({}, {}) is not an equilibrium (residual {:e})", s.u, s.v, du.abs().max(dv.abs()))));
    }
    let boundary = s.v.abs() < 1e-14;
    let (trace, det) = if boundary {
        let j = jacobian(s, q);
        (j[0][0] + j[1][1], j[0][0] * j[1][1] - j[0][1] * j[1][0])
    } else {
        interior_trace_det(s.u, s.v, q)
    };
    let kind = if boundary {
        if s.u.abs() < 1e-12 {
            EquilibriumKind::Origin
        } else if (s.u - q.a).abs() < 1e-12 {
            EquilibriumKind::Allee
        } else {
            EquilibriumKind::CarryingCapacity
        }
    } else if det < 0.0 {
        EquilibriumKind::InteriorSaddle
    } else {
        EquilibriumKind::InteriorPrimary
    };
    Ok(Equilibrium { u: s.u, v: s.v, kind, trace, det, classification: classify_trace_det(trace, det) })
}

pub fn boundary_equilibria(q: &ModelParams) -> Vec<Equilibrium> {
    [State::new(0.0, 0.0), State::new(q.a, 0.0), State::new(1.0, 0.0)]
        .into_iter()
        .map(|s| classify(s, q).expect("boundary points are exact equilibria"))
        .collect()
}

/// F(u) = r c p^2 u^2 (1 - u)(u - a) - (1 - p u); interior equilibria are its zeros in (0, 1/p).
pub fn interior_polynomial(u: f64, q: &ModelParams) -> f64 {
    q.r * q.c * q.p * q.p * u * u * (1.0 - u) * (u - q.a) - (1.0 - q.p * u)
}

fn interior_roots(q: &ModelParams) -> Vec<f64> {
    let hi = 1.0 / q.p;
    let n = SCAN_CELLS;
    let us: Vec<f64> = (0..=n).map(|i| hi * i as f64 / n as f64).collect();
    let fs: Vec<f64> = us.iter().map(|&u| interior_polynomial(u, q)).collect();
    let f = |u: f64| interior_polynomial(u, q);
    let mut roots = Vec::new();
    for i in 0..n {
        if i > 0 && fs[i] == 0.0 {
            roots.push(us[i]);
        } else if fs[i] != 0.0 && fs[i + 1] != 0.0 && fs[i].signum() != fs[i + 1].signum() {
            if let Some(r) = bisect(f, us[i], us[i + 1], 1e-15) {
                roots.push(r);
            }
        }
    }
    // tangential zeros that a sign scan cannot see
    for i in 1..n {
        let local_max = fs[i] < 0.0 && fs[i] >= fs[i - 1] && fs[i] >= fs[i + 1];
        let local_min = fs[i] > 0.0 && fs[i] <= fs[i - 1] && fs[i] <= fs[i + 1];
        if !(local_max || local_min) {
            continue;
        }
        let sgn = if local_max { 1.0 } else { -1.0 };
        let (ue, fe) = golden_max(|u| sgn * f(u), us[i - 1], us[i + 1], 1e-14);
        if roots.iter().any(|r: &f64| (r - us[i - 1]) * (r - us[i + 1]) <= 0.0) {
            continue;
        }
        if fe.abs() < 1e-12 {
            roots.push(ue);
        } else if fe > 0.0 {
            // two simple roots inside a single pair of cells
            roots.extend(bisect(f, us[i - 1], ue, 1e-15));
            roots.extend(bisect(f, ue, us[i + 1], 1e-15));
        }
    }
    roots.retain(|&u| u > 0.0 && hi - u > 1e-12);
    roots.sort_by(f64::total_cmp);
    roots
}

/// Interior equilibria sorted by increasing u.
pub fn interior_equilibria(q: &ModelParams) -> Vec<Equilibrium> {
    interior_roots(q)
        .into_iter()
        .filter_map(|u| {
            let v = (1.0 - q.p * u) / (q.c * q.p * u);
            (v > 0.0).then(|| {
                let (trace, det) = interior_trace_det(u, v, q);
                let kind = if det < 0.0 { EquilibriumKind::InteriorSaddle } else { EquilibriumKind::InteriorPrimary };
                Equilibrium { u, v, kind, trace, det, classification: classify_trace_det(trace, det) }
            })
        })
        .collect()
}

/// E*: the interior equilibrium with the smallest prey density.
pub fn primary_equilibrium(q: &ModelParams) -> Option<Equilibrium> {
    interior_equilibria(q).into_iter().next()
}

/// E_R*: the interior saddle, present in the strong regime for p_SN < p < 1.
pub fn saddle_equilibrium(q: &ModelParams) -> Option<Equilibrium> {
    let all = interior_equilibria(q);
    (all.len() == 2).then(|| all[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub p_h: f64,
    /// Imaginary part of the critical eigenvalues.
    pub omega: f64,
    /// d Re(lambda) / dp at p_H.
    pub dalpha_dp: f64,
    pub transversal: bool,
}

fn primary_trace(q: &ModelParams) -> Option<f64> {
    primary_equilibrium(q).map(|e| e.trace)
}

/// Hopf point of E* in p for fixed (r, a, c, m).
pub fn hopf_point(q: &ModelParams) -> Result<HopfPoint> {
    let p_hi = 2.0 / (q.a + 1.0);
    let p_lo = match q.regime() {
        CooperationRegime::Strong => saddle_node_point(q)?.p_sn,
        _ => 1.0,
    };
    let n = 400;
    let ps: Vec<f64> = (1..n).map(|i| p_lo + (p_hi - p_lo) * i as f64 / n as f64).collect();
    let traces: Vec<Option<f64>> = ps.iter().map(|&p| primary_trace(&q.with_p(p))).collect();
    let bracket = (0..ps.len() - 1).find(|&i| matches!((traces[i], traces[i + 1]), (Some(a), Some(b)) if a < 0.0 && b >= 0.0));
    let i = bracket.ok_or_else(|| Error::NoBracket(format!("trace of E* keeps one sign on ({p_lo}, {p_hi})")))?;
    let tr = |p: f64| primary_trace(&q.with_p(p)).unwrap_or(f64::NAN);
    let p_h = bisect(tr, ps[i], ps[i + 1], 1e-13).ok_or_else(|| Error::NoBracket("trace bisection failed".into()))?;
    let e = primary_equilibrium(&q.with_p(p_h)).ok_or_else(|| Error::NoBracket("E* vanished at p_H".into()))?;
    let h = 1e-5;
    let alpha = |p: f64| {
        let e = primary_equilibrium(&q.with_p(p)).expect("E* exists near p_H");
        let disc = e.trace * e.trace - 4.0 * e.det;
        if disc < 0.0 {
            0.5 * e.trace
        } else {
            0.5 * (e.trace + disc.sqrt())
        }
    };
    let dalpha_dp = (alpha(p_h + h) - alpha(p_h - h)) / (2.0 * h);
    Ok(HopfPoint { p_h, omega: e.det.max(0.0).sqrt(), dalpha_dp, transversal: dalpha_dp > 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleNode {
    pub p_sn: f64,
    /// Prey density of the double root.
    pub u: f64,
    pub v: f64,
    pub det: f64,
}

/// Largest value of F on (0, 1/p) together with its location.
fn interior_max(q: &ModelParams) -> (f64, f64) {
    let hi = 1.0 / q.p;
    let n = SCAN_CELLS;
    let (mut ib, mut fb) = (0, f64::NEG_INFINITY);
    for i in 1..n {
        let f = interior_polynomial(hi * i as f64 / n as f64, q);
        if f > fb {
            ib = i;
            fb = f;
        }
    }
    let lo = hi * (ib - 1) as f64 / n as f64;
    let up = hi * (ib + 1) as f64 / n as f64;
    golden_max(|u| interior_polynomial(u, q), lo, up, 1e-14)
}

/// Saddle-node point p_SN where E* and E_R* are born (strong cooperation only).
pub fn saddle_node_point(q: &ModelParams) -> Result<SaddleNode> {
    if q.regime() != CooperationRegime::Strong {
        return Err(Error::NotApplicable("saddle-node point exists only under strong cooperation".into()));
    }
    // For p < 1, F < 0 at both ends of (0, 1/p), so roots exist iff max F >= 0.
    let m = |p: f64| interior_max(&q.with_p(p)).1;
    let hi = 1.0 - 1e-9;
    if m(hi) < 0.0 {
        return Err(Error::NoBracket("no interior equilibria just below p = 1".into()));
    }
    let mut lo = 0.5;
    while m(lo) >= 0.0 {
        lo *= 0.5;
        if lo < 1e-6 {
            return Err(Error::NoBracket("interior equilibria persist as p -> 0".into()));
        }
    }
    let p_sn = bisect(m, lo, hi, 1e-14).ok_or_else(|| Error::NoBracket("saddle-node bisection".into()))?;
    let qs = q.with_p(p_sn);
    let (u, _) = interior_max(&qs);
    let v = (1.0 - qs.p * u) / (qs.c * qs.p * u);
    let (_, det) = interior_trace_det(u, v, &qs);
    Ok(SaddleNode { p_sn, u, v, det })
}

/// p_top: the value of p with u* = (a + 1)/2, closed form of F((a+1)/2) = 0.
pub fn p_top(q: &ModelParams) -> f64 {
    let u = 0.5 * (q.a + 1.0);
    let k = q.r * q.c * u * u * (1.0 - u) * (u - q.a);
    (-u + (u * u + 4.0 * k).sqrt()) / (2.0 * k)
}

fn critical_eigenvector(j: &[[f64; 2]; 2], omega: f64) -> ([f64; 2], [f64; 2]) {
    // (J - i w) q = 0 with q = (j12, i w - j11)
    let qr = [j[0][1], -j[0][0]];
    let qi = [0.0, omega];
    let nrm = (qr[0] * qr[0] + qr[1] * qr[1] + qi[0] * qi[0] + qi[1] * qi[1]).sqrt();
    ([qr[0] / nrm, qr[1] / nrm], [qi[0] / nrm, qi[1] / nrm])
}

/// Planar first Lyapunov coefficient for a field whose linear part is
/// [[0, -w], [w, 0]], given its second and third partial derivatives.
pub fn planar_lyapunov(d: &HigherDerivatives, omega: f64) -> f64 {
    let (s, t) = (&d.second, &d.third);
    let (fxx, fxy, fyy) = (s[0][0][0], s[0][0][1], s[0][1][1]);
    let (gxx, gxy, gyy) = (s[1][0][0], s[1][0][1], s[1][1][1]);
    let cubic = t[0][0][0][0] + t[0][0][1][1] + t[1][0][0][1] + t[1][1][1][1];
    let quad = fxy * (fxx + fyy) - gxy * (gxx + gyy) - fxx * gxx + fyy * gyy;
    cubic / 16.0 + quad / (16.0 * omega)
}

fn check_at_hopf(q: &ModelParams) -> Result<(Equilibrium, f64)> {
    let e = primary_equilibrium(q).ok_or_else(|| Error::Domain("no interior equilibrium".into()))?;
    if e.trace.abs() > 1e-6 {
        return Err(Error::NotAtHopf(e.trace));
    }
    if e.det <= 0.0 {
        return Err(Error::Domain("det J <= 0 at E*".into()));
    }
    Ok((e, e.det.sqrt()))
}

/// First Lyapunov coefficient a(p_H) at E*; `q.p` must be the Hopf value.
pub fn first_lyapunov(q: &ModelParams) -> Result<f64> {
    let (e, omega) = check_at_hopf(q)?;
    let j = jacobian(e.state(), q);
    let (qr, qi) = critical_eigenvector(&j, omega);
    let t = [[qr[0], -qi[0]], [qr[1], -qi[1]]];
    let dt = t[0][0] * t[1][1] - t[0][1] * t[1][0];
    let tinv = [[t[1][1] / dt, -t[0][1] / dt], [-t[1][0] / dt, t[0][0] / dt]];
    let d = higher_derivatives(e.state(), q);
    let mut out = HigherDerivatives { second: [[[0.0; 2]; 2]; 2], third: [[[[0.0; 2]; 2]; 2]; 2] };
    for i in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                let mut s2 = 0.0;
                for al in 0..2 {
                    for j1 in 0..2 {
                        for k1 in 0..2 {
                            s2 += tinv[i][al] * d.second[al][j1][k1] * t[j1][a] * t[k1][b];
                        }
                    }
                }
                out.second[i][a][b] = s2;
                for c in 0..2 {
                    let mut s3 = 0.0;
                    for al in 0..2 {
                        for j1 in 0..2 {
                            for k1 in 0..2 {
                                for l1 in 0..2 {
                                    s3 += tinv[i][al] * d.third[al][j1][k1][l1] * t[j1][a] * t[k1][b] * t[l1][c];
                                }
                            }
                        }
                    }
                    out.third[i][a][b][c] = s3;
                }
            }
        }
    }
    Ok(planar_lyapunov(&out, omega))
}

/// Invariant (eigenvector-pairing) form of the first Lyapunov coefficient,
/// used to cross-check the sign of [`first_lyapunov`].
pub fn first_lyapunov_invariant(q: &ModelParams) -> Result<f64> {
    type C = Complex64;
    let (e, omega) = check_at_hopf(q)?;
    let j = jacobian(e.state(), q);
    let d = higher_derivatives(e.state(), q);
    let i = C::i();
    let qv = [C::new(j[0][1], 0.0), i * omega - j[0][0]];
    // left eigenvector: J^T p = -i w p
    let mut pv = [C::new(j[1][0], 0.0), -i * omega - j[0][0]];
    let dot = |a: &[C; 2], b: &[C; 2]| a[0].conj() * b[0] + a[1].conj() * b[1];
    let s = dot(&pv, &qv);
    pv = [pv[0] / s.conj(), pv[1] / s.conj()];
    let bil = |x: &[C; 2], y: &[C; 2]| -> [C; 2] {
        std::array::from_fn(|r| {
            let mut acc = C::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    acc += d.second[r][a][b] * x[a] * y[b];
                }
            }
            acc
        })
    };
    let tri = |x: &[C; 2], y: &[C; 2], z: &[C; 2]| -> [C; 2] {
        std::array::from_fn(|r| {
            let mut acc = C::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        acc += d.third[r][a][b][c] * x[a] * y[b] * z[c];
                    }
                }
            }
            acc
        })
    };
    let solve = |m: [[C; 2]; 2], rhs: [C; 2]| -> [C; 2] {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [(rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det, (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det]
    };
    let jc = [[C::new(j[0][0], 0.0), C::new(j[0][1], 0.0)], [C::new(j[1][0], 0.0), C::new(j[1][1], 0.0)]];
    let qb = [qv[0].conj(), qv[1].conj()];
    let a_inv_b = solve(jc, bil(&qv, &qb));
    let shifted = [[2.0 * i * omega - jc[0][0], -jc[0][1]], [-jc[1][0], 2.0 * i * omega - jc[1][1]]];
    let s2 = solve(shifted, bil(&qv, &qv));
    let val = dot(&pv, &tri(&qv, &qv, &qb)) - 2.0 * dot(&pv, &bil(&qv, &a_inv_b)) + dot(&pv, &bil(&qb, &s2));
    Ok(val.re / (2.0 * omega))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationThresholds {
    pub p_h: f64,
    pub p_sn: Option<f64>,
    pub p_top: f64,
    pub lyapunov_a: f64,
}

pub fn thresholds(q: &ModelParams) -> Result<BifurcationThresholds> {
    let hopf = hopf_point(q)?;
    let p_sn = match q.regime() {
        CooperationRegime::Strong => Some(saddle_node_point(q)?.p_sn),
        _ => None,
    };
    Ok(BifurcationThresholds { p_h: hopf.p_h, p_sn, p_top: p_top(q), lyapunov_a: first_lyapunov(&q.with_p(hopf.p_h))? })
}
