//! Diffusion-driven instability of E*: per-mode trace/determinant, critical
//! d2 curves, the Turing boundary and the Turing-Hopf point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibria::{hopf_point, primary_equilibrium, Equilibrium, EquilibriumKind};
use crate::model::{DiffusionParams, ModelParams};
use crate::{Error, Result};

pub const N_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeLinearization {
    pub n: usize,
    pub t_n: f64,
    pub j_n: f64,
}

impl ModeLinearization {
    /// Root of lambda^2 - T_n lambda + J_n = 0 with the largest real part.
    pub fn leading_eigenvalue(&self) -> Complex64 {
        let disc = Complex64::new(self.t_n * self.t_n - 4.0 * self.j_n, 0.0).sqrt();
        (Complex64::new(self.t_n, 0.0) + disc) * 0.5
    }

    pub fn is_stable(&self) -> bool {
        self.j_n > 0.0 && self.t_n < 0.0
    }
}

/// Entries of the Jacobian at E* that enter the mode formulas.
#[derive(Debug, Clone, Copy)]
struct Linear {
    tr: f64,
    det: f64,
    /// r u* (1 + a - 2u*)
    j11: f64,
    /// m p c u* v*
    j22: f64,
}

fn linear(params: &ModelParams, eq: &Equilibrium) -> Linear {
    let (u, v) = (eq.u, eq.v);
    Linear { tr: eq.trace, det: eq.det, j11: params.r * u * (1.0 + params.a - 2.0 * u), j22: params.m * params.p * params.c * u * v }
}

pub fn mode_coefficients(n: usize, params: &ModelParams, diff: &DiffusionParams, eq: &Equilibrium) -> ModeLinearization {
    let lin = linear(params, eq);
    let k = diff.k(n);
    ModeLinearization {
        n,
        t_n: -(diff.d1 + diff.d2) * k + lin.tr,
        j_n: diff.d1 * diff.d2 * k * k - lin.j11 * diff.d2 * k - lin.j22 * diff.d1 * k + lin.det,
    }
}

/// d2^T(n, d1): the d2 at which J_n vanishes, or `None` when mode n cannot
/// destabilise for any d2 > 0.
pub fn d2_critical(n: usize, d1: f64, params: &ModelParams, l: f64, eq: &Equilibrium) -> Option<f64> {
    if n == 0 {
        return None;
    }
    let lin = linear(params, eq);
    let k = (n * n) as f64 / (l * l);
    let num = lin.j22 * d1 * k - lin.det;
    let den = d1 * k * k - lin.j11 * k;
    (num > 0.0 && den > 0.0).then(|| num / den)
}

/// Largest critical d2 over modes 1..=n_max, with its mode.
pub fn max_d2_critical(d1: f64, params: &ModelParams, l: f64, eq: &Equilibrium, n_max: usize) -> Option<(usize, f64)> {
    (1..=n_max).filter_map(|n| d2_critical(n, d1, params, l, eq).map(|d| (n, d))).fold(None, |best, cur| match best {
        Some((_, b)) if b >= cur.1 => best,
        _ => Some(cur),
    })
}

/// Smallest mode beyond which every larger mode has J_n > 0 and T_n < 0.
///
/// With B = max(j11, 0) d2 + j22 d1 and s = sqrt(max(-det, 0) / (d1 d2)),
/// k >= B / (d1 d2) + s gives J_n >= d1 d2 s^2 + det >= 0, strictly when
/// either bound is strict.
pub fn mode_cutoff(params: &ModelParams, diff: &DiffusionParams, eq: &Equilibrium) -> usize {
    let lin = linear(params, eq);
    let dd = diff.d1 * diff.d2;
    if dd <= 0.0 {
        return N_MAX;
    }
    let b = lin.j11.max(0.0) * diff.d2 + lin.j22 * diff.d1;
    let s = ((-lin.det).max(0.0) / dd).sqrt();
    let k_det = b / dd + s;
    let k_tr = lin.tr.max(0.0) / (diff.d1 + diff.d2);
    let k = k_det.max(k_tr);
    (diff.l * k.sqrt()).floor() as usize + 1
}

/// True when every mode n <= max(n_max, cutoff) has J_n > 0 and T_n < 0.
/// Modes beyond the cutoff are stable by [`mode_cutoff`], so the scan is exhaustive.
pub fn stable_under_modes(params: &ModelParams, diff: &DiffusionParams, eq: &Equilibrium, n_max: usize) -> bool {
    let top = n_max.max(mode_cutoff(params, diff, eq));
    (0..=top).all(|n| mode_coefficients(n, params, diff, eq).is_stable())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuringSegment {
    pub n: usize,
    pub d1_lo: f64,
    pub d1_hi: f64,
    /// (d1, d2^T(n, d1)) samples, including both segment ends.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuringCurve {
    pub segments: Vec<TuringSegment>,
    pub junctions: Vec<f64>,
}

impl TuringCurve {
    /// l^T(d1) by interpolation in the sampled segments.
    pub fn value(&self, d1: f64) -> Option<f64> {
        for s in &self.segments {
            if d1 >= s.d1_lo && d1 <= s.d1_hi {
                for w in s.points.windows(2) {
                    if d1 >= w[0].0 && d1 <= w[1].0 {
                        let t = (d1 - w[0].0) / (w[1].0 - w[0].0);
                        return Some(w[0].1 + t * (w[1].1 - w[0].1));
                    }
                }
            }
        }
        None
    }
}

fn check_turing_pre(params: &ModelParams, eq: &Equilibrium) -> Result<()> {
    if eq.kind != EquilibriumKind::InteriorPrimary {
        return Err(Error::Domain("Turing analysis needs the primary interior equilibrium".into()));
    }
    if eq.u <= 0.5 * (params.a + 1.0) {
        return Err(Error::Domain(format!("u* = {} must exceed (a+1)/2 (requires p <= p_H)", eq.u)));
    }
    Ok(())
}

/// Pointwise maximum of the critical curves over `d1_range`, split into
/// segments by the maximising mode.
pub fn turing_curve(
    params: &ModelParams,
    eq: &Equilibrium,
    l: f64,
    d1_range: (f64, f64),
    n_max: usize,
    samples: usize,
) -> Result<TuringCurve> {
    check_turing_pre(params, eq)?;
    let (lo, hi) = d1_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParams(format!("bad d1 range ({lo}, {hi})")));
    }
    let arg = |d1: f64| max_d2_critical(d1, params, l, eq, n_max).map(|(n, _)| n);
    let xs: Vec<f64> = (0..=samples).map(|i| lo + (hi - lo) * i as f64 / samples as f64).collect();
    let mut segments: Vec<TuringSegment> = Vec::new();
    let mut junctions = Vec::new();
    let mut cur: Option<(usize, f64, Vec<(f64, f64)>)> = None;
    for &x in &xs {
        let best = max_d2_critical(x, params, l, eq, n_max);
        match (&mut cur, best) {
            (Some((n, _, pts)), Some((m, d))) if *n == m => pts.push((x, d)),
            (slot, best) => {
                let prev_x = slot.as_ref().and_then(|(_, _, pts)| pts.last().map(|p| p.0));
                let prev_n = slot.as_ref().map(|(n, _, _)| *n);
                // locate the switching abscissa between the last sample and x
                let cut = match (prev_x, prev_n) {
                    (Some(px), Some(pn)) => {
                        let mut a = px;
                        let mut b = x;
                        while b - a > 1e-10 {
                            let mid = 0.5 * (a + b);
                            if arg(mid) == Some(pn) {
                                a = mid;
                            } else {
                                b = mid;
                            }
                        }
                        Some((pn, 0.5 * (a + b)))
                    }
                    _ => None,
                };
                if let (Some((pn, xc)), Some((_, _, mut pts))) = (cut, slot.take()) {
                    if let Some(d) = d2_critical(pn, xc, params, l, eq) {
                        pts.push((xc, d));
                    }
                    let d1_lo = pts[0].0;
                    segments.push(TuringSegment { n: pn, d1_lo, d1_hi: xc, points: pts });
                    if best.is_some() {
                        junctions.push(xc);
                    }
                }
                if let Some((m, d)) = best {
                    let mut pts = Vec::new();
                    if let Some((_, xc)) = cut {
                        if let Some(dc) = d2_critical(m, xc, params, l, eq) {
                            pts.push((xc, dc));
                        }
                    }
                    pts.push((x, d));
                    *slot = Some((m, pts[0].0, pts));
                }
            }
        }
    }
    if let Some((n, _, pts)) = cur {
        segments.push(TuringSegment { n, d1_lo: pts[0].0, d1_hi: pts.last().unwrap().0, points: pts });
    }
    if segments.is_empty() {
        return Err(Error::EmptyCurve);
    }
    Ok(TuringCurve { segments, junctions })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuringHopfPoint {
    pub p: f64,
    pub d2: f64,
    pub n: usize,
    pub t0: f64,
    pub j_n: f64,
}

/// Intersection of the Hopf line p = p_H with the critical curve of mode n.
pub fn turing_hopf_point(params: &ModelParams, l: f64, d1: f64, n: usize) -> Result<TuringHopfPoint> {
    let p = hopf_point(params)?.p_h;
    let qp = params.with_p(p);
    let eq = primary_equilibrium(&qp).ok_or_else(|| Error::Domain("no E* at p_H".into()))?;
    let d2 = d2_critical(n, d1, &qp, l, &eq).ok_or_else(|| Error::Domain(format!("mode {n} has no critical d2 at d1 = {d1}")))?;
    let diff = DiffusionParams::new(d1, d2, l)?;
    let m0 = mode_coefficients(0, &qp, &diff, &eq);
    let mn = mode_coefficients(n, &qp, &diff, &eq);
    Ok(TuringHopfPoint { p, d2, n, t0: m0.t_n, j_n: mn.j_n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_zero_is_ode_linearisation() {
        let q = ModelParams::reference(0.25, 1.4);
        let e = primary_equilibrium(&q).unwrap();
        let d = DiffusionParams::new(1.0, 0.1, 2.0).unwrap();
        let m = mode_coefficients(0, &q, &d, &e);
        assert_eq!((m.t_n, m.j_n), (e.trace, e.det));
    }

    #[test]
    fn critical_d2_zeroes_determinant() {
        let q = ModelParams::reference(0.25, 1.4);
        let e = primary_equilibrium(&q).unwrap();
        for n in 1..12 {
            if let Some(d2) = d2_critical(n, 1.496, &q, 2.0, &e) {
                let d = DiffusionParams::new(1.496, d2, 2.0).unwrap();
                assert!(mode_coefficients(n, &q, &d, &e).j_n.abs() < 1e-10);
            }
        }
    }
}
