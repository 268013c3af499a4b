//! Method-of-lines simulation of the diffusive system on (0, l*pi) with
//! Neumann boundaries, with and without the two delays, plus attractor
//! diagnostics for the resulting space-time data.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::config::CosineProfile;
use crate::model::{DelayParams, DiffusionParams, ModelParams};
use crate::{Error, Result};

pub const MIN_POINTS: usize = 32;
pub const DEFAULT_POINTS: usize = 200;
pub const CFL_FACTOR: f64 = 0.4;
/// Upper bound on stored history snapshots; the stride grows beyond it.
pub const MAX_SNAPSHOTS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl Field {
    fn grid(n: usize, l: f64) -> Vec<f64> {
        let h = l * std::f64::consts::PI / n as f64;
        (0..=n).map(|j| j as f64 * h).collect()
    }

    pub fn constant(n: usize, l: f64, u: f64, v: f64) -> Self {
        Self { x: Self::grid(n, l), u: vec![u; n + 1], v: vec![v; n + 1], t: 0.0 }
    }

    pub fn from_profiles(n: usize, l: f64, u: &CosineProfile, v: &CosineProfile) -> Self {
        let x = Self::grid(n, l);
        let uu = x.iter().map(|&s| u.eval(s)).collect();
        let vv = x.iter().map(|&s| v.eval(s)).collect();
        Self { x, u: uu, v: vv, t: 0.0 }
    }

    /// Number of intervals N.
    pub fn intervals(&self) -> usize {
        self.x.len() - 1
    }

    pub fn spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// Largest deviation from the constant state (u, v).
    pub fn sup_dist(&self, u: f64, v: f64) -> f64 {
        self.u.iter().map(|a| (a - u).abs()).chain(self.v.iter().map(|b| (b - v).abs())).fold(0.0, f64::max)
    }

    pub fn sup_diff(&self, other: &Field) -> f64 {
        let du = self.u.iter().zip(&other.u).map(|(a, b)| (a - b).abs());
        let dv = self.v.iter().zip(&other.v).map(|(a, b)| (a - b).abs());
        du.chain(dv).fold(0.0, f64::max)
    }

    fn check_finite(&self) -> Result<()> {
        if self.u.iter().chain(&self.v).all(|z| z.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(self.t))
        }
    }
}

/// Cosine coefficient of mode n (profile cos(n pi j / N)) by the trapezoid rule,
/// normalised so that the profile cos(n pi j / N) has coefficient 1.
pub fn cosine_coefficient(w: &[f64], n: usize) -> f64 {
    let big_n = w.len() - 1;
    let mut s = 0.0;
    for (j, &z) in w.iter().enumerate() {
        let wt = if j == 0 || j == big_n { 0.5 } else { 1.0 };
        s += wt * z * (std::f64::consts::PI * (n * j) as f64 / big_n as f64).cos();
    }
    let norm = if n == 0 || n == big_n { 1.0 } else { 0.5 };
    s / (big_n as f64 * norm)
}

/// Second-difference Laplacian with mirror ghost points.
pub fn laplacian(w: &[f64], h: f64, out: &mut [f64]) {
    let n = w.len() - 1;
    let ih2 = 1.0 / (h * h);
    out[0] = 2.0 * (w[1] - w[0]) * ih2;
    out[n] = 2.0 * (w[n - 1] - w[n]) * ih2;
    for j in 1..n {
        out[j] = (w[j - 1] - 2.0 * w[j] + w[j + 1]) * ih2;
    }
}

/// Factored (I - s L_h) with s = d dt, for the Neumann Laplacian.
struct Tridiag {
    sub: Vec<f64>,
    diag_inv: Vec<f64>,
    sup: Vec<f64>,
}

impl Tridiag {
    fn new(n_int: usize, s: f64) -> Self {
        let m = n_int + 1;
        let mut a = vec![-s; m];
        let b = vec![1.0 + 2.0 * s; m];
        let mut c = vec![-s; m];
        a[0] = 0.0;
        c[0] = -2.0 * s;
        a[m - 1] = -2.0 * s;
        c[m - 1] = 0.0;
        // forward elimination once; stores modified pivots and super-diagonal
        let mut cp = vec![0.0; m];
        let mut dinv = vec![0.0; m];
        dinv[0] = 1.0 / b[0];
        cp[0] = c[0] * dinv[0];
        for i in 1..m {
            let piv = b[i] - a[i] * cp[i - 1];
            dinv[i] = 1.0 / piv;
            cp[i] = c[i] * dinv[i];
        }
        Self { sub: a, diag_inv: dinv, sup: cp }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let m = rhs.len();
        rhs[0] *= self.diag_inv[0];
        for i in 1..m {
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) * self.diag_inv[i];
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= self.sup[i] * rhs[i + 1];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stepper {
    /// Classical RK4 on the full semi-discrete system; requires the CFL bound.
    Rk4,
    /// SBDF2: BDF2 diffusion by tridiagonal solve, extrapolated explicit
    /// reaction; the first step is implicit-explicit Euler.
    SemiImplicit,
    /// RK4 when the CFL bound holds, semi-implicit otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Time step; `None` selects min(CFL bound, 1e-3).
    pub dt: Option<f64>,
    pub stepper: Stepper,
    pub sample_every: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { dt: None, stepper: Stepper::Auto, sample_every: 0.5 }
    }
}

pub fn cfl_bound(diff: &DiffusionParams, h: f64) -> f64 {
    let d = diff.d1.max(diff.d2);
    if d == 0.0 {
        f64::INFINITY
    } else {
        CFL_FACTOR * h * h / d
    }
}

/// Ring of past snapshots at a uniform stride; times before the first
/// snapshot read the constant initial profile.
pub struct History {
    t0: f64,
    span: f64,
    times: VecDeque<f64>,
    u: VecDeque<Vec<f64>>,
    v: VecDeque<Vec<f64>>,
}

impl History {
    pub fn new(init: &Field, span: f64) -> Self {
        let mut h = Self { t0: init.t, span, times: VecDeque::new(), u: VecDeque::new(), v: VecDeque::new() };
        h.push(init.t, &init.u, &init.v);
        h
    }

    pub fn push(&mut self, t: f64, u: &[f64], v: &[f64]) {
        self.times.push_back(t);
        self.u.push_back(u.to_vec());
        self.v.push_back(v.to_vec());
        while self.times.len() > 2 && self.times[1] <= t - self.span {
            self.times.pop_front();
            self.u.pop_front();
            self.v.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn newest_time(&self) -> f64 {
        *self.times.back().unwrap()
    }

    /// Values at time `tq`; between the newest snapshot and `stage` the
    /// values are interpolated against the stage state.
    fn at(&self, tq: f64, stage: (f64, &[f64], &[f64]), want_v: bool, out_u: &mut [f64], out_v: &mut [f64]) -> Result<()> {
        let (ts, su, sv) = stage;
        let newest = self.newest_time();
        let blend = |a: &[f64], b: &[f64], w: f64, out: &mut [f64]| {
            for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                *o = (1.0 - w) * x + w * y;
            }
        };
        if tq >= newest {
            let w = if ts > newest { ((tq - newest) / (ts - newest)).min(1.0) } else { 1.0 };
            let k = self.times.len() - 1;
            blend(&self.u[k], su, w, out_u);
            if want_v {
                blend(&self.v[k], sv, w, out_v);
            }
            return Ok(());
        }
        if tq <= self.t0 && self.times[0] == self.t0 {
            out_u.copy_from_slice(&self.u[0]);
            if want_v {
                out_v.copy_from_slice(&self.v[0]);
            }
            return Ok(());
        }
        if tq < self.times[0] {
            return Err(Error::HistoryUnderflow(format!("t = {tq} precedes oldest snapshot {}", self.times[0])));
        }
        let i = self.times.partition_point(|&s| s <= tq).max(1) - 1;
        let w = (tq - self.times[i]) / (self.times[i + 1] - self.times[i]);
        blend(&self.u[i], &self.u[i + 1], w, out_u);
        if want_v {
            blend(&self.v[i], &self.v[i + 1], w, out_v);
        }
        Ok(())
    }
}

/// Delayed arguments for one reaction evaluation.
struct Lagged<'a> {
    /// u(x, t - tau1) in the prey logistic factor.
    u1: &'a [f64],
    /// u(x, t - tau2) and v(x, t - tau2) in the predator numerical response.
    u2: &'a [f64],
    v2: &'a [f64],
}

fn reaction(q: &ModelParams, u: &[f64], v: &[f64], lag: &Lagged, du: &mut [f64], dv: &mut [f64]) {
    for j in 0..u.len() {
        let (uj, vj) = (u[j], v[j]);
        du[j] = q.r * uj * (1.0 - lag.u1[j]) * (uj - q.a) - (1.0 + q.c * vj) * uj * vj;
        dv[j] = q.m * vj * (q.p * lag.u2[j] * (1.0 + q.c * lag.v2[j]) - 1.0);
    }
}

struct Plan {
    dt: f64,
    steps: usize,
    sample_stride: usize,
    implicit: bool,
}

fn plan(diff: &DiffusionParams, init: &Field, t_end: f64, opts: &SimOptions) -> Result<Plan> {
    let n = init.intervals();
    if n < MIN_POINTS {
        return Err(Error::InvalidParams(format!("need N >= {MIN_POINTS}, got {n}")));
    }
    let expect_h = diff.l * std::f64::consts::PI / n as f64;
    if (init.spacing() - expect_h).abs() > 1e-12 * expect_h || init.u.len() != init.v.len() || init.u.len() != n + 1 {
        return Err(Error::InvalidParams("initial field does not match the domain (0, l*pi)".into()));
    }
    if !(t_end > 0.0 && t_end.is_finite()) || !(opts.sample_every > 0.0) {
        return Err(Error::InvalidParams(format!("bad horizon {t_end} or sampling {}", opts.sample_every)));
    }
    init.check_finite()?;
    let cfl = cfl_bound(diff, expect_h);
    let mut dt = opts.dt.unwrap_or(cfl.min(1e-3));
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("bad dt {dt}")));
    }
    let implicit = match opts.stepper {
        Stepper::Rk4 if dt > cfl => return Err(Error::CflViolation { dt, bound: cfl }),
        Stepper::Rk4 => false,
        Stepper::SemiImplicit => true,
        Stepper::Auto => dt > cfl,
    };
    let steps = (t_end / dt).round().max(1.0) as usize;
    if (steps as f64 * dt - t_end).abs() > 1e-9 * dt {
        dt = t_end / steps as f64;
        if !implicit && dt > cfl {
            return Err(Error::CflViolation { dt, bound: cfl });
        }
    }
    let sample_stride = ((opts.sample_every / dt).round() as usize).max(1);
    Ok(Plan { dt, steps, sample_stride, implicit })
}

/// Shared time loop. `lagged` fills the delayed arguments for a reaction
/// evaluation at time t with current stage state (u, v).
fn run<L>(q: &ModelParams, diff: &DiffusionParams, init: &Field, t_end: f64, opts: &SimOptions, mut lagged: L) -> Result<Vec<Field>>
where
    L: FnMut(Option<(f64, &[f64], &[f64])>, f64, &[f64], &[f64], &mut dyn FnMut(&Lagged)) -> Result<()>,
{
    q.validate()?;
    diff.validate()?;
    let p = plan(diff, init, t_end, opts)?;
    let h = init.spacing();
    let m = init.u.len();
    let mut u = init.u.clone();
    let mut v = init.v.clone();
    let mut t = init.t;
    let mut out = vec![init.clone()];

    let mut lu = vec![0.0; m];
    let mut lv = vec![0.0; m];
    let mut ru = vec![0.0; m];
    let mut rv = vec![0.0; m];
    let mut ks_u = vec![vec![0.0; m]; 4];
    let mut ks_v = vec![vec![0.0; m]; 4];
    let mut su = vec![0.0; m];
    let mut sv = vec![0.0; m];
    let ih2 = 1.0 / (h * h);
    // implicit Euler for the first step, then SBDF2 with matrix I - (2/3) dt D L
    let euler = p.implicit.then(|| (Tridiag::new(m - 1, diff.d1 * p.dt * ih2), Tridiag::new(m - 1, diff.d2 * p.dt * ih2)));
    let bdf2 = p.implicit.then(|| {
        let s = 2.0 / 3.0 * p.dt * ih2;
        (Tridiag::new(m - 1, diff.d1 * s), Tridiag::new(m - 1, diff.d2 * s))
    });
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    for step in 1..=p.steps {
        if let (Some((e1, e2)), Some((b1, b2))) = (&euler, &bdf2) {
            lagged(None, t, &u, &v, &mut |lag| reaction(q, &u, &v, lag, &mut ru, &mut rv))?;
            let (un, vn, run_, rvn) = (u.clone(), v.clone(), ru.clone(), rv.clone());
            match &prev {
                None => {
                    for j in 0..m {
                        u[j] += p.dt * ru[j];
                        v[j] += p.dt * rv[j];
                    }
                    e1.solve(&mut u);
                    e2.solve(&mut v);
                }
                Some((up, vp, rup, rvp)) => {
                    let w = 2.0 / 3.0 * p.dt;
                    for j in 0..m {
                        u[j] = (4.0 * u[j] - up[j]) / 3.0 + w * (2.0 * ru[j] - rup[j]);
                        v[j] = (4.0 * v[j] - vp[j]) / 3.0 + w * (2.0 * rv[j] - rvp[j]);
                    }
                    b1.solve(&mut u);
                    b2.solve(&mut v);
                }
            }
            prev = Some((un, vn, run_, rvn));
        } else {
            let dt = p.dt;
            let offsets = [0.0, 0.5, 0.5, 1.0];
            for st in 0..4 {
                if st == 0 {
                    su.copy_from_slice(&u);
                    sv.copy_from_slice(&v);
                } else {
                    let w = offsets[st] * dt;
                    for j in 0..m {
                        su[j] = u[j] + w * ks_u[st - 1][j];
                        sv[j] = v[j] + w * ks_v[st - 1][j];
                    }
                }
                let ts = t + offsets[st] * dt;
                laplacian(&su, h, &mut lu);
                laplacian(&sv, h, &mut lv);
                let (ku, kv) = (&mut ks_u[st], &mut ks_v[st]);
                lagged(Some((t, &u, &v)), ts, &su, &sv, &mut |lag| reaction(q, &su, &sv, lag, ku, kv))?;
                for j in 0..m {
                    ku[j] += diff.d1 * lu[j];
                    kv[j] += diff.d2 * lv[j];
                }
            }
            for j in 0..m {
                u[j] += dt / 6.0 * (ks_u[0][j] + 2.0 * ks_u[1][j] + 2.0 * ks_u[2][j] + ks_u[3][j]);
                v[j] += dt / 6.0 * (ks_v[0][j] + 2.0 * ks_v[1][j] + 2.0 * ks_v[2][j] + ks_v[3][j]);
            }
        }
        t = init.t + step as f64 * p.dt;
        lagged_commit(&mut lagged, t, &u, &v)?;
        if step % p.sample_stride == 0 || step == p.steps {
            let f = Field { x: init.x.clone(), u: u.clone(), v: v.clone(), t };
            f.check_finite()?;
            out.push(f);
        } else if !(u[0].is_finite() && v[0].is_finite()) {
            return Err(Error::NonFinite(t));
        }
    }
    Ok(out)
}

/// A lag provider is told about each accepted step by a call with `ts` = NaN.
fn lagged_commit<L>(lagged: &mut L, t: f64, u: &[f64], v: &[f64]) -> Result<()>
where
    L: FnMut(Option<(f64, &[f64], &[f64])>, f64, &[f64], &[f64], &mut dyn FnMut(&Lagged)) -> Result<()>,
{
    lagged(Some((t, u, v)), f64::NAN, u, v, &mut |_| {})
}

/// Reaction-diffusion system without delays.
pub fn simulate_rd(q: &ModelParams, diff: &DiffusionParams, init: &Field, t_end: f64, opts: &SimOptions) -> Result<Vec<Field>> {
    run(q, diff, init, t_end, opts, |_, ts, su, sv, f| {
        if !ts.is_nan() {
            f(&Lagged { u1: su, u2: su, v2: sv });
        }
        Ok(())
    })
}

/// Reaction-diffusion system with prey maturation delay tau1 and predator
/// gestation delay tau2. The history before t0 is the initial profile, held
/// constant in time.
pub fn simulate_rd_delays(
    q: &ModelParams,
    diff: &DiffusionParams,
    delays: &DelayParams,
    init: &Field,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Vec<Field>> {
    simulate_rd_delays_from(q, diff, delays, std::slice::from_ref(init), t_end, opts)
}

/// As [`simulate_rd_delays`], continuing a stored trajectory. Snapshots in
/// `past` are increasing in time and the last one is the initial state; times
/// before the first snapshot read the first snapshot.
pub fn simulate_rd_delays_from(
    q: &ModelParams,
    diff: &DiffusionParams,
    delays: &DelayParams,
    past: &[Field],
    t_end: f64,
    opts: &SimOptions,
) -> Result<Vec<Field>> {
    delays.validate()?;
    let init = past.last().ok_or_else(|| Error::InvalidParams("empty history".into()))?;
    if past.windows(2).any(|w| !(w[1].t > w[0].t) || w[1].u.len() != w[0].u.len()) {
        return Err(Error::InvalidParams("history snapshots must increase in time on one grid".into()));
    }
    let span = delays.tau1.max(delays.tau2);
    let p = plan(diff, init, t_end, opts)?;
    let stride = ((span / p.dt).ceil() as usize / MAX_SNAPSHOTS).max(1);
    let keep = span + 2.0 * stride as f64 * p.dt;
    let mut hist = History::new(&past[0], keep);
    for f in &past[1..] {
        hist.push(f.t, &f.u, &f.v);
    }
    let m = init.u.len();
    let mut u1 = vec![0.0; m];
    let mut u2 = vec![0.0; m];
    let mut v2 = vec![0.0; m];
    let mut dummy = vec![0.0; m];
    let mut accepted = 0usize;
    run(q, diff, init, t_end, opts, |base, ts, su, sv, f| {
        if ts.is_nan() {
            accepted += 1;
            if accepted.is_multiple_of(stride) {
                let (t, u, v) = base.unwrap();
                hist.push(t, u, v);
            }
            return Ok(());
        }
        // the newest snapshot may lag the step start when stride > 1
        let stage = (ts, su, sv);
        let lookup = |tq: f64, want_v: bool, ou: &mut [f64], ov: &mut [f64]| -> Result<()> {
            if tq >= ts {
                ou.copy_from_slice(su);
                if want_v {
                    ov.copy_from_slice(sv);
                }
                Ok(())
            } else {
                hist.at(tq, stage, want_v, ou, ov)
            }
        };
        lookup(ts - delays.tau1, false, &mut u1, &mut dummy)?;
        lookup(ts - delays.tau2, true, &mut u2, &mut v2)?;
        f(&Lagged { u1: &u1, u2: &u2, v2: &v2 });
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttractorKind {
    HomogeneousSteady,
    InhomogeneousSteady,
    HomogeneousPeriodic,
    InhomogeneousPeriodic,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorDiagnosis {
    pub kind: AttractorKind,
    pub dominant_mode: usize,
    pub period: Option<f64>,
    /// Largest spatial peak-to-peak of u or v over the tail.
    pub spatial_range: f64,
    /// Largest change of any grid value over the tail.
    pub time_variation: f64,
}

pub const STEADY_TOL: f64 = 1e-6;
pub const INHOMOGENEOUS_TOL: f64 = 1e-4;
pub const PERIOD_JITTER: f64 = 0.01;

fn l2_norm(f: &Field) -> f64 {
    let h = f.spacing();
    let n = f.u.len() - 1;
    let mut s = 0.0;
    for j in 0..=n {
        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
        s += w * (f.u[j] * f.u[j] + f.v[j] * f.v[j]);
    }
    (s * h).sqrt()
}

/// Local maxima (time, value) by parabolic interpolation through the
/// neighbouring samples.
fn local_maxima(t: &[f64], s: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..s.len().saturating_sub(1) {
        if s[i] > s[i - 1] && s[i] >= s[i + 1] {
            let (a, b, c) = (s[i - 1], s[i], s[i + 1]);
            let den = a - 2.0 * b + c;
            let off = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            let dt = t[i + 1] - t[i];
            out.push((t[i] + off * dt, b - 0.25 * (a - c) * off));
        }
    }
    out
}

/// Period from maxima grouped k at a time: every k-th maximum must repeat
/// with jitter below `PERIOD_JITTER` and near-equal heights.
fn period_from_maxima(maxima: &[(f64, f64)], range: f64) -> Option<f64> {
    for k in 1..=4 {
        if maxima.len() < 3 * k + 1 {
            break;
        }
        let mut periods = Vec::new();
        let mut height_spread: f64 = 0.0;
        for i in k..maxima.len() {
            periods.push(maxima[i].0 - maxima[i - k].0);
            height_spread = height_spread.max((maxima[i].1 - maxima[i - k].1).abs());
        }
        let mean = periods.iter().sum::<f64>() / periods.len() as f64;
        let jitter = periods.iter().map(|p| (p - mean).abs()).fold(0.0, f64::max) / mean;
        if jitter < PERIOD_JITTER && height_spread < PERIOD_JITTER * range {
            return Some(mean);
        }
    }
    None
}

pub fn dominant_mode(w: &[f64]) -> usize {
    let n = w.len() - 1;
    (1..=n).map(|k| (k, cosine_coefficient(w, k).abs())).fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best }).0
}

/// Classifies the tail of a trajectory.
pub fn diagnose(tail: &[Field]) -> AttractorDiagnosis {
    let undecided = |range: f64, var: f64| AttractorDiagnosis {
        kind: AttractorKind::Undecided,
        dominant_mode: 0,
        period: None,
        spatial_range: range,
        time_variation: var,
    };
    if tail.len() < 8 {
        return undecided(0.0, f64::NAN);
    }
    let last = tail.last().unwrap();
    let ptp = |w: &[f64]| w.iter().cloned().fold(f64::MIN, f64::max) - w.iter().cloned().fold(f64::MAX, f64::min);
    let range = tail.iter().map(|f| ptp(&f.u).max(ptp(&f.v))).fold(0.0, f64::max);
    let variation = tail.iter().map(|f| f.sup_diff(last)).fold(0.0, f64::max);
    let inhomogeneous = range > INHOMOGENEOUS_TOL;
    let mode = if inhomogeneous { dominant_mode(&last.u) } else { 0 };
    let span = last.t - tail[0].t;
    if variation < STEADY_TOL {
        let kind = if inhomogeneous { AttractorKind::InhomogeneousSteady } else { AttractorKind::HomogeneousSteady };
        return AttractorDiagnosis { kind, dominant_mode: mode, period: None, spatial_range: range, time_variation: variation };
    }
    let t: Vec<f64> = tail.iter().map(|f| f.t).collect();
    let s: Vec<f64> = tail.iter().map(l2_norm).collect();
    let srange = s.iter().cloned().fold(f64::MIN, f64::max) - s.iter().cloned().fold(f64::MAX, f64::min);
    let maxima = local_maxima(&t, &s);
    match period_from_maxima(&maxima, srange) {
        Some(period) if span >= 5.0 * period || span >= 500.0 => {
            let kind = if inhomogeneous { AttractorKind::InhomogeneousPeriodic } else { AttractorKind::HomogeneousPeriodic };
            AttractorDiagnosis { kind, dominant_mode: mode, period: Some(period), spatial_range: range, time_variation: variation }
        }
        _ => undecided(range, variation),
    }
}
