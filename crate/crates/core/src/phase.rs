//! Trajectories, saddle manifolds, connection thresholds, limit cycles and basins.

use serde::{Deserialize, Serialize};

use crate::equilibria::{
    boundary_equilibria, hopf_point, primary_equilibrium, saddle_equilibrium, saddle_node_point, Classification, Equilibrium,
};
use crate::model::{jacobian, nullclines, rhs_array, CooperationRegime, ModelParams, State};
use crate::ode::{Dopri5, Step};
use crate::roots::bisect_opt;
use crate::{Error, Result};

pub const EVENT_TTOL: f64 = 1e-10;
pub const MANIFOLD_EPS: f64 = 1e-6;
pub const MANIFOLD_BUDGET: f64 = 1e4;
pub const MANIFOLD_TOL: f64 = 1e-11;
pub const BOX: [f64; 4] = [-0.1, 2.0, -0.1, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// A sampled trajectory; `times` is elapsed integration time, increasing in
/// both directions (model time is `-t` for backward orbits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub direction: Direction,
}

impl Orbit {
    pub fn last(&self) -> State {
        *self.states.last().expect("orbit has at least the initial state")
    }
}

fn solver(q: ModelParams, dir: Direction, init: State, tol: f64) -> Dopri5<impl FnMut(f64, &[f64; 2]) -> [f64; 2], 2> {
    let sign = if dir == Direction::Forward { 1.0 } else { -1.0 };
    Dopri5::new(
        move |_, y: &[f64; 2]| {
            let d = rhs_array(*y, &q);
            [sign * d[0], sign * d[1]]
        },
        0.0,
        init.to_array(),
        tol,
    )
}

pub fn integrate(init: State, q: &ModelParams, t_end: f64, tol: f64, dir: Direction) -> Result<Orbit> {
    if !(1e-12..=1e-3).contains(&tol) {
        return Err(Error::InvalidParams(format!("tolerance {tol:e} outside [1e-12, 1e-3]")));
    }
    if !(init.u.is_finite() && init.v.is_finite()) {
        return Err(Error::InvalidParams("initial state is not finite".into()));
    }
    let mut s = solver(*q, dir, init, tol);
    let mut orbit = Orbit { times: vec![0.0], states: vec![init], direction: dir };
    while s.t < t_end {
        let st = s.step(t_end)?;
        orbit.times.push(st.t1);
        orbit.states.push(State::from_array(st.y1));
    }
    Ok(orbit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

/// Which end of the eigenvector is followed. Eigenvectors are oriented with a
/// positive v-component (positive u-component when v-component vanishes), so
/// `PlusEig` is the branch entering the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    PlusEig,
    MinusEig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    NullclineCrossing,
    Section,
    LeftBox,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldBranch {
    pub saddle: Equilibrium,
    pub stability: Stability,
    pub side: Side,
    pub seed_offset: State,
    pub polyline: Vec<State>,
    pub crossing_height: Option<f64>,
    pub termination: Termination,
}

impl ManifoldBranch {
    pub fn end(&self) -> State {
        *self.polyline.last().expect("branch has a seed")
    }
}

/// Unit eigenvector for eigenvalue `lambda`, oriented as described on [`Side`].
pub fn eigenvector(j: &[[f64; 2]; 2], lambda: f64) -> [f64; 2] {
    let a = [j[0][1], lambda - j[0][0]];
    let b = [lambda - j[1][1], j[1][0]];
    let w = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
    let n = w[0].hypot(w[1]);
    let mut w = [w[0] / n, w[1] / n];
    if w[1] < 0.0 || (w[1] == 0.0 && w[0] < 0.0) {
        w = [-w[0], -w[1]];
    }
    w
}

/// Real eigenvalues (stable, unstable) of a saddle.
pub fn saddle_eigenvalues(j: &[[f64; 2]; 2]) -> Result<(f64, f64)> {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det >= 0.0 {
        return Err(Error::Domain("equilibrium is not a saddle".into()));
    }
    let s = (tr * tr - 4.0 * det).sqrt();
    Ok((0.5 * (tr - s), 0.5 * (tr + s)))
}

/// Stopping rules for shooting integrations.
#[derive(Debug, Clone, Copy)]
enum Stop {
    /// crossing of p u (1 + c v) = 1 with v > 0
    Nullcline,
    /// crossing of u = u0 with v > v_min
    Section { u0: f64, v_min: f64 },
}

struct Shot {
    polyline: Vec<State>,
    hit: Option<State>,
    termination: Termination,
}

fn shoot(q: &ModelParams, seed: State, dir: Direction, stop: Stop, budget: f64) -> Result<Shot> {
    let nc = nullclines(q);
    let mut s = solver(*q, dir, seed, MANIFOLD_TOL);
    let mut polyline = vec![seed];
    let mut start_sign = nc.g_indicator(seed).signum();
    let inside = |y: &[f64; 2]| y[0] > BOX[0] && y[0] < BOX[1] && y[1] > BOX[2] && y[1] < BOX[3];
    while s.t < budget {
        let st: Step<2> = s.step(budget)?;
        let hit = match stop {
            Stop::Nullcline => {
                let g = |y: &[f64; 2]| nc.g_indicator(State::from_array(*y));
                if start_sign == 0.0 {
                    start_sign = g(&st.y1).signum();
                    None
                } else {
                    st.locate(g, EVENT_TTOL).filter(|(_, y)| y[1] > 0.0)
                }
            }
            Stop::Section { u0, v_min } => st.locate(|y| y[0] - u0, EVENT_TTOL).filter(|(_, y)| y[1] > v_min),
        };
        if let Some((_, y)) = hit {
            let h = State::from_array(y);
            polyline.push(h);
            let termination = match stop {
                Stop::Nullcline => Termination::NullclineCrossing,
                Stop::Section { .. } => Termination::Section,
            };
            return Ok(Shot { polyline, hit: Some(h), termination });
        }
        polyline.push(State::from_array(st.y1));
        if !inside(&st.y1) {
            return Ok(Shot { polyline, hit: None, termination: Termination::LeftBox });
        }
        let d = rhs_array(st.y1, q);
        if d[0].hypot(d[1]) < 1e-12 && State::from_array(st.y1).dist(seed) > 1e-4 {
            return Ok(Shot { polyline, hit: None, termination: Termination::Converged });
        }
    }
    Err(Error::NoEvent(budget))
}

fn seed_for(saddle: &Equilibrium, stability: Stability, side: Side, q: &ModelParams) -> Result<(State, Direction)> {
    if saddle.classification != Classification::Saddle {
        return Err(Error::Domain(format!("({}, {}) is not a saddle", saddle.u, saddle.v)));
    }
    let j = jacobian(saddle.state(), q);
    let (ls, lu) = saddle_eigenvalues(&j)?;
    let (lambda, dir) = match stability {
        Stability::Stable => (ls, Direction::Backward),
        Stability::Unstable => (lu, Direction::Forward),
    };
    let w = eigenvector(&j, lambda);
    let eps = MANIFOLD_EPS * saddle.state().norm().max(1.0);
    let sgn = if side == Side::PlusEig { eps } else { -eps };
    Ok((State::new(sgn * w[0], sgn * w[1]), dir))
}

/// Traces one branch of a saddle's stable or unstable manifold until it meets
/// the predator nullcline, leaves the box, or converges.
pub fn saddle_manifold(saddle: &Equilibrium, stability: Stability, side: Side, q: &ModelParams) -> Result<ManifoldBranch> {
    saddle_manifold_eps(saddle, stability, side, q, MANIFOLD_EPS)
}

pub fn saddle_manifold_eps(saddle: &Equilibrium, stability: Stability, side: Side, q: &ModelParams, eps: f64) -> Result<ManifoldBranch> {
    let (mut off, dir) = seed_for(saddle, stability, side, q)?;
    let k = eps / MANIFOLD_EPS;
    off = State::new(off.u * k, off.v * k);
    let seed = State::new(saddle.u + off.u, saddle.v + off.v);
    let shot = shoot(q, seed, dir, Stop::Nullcline, MANIFOLD_BUDGET)?;
    Ok(ManifoldBranch {
        saddle: *saddle,
        stability,
        side,
        seed_offset: off,
        crossing_height: shot.hit.map(|s| s.v),
        polyline: shot.polyline,
        termination: shot.termination,
    })
}

/// Height of a manifold branch on the predator nullcline. A branch that
/// converges to E* without crossing is assigned v*.
fn branch_height(b: &ManifoldBranch, q: &ModelParams) -> Option<f64> {
    if let Some(h) = b.crossing_height {
        return Some(h);
    }
    if b.termination == Termination::Converged {
        let e = primary_equilibrium(q)?;
        if b.end().dist(e.state()) < 1e-6 {
            return Some(e.v);
        }
    }
    None
}

/// S(p): height of the stable manifold of E_a on the predator nullcline.
pub fn stable_height(q: &ModelParams) -> Result<Option<f64>> {
    let ea = boundary_equilibria(q)[1];
    let b = saddle_manifold(&ea, Stability::Stable, Side::PlusEig, q)?;
    Ok(branch_height(&b, q))
}

/// U(p): height of the upward unstable manifold of E_1 on the predator nullcline.
pub fn unstable_height(q: &ModelParams) -> Result<Option<f64>> {
    let e1 = boundary_equilibria(q)[2];
    let b = saddle_manifold(&e1, Stability::Unstable, Side::PlusEig, q)?;
    Ok(branch_height(&b, q))
}

/// h(p) = S(p) - U(p), when both heights exist.
pub fn heteroclinic_gap(q: &ModelParams) -> Option<f64> {
    let s = stable_height(q).ok()??;
    let u = unstable_height(q).ok()??;
    Some(s - u)
}

/// Grid used to look for the first sign change of a gap function.
fn threshold_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    // geometric in the distance from `lo`
    let d0 = (hi - lo) * 2e-3;
    let ratio = ((hi - lo) / d0).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| lo + d0 * ratio.powi(i as i32)).filter(|&p| p < hi).collect()
}

fn first_sign_change<F: Fn(f64) -> Option<f64>>(f: &F, grid: &[f64]) -> Option<(f64, f64)> {
    let mut prev: Option<(f64, f64)> = None;
    for &p in grid {
        if let Some(g) = f(p) {
            if let Some((pp, gp)) = prev {
                if gp.signum() != g.signum() {
                    return Some((pp, p));
                }
            }
            prev = Some((p, g));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub p: f64,
    /// |gap| at the returned value.
    pub residual: f64,
}

/// p^#: the value where the stable manifold of E_a meets the unstable manifold of E_1.
pub fn heteroclinic_threshold(q: &ModelParams) -> Result<Threshold> {
    let hi = 1.0 / q.a;
    let grid = threshold_grid(1.0 + 0.01, hi, 48);
    let f = |p: f64| heteroclinic_gap(&q.with_p(p));
    let (lo, up) = first_sign_change(&f, &grid).ok_or_else(|| Error::NoSignChange("S(p) - U(p) keeps its sign on (1, 1/a)".into()))?;
    let p = bisect_opt(f, lo, up, 1e-7).ok_or_else(|| Error::NoSignChange("gap undefined inside bracket".into()))?;
    Ok(Threshold { p, residual: f(p).map_or(f64::NAN, f64::abs) })
}

/// Signed gap between the upward unstable branch and the left stable branch
/// of E_R*, measured on the section u = u* above E*.
pub fn homoclinic_gap(q: &ModelParams) -> Option<f64> {
    let es = primary_equilibrium(q)?;
    let er = saddle_equilibrium(q)?;
    let j = jacobian(er.state(), q);
    let (ls, _) = saddle_eigenvalues(&j).ok()?;
    let ws = eigenvector(&j, ls);
    let left = if ws[0] < 0.0 { Side::PlusEig } else { Side::MinusEig };
    let stop = Stop::Section { u0: es.u, v_min: es.v };
    let up = seed_for(&er, Stability::Unstable, Side::PlusEig, q).ok()?.0;
    let st = seed_for(&er, Stability::Stable, left, q).ok()?.0;
    let shot_u = shoot(q, State::new(er.u + up.u, er.v + up.v), Direction::Forward, stop, 3000.0).ok()?;
    let shot_s = shoot(q, State::new(er.u + st.u, er.v + st.v), Direction::Backward, stop, 3000.0).ok()?;
    Some(shot_u.hit?.v - shot_s.hit?.v)
}

/// p_hom: homoclinic loop of E_R* (strong cooperation).
pub fn homoclinic_threshold(q: &ModelParams) -> Result<Threshold> {
    if q.regime() != CooperationRegime::Strong {
        return Err(Error::NotApplicable("no interior saddle without strong cooperation".into()));
    }
    let p_sn = saddle_node_point(q)?.p_sn;
    let grid: Vec<f64> = (1..60).map(|i| p_sn + (1.0 - p_sn) * i as f64 / 60.0).collect();
    let f = |p: f64| homoclinic_gap(&q.with_p(p));
    let (lo, up) = first_sign_change(&f, &grid).ok_or_else(|| Error::NoSignChange("homoclinic gap keeps its sign".into()))?;
    let p = bisect_opt(f, lo, up, 1e-6).ok_or_else(|| Error::NoSignChange("gap undefined inside bracket".into()))?;
    Ok(Threshold { p, residual: f(p).map_or(f64::NAN, f64::abs) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    pub period: f64,
    pub amplitude_v: (f64, f64),
    pub section_point: State,
    /// |v(T) - v(0)| on the section at the final return.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CycleOptions {
    pub transient: f64,
    pub tol: f64,
    pub max_crossings: usize,
    pub budget: f64,
    pub agree: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self { transient: 2000.0, tol: 1e-10, max_crossings: 100_000, budget: 2e5, agree: 1e-6 }
    }
}

pub fn limit_cycle(q: &ModelParams, init: State) -> Result<Option<LimitCycle>> {
    limit_cycle_with(q, init, &CycleOptions::default())
}

/// Cycle detection on the section u = u* crossed with increasing u.
pub fn limit_cycle_with(q: &ModelParams, init: State, opt: &CycleOptions) -> Result<Option<LimitCycle>> {
    let Some(es) = primary_equilibrium(q) else {
        return Ok(None);
    };
    let mut s = solver(*q, Direction::Forward, init, opt.tol);
    let speed = |y: &[f64; 2]| {
        let d = rhs_array(*y, q);
        d[0].hypot(d[1])
    };
    while s.t < opt.transient {
        s.step(opt.transient)?;
        if speed(&s.y) < 1e-12 {
            return Ok(None);
        }
    }
    let mut last: Option<(f64, State)> = None;
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut crossings = 0;
    let t_stop = opt.transient + opt.budget;
    while s.t < t_stop {
        let st = s.step(t_stop)?;
        for k in 1..=8 {
            let v = st.eval(st.t0 + (st.t1 - st.t0) * k as f64 / 8.0)[1];
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
        if speed(&st.y1) < 1e-12 {
            return Ok(None);
        }
        let Some((t, y)) = st.locate(|y| y[0] - es.u, EVENT_TTOL) else {
            continue;
        };
        if st.y1[0] <= st.y0[0] {
            continue;
        }
        crossings += 1;
        let x = State::from_array(y);
        if x.dist(es.state()) < 1e-7 {
            return Ok(None);
        }
        if let Some((t0, x0)) = last {
            let residual = (x.v - x0.v).abs();
            if residual < 1e-9 && x.dist(es.state()) < 1e-5 {
                return Ok(None);
            }
            if residual < opt.agree && x.dist(es.state()) > 1e-4 {
                return Ok(Some(LimitCycle { period: t - t0, amplitude_v: (vmin, vmax), section_point: x, residual }));
            }
        }
        if crossings >= opt.max_crossings {
            break;
        }
        last = Some((t, x));
        vmin = x.v;
        vmax = x.v;
    }
    Err(Error::Inconclusive(format!("no cycle or equilibrium after {crossings} section crossings")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasinOutcome {
    ToE0,
    ToE1,
    ToEstar,
    ToCycle,
    Undecided,
}

/// Classifies the omega-limit set of `init` by integrating up to t = 5000.
pub fn basin_classify(init: State, q: &ModelParams) -> BasinOutcome {
    basin_classify_with(init, q, 5000.0)
}

pub fn basin_classify_with(init: State, q: &ModelParams, horizon: f64) -> BasinOutcome {
    let bnd = boundary_equilibria(q);
    let mut targets = vec![(bnd[0].state(), BasinOutcome::ToE0)];
    if bnd[2].classification.is_stable() {
        targets.push((bnd[2].state(), BasinOutcome::ToE1));
    }
    if let Some(e) = primary_equilibrium(q).filter(|e| e.classification.is_stable()) {
        targets.push((e.state(), BasinOutcome::ToEstar));
    }
    let mut s = solver(*q, Direction::Forward, init, 1e-9);
    let mut chunk: f64 = 0.0;
    while s.t < horizon {
        chunk = (chunk + 50.0).min(horizon);
        while s.t < chunk {
            if s.step(chunk).is_err() {
                return BasinOutcome::Undecided;
            }
        }
        let x = State::from_array(s.y);
        for (t, outcome) in &targets {
            if x.dist(*t) < 1e-4 {
                return *outcome;
            }
        }
    }
    let opt = CycleOptions { transient: 0.0, budget: 5000.0, tol: 1e-9, agree: 1e-5, ..Default::default() };
    match limit_cycle_with(q, State::from_array(s.y), &opt) {
        Ok(Some(_)) => BasinOutcome::ToCycle,
        _ => BasinOutcome::Undecided,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub u_star: Option<f64>,
    pub v_star: Option<f64>,
    pub classification: Option<Classification>,
    pub cycle_v_min: Option<f64>,
    pub cycle_v_max: Option<f64>,
    pub period: Option<f64>,
    pub error: Option<String>,
}

fn sweep_row(q: &ModelParams, p: f64, p_h: Option<f64>) -> SweepRow {
    let qp = q.with_p(p);
    let mut row =
        SweepRow { p, u_star: None, v_star: None, classification: None, cycle_v_min: None, cycle_v_max: None, period: None, error: None };
    let Some(e) = primary_equilibrium(&qp) else {
        return row;
    };
    row.u_star = Some(e.u);
    row.v_star = Some(e.v);
    row.classification = Some(e.classification);
    if p_h.is_some_and(|ph| p > ph) {
        match limit_cycle(&qp, State::new(e.u, e.v + 1e-3)) {
            Ok(Some(c)) => {
                row.cycle_v_min = Some(c.amplitude_v.0);
                row.cycle_v_max = Some(c.amplitude_v.1);
                row.period = Some(c.period);
            }
            Ok(None) => {}
            Err(err) => row.error = Some(err.to_string()),
        }
    }
    row
}

/// Equilibrium and cycle data along a p-grid; rows keep grid order.
pub fn bifurcation_sweep(q: &ModelParams, ps: &[f64]) -> Vec<SweepRow> {
    let p_h = hopf_point(q).ok().map(|h| h.p_h);
    crate::par_map(ps, |&p| sweep_row(q, p, p_h))
}
