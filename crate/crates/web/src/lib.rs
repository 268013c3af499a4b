//! Browser bindings: each operation takes plain numbers and returns a JSON string.

use predprey_core::delay::{self, CharQuasiPolynomial};
use predprey_core::equilibria::{boundary_equilibria, interior_equilibria, primary_equilibrium, Equilibrium};
use predprey_core::model::nullclines;
use predprey_core::phase::{self, Direction};
use predprey_core::{turing, DiffusionParams, Error, ModelParams, Result, State};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const ORBIT_POINTS: usize = 4000;
const NULLCLINE_SAMPLES: usize = 400;

#[derive(Serialize)]
struct Portrait {
    equilibria: Vec<Equilibrium>,
    prey_nullcline: Vec<(f64, f64)>,
    predator_nullcline: Vec<(f64, f64)>,
    orbit: Vec<(f64, f64)>,
    outcome: Option<phase::BasinOutcome>,
}

fn json<T: Serialize>(x: &T) -> Result<String> {
    serde_json::to_string(x).map_err(|e| Error::Io(e.to_string()))
}

fn primary(q: &ModelParams) -> Result<Equilibrium> {
    primary_equilibrium(q).ok_or_else(|| Error::Domain(format!("no interior equilibrium at p = {}", q.p)))
}

/// Nullclines, equilibria and, when `t_end > 0`, the forward orbit from (u0, v0).
pub fn portrait(c: f64, p: f64, u0: f64, v0: f64, t_end: f64) -> Result<String> {
    let q = ModelParams::new(1.1, 0.23, c, 0.31, p)?;
    let nc = nullclines(&q);
    let us: Vec<f64> = (1..=NULLCLINE_SAMPLES).map(|i| i as f64 / NULLCLINE_SAMPLES as f64).collect();
    let mut equilibria = boundary_equilibria(&q);
    equilibria.extend(interior_equilibria(&q));
    let (orbit, outcome) = if t_end > 0.0 {
        let o = phase::integrate(State::new(u0, v0), &q, t_end, 1e-8, Direction::Forward)?;
        let stride = o.states.len().div_ceil(ORBIT_POINTS).max(1);
        let pts = o.states.iter().step_by(stride).chain(o.states.last()).map(|s| (s.u, s.v)).collect();
        (pts, Some(phase::basin_classify(State::new(u0, v0), &q)))
    } else {
        (Vec::new(), None)
    };
    json(&Portrait {
        equilibria,
        prey_nullcline: us.iter().filter_map(|&u| Some((u, nc.f(u).ok()?))).collect(),
        predator_nullcline: us.iter().filter_map(|&u| Some((u, nc.g(u).ok()?))).collect(),
        orbit,
        outcome,
    })
}

/// Critical d2 over d1 in [d1_min, d1_max], split by the maximising mode.
pub fn turing(c: f64, p: f64, l: f64, d1_min: f64, d1_max: f64) -> Result<String> {
    let q = ModelParams::new(1.1, 0.23, c, 0.31, p)?;
    DiffusionParams::new(d1_min, 0.0, l)?;
    let eq = primary(&q)?;
    json(&turing::turing_curve(&q, &eq, l, (d1_min, d1_max), turing::N_MAX, 300)?)
}

#[derive(Serialize)]
struct Curve {
    n: usize,
    points: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct Switching {
    curves: Vec<Curve>,
    unstable_roots: Option<usize>,
}

fn family(c: f64, p: f64, d1: f64, d2: f64, l: f64, n_max: usize) -> Result<Vec<CharQuasiPolynomial>> {
    let q = ModelParams::new(1.1, 0.23, c, 0.31, p)?;
    let eq = primary(&q)?;
    delay::char_quasi_family(&q, &DiffusionParams::new(d1, d2, l)?, &eq, n_max)
}

/// Switching curves in [0, tau1_max] x [0, tau2_max] and the number of
/// characteristic roots with positive real part at (tau1, tau2) if both are finite.
#[allow(clippy::too_many_arguments)]
pub fn switching(c: f64, p: f64, d1: f64, d2: f64, l: f64, n_max: usize, window: (f64, f64), at: (f64, f64)) -> Result<String> {
    let fam = family(c, p, d1, d2, l, n_max)?;
    let curves = fam
        .iter()
        .flat_map(|f| delay::switching_curves(f, window))
        .map(|cv| Curve { n: cv.id.n, points: cv.points.iter().map(|p| (p.tau1, p.tau2)).collect() })
        .collect();
    let unstable_roots = if at.0.is_finite() && at.1.is_finite() { Some(delay::count_rhp_family(&fam, at.0, at.1)?) } else { None };
    json(&Switching { curves, unstable_roots })
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = phasePortrait)]
pub fn phase_portrait_js(c: f64, p: f64, u0: f64, v0: f64, t_end: f64) -> std::result::Result<String, JsError> {
    js(portrait(c, p, u0, v0, t_end))
}

#[wasm_bindgen(js_name = turingCurve)]
pub fn turing_curve_js(c: f64, p: f64, l: f64, d1_min: f64, d1_max: f64) -> std::result::Result<String, JsError> {
    js(turing(c, p, l, d1_min, d1_max))
}

#[wasm_bindgen(js_name = switchingCurves)]
#[allow(clippy::too_many_arguments)]
pub fn switching_curves_js(
    c: f64,
    p: f64,
    d1: f64,
    d2: f64,
    l: f64,
    n_max: usize,
    tau1_max: f64,
    tau2_max: f64,
    tau1: f64,
    tau2: f64,
) -> std::result::Result<String, JsError> {
    js(switching(c, p, d1, d2, l, n_max, (tau1_max, tau2_max), (tau1, tau2)))
}
