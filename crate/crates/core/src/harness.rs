//! Scenario files, task dispatch, artifact persistence and the bundled
//! reproduction library.
//!
//! A scenario is a key-value file with `name`, `task`, the model parameters,
//! task options and optional checks written as `expect.<metric> = value` with
//! `tol.<metric> = tolerance`. A non-numeric expected value is compared as a label.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{CosineProfile, KvConfig};
use crate::delay::{self, CrossingSet};
use crate::equilibria::{self, Equilibrium};
use crate::model::{nullclines, DelayParams, DiffusionParams, ModelParams, State};
use crate::normal_form::{self, NormalFormCoeffs, SigmaWindow, Unfolding};
use crate::output::{to_json, Table};
use crate::pde::{self, Field, SimOptions, Stepper};
use crate::svg::{palette, Plot};
use crate::{phase, row, turing, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 20240611;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Equilibria,
    Sweep,
    Phase,
    Heteroclinic,
    Homoclinic,
    Turing,
    Pde,
    Switching,
    StabilityMap,
    DoubleHopf,
    NormalForm,
    Dde,
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "equilibria" => Task::Equilibria,
            "sweep" => Task::Sweep,
            "phase" => Task::Phase,
            "heteroclinic" => Task::Heteroclinic,
            "homoclinic" => Task::Homoclinic,
            "turing" => Task::Turing,
            "pde" => Task::Pde,
            "switching" => Task::Switching,
            "stability-map" => Task::StabilityMap,
            "double-hopf" => Task::DoubleHopf,
            "normal-form" => Task::NormalForm,
            "dde" => Task::Dde,
            _ => return Err(Error::Config(format!("unknown task `{s}`"))),
        })
    }
}

impl Task {
    fn needs_diffusion(self) -> bool {
        matches!(self, Task::Turing | Task::Pde | Task::Switching | Task::StabilityMap | Task::DoubleHopf)
    }

    fn needs_model(self) -> bool {
        self != Task::NormalForm
    }

    fn options(self) -> &'static [&'static str] {
        match self {
            Task::Equilibria | Task::Heteroclinic | Task::Homoclinic => &[],
            Task::Sweep => &["p_min", "p_max", "p_steps"],
            Task::Phase => &["grid", "u_max", "v_max", "horizon"],
            Task::Turing => &["d1_min", "d1_max", "n_max", "samples", "th_d1", "th_n"],
            Task::Pde | Task::Dde => &["points", "t_end", "dt", "stepper", "sample_every", "output_every", "tail", "init_u", "init_v"],
            Task::Switching => &["n_max", "tau1_max", "tau2_max"],
            Task::StabilityMap => &["n_max", "tau1_max", "tau2_max", "grid_tau1", "grid_tau2", "spot_checks"],
            Task::DoubleHopf => &["n_max", "tau1_max", "tau2_max"],
            Task::NormalForm => &["coeffs", "B11", "B21", "B13", "B23", "B2100", "B1011", "B0021", "B1110", "sigma1_max", "sigma2_max"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Expected {
    Number { value: f64, tol: f64 },
    Label(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub task: Task,
    pub params: Option<ModelParams>,
    pub diffusion: Option<DiffusionParams>,
    pub delays: Option<DelayParams>,
    pub output: Option<PathBuf>,
    pub expectations: BTreeMap<String, Expected>,
    /// Directory used to resolve relative paths in options.
    pub base_dir: PathBuf,
    cfg: KvConfig,
}

const MODEL_KEYS: [&str; 5] = ["r", "a", "c", "m", "p"];
const DIFF_KEYS: [&str; 3] = ["d1", "d2", "l"];
const DELAY_KEYS: [&str; 2] = ["tau1", "tau2"];

impl Scenario {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let cfg = KvConfig::parse(text)?;
        let name = cfg.get("name").ok_or_else(|| Error::Config("missing `name`".into()))?.to_string();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.') {
            return Err(Error::Config(format!("bad scenario name `{name}`")));
        }
        let task: Task = cfg.get("task").ok_or_else(|| Error::Config("missing `task`".into()))?.parse()?;

        let mut expectations = BTreeMap::new();
        for key in cfg.keys() {
            if let Some(metric) = key.strip_prefix("expect.") {
                let raw = cfg.get(key).unwrap_or_default();
                let e = match raw.parse::<f64>() {
                    Ok(value) => Expected::Number { value, tol: cfg.f64_or(&format!("tol.{metric}"), DEFAULT_TOL)? },
                    Err(_) => Expected::Label(raw.to_string()),
                };
                expectations.insert(metric.to_string(), e);
            } else if let Some(metric) = key.strip_prefix("tol.") {
                if !cfg.has(&format!("expect.{metric}")) {
                    return Err(Error::Config(format!("`{key}` without `expect.{metric}`")));
                }
            } else if !(["name", "task", "output"].contains(&key)
                || MODEL_KEYS.contains(&key)
                || DIFF_KEYS.contains(&key)
                || DELAY_KEYS.contains(&key)
                || task.options().contains(&key))
            {
                return Err(Error::Config(format!("unknown key `{key}` for task {task:?}")));
            }
        }

        let params = if task.needs_model() || MODEL_KEYS.iter().any(|k| cfg.has(k)) { Some(cfg.model_params()?) } else { None };
        let has_diff = DIFF_KEYS.iter().any(|k| cfg.has(k));
        let diffusion = if task != Task::Dde && (task.needs_diffusion() || has_diff) { Some(cfg.diffusion_params()?) } else { None };
        let delays = if DELAY_KEYS.iter().any(|k| cfg.has(k)) { Some(cfg.delay_params()?) } else { None };
        if task == Task::Dde && delays.is_none() {
            return Err(Error::Config("task dde needs tau1 and tau2".into()));
        }
        let s = Scenario {
            name,
            task,
            params,
            diffusion,
            delays,
            output: cfg.get("output").map(PathBuf::from),
            expectations,
            base_dir: base_dir.to_path_buf(),
            cfg,
        };
        s.validate_options()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Reads every option once so type errors surface before any work starts.
    fn validate_options(&self) -> Result<()> {
        let c = &self.cfg;
        for key in self.task.options() {
            match *key {
                "stepper" => {
                    stepper(c.str_or("stepper", "auto"))?;
                }
                "init_u" | "init_v" => {
                    if let Some(s) = c.get(key) {
                        CosineProfile::parse(s)?;
                    }
                }
                "coeffs" => {}
                "grid" | "n_max" | "samples" | "th_n" | "points" | "p_steps" | "grid_tau1" | "grid_tau2" | "spot_checks" => {
                    c.usize_or(key, 0)?;
                }
                _ => {
                    c.f64_opt(key)?;
                }
            }
        }
        if self.task == Task::NormalForm {
            self.coeffs()?;
        }
        Ok(())
    }

    fn model(&self) -> ModelParams {
        self.params.expect("validated at parse")
    }

    fn diff(&self) -> DiffusionParams {
        self.diffusion.expect("validated at parse")
    }

    fn window(&self) -> Result<(f64, f64)> {
        Ok((self.cfg.f64_or("tau1_max", 5.0)?, self.cfg.f64_or("tau2_max", 20.0)?))
    }

    fn coeffs(&self) -> Result<NormalFormCoeffs> {
        if let Some(file) = self.cfg.get("coeffs") {
            let path = self.base_dir.join(file);
            let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            return NormalFormCoeffs::from_json(&text);
        }
        let mut b = [0.0; 8];
        for (slot, key) in b.iter_mut().zip(["B11", "B21", "B13", "B23", "B2100", "B1011", "B0021", "B1110"]) {
            *slot = self.cfg.f64(key)?;
        }
        Ok(NormalFormCoeffs::from_real(b))
    }
}

fn stepper(s: &str) -> Result<Stepper> {
    match s {
        "auto" => Ok(Stepper::Auto),
        "rk4" => Ok(Stepper::Rk4),
        "semi-implicit" | "sbdf2" => Ok(Stepper::SemiImplicit),
        _ => Err(Error::Config(format!("unknown stepper `{s}`"))),
    }
}

/// Results of one task before they are written to disk.
#[derive(Debug, Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    pub labels: BTreeMap<String, String>,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn metric(&mut self, k: impl Into<String>, v: f64) {
        self.metrics.insert(k.into(), v);
    }

    fn label(&mut self, k: impl Into<String>, v: impl Into<String>) {
        self.labels.insert(k.into(), v.into());
    }

    fn file(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, v: &T) -> Result<()> {
        let s = to_json(v)?;
        self.file(name, s);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub metric: String,
    pub expected: Expected,
    pub actual: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub task: Task,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub labels: BTreeMap<String, String>,
    pub checks: Vec<CheckResult>,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn check(out: &Outcome, expectations: &BTreeMap<String, Expected>) -> Vec<CheckResult> {
    expectations
        .iter()
        .map(|(metric, exp)| {
            let (actual, pass) = match exp {
                Expected::Number { value, tol } => match out.metrics.get(metric) {
                    Some(&a) => (Some(crate::output::fmt17(a)), (a - value).abs() <= *tol),
                    None => (None, false),
                },
                Expected::Label(want) => match out.labels.get(metric) {
                    Some(a) => (Some(a.clone()), a == want),
                    None => (None, false),
                },
            };
            CheckResult { metric: metric.clone(), expected: exp.clone(), actual, pass }
        })
        .collect()
}

pub fn execute(s: &Scenario, seed: u64) -> Result<Outcome> {
    let mut out = Outcome::default();
    match s.task {
        Task::Equilibria => task_equilibria(s, &mut out)?,
        Task::Sweep => task_sweep(s, &mut out)?,
        Task::Phase => task_phase(s, &mut out)?,
        Task::Heteroclinic => {
            let t = phase::heteroclinic_threshold(&s.model())?;
            out.metric("p_het", t.p);
            out.metric("residual", t.residual);
            out.json("threshold.json", &t)?;
        }
        Task::Homoclinic => {
            let t = phase::homoclinic_threshold(&s.model())?;
            out.metric("p_hom", t.p);
            out.metric("residual", t.residual);
            out.json("threshold.json", &t)?;
        }
        Task::Turing => task_turing(s, &mut out)?,
        Task::Pde | Task::Dde => task_pde(s, &mut out)?,
        Task::Switching => task_switching(s, &mut out)?,
        Task::StabilityMap => task_stability_map(s, &mut out, seed)?,
        Task::DoubleHopf => task_double_hopf(s, &mut out)?,
        Task::NormalForm => task_normal_form(s, &mut out)?,
    }
    Ok(out)
}

fn primary(q: &ModelParams) -> Result<Equilibrium> {
    equilibria::primary_equilibrium(q).ok_or_else(|| Error::Domain(format!("no interior equilibrium at p = {}", q.p)))
}

fn task_equilibria(s: &Scenario, out: &mut Outcome) -> Result<()> {
    #[derive(Serialize)]
    struct Report {
        boundary: Vec<Equilibrium>,
        interior: Vec<Equilibrium>,
        thresholds: Option<equilibria::BifurcationThresholds>,
    }
    let q = s.model();
    let interior = equilibria::interior_equilibria(&q);
    if let Some(e) = equilibria::primary_equilibrium(&q) {
        out.metric("u_star", e.u);
        out.metric("v_star", e.v);
        out.label("classification", format!("{:?}", e.classification));
    }
    if let Some(e) = equilibria::saddle_equilibrium(&q) {
        out.metric("u_saddle", e.u);
        out.metric("v_saddle", e.v);
    }
    out.metric("interior_count", interior.len() as f64);
    let thresholds = equilibria::thresholds(&q).ok();
    if let Some(t) = &thresholds {
        out.metric("p_h", t.p_h);
        out.metric("lyapunov_a", t.lyapunov_a);
        out.metric("lyapunov_negative", f64::from(u8::from(t.lyapunov_a < 0.0)));
        if let Some(p) = t.p_sn {
            out.metric("p_sn", p);
        }
    }
    out.json("equilibria.json", &Report { boundary: equilibria::boundary_equilibria(&q), interior, thresholds })
}

fn opt_cell(x: Option<f64>) -> crate::output::Cell {
    x.map_or(crate::output::Cell::Text(String::new()), Into::into)
}

fn task_sweep(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let q = s.model();
    let c = &s.cfg;
    let (lo, hi, k) = (c.f64_or("p_min", 1.0)?, c.f64_or("p_max", 1.0 / q.a)?, c.usize_or("p_steps", 41)?.max(2));
    let mut ps: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
    let p_h = equilibria::hopf_point(&q).ok().map(|h| h.p_h);
    if let Some(ph) = p_h {
        ps.push(ph);
        out.metric("hopf_p", ph);
    }
    ps.sort_by(f64::total_cmp);
    let rows = phase::bifurcation_sweep(&q, &ps);
    let mut t = Table::new(&["p", "event", "u_star", "v_star", "classification", "cycle_v_min", "cycle_v_max", "period"]);
    for r in &rows {
        let event = if Some(r.p) == p_h { "hopf" } else { "" };
        let class = r.classification.map(|c| format!("{c:?}")).unwrap_or_default();
        t.push(row![
            r.p,
            event,
            opt_cell(r.u_star),
            opt_cell(r.v_star),
            class,
            opt_cell(r.cycle_v_min),
            opt_cell(r.cycle_v_max),
            opt_cell(r.period)
        ]);
    }
    out.file("sweep.csv", t.to_csv()?);
    let mut plot = Plot::new(&format!("{}: equilibrium and cycle range", s.name), "p", "v");
    plot.line(rows.iter().filter_map(|r| Some((r.p, r.v_star?))).collect(), palette(0), Some("v*"));
    plot.line(rows.iter().filter_map(|r| Some((r.p, r.cycle_v_max?))).collect(), palette(1), Some("cycle max"));
    plot.line(rows.iter().filter_map(|r| Some((r.p, r.cycle_v_min?))).collect(), palette(1), None);
    out.file("sweep.svg", plot.render());
    Ok(())
}

fn task_phase(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let q = s.model();
    let c = &s.cfg;
    let g = c.usize_or("grid", 10)?.max(1);
    let (u_max, v_max) = (c.f64_or("u_max", 1.0)?, c.f64_or("v_max", 0.5)?);
    let horizon = c.f64_or("horizon", 5000.0)?;
    let inits: Vec<State> = (0..g * g)
        .map(|k| State::new((k % g) as f64 + 0.5, (k / g) as f64 + 0.5))
        .map(|s| State::new(s.u / g as f64 * u_max, s.v / g as f64 * v_max))
        .collect();
    let outcomes = crate::par_map(&inits, |&x| phase::basin_classify_with(x, &q, horizon));
    let mut t = Table::new(&["u0", "v0", "outcome"]);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (x, o) in inits.iter().zip(&outcomes) {
        let name = format!("{o:?}");
        *counts.entry(name.clone()).or_default() += 1;
        t.push(row![x.u, x.v, name]);
    }
    for (k, n) in &counts {
        out.metric(format!("count_{k}"), *n as f64);
    }
    out.label("outcomes", counts.keys().cloned().collect::<Vec<_>>().join(","));
    out.file("basins.csv", t.to_csv()?);
    let mut plot = Plot::new(&format!("{}: basins", s.name), "u", "v").ranges((0.0, u_max), (0.0, v_max));
    let nc = nullclines(&q);
    let us: Vec<f64> = (0..=400).map(|i| i as f64 / 400.0 * u_max).collect();
    plot.line(us.iter().filter_map(|&u| Some((u, nc.f(u).ok()?))).collect(), "#000", Some("prey nullcline"));
    plot.line(us.iter().filter_map(|&u| Some((u, nc.g(u).ok()?))).collect(), "#777", Some("predator nullcline"));
    for (i, kind) in counts.keys().enumerate() {
        let pts = inits.iter().zip(&outcomes).filter(|(_, o)| &format!("{o:?}") == kind).map(|(x, _)| (x.u, x.v)).collect();
        plot.points(pts, palette(i), Some(kind));
    }
    out.file("basins.svg", plot.render());
    Ok(())
}

fn task_turing(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let q = s.model();
    let d = s.diff();
    let c = &s.cfg;
    let eq = primary(&q)?;
    let range = (c.f64_or("d1_min", 0.1)?, c.f64_or("d1_max", 10.0)?);
    let n_max = c.usize_or("n_max", turing::N_MAX)?;
    let curve = turing::turing_curve(&q, &eq, d.l, range, n_max, c.usize_or("samples", 400)?)?;
    let mut t = Table::new(&["n", "d1", "d2"]);
    for seg in &curve.segments {
        for &(x, y) in &seg.points {
            t.push(row![seg.n, x, y]);
        }
    }
    out.file("turing_curve.csv", t.to_csv()?);
    out.label("segment_modes", curve.segments.iter().map(|g| g.n.to_string()).collect::<Vec<_>>().join(","));
    for (i, j) in curve.junctions.iter().enumerate() {
        out.metric(format!("junction_{}", i + 1), *j);
    }
    let mut plot = Plot::new(&format!("{}: critical d2", s.name), "d1", "d2");
    for (i, seg) in curve.segments.iter().enumerate() {
        plot.line(seg.points.clone(), palette(i), Some(&format!("n = {}", seg.n)));
    }
    plot.points(vec![(d.d1, d.d2)], "#000", Some("(d1, d2)"));
    out.file("turing_curve.svg", plot.render());
    out.metric("stable_under_modes", f64::from(u8::from(turing::stable_under_modes(&q, &d, &eq, n_max))));
    if let (Some(d1), Some(n)) = (c.f64_opt("th_d1")?, c.get("th_n")) {
        let n: usize = n.parse().map_err(|_| Error::Config("th_n".into()))?;
        let th = turing::turing_hopf_point(&q, d.l, d1, n)?;
        out.metric("th_p", th.p);
        out.metric("th_d2", th.d2);
        out.json("turing_hopf.json", &th)?;
    }
    out.json("turing_curve.json", &curve)
}

fn task_pde(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let q = s.model();
    let c = &s.cfg;
    // the delayed ODE runs on a flat field without diffusion
    let d = match s.task {
        Task::Dde => DiffusionParams::new(0.0, 0.0, c.f64_or("l", 1.0)?)?,
        _ => s.diff(),
    };
    let eq = equilibria::primary_equilibrium(&q);
    let (us, vs) = eq.map_or((0.5, 0.1), |e| (e.u, e.v));
    let points = c.usize_or("points", if s.task == Task::Dde { pde::MIN_POINTS } else { pde::DEFAULT_POINTS })?;
    let pu = c.get("init_u").map(CosineProfile::parse).transpose()?.unwrap_or(CosineProfile::constant(us + 0.01));
    let pv = c.get("init_v").map(CosineProfile::parse).transpose()?.unwrap_or(CosineProfile::constant(vs));
    let init = Field::from_profiles(points, d.l, &pu, &pv);
    let t_end = c.f64_or("t_end", 1000.0)?;
    let opts =
        SimOptions { dt: c.f64_opt("dt")?, stepper: stepper(c.str_or("stepper", "auto"))?, sample_every: c.f64_or("sample_every", 0.5)? };
    let traj = match &s.delays {
        Some(tau) => pde::simulate_rd_delays(&q, &d, tau, &init, t_end, &opts)?,
        None => pde::simulate_rd(&q, &d, &init, t_end, &opts)?,
    };
    let tail_span = c.f64_or("tail", (0.2 * t_end).min(2000.0))?;
    let t_last = traj.last().map_or(0.0, |f| f.t);
    let start = traj.partition_point(|f| f.t < t_last - tail_span);
    let dg = pde::diagnose(&traj[start..]);
    out.label("kind", format!("{:?}", dg.kind));
    out.metric("dominant_mode", dg.dominant_mode as f64);
    out.metric("spatial_range", dg.spatial_range);
    out.metric("time_variation", dg.time_variation);
    if let Some(p) = dg.period {
        out.metric("period", p);
    }
    if let Some(e) = eq {
        out.metric("final_dist", traj.last().map_or(f64::NAN, |f| f.sup_dist(e.u, e.v)));
    }
    out.json("diagnosis.json", &dg)?;

    let every = c.f64_or("output_every", t_end / 200.0)?;
    let mut kept: Vec<&Field> = Vec::new();
    let mut next = f64::NEG_INFINITY;
    for f in &traj {
        if f.t >= next - 1e-9 {
            kept.push(f);
            next = f.t + every;
        }
    }
    if s.task == Task::Dde {
        let mut t = Table::new(&["t", "u", "v"]);
        let series: Vec<_> = traj.iter().map(|f| (f.t, f.u[0], f.v[0])).collect();
        series.iter().for_each(|&(a, b, c)| t.push(row![a, b, c]));
        out.file("timeseries.csv", t.to_csv()?);
        let mut plot = Plot::new(&format!("{}: homogeneous delayed run", s.name), "t", "u, v");
        plot.line(series.iter().map(|x| (x.0, x.1)).collect(), palette(0), Some("u"));
        plot.line(series.iter().map(|x| (x.0, x.2)).collect(), palette(1), Some("v"));
        out.file("timeseries.svg", plot.render());
        return Ok(());
    }
    let mut t = Table::new(&["t", "x", "u", "v"]);
    for f in &kept {
        for j in 0..f.x.len() {
            t.push(row![f.t, f.x[j], f.u[j], f.v[j]]);
        }
    }
    out.file("spacetime.csv", t.to_csv()?);
    let x = &init.x;
    let h = init.spacing();
    let x_edges: Vec<f64> = (0..=x.len()).map(|j| (j as f64 - 0.5) * h).collect();
    let mut t_edges: Vec<f64> = kept.iter().map(|f| f.t).collect();
    t_edges.push(t_edges.last().copied().unwrap_or(0.0) + every);
    let mut plot = Plot::new(&format!("{}: u(x, t)", s.name), "x", "t");
    plot.heat(x_edges, t_edges, kept.iter().map(|f| f.u.clone()).collect());
    out.file("spacetime.svg", plot.render());
    Ok(())
}

fn family(s: &Scenario) -> Result<Vec<delay::CharQuasiPolynomial>> {
    let q = s.model();
    let eq = primary(&q)?;
    delay::char_quasi_family(&q, &s.diff(), &eq, s.cfg.usize_or("n_max", 8)?)
}

fn task_switching(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let fam = family(s)?;
    let window = s.window()?;
    let sets: Vec<CrossingSet> = fam.iter().map(delay::crossing_set).collect();
    for set in &sets {
        out.metric(format!("intervals_{}", set.n), set.intervals.len() as f64);
        for (k, (a, b)) in set.intervals.iter().enumerate() {
            out.metric(format!("omega_{}_{}_lo", set.n, k + 1), *a);
            out.metric(format!("omega_{}_{}_hi", set.n, k + 1), *b);
        }
    }
    out.json("crossing_sets.json", &sets)?;
    let curves: Vec<_> = fam.iter().flat_map(|c| delay::switching_curves(c, window)).collect();
    out.metric("curves", curves.len() as f64);
    let mut t = Table::new(&["n", "j", "branch", "j1", "j2", "omega", "tau1", "tau2"]);
    let mut plot = Plot::new(&format!("{}: stability switching curves", s.name), "tau1", "tau2").ranges((0.0, window.0), (0.0, window.1));
    for cv in &curves {
        let id = &cv.id;
        for p in &cv.points {
            t.push(row![id.n, id.j, format!("{:?}", id.branch), id.j1, id.j2, p.omega, p.tau1, p.tau2]);
        }
        plot.line(cv.points.iter().map(|p| (p.tau1, p.tau2)).collect(), palette(id.n), None);
    }
    for n in 0..fam.len() {
        if curves.iter().any(|c| c.id.n == n) {
            plot.line(Vec::new(), palette(n), Some(&format!("n = {n}")));
        }
    }
    out.file("switching_curves.csv", t.to_csv()?);
    out.file("switching_curves.svg", plot.render());
    Ok(())
}

fn task_stability_map(s: &Scenario, out: &mut Outcome, seed: u64) -> Result<()> {
    #[derive(Serialize)]
    struct Spot {
        tau1: f64,
        tau2: f64,
        path_count: i64,
        contour_count: usize,
    }
    let fam = family(s)?;
    let window = s.window()?;
    let c = &s.cfg;
    let grid = (c.usize_or("grid_tau1", 50)?, c.usize_or("grid_tau2", 100)?);
    let map = delay::stability_map(&fam, window, grid)?;
    let mut t = Table::new(&["tau1", "tau2", "count"]);
    for (i, &a) in map.tau1.iter().enumerate() {
        for (k, &b) in map.tau2.iter().enumerate() {
            t.push(row![a, b, map.counts[i][k]]);
        }
    }
    out.file("stability_map.csv", t.to_csv()?);
    let edges = |v: &[f64], hi: f64| -> Vec<f64> { (0..=v.len()).map(|i| hi * i as f64 / v.len() as f64).collect() };
    let values: Vec<Vec<f64>> =
        (0..map.tau2.len()).map(|k| map.tau1.iter().enumerate().map(|(i, _)| map.counts[i][k] as f64).collect()).collect();
    let mut plot = Plot::new(&format!("{}: roots with positive real part", s.name), "tau1", "tau2");
    plot.heat(edges(&map.tau1, window.0), edges(&map.tau2, window.1), values);
    out.file("stability_map.svg", plot.render());

    let n_spots = c.usize_or("spot_checks", 5)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut spots = Vec::new();
    for _ in 0..n_spots {
        let (i, k) = (rng.gen_range(0..map.tau1.len()), rng.gen_range(0..map.tau2.len()));
        let (a, b) = (map.tau1[i], map.tau2[k]);
        spots.push(Spot { tau1: a, tau2: b, path_count: map.counts[i][k], contour_count: delay::count_rhp_family(&fam, a, b)? });
    }
    let agree = spots.iter().filter(|s| s.path_count == s.contour_count as i64).count();
    out.metric("spot_agree", agree as f64);
    out.metric("spot_total", n_spots as f64);
    out.metric("spot_all_agree", f64::from(u8::from(agree == n_spots)));
    if let Some(v) = map.count_at(map.tau1[0], map.tau2[0]) {
        out.metric("count_origin_cell", v as f64);
    }
    out.json("spot_checks.json", &spots)
}

fn task_double_hopf(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let fam = family(s)?;
    let mut pts = delay::double_hopf_points(&fam, s.window()?);
    pts.sort_by(|a, b| a.tau2.total_cmp(&b.tau2));
    out.metric("points", pts.len() as f64);
    if let Some(h) = pts.first() {
        out.metric("hh_tau1", h.tau1);
        out.metric("hh_tau2", h.tau2);
        out.metric("hh_omega1", h.omega1);
        out.metric("hh_omega2", h.omega2);
        out.metric("hh_residual", h.residual);
    }
    out.json("double_hopf.json", &pts)
}

fn task_normal_form(s: &Scenario, out: &mut Outcome) -> Result<()> {
    let nf = s.coeffs()?;
    let un = Unfolding::new(&nf)?;
    for (k, v) in [("b", un.b), ("c", un.c), ("d", un.d), ("d_minus_bc", un.d - un.b * un.c), ("eps1", un.eps1), ("eps2", un.eps2)] {
        out.metric(k, v);
    }
    out.json("unfolding.json", &un)?;
    let c = &s.cfg;
    let window = SigmaWindow::symmetric(c.f64_or("sigma1_max", 1.0)?, c.f64_or("sigma2_max", 1.0)?);
    let set = normal_form::bifurcation_set(&un, window)?;
    out.metric("regions", set.regions.len() as f64);
    for r in &set.regions {
        out.metric(format!("stable_{}", r.label), r.stable_count() as f64);
    }
    out.json("bifurcation_set.json", &set)?;
    let mut plot = Plot::new(&format!("{}: bifurcation set", s.name), "sigma1", "sigma2").ranges(window.sigma1, window.sigma2);
    for (i, r) in set.regions.iter().enumerate() {
        let stable: Vec<String> = r.inventory.iter().filter(|x| x.stable).map(|x| format!("{:?}", x.kind)).collect();
        plot.polygon(r.polygon.clone(), palette(i), Some(&format!("{}: {}", r.label, stable.join("+"))));
    }
    out.file("bifurcation_set.svg", plot.render());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExitStatus {
    Success = 0,
    DomainError = 1,
    ConfigError = 2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub status: ExitStatus,
    pub scenario: Option<String>,
    pub directory: Option<PathBuf>,
    pub manifest: Option<Manifest>,
    pub error: Option<String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// Executes `s` and writes its artifacts and manifest to `out_root/<name>`.
/// Files are staged in a sibling directory and moved into place only on success.
pub fn run_scenario(s: &Scenario, out_root: &Path, seed: u64) -> Result<(PathBuf, Manifest)> {
    let outcome = execute(s, seed)?;
    let checks = check(&outcome, &s.expectations);
    fs::create_dir_all(out_root).map_err(io_err)?;
    let target = out_root.join(&s.name);
    let staging = out_root.join(format!(".{}.staging", s.name));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err)?;
    }
    fs::create_dir_all(&staging).map_err(io_err)?;
    let write = || -> Result<Manifest> {
        let mut files = Vec::new();
        for (name, bytes) in &outcome.files {
            fs::write(staging.join(name), bytes).map_err(io_err)?;
            files.push(ManifestEntry { file: name.clone(), bytes: bytes.len(), sha256: hex(&Sha256::digest(bytes)) });
        }
        let manifest = Manifest {
            scenario: s.name.clone(),
            task: s.task,
            seed,
            metrics: outcome.metrics.clone(),
            labels: outcome.labels.clone(),
            checks,
            files,
        };
        fs::write(staging.join("manifest.json"), to_json(&manifest)?).map_err(io_err)?;
        Ok(manifest)
    };
    let manifest = match write() {
        Ok(m) => m,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };
    if target.exists() {
        fs::remove_dir_all(&target).map_err(io_err)?;
    }
    fs::rename(&staging, &target).map_err(io_err)?;
    Ok((target, manifest))
}

/// Loads, validates and runs one scenario file. `out` overrides the file's `output` key.
pub fn run(path: &Path, out: Option<&Path>, seed: u64) -> RunReport {
    let s = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => {
            return RunReport {
                status: ExitStatus::ConfigError,
                scenario: None,
                directory: None,
                manifest: None,
                error: Some(e.to_string()),
            }
        }
    };
    let root = out.map(Path::to_path_buf).or_else(|| s.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    match run_scenario(&s, &root, seed) {
        Ok((dir, m)) => {
            RunReport { status: ExitStatus::Success, scenario: Some(s.name), directory: Some(dir), manifest: Some(m), error: None }
        }
        Err(e) => {
            let status = if matches!(e, Error::Config(_)) { ExitStatus::ConfigError } else { ExitStatus::DomainError };
            RunReport { status, scenario: Some(s.name), directory: None, manifest: None, error: Some(e.to_string()) }
        }
    }
}

/// Bundled reproduction scenarios as (file name, contents).
pub const BUNDLED: &[(&str, &str)] = &[
    ("hopf-c025.cfg", include_str!("../scenarios/hopf-c025.cfg")),
    ("hopf-c3.cfg", include_str!("../scenarios/hopf-c3.cfg")),
    ("hopf-c5.cfg", include_str!("../scenarios/hopf-c5.cfg")),
    ("hopf-c8.cfg", include_str!("../scenarios/hopf-c8.cfg")),
    ("hopf-sweep-c025.cfg", include_str!("../scenarios/hopf-sweep-c025.cfg")),
    ("heteroclinic-c025.cfg", include_str!("../scenarios/heteroclinic-c025.cfg")),
    ("heteroclinic-c3.cfg", include_str!("../scenarios/heteroclinic-c3.cfg")),
    ("heteroclinic-c5.cfg", include_str!("../scenarios/heteroclinic-c5.cfg")),
    ("homoclinic-c8.cfg", include_str!("../scenarios/homoclinic-c8.cfg")),
    ("equilibrium-c025-p14.cfg", include_str!("../scenarios/equilibrium-c025-p14.cfg")),
    ("equilibrium-c8-p08.cfg", include_str!("../scenarios/equilibrium-c8-p08.cfg")),
    ("equilibrium-c025-p12.cfg", include_str!("../scenarios/equilibrium-c025-p12.cfg")),
    ("phase-overexploitation.cfg", include_str!("../scenarios/phase-overexploitation.cfg")),
    ("turing-hopf-c025.cfg", include_str!("../scenarios/turing-hopf-c025.cfg")),
    ("turing-hopf-c8.cfg", include_str!("../scenarios/turing-hopf-c8.cfg")),
    ("turing-pattern-c025.cfg", include_str!("../scenarios/turing-pattern-c025.cfg")),
    ("crossing-sets-c025.cfg", include_str!("../scenarios/crossing-sets-c025.cfg")),
    ("stability-map.cfg", include_str!("../scenarios/stability-map.cfg")),
    ("double-hopf.cfg", include_str!("../scenarios/double-hopf.cfg")),
    ("normal-form-hh.cfg", include_str!("../scenarios/normal-form-hh.cfg")),
    ("delayed-region-d1.cfg", include_str!("../scenarios/delayed-region-d1.cfg")),
    ("delayed-across-lowest.cfg", include_str!("../scenarios/delayed-across-lowest.cfg")),
    ("dde-hh-slow.cfg", include_str!("../scenarios/dde-hh-slow.cfg")),
];

pub fn bundled_scenarios() -> Result<Vec<Scenario>> {
    BUNDLED
        .iter()
        .map(|(f, text)| {
            Scenario::parse(text, Path::new(".")).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{f}: {m}")),
                e => Error::Config(format!("{f}: {e}")),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub task: Task,
    pub pass: bool,
    pub checks_passed: usize,
    pub checks_total: usize,
    pub seconds: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<28} {:<14} {:>6} {:>8} {:>9}\n", "scenario", "task", "result", "checks", "seconds");
        for r in &self.rows {
            let task = serde_json::to_value(r.task).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            s += &format!(
                "{:<28} {:<14} {:>6} {:>8} {:>9.2}\n",
                r.scenario,
                task,
                if r.pass { "PASS" } else { "FAIL" },
                format!("{}/{}", r.checks_passed, r.checks_total),
                r.seconds
            );
            for f in &r.failures {
                s += &format!("    {f}\n");
            }
        }
        s += &format!("{} of {} scenarios passed\n", self.rows.iter().filter(|r| r.pass).count(), self.rows.len());
        s
    }
}

fn summarize(s: &Scenario, out_root: &Path, seed: u64) -> SummaryRow {
    let start = Instant::now();
    let res = run_scenario(s, out_root, seed);
    let seconds = start.elapsed().as_secs_f64();
    match res {
        Ok((_, m)) => {
            let failures = m
                .checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| format!("{}: expected {:?}, got {}", c.metric, c.expected, c.actual.as_deref().unwrap_or("nothing")))
                .collect();
            SummaryRow {
                scenario: s.name.clone(),
                task: s.task,
                pass: m.all_pass(),
                checks_passed: m.checks.iter().filter(|c| c.pass).count(),
                checks_total: m.checks.len(),
                seconds,
                failures,
            }
        }
        Err(e) => SummaryRow {
            scenario: s.name.clone(),
            task: s.task,
            pass: false,
            checks_passed: 0,
            checks_total: s.expectations.len(),
            seconds,
            failures: vec![e.to_string()],
        },
    }
}

/// Runs every bundled scenario whose name contains `filter`, on up to `workers` threads.
pub fn reproduce_all(filter: Option<&str>, workers: usize, out_root: &Path, seed: u64) -> Result<Summary> {
    let scenarios: Vec<Scenario> = bundled_scenarios()?.into_iter().filter(|s| filter.is_none_or(|f| s.name.contains(f))).collect();
    if scenarios.is_empty() {
        return Err(Error::Config(format!("no bundled scenario matches `{}`", filter.unwrap_or(""))));
    }
    let rows = run_pool(&scenarios, workers.max(1), |s| summarize(s, out_root, seed));
    Ok(Summary { rows })
}

#[cfg(feature = "parallel")]
fn run_pool<F: Fn(&Scenario) -> SummaryRow + Sync + Send>(items: &[Scenario], workers: usize, f: F) -> Vec<SummaryRow> {
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_pool<F: Fn(&Scenario) -> SummaryRow>(items: &[Scenario], _workers: usize, f: F) -> Vec<SummaryRow> {
    items.iter().map(f).collect()
}
