//! One PASS/FAIL line per acceptance criterion. Criteria listed in KNOWN_RED
//! are expected to fail; the test fails if any other criterion fails or if a
//! known-red criterion starts passing.

use std::collections::BTreeSet;

use num_complex::Complex64 as C;
use predprey_core::config::CosineProfile;
use predprey_core::delay::*;
use predprey_core::equilibria::{first_lyapunov, hopf_point, interior_equilibria, primary_equilibrium};
use predprey_core::normal_form::{NormalFormCoeffs, Unfolding};
use predprey_core::ode::Dopri5;
use predprey_core::pde::*;
use predprey_core::phase::{basin_classify, heteroclinic_threshold, homoclinic_threshold};
use predprey_core::turing::{d2_critical, stable_under_modes, turing_hopf_point, N_MAX};
use predprey_core::{model, DelayParams, DiffusionParams, ModelParams, Result, State};
use rand::{Rng, SeedableRng};

const KNOWN_RED: [(usize, &str); 2] = [
    (8, "b and d - bc computed from the four-decimal B list miss by 1.0e-3 and 1.5e-2"),
    (12, "cos 2x start at c = 0.25 loses its mode-4 component; cos 3x and cos 4x starts at c = 8 reach the same mode-6 oscillation"),
];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn q(c: f64, p: f64) -> ModelParams {
    ModelParams::reference(c, p)
}

fn near(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

fn c1() -> Result<Verdict> {
    let mut ok = true;
    let mut got = Vec::new();
    for (c, want) in [(0.25, 1.5432), (3.0, 1.1024), (5.0, 0.9608), (8.0, 0.8306)] {
        let p = hopf_point(&q(c, 1.0))?.p_h;
        ok &= near(p, want, 1e-3);
        got.push(format!("{p:.5}"));
    }
    verdict(ok, format!("p_H = {}", got.join(", ")))
}

fn c2() -> Result<Verdict> {
    let mut ok = true;
    let mut got = Vec::new();
    for c in [0.25, 3.0, 5.0, 8.0] {
        let a = first_lyapunov(&q(c, hopf_point(&q(c, 1.0))?.p_h))?;
        ok &= a < 0.0;
        got.push(format!("{a:.5}"));
    }
    verdict(ok, format!("a(p_H) = {}", got.join(", ")))
}

fn c3() -> Result<Verdict> {
    let mut ok = true;
    let mut got = Vec::new();
    for (c, want) in [(0.25, 1.6491), (3.0, 1.2068), (5.0, 1.05665)] {
        let p = heteroclinic_threshold(&q(c, 1.0))?.p;
        ok &= near(p, want, 5e-3);
        got.push(format!("{p:.5}"));
    }
    let hom = homoclinic_threshold(&q(8.0, 1.0))?.p;
    ok &= near(hom, 0.8919, 5e-3);
    verdict(ok, format!("p# = {}, p_hom = {hom:.5}", got.join(", ")))
}

fn c4() -> Result<Verdict> {
    let mut ok = true;
    let mut got = Vec::new();
    for (c, p, u, v) in [(0.25, 1.4, 0.6882, 0.1516), (8.0, 0.8, 0.7392, 0.0864), (0.25, 1.2, 0.80945, 0.11797)] {
        let e = interior_equilibria(&q(c, p))[0];
        ok &= near(e.u, u, 1e-3) && near(e.v, v, 1e-3);
        got.push(format!("({:.5}, {:.5})", e.u, e.v));
    }
    verdict(ok, format!("E* = {}", got.join(", ")))
}

fn c5() -> Result<Verdict> {
    let a = turing_hopf_point(&q(0.25, 1.0), 2.0, 1.496, 5)?;
    let b = turing_hopf_point(&q(8.0, 1.0), 2.0, 0.13, 5)?;
    let ok = near(a.p, 1.5432, 1e-3) && near(a.d2, 0.0009, 1e-4) && near(b.p, 0.8306, 1e-3) && near(b.d2, 0.009, 1e-3);
    verdict(ok, format!("TH = ({:.5}, {:.6}), ({:.5}, {:.6})", a.p, a.d2, b.p, b.d2))
}

fn family() -> Result<Vec<CharQuasiPolynomial>> {
    let p = q(0.25, 1.2);
    let e = primary_equilibrium(&p).expect("interior equilibrium");
    char_quasi_family(&p, &DiffusionParams::new(0.3, 0.4, 2.0)?, &e, 8)
}

fn c6() -> Result<Verdict> {
    let fam = family()?;
    let want: [&[(f64, f64)]; 4] = [&[(0.0636, 0.1184), (0.3781, 0.5602)], &[(0.4149, 0.5747)], &[(0.4304, 0.5572)], &[(0.0, 0.2348)]];
    let mut ok = true;
    let mut got = Vec::new();
    for (n, w) in want.iter().enumerate() {
        let s = crossing_set(&fam[n]);
        ok &= s.intervals.len() == w.len();
        ok &= s.intervals.iter().zip(w.iter()).all(|(a, b)| near(a.0, b.0, 1e-3) && near(a.1, b.1, 1e-3));
        let iv: Vec<String> = s.intervals.iter().map(|(a, b)| format!("[{a:.4}, {b:.4}]")).collect();
        got.push(format!("n{n} {}", iv.join(" u ")));
    }
    ok &= fam[4..].iter().all(|c| crossing_set(c).is_empty());
    verdict(ok, got.join("; "))
}

fn c7() -> Result<Verdict> {
    let fam = family()?;
    let pts = double_hopf_points(&fam[..4], (5.0, 20.0));
    let hh = pts.iter().find(|h| near(h.tau1, 2.21407, 1e-2) && near(h.tau2, 15.0019, 1e-2));
    Ok(match hh {
        Some(h) => {
            let (w1, w2) = (h.omega1.min(h.omega2), h.omega1.max(h.omega2));
            Verdict {
                pass: near(w1, 0.1078, 1e-3) && near(w2, 0.4920, 1e-3),
                detail: format!("HH = ({:.5}, {:.5}), omega = {w1:.5}, {w2:.5}", h.tau1, h.tau2),
            }
        }
        None => Verdict { pass: false, detail: format!("no double-Hopf point near (2.214, 15.002) among {}", pts.len()) },
    })
}

fn c8() -> Result<Verdict> {
    let un = Unfolding::new(&NormalFormCoeffs::reference_hh())?;
    let dbc = un.d - un.b * un.c;
    let ok = near(un.b, 6.5658, 1e-3) && near(un.c, 14.8998, 1e-3) && near(un.d, 1.0, 1e-3) && near(dbc, -96.8306, 1e-2);
    verdict(ok, format!("b = {:.6}, c = {:.6}, d = {}, d - bc = {dbc:.5}", un.b, un.c, un.d))
}

fn c9() -> Result<Verdict> {
    use predprey_core::phase::BasinOutcome::*;
    let regimes = [
        (0.25, 4.5, vec![ToE0]),
        (0.25, 1.7, vec![ToE0]),
        (0.25, 1.6, vec![ToE0, ToCycle]),
        (0.25, 1.2, vec![ToE0, ToEstar]),
        (0.25, 0.9, vec![ToE0, ToE1]),
        (3.0, 4.5, vec![ToE0]),
        (3.0, 0.8, vec![ToE0, ToE1]),
        (3.0, 0.96, vec![ToE0, ToE1, ToEstar]),
        (3.0, 1.05, vec![ToE0, ToEstar]),
        (3.0, 1.15, vec![ToE0, ToCycle]),
        (3.0, 1.3, vec![ToE0]),
        (5.0, 0.93, vec![ToE0, ToE1, ToEstar]),
        (5.0, 0.965, vec![ToE0, ToE1, ToCycle]),
        (5.0, 1.03, vec![ToE0, ToCycle]),
        (5.0, 1.1, vec![ToE0]),
        (8.0, 0.8, vec![ToE0, ToE1, ToEstar]),
        (8.0, 0.834, vec![ToE0, ToE1, ToCycle]),
        (8.0, 0.88, vec![ToE0, ToE1, ToCycle]),
        (8.0, 1.1, vec![ToE0]),
    ];
    let mut bad = Vec::new();
    for (c, p, want) in &regimes {
        let params = q(*c, *p);
        let seen: BTreeSet<String> = (0..100)
            .map(|k| State::new(((k % 10) as f64 + 0.5) / 10.0, ((k / 10) as f64 + 0.5) / 10.0 * 0.6))
            .map(|s| format!("{:?}", basin_classify(s, &params)))
            .collect();
        let want: BTreeSet<String> = want.iter().map(|o| format!("{o:?}")).collect();
        if seen != want {
            bad.push(format!("(c={c}, p={p}) saw {seen:?}"));
        }
    }
    let detail = if bad.is_empty() { format!("{} regimes match", regimes.len()) } else { bad.join("; ") };
    verdict(bad.is_empty(), detail)
}

fn c10() -> Result<Verdict> {
    let p = q(0.25, 1.4);
    let e = primary_equilibrium(&p).expect("interior equilibrium");
    let (mut agree, mut stable) = (0, 0);
    for i in 0..20 {
        for j in 0..20 {
            let d1 = 0.05 + 2.95 * i as f64 / 19.0;
            let d2 = 10f64.powf(-4.0 + 2.5 * j as f64 / 19.0);
            let above = (1..=N_MAX).all(|n| d2_critical(n, d1, &p, 2.0, &e).is_none_or(|t| d2 > t));
            agree += usize::from(stable_under_modes(&p, &DiffusionParams::new(d1, d2, 2.0)?, &e, N_MAX) == above);
            stable += usize::from(above);
        }
    }
    verdict(agree == 400 && stable > 20 && stable < 380, format!("{agree}/400 grid points agree, {stable} above the curve"))
}

fn profiles(k: f64) -> (CosineProfile, CosineProfile) {
    (
        CosineProfile::parse(&format!("0.6 + 0.1*cos({k}*x)")).expect("profile"),
        CosineProfile::parse(&format!("0.08 - 0.02*cos({k}*x)")).expect("profile"),
    )
}

fn opts(dt: f64, stepper: Stepper, sample_every: f64) -> SimOptions {
    SimOptions { dt: Some(dt), stepper, sample_every }
}

fn c11() -> Result<Verdict> {
    let p = q(0.25, 1.55);
    let (pu, pv) = profiles(2.0);
    let init = Field::from_profiles(40, 2.0, &pu, &pv);
    let last =
        simulate_rd(&p, &DiffusionParams::new(0.0, 0.0, 2.0)?, &init, 60.0, &opts(1e-3, Stepper::Rk4, 0.5))?.pop().expect("snapshot");
    let mut ode_err: f64 = 0.0;
    for j in 0..=40 {
        let mut ode = Dopri5::new(|_, y: &[f64; 2]| model::rhs_array(*y, &p), 0.0, [init.u[j], init.v[j]], 1e-12);
        while ode.t < 60.0 {
            ode.step(60.0)?;
        }
        ode_err = ode_err.max((ode.y[0] - last.u[j]).abs()).max((ode.y[1] - last.v[j]).abs());
    }

    let p = q(0.25, 1.2);
    let d = DiffusionParams::new(0.3, 0.4, 2.0)?;
    let (pu, pv) = profiles(1.5);
    let init = Field::from_profiles(48, 2.0, &pu, &pv);
    let a = simulate_rd(&p, &d, &init, 50.0, &opts(1e-3, Stepper::Rk4, 0.5))?;
    let b = simulate_rd_delays(&p, &d, &DelayParams::new(0.0, 0.0)?, &init, 50.0, &opts(1e-3, Stepper::Rk4, 0.5))?;
    let delay_err = a.iter().zip(&b).map(|(x, y)| x.sup_diff(y)).fold(0.0, f64::max);

    let p = q(0.25, 1.4);
    let d = DiffusionParams::new(12.0, 0.0057, 2.0)?;
    let (pu, pv) = profiles(1.0);
    let mut fields = Vec::new();
    for n in [40, 80, 160] {
        let tr = simulate_rd(&p, &d, &Field::from_profiles(n, 2.0, &pu, &pv), 20000.0, &opts(0.05, Stepper::SemiImplicit, 10.0))?;
        fields.push(tr.last().expect("snapshot").clone());
    }
    let err = |a: &Field, b: &Field| -> f64 {
        let step = (b.u.len() - 1) / (a.u.len() - 1);
        (0..a.u.len()).map(|j| (a.u[j] - b.u[j * step]).abs().max((a.v[j] - b.v[j * step]).abs())).fold(0.0, f64::max)
    };
    let ratio = err(&fields[0], &fields[1]) / err(&fields[1], &fields[2]);
    verdict(
        ode_err < 1e-6 && delay_err < 1e-8 && (3.5..=4.5).contains(&ratio),
        format!("ODE gap {ode_err:.2e}, zero-delay gap {delay_err:.2e}, refinement ratio {ratio:.3}"),
    )
}

/// Diagnosis of the final 1000 time units, and whether the spatial range there
/// is at least half of its value at mid-run.
fn run_kind(c: f64, p: f64, d1: f64, d2: f64, k: f64, t_end: f64) -> Result<(AttractorDiagnosis, bool)> {
    let (pu, pv) = profiles(k);
    let init = Field::from_profiles(DEFAULT_POINTS, 2.0, &pu, &pv);
    let tr = simulate_rd(&q(c, p), &DiffusionParams::new(d1, d2, 2.0)?, &init, t_end, &opts(0.01, Stepper::Auto, 0.5))?;
    let mid = tr.len() / 2;
    let (end, half) = (diagnose(&tr[tr.len() - 2001..]), diagnose(&tr[mid - 2000..=mid]));
    let sustained = end.spatial_range >= 0.5 * half.spatial_range;
    Ok((end, sustained))
}

fn c12() -> Result<Verdict> {
    let runs = std::thread::scope(|s| {
        let jobs = [
            (0.25, 1.4, 1.496, 0.000688, 2.0, 10000.0),
            (0.25, 1.5432, 1.496, 0.00081, 2.0, 12000.0),
            (0.25, 1.5432, 1.496, 0.00081, 3.0, 12000.0),
            (8.0, 0.8306, 0.13, 0.0065, 4.0, 12000.0),
            (8.0, 0.8306, 0.13, 0.0065, 3.0, 12000.0),
        ];
        let hs: Vec<_> = jobs.iter().map(|&(c, p, d1, d2, k, t)| s.spawn(move || run_kind(c, p, d1, d2, k, t))).collect();
        hs.into_iter().map(|h| h.join().expect("thread")).collect::<Result<Vec<_>>>()
    })?;
    let pattern = runs[0].0.kind == AttractorKind::InhomogeneousSteady && runs[0].1;
    let oscillation = |r: &(AttractorDiagnosis, bool)| r.0.kind == AttractorKind::InhomogeneousPeriodic && r.1;
    let pair = |a: &(AttractorDiagnosis, bool), b: &(AttractorDiagnosis, bool)| {
        oscillation(a) && oscillation(b) && a.0.dominant_mode != b.0.dominant_mode
    };
    let (th025, th8) = (pair(&runs[1], &runs[2]), pair(&runs[3], &runs[4]));
    let show = |r: &(AttractorDiagnosis, bool)| format!("{:?}/n{}{}", r.0.kind, r.0.dominant_mode, if r.1 { "" } else { " (fading)" });
    verdict(
        pattern && th025 && th8,
        format!(
            "pattern {}; c=0.25 cos2x {} cos3x {}; c=8 cos4x {} cos3x {}",
            show(&runs[0]),
            show(&runs[1]),
            show(&runs[2]),
            show(&runs[3]),
            show(&runs[4])
        ),
    )
}

fn c13() -> Result<Verdict> {
    let fam = family()?;
    let window = (5.0, 20.0);
    let (mut points, mut worst, mut checked, mut agreed) = (0, 0.0f64, 0, 0);
    for c in &fam[..4] {
        for sc in switching_curves(c, window) {
            for p in sc.points.iter().filter(|p| p.tau1 <= 1e3 && p.tau2 <= 1e3) {
                worst = worst.max(c.d(C::new(0.0, p.omega), p.tau1, p.tau2).norm());
                points += 1;
            }
            if c.n > 2 {
                continue;
            }
            let (a, b) = crossing_set(c).intervals[sc.id.j - 1];
            let inside: Vec<_> = sc
                .points
                .iter()
                .filter(|p| p.tau1 > 0.1 && p.tau2 > 0.1 && p.tau1 < window.0 && p.tau2 < window.1)
                .filter(|p| p.omega - a > 1e-3 * (b - a) && b - p.omega > 1e-3 * (b - a))
                .collect();
            for p in inside.iter().step_by((inside.len() / 3).max(1)) {
                let chk = crossing_direction(c, &sc.id, p.omega, 1e-3)?;
                checked += 1;
                agreed += usize::from(chk.observed == chk.predicted);
            }
        }
    }
    verdict(
        points >= 10_000 && worst < 1e-8 && checked >= 20 && agreed == checked,
        format!("max |D_n(i omega)| = {worst:.1e} over {points} points; {agreed}/{checked} crossing directions agree"),
    )
}

fn c14() -> Result<Verdict> {
    let fam = family()?;
    let map = stability_map(&fam[..4], (5.0, 20.0), (50, 80))?;
    let mut rng = rand::rngs::StdRng::seed_from_u64(20240611);
    let (mut checked, mut agreed) = (0, 0);
    for _ in 0..40 {
        let (i, k) = (rng.gen_range(0..map.tau1.len()), rng.gen_range(0..map.tau2.len()));
        if let Ok(n) = count_rhp_family(&fam, map.tau1[i], map.tau2[k]) {
            checked += 1;
            agreed += usize::from(n as i64 == map.counts[i][k]);
        }
        if checked == 8 {
            break;
        }
    }
    verdict(checked >= 5 && agreed == checked, format!("{agreed}/{checked} random cells agree"))
}

fn c15() -> Result<Verdict> {
    let p = q(0.25, 1.2);
    let d = DiffusionParams::new(0.3, 0.4, 2.0)?;
    let e = primary_equilibrium(&p).expect("interior equilibrium");
    let c = char_quasi_poly(0, &p, &d, &e)?;
    let id = CurveId { n: 0, j: 1, branch: Branch::Minus, j1: 0, j2: 0 };
    let w = predprey_core::roots::bisect(|w| curve_point(&c, &id, w).map_or(f64::NAN, |x| x.tau1 - 1.0), 0.064, 0.118, 1e-12)
        .expect("lowest curve crosses tau1 = 1");
    let t2c = curve_point(&c, &id, w).expect("curve point").tau2;
    let pu = CosineProfile { constant: e.u + 0.01, terms: vec![(0.01, 1.0)] };
    let init = Field::from_profiles(40, 2.0, &pu, &CosineProfile::constant(e.v));
    let o = opts(0.01, Stepper::SemiImplicit, 0.5);
    let inside = simulate_rd_delays(&p, &d, &DelayParams::new(1.0, 0.5 * t2c)?, &init, 1500.0, &o)?;
    let dist = inside.last().expect("snapshot").sup_dist(e.u, e.v);
    let across = simulate_rd_delays(&p, &d, &DelayParams::new(1.0, 1.05 * t2c)?, &init, 6000.0, &o)?;
    let tail = &across[across.len() - 2001..];
    let dg = diagnose(tail);
    let amp = tail.iter().map(|f| f.sup_dist(e.u, e.v)).fold(0.0, f64::max);
    verdict(
        dist < 1e-8 && dg.kind == AttractorKind::HomogeneousPeriodic && amp > 1e-2,
        format!("tau2 = {:.4}: |w - E*| = {dist:.1e}; tau2 = {:.4}: {:?}, amplitude {amp:.3}", 0.5 * t2c, 1.05 * t2c, dg.kind),
    )
}

fn main() {
    let criteria: [fn() -> Result<Verdict>; 15] = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11, c12, c13, c14, c15];
    let results: Vec<Verdict> = std::thread::scope(|s| {
        let hs: Vec<_> = criteria.iter().map(|f| s.spawn(f)).collect();
        hs.into_iter()
            .map(|h| h.join().expect("criterion panicked").unwrap_or_else(|e| Verdict { pass: false, detail: format!("error: {e}") }))
            .collect()
    });
    let mut unexpected = Vec::new();
    for (i, v) in results.iter().enumerate() {
        let n = i + 1;
        let known = KNOWN_RED.iter().find(|(k, _)| *k == n);
        let mark = if v.pass { "PASS" } else { "FAIL" };
        match known {
            Some((_, why)) if !v.pass => println!("criterion {n:2}: {mark}  {}  [known red: {why}]", v.detail),
            _ => println!("criterion {n:2}: {mark}  {}", v.detail),
        }
        if v.pass == known.is_some() {
            unexpected.push(n);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("criteria with unexpected outcome: {unexpected:?}");
        std::process::exit(1);
    }
}
