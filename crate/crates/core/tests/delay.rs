use num_complex::Complex64 as C;
use predprey_core::delay::*;
use predprey_core::equilibria::{primary_equilibrium, Equilibrium};
use predprey_core::turing::mode_coefficients;
use predprey_core::{DiffusionParams, ModelParams};
use rand::{Rng, SeedableRng};

const WINDOW: (f64, f64) = (5.0, 20.0);

fn setting() -> (ModelParams, DiffusionParams, Equilibrium) {
    let q = ModelParams::reference(0.25, 1.2);
    let d = DiffusionParams::new(0.3, 0.4, 2.0).unwrap();
    let e = primary_equilibrium(&q).unwrap();
    (q, d, e)
}

fn family() -> Vec<CharQuasiPolynomial> {
    let (q, d, e) = setting();
    char_quasi_family(&q, &d, &e, 8).unwrap()
}

#[test]
fn polynomials_reduce_to_mode_linearisation() {
    let (q, d, e) = setting();
    for c in family() {
        let m = mode_coefficients(c.n, &q, &d, &e);
        assert!((c.report.sum_at_zero - m.j_n).abs() < 1e-12);
        let (t, j) = c.delay_free();
        assert!((t - m.t_n).abs() < 1e-12 && (j - m.j_n).abs() < 1e-12);
        assert_eq!(c.p3, c.b11 * c.c22);
        assert!(c.report.all_hold(), "{:?}", c.report);
        // roots at zero delay
        let disc = C::new(t * t - 4.0 * j, 0.0).sqrt();
        for z in [(t + disc) / 2.0, (t - disc) / 2.0] {
            assert!(c.d(z, 0.0, 0.0).norm() < 1e-12);
        }
    }
}

#[test]
fn preconditions_reported_when_violated() {
    let q = ModelParams::reference(0.25, 1.4);
    let e = primary_equilibrium(&q).unwrap();
    let d = DiffusionParams::new(1.496, 0.000688, 2.0).unwrap();
    let c = char_quasi_poly(0, &q, &d, &e).unwrap();
    assert!(!c.report.turing_stable && !c.report.all_hold());
    let q = ModelParams::reference(0.25, 1.6);
    let e = primary_equilibrium(&q).unwrap();
    let c = char_quasi_poly(0, &q, &DiffusionParams::new(0.3, 0.4, 2.0).unwrap(), &e).unwrap();
    assert!(!c.report.below_hopf);
}

#[test]
fn crossing_sets() {
    let fam = family();
    let expect: [&[(f64, f64)]; 4] = [&[(0.0636, 0.1184), (0.3781, 0.5602)], &[(0.4149, 0.5747)], &[(0.4304, 0.5572)], &[(0.0, 0.2348)]];
    for (n, want) in expect.iter().enumerate() {
        let s = crossing_set(&fam[n]);
        assert_eq!(s.intervals.len(), want.len(), "n={n}: {s:?}");
        for (&(a, b), &(wa, wb)) in s.intervals.iter().zip(want.iter()) {
            assert!((a - wa).abs() < 1e-3 && (b - wb).abs() < 1e-3, "n={n}: {s:?}");
            for w in [a, b] {
                if w > 0.0 {
                    assert!(fam[n].f(w).abs() < 1e-10);
                }
            }
            for i in 1..20 {
                let w = a + (b - a) * i as f64 / 20.0;
                assert!(fam[n].f(w) < 0.0);
            }
        }
        let alt = crossing_set_alt(&fam[n]);
        for (x, y) in s.intervals.iter().zip(&alt.intervals) {
            assert!((x.0 - y.0).abs() < 1e-8 && (x.1 - y.1).abs() < 1e-8);
        }
    }
    assert!(crossing_set(&fam[3]).open_at_zero);
    for c in &fam[4..] {
        assert!(crossing_set(c).is_empty());
    }
}

#[test]
fn curve_points_are_imaginary_roots() {
    let fam = family();
    let mut checked = 0;
    for c in &fam[..4] {
        for sc in switching_curves(c, WINDOW) {
            for p in &sc.points {
                assert!(p.tau1 >= 0.0 && p.tau2 >= 0.0);
                if p.tau1 > 1e3 || p.tau2 > 1e3 {
                    continue;
                }
                let z = C::new(0.0, p.omega);
                assert!(c.d(z, p.tau1, p.tau2).norm() < 1e-8, "{:?} {p:?}", sc.id);
                let h = c.harmonics(p.omega);
                let r = 2.0 * h.w1.norm() * (p.phi1 + p.omega * p.tau1).cos();
                assert!((h.lhs1 - r).abs() < 1e-8);
                checked += 1;
            }
        }
    }
    assert!(checked >= 10_000, "{checked}");
}

#[test]
fn endpoint_connectivity() {
    let fam = family();
    let s = crossing_set(&fam[0]);
    let (a, b) = s.intervals[0];
    // Minus(0,0) meets Plus(0,1) at b; Plus(0,1) meets Minus(1,1) at a
    let jb = junction(&fam[0], b, 0, 1).unwrap();
    assert_eq!((jb.delta1, jb.delta2), (0, 1));
    assert!(jb.gap < 1e-3, "{jb:?}");
    let ja = junction(&fam[0], a, 0, 1).unwrap();
    assert_eq!((ja.delta1, ja.delta2), (1, 0));
    assert!(ja.gap < 1e-3, "{ja:?}");
    for c in &fam[..3] {
        for &(a, b) in &crossing_set(c).intervals {
            for w in [a, b] {
                for j1 in -1..3 {
                    for j2 in -1..3 {
                        assert!(junction(c, w, j1, j2).unwrap().gap < 1e-3);
                    }
                }
            }
        }
    }
    let curves = switching_curves(&fam[0], (10.0, 60.0));
    let chains = stitch(&curves, 1e-8);
    assert!(chains.len() < curves.len());
    let lowest = chains.iter().find(|ch| ch.iter().any(|id| id.j == 1 && id.branch == Branch::Minus && id.j1 == 0 && id.j2 == 0)).unwrap();
    assert!(lowest.iter().any(|id| id.j == 1 && id.branch == Branch::Plus && id.j1 == 0 && id.j2 == 1));
}

#[test]
fn crossing_directions_follow_branch_rule() {
    let fam = family();
    let mut checked = 0;
    for c in &fam[..3] {
        for sc in switching_curves(c, WINDOW) {
            let inside: Vec<_> =
                sc.points.iter().filter(|p| p.tau1 < WINDOW.0 && p.tau2 < WINDOW.1 && p.tau1 > 0.1 && p.tau2 > 0.1).collect();
            for p in inside.iter().step_by((inside.len() / 3).max(1)) {
                let (a, b) = crossing_set(c).intervals[sc.id.j - 1];
                if p.omega - a < 1e-3 * (b - a) || b - p.omega < 1e-3 * (b - a) {
                    continue;
                }
                let chk = crossing_direction(c, &sc.id, p.omega, 1e-3).unwrap();
                assert_eq!(chk.observed, chk.predicted, "{:?} at {}", sc.id, p.omega);
                assert_eq!(chk.delta > 0.0, sc.id.branch == Branch::Plus);
                checked += 1;
            }
        }
    }
    assert!(checked >= 20, "{checked}");
}

#[test]
fn lowest_curve_destabilises() {
    let fam = family();
    let id = CurveId { n: 0, j: 1, branch: Branch::Minus, j1: 0, j2: 0 };
    let p = curve_point(&fam[0], &id, 0.1).unwrap();
    // moving up in tau2 across the curve
    let z = C::new(0.0, p.omega);
    let below = refine_root(&fam[0], z, p.tau1, p.tau2 - 1e-3).unwrap();
    let above = refine_root(&fam[0], z, p.tau1, p.tau2 + 1e-3).unwrap();
    assert!(below.re < 0.0 && above.re > 0.0, "{below} {above}");
}

#[test]
fn delay_free_has_no_unstable_roots() {
    for c in family() {
        assert_eq!(count_rhp_roots(&c, 0.0, 0.0).unwrap(), 0);
    }
}

#[test]
fn stability_map_matches_argument_principle() {
    let fam = family();
    let map = stability_map(&fam[..4], WINDOW, (50, 80)).unwrap();
    assert_eq!(map.count_at(0.5, 0.5), Some(0));
    assert_eq!(map.count_at(1.0, 10.0), Some(0));
    // just above the lowest curve at tau1 = 1
    let id = CurveId { n: 0, j: 1, branch: Branch::Minus, j1: 0, j2: 0 };
    let c = &fam[0];
    let w = predprey_core::roots::bisect(|w| curve_point(c, &id, w).unwrap().tau1 - 1.0, 0.064, 0.118, 1e-12).unwrap();
    let t2 = curve_point(c, &id, w).unwrap().tau2;
    assert_eq!(count_rhp_family(&fam, 1.0, t2 + 0.3).unwrap(), 2);
    assert_eq!(count_rhp_family(&fam, 1.0, t2 - 0.3).unwrap(), 0);

    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let mut agreed = 0;
    for _ in 0..40 {
        let i = rng.gen_range(0..map.tau1.len());
        let k = rng.gen_range(0..map.tau2.len());
        let (t1, t2) = (map.tau1[i], map.tau2[k]);
        if let Ok(n) = count_rhp_family(&fam, t1, t2) {
            assert_eq!(n as i64, map.counts[i][k], "cell ({t1}, {t2})");
            agreed += 1;
        }
        if agreed >= 8 {
            break;
        }
    }
    assert!(agreed >= 5);
}

#[test]
fn double_hopf_point() {
    let fam = family();
    let pts = double_hopf_points(&fam[..4], WINDOW);
    let hh = pts.iter().find(|h| (h.tau1 - 2.21407).abs() < 1e-2 && (h.tau2 - 15.0019).abs() < 1e-2).expect("HH point");
    let (w1, w2) = (hh.omega1.min(hh.omega2), hh.omega1.max(hh.omega2));
    assert!((w1 - 0.1078).abs() < 1e-3 && (w2 - 0.4920).abs() < 1e-3, "{hh:?}");
    assert!(hh.residual < 1e-8);
    assert_eq!((hh.curves.0.n, hh.curves.1.n), (0, 0));
    // corner of the stable region: neighbouring cells have counts 0 and > 0
    let map = stability_map(&fam[..4], WINDOW, (100, 200)).unwrap();
    let near: Vec<i64> =
        [(-0.1, -0.2), (0.1, -0.2), (-0.1, 0.2), (0.1, 0.2)].iter().map(|(a, b)| map.count_at(hh.tau1 + a, hh.tau2 + b).unwrap()).collect();
    assert!(near.contains(&0) && near.iter().any(|&c| c > 0), "{near:?}");
}

#[test]
fn theta_clamp_refuses_outside_crossing_set() {
    let fam = family();
    assert!(angles(&fam[0], 0.25).is_none());
    assert!(angles(&fam[0], 0.09).is_some());
    assert!(angles(&fam[5], 0.3).is_none());
}
