#![allow(clippy::needless_range_loop)]

use predprey_core::equilibria::*;
use predprey_core::model::{rhs, ModelParams, State};
use rand::{Rng, SeedableRng};

fn q(c: f64, p: f64) -> ModelParams {
    ModelParams::reference(c, p)
}

#[test]
fn interior_values() {
    let e = interior_equilibria(&q(0.25, 1.4));
    assert_eq!(e.len(), 1);
    assert!((e[0].u - 0.6882).abs() < 1e-3 && (e[0].v - 0.1516).abs() < 1e-3);
    assert!(e[0].trace < 0.0);
    assert!(e[0].classification.is_stable());

    let e = interior_equilibria(&q(0.25, 1.2));
    assert!((e[0].u - 0.80945).abs() < 1e-4 && (e[0].v - 0.11797).abs() < 1e-4);

    let e = interior_equilibria(&q(8.0, 0.8));
    assert_eq!(e.len(), 2);
    assert!((e[0].u - 0.7392).abs() < 1e-3 && (e[0].v - 0.0864).abs() < 1e-3);
    assert_eq!(e[1].kind, EquilibriumKind::InteriorSaddle);
    assert_eq!(e[1].classification, Classification::Saddle);
    assert!(e[1].det < 0.0);
}

#[test]
fn residuals_and_signs() {
    for (c, p) in [(0.25, 1.4), (0.25, 1.2), (8.0, 0.8), (8.0, 0.9), (3.0, 1.1), (5.0, 0.97)] {
        for e in interior_equilibria(&q(c, p)) {
            let (du, dv) = rhs(e.state(), &q(c, p));
            assert!(du.abs().max(dv.abs()) < 1e-10);
            match e.kind {
                EquilibriumKind::InteriorPrimary => assert!(e.det > 0.0),
                EquilibriumKind::InteriorSaddle => assert!(e.det < 0.0),
                _ => unreachable!(),
            }
            let re = classify(e.state(), &q(c, p)).unwrap();
            assert_eq!(re.classification, e.classification);
        }
    }
}

#[test]
fn counts_follow_regime() {
    let weak = q(0.25, 1.0);
    for p in [0.5, 0.9, 0.99, 1.01, 1.5, 3.0, 4.3, 4.4, 6.0] {
        let n = interior_equilibria(&weak.with_p(p)).len();
        let expect = usize::from(p > 1.0 && p < 1.0 / weak.a);
        assert_eq!(n, expect, "p = {p}");
    }
    let strong = q(8.0, 1.0);
    let sn = saddle_node_point(&strong).unwrap();
    for p in [sn.p_sn - 1e-3, sn.p_sn + 1e-3, 0.9, 0.999, 1.2, 4.0] {
        let n = interior_equilibria(&strong.with_p(p)).len();
        let expect = if p < sn.p_sn {
            0
        } else if p < 1.0 {
            2
        } else {
            1
        };
        assert_eq!(n, expect, "p = {p}");
    }
}

/// Dense sign-change scan of F on 10^6 points.
fn oracle_roots(q: &ModelParams) -> Vec<f64> {
    let n = 1_000_000;
    let hi = 1.0 / q.p;
    let f = |u: f64| interior_polynomial(u, q);
    let mut out = Vec::new();
    let mut prev = f(0.0);
    for i in 1..n {
        let u = hi * i as f64 / n as f64;
        let cur = f(u);
        if prev.signum() != cur.signum() {
            out.push(u - 0.5 * hi / n as f64);
        }
        prev = cur;
    }
    out
}

#[test]
fn oracle_equivalence_random() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for regime in 0..2 {
        for _ in 0..50 {
            let c = if regime == 0 { rng.gen_range(0.05..1.1) } else { rng.gen_range(1.8..10.0) };
            let p = rng.gen_range(0.5..4.5);
            let params = q(c, p);
            let got: Vec<f64> = interior_equilibria(&params).iter().map(|e| e.u).collect();
            let want = oracle_roots(&params);
            assert_eq!(got.len(), want.len(), "c={c} p={p}");
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-6, "c={c} p={p}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn u_star_decreases_in_c() {
    let mut prev = f64::INFINITY;
    for i in 0..50 {
        let c = 0.05 + 0.02 * i as f64;
        let u = primary_equilibrium(&q(c, 1.3)).unwrap().u;
        assert!(u < prev);
        prev = u;
    }
}

#[test]
fn hopf_points() {
    for (c, want) in [(0.25, 1.5432), (3.0, 1.1024), (5.0, 0.9608), (8.0, 0.8306)] {
        let h = hopf_point(&q(c, 1.0)).unwrap();
        assert!((h.p_h - want).abs() < 1e-3, "c={c}: {}", h.p_h);
        assert!(h.transversal && h.dalpha_dp > 0.0);
        assert!(h.p_h < 2.0 / (0.23 + 1.0));
        let at = primary_equilibrium(&q(c, h.p_h)).unwrap();
        assert!(at.trace.abs() < 1e-8);
        assert_eq!(at.classification, Classification::NonHyperbolic);
        let below = primary_equilibrium(&q(c, h.p_h - 1e-4)).unwrap();
        let above = primary_equilibrium(&q(c, h.p_h + 1e-4)).unwrap();
        assert!(below.trace < 0.0 && above.trace > 0.0);
    }
}

#[test]
fn saddle_node() {
    assert!(matches!(saddle_node_point(&q(0.25, 1.0)), Err(predprey_core::Error::NotApplicable(_))));
    let strong = q(8.0, 1.0);
    let sn = saddle_node_point(&strong).unwrap();
    let ph = hopf_point(&strong).unwrap().p_h;
    assert!(sn.p_sn < ph);
    assert!(sn.det.abs() < 1e-6);
    let pair = interior_equilibria(&strong.with_p(sn.p_sn + 1e-10));
    assert_eq!(pair.len(), 2);
    assert!((pair[0].u - pair[1].u).abs() < 1e-4);
    assert!(interior_equilibria(&strong.with_p(sn.p_sn - 1e-8)).is_empty());
    let th = thresholds(&strong).unwrap();
    assert!(th.p_sn.unwrap() < th.p_h && th.p_h < 2.0 / 1.23);
}

#[test]
fn lyapunov_signs() {
    for c in [0.25, 3.0, 5.0, 8.0] {
        let h = hopf_point(&q(c, 1.0)).unwrap();
        let a = first_lyapunov(&q(c, h.p_h)).unwrap();
        let l1 = first_lyapunov_invariant(&q(c, h.p_h)).unwrap();
        assert!(a < 0.0 && l1 < 0.0, "c={c}: {a} {l1}");
    }
    assert!(matches!(first_lyapunov(&q(0.25, 1.4)), Err(predprey_core::Error::NotAtHopf(_))));
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    for _ in 0..100 {
        let params = q(rng.gen_range(0.1..8.0), rng.gen_range(0.5..3.0));
        let s = State::new(rng.gen_range(0.01..1.5), rng.gen_range(0.01..2.0));
        let j = predprey_core::model::jacobian(s, &params);
        let h = 1e-6;
        for col in 0..2 {
            let mut sp = s;
            let mut sm = s;
            if col == 0 {
                sp.u += h;
                sm.u -= h;
            } else {
                sp.v += h;
                sm.v -= h;
            }
            let (a, b) = (rhs(sp, &params), rhs(sm, &params));
            let fd = [(a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h)];
            for row in 0..2 {
                let scale = j[row][col].abs().max(1.0);
                assert!((fd[row] - j[row][col]).abs() / scale < 1e-6);
            }
        }
    }
}
