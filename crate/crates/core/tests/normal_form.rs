use predprey_core::equilibria::Classification;
use predprey_core::normal_form::*;
use predprey_core::Error;

fn reference() -> Unfolding {
    Unfolding::new(&NormalFormCoeffs::reference_hh()).unwrap()
}

#[test]
fn unfolding_coefficients_from_reference_list() {
    let un = reference();
    assert_eq!((un.eps1, un.eps2, un.d), (-1.0, -1.0, 1.0));
    // the listed B values carry four decimals, which moves b and d - bc by about 1e-3 and 1.5e-2
    assert!((un.b - 6.5658).abs() < 2e-3, "b = {}", un.b);
    assert!((un.c - 14.8998).abs() < 1e-3, "c = {}", un.c);
    assert!((un.d - un.b * un.c + 96.8306).abs() < 2e-2, "d - bc = {}", un.d - un.b * un.c);
    assert!(un.d > 0.0 && un.d - un.b * un.c < 0.0);
    let up = unfolding_from_coeffs(&NormalFormCoeffs::reference_hh(), 0.0, 0.0).unwrap();
    assert_eq!((up.nu1, up.nu2), (0.0, 0.0));
}

#[test]
fn degenerate_rescale_rejected() {
    let mut nf = NormalFormCoeffs::reference_hh();
    nf.B0021.re = 0.0;
    assert!(matches!(Unfolding::new(&nf), Err(Error::DegenerateRescale(_))));
    let mut nf = NormalFormCoeffs::reference_hh();
    nf.B2100.re = 0.0;
    assert!(matches!(unfolding_from_coeffs(&nf, 0.1, 0.1), Err(Error::DegenerateRescale(_))));
}

#[test]
fn positive_nu_leaves_only_the_trivial_point() {
    let up = reference().with_nu(0.2, 0.1);
    let fps = amplitude_fixed_points(&up);
    assert_eq!(fps.len(), 1);
    assert_eq!(fps[0].kind, BranchKind::Trivial);
    // repelling in amplitude time, attracting once time is turned back by eps1 = -1
    assert!(fps[0].eigenvalues.iter().all(|e| e.0 > 0.0));
    assert!(fps[0].is_stable());
}

#[test]
fn fixed_points_have_small_residual_and_consistent_labels() {
    let un = reference();
    for i in 0..40 {
        let a = i as f64 * std::f64::consts::PI / 20.0 + 0.01;
        let up = un.with_nu(0.3 * a.cos(), 0.3 * a.sin());
        for f in amplitude_fixed_points(&up) {
            assert!(f.residual < RESIDUAL_TOL, "{f:?}");
            assert!(f.r1 >= 0.0 && f.r2 >= 0.0);
            let re: Vec<f64> = f.eigenvalues.iter().map(|e| up.eps1 * e.0).collect();
            assert_eq!(f.is_stable(), re.iter().all(|&x| x < 0.0), "{f:?}");
            if re.iter().any(|&x| x > 0.0) && re.iter().any(|&x| x < 0.0) {
                assert_eq!(f.classification, Classification::Saddle);
            }
        }
    }
}

#[test]
fn six_regions_with_expected_inventories() {
    let set = bifurcation_set(&reference(), SigmaWindow::symmetric(1.0, 1.0)).unwrap();
    assert_eq!(set.regions.len(), 6);
    let stable: Vec<usize> = set.regions.iter().map(|r| r.stable_count()).collect();
    assert_eq!(stable, vec![1, 1, 1, 2, 1, 1]);
    let d1 = &set.regions[0];
    assert_eq!(d1.inventory.len(), 1);
    assert!(d1.inventory[0].stable);
    // D1 neighbours carry a single stable pure mode, D4 two stable pure modes
    for r in [&set.regions[1], &set.regions[5]] {
        let s: Vec<_> = r.inventory.iter().filter(|i| i.stable).collect();
        assert!(matches!(s[0].kind, BranchKind::PureMode1 | BranchKind::PureMode2), "{r:?}");
    }
    let d4: Vec<BranchKind> = set.regions[3].inventory.iter().filter(|i| i.stable).map(|i| i.kind).collect();
    assert_eq!(d4, vec![BranchKind::PureMode1, BranchKind::PureMode2]);
    assert!(set.regions[3].inventory.iter().any(|i| i.kind == BranchKind::Mixed && !i.stable));
}

#[test]
fn labels_are_locally_constant() {
    let un = reference();
    let set = bifurcation_set(&un, SigmaWindow::symmetric(1.0, 1.0)).unwrap();
    for r in &set.regions {
        for k in 1..=10 {
            let w = k as f64 / 10.0;
            let width = (r.angle_hi - r.angle_lo).rem_euclid(2.0 * std::f64::consts::PI);
            let a = r.angle_lo + width * (0.01 + 0.98 * w);
            let s = (0.37 * w * a.cos(), 0.37 * w * a.sin());
            assert_eq!(set.region_at(s.0, s.1).unwrap().label, r.label);
            assert_eq!(inventory(&un.at(s.0, s.1)), r.inventory, "{} at {s:?}", r.label);
        }
    }
}

#[test]
fn crossing_out_of_d1_gains_one_stable_oscillation() {
    let un = reference();
    let set = bifurcation_set(&un, SigmaWindow::symmetric(1.0, 1.0)).unwrap();
    let d1 = &set.regions[0];
    let edge = d1.angle_hi;
    for da in [-1e-3, 1e-3] {
        let a = edge + da;
        let inv = inventory(&un.at(0.1 * a.cos(), 0.1 * a.sin()));
        let stable: Vec<_> = inv.iter().filter(|i| i.stable).collect();
        assert_eq!(stable.len(), 1);
        if da > 0.0 {
            assert_ne!(stable[0].kind, BranchKind::Trivial);
        } else {
            assert_eq!(stable[0].kind, BranchKind::Trivial);
        }
    }
}

#[test]
fn singular_map_rejected() {
    let mut nf = NormalFormCoeffs::reference_hh();
    nf.B13 = nf.B11 * 2.0;
    nf.B23 = nf.B21 * 2.0;
    let un = Unfolding::new(&nf).unwrap();
    assert_eq!(bifurcation_set(&un, SigmaWindow::symmetric(1.0, 1.0)).unwrap_err(), Error::SingularMap);
}

#[test]
fn polygons_cover_the_window() {
    let set = bifurcation_set(&reference(), SigmaWindow { sigma1: (-1.0, 2.0), sigma2: (-3.0, 1.0) }).unwrap();
    let area: f64 = set
        .regions
        .iter()
        .map(|r| {
            let p = &r.polygon;
            0.5 * (0..p.len())
                .map(|i| {
                    let (a, b) = (p[i], p[(i + 1) % p.len()]);
                    a.0 * b.1 - b.0 * a.1
                })
                .sum::<f64>()
        })
        .sum();
    assert!((area - 12.0).abs() < 1e-9, "{area}");
}

mod simulation {
    use super::*;
    use predprey_core::equilibria::primary_equilibrium;
    use predprey_core::pde::*;
    use predprey_core::{DelayParams, DiffusionParams, ModelParams};

    const HH: (f64, f64) = (2.21407, 15.001982);

    /// Point of the region's middle direction with |nu| = rho.
    fn sample(un: &Unfolding, r: &Region, rho: f64) -> (f64, f64) {
        let mid = r.angle_lo + 0.5 * (r.angle_hi - r.angle_lo).rem_euclid(std::f64::consts::TAU);
        let (n1, n2) = un.nu(mid.cos(), mid.sin());
        let nn = n1.hypot(n2);
        un.sigma(rho * n1 / nn, rho * n2 / nn).unwrap()
    }

    fn run(s: (f64, f64), past: &[Field], t_end: f64) -> Vec<Field> {
        let q = ModelParams::reference(0.25, 1.2);
        let d = DiffusionParams::new(0.3, 0.4, 2.0).unwrap();
        let o = SimOptions { dt: Some(0.02), stepper: Stepper::SemiImplicit, sample_every: 0.5 };
        simulate_rd_delays_from(&q, &d, &DelayParams::new(HH.0 + s.0, HH.1 + s.1).unwrap(), past, t_end, &o).unwrap()
    }

    #[test]
    fn region_inventories_match_delayed_runs() {
        let un = reference();
        let set = bifurcation_set(&un, SigmaWindow::symmetric(1.0, 1.0)).unwrap();
        let r = |lab: &str| set.regions.iter().find(|r| r.label == lab).unwrap().clone();
        let e = primary_equilibrium(&ModelParams::reference(0.25, 1.2)).unwrap();
        let init = Field::constant(32, 2.0, e.u + 0.01, e.v);
        let periodic = |tr: &[Field]| {
            let dg = diagnose(&tr[tr.len() - 4001..]);
            assert_eq!(dg.kind, AttractorKind::HomogeneousPeriodic, "{dg:?}");
            dg.period.unwrap()
        };

        let d1 = run(sample(&un, &r("D1"), 0.15), std::slice::from_ref(&init), 20000.0);
        assert!(d1.last().unwrap().sup_dist(e.u, e.v) < 1e-4);

        // the sectors next to D1 each carry one oscillation, at the two Hopf frequencies
        let (p1, p2) = (std::f64::consts::TAU / 0.107788, std::f64::consts::TAU / 0.492019);
        let d2 = run(sample(&un, &r("D2"), 0.01), std::slice::from_ref(&init), 20000.0);
        let d6 = run(sample(&un, &r("D6"), 0.01), std::slice::from_ref(&init), 20000.0);
        let (a, b) = (periodic(&d2), periodic(&d6));
        let (fast, slow) = (a.min(b), a.max(b));
        assert!((fast - p2).abs() < 0.05 * p2, "{fast}");
        assert!((slow - p1).abs() < 0.05 * p1, "{slow}");

        // D4: continuing either oscillation keeps it, so two attractors coexist
        let s4 = sample(&un, &r("D4"), 0.01);
        let from2 = run(s4, &d2[d2.len() - 100..], 20000.0);
        let from6 = run(s4, &d6[d6.len() - 100..], 20000.0);
        assert!((periodic(&from2) - a).abs() < 0.05 * a);
        assert!((periodic(&from6) - b).abs() < 0.05 * b);
        assert!((a - b).abs() > 0.5 * fast);
    }
}
