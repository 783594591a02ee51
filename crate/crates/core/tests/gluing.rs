//! Gluing potentials, their error estimates and the positivity sweep.

use instanton_lab::ale::{AleModel, GroupWeight};
use instanton_lab::beth::{BethMap, DEFAULT_PATHS};
use instanton_lab::calculus::{fit_samples, geometric_grid};
use instanton_lab::gluing::*;
use instanton_lab::so3::{normalize, Gram};
use instanton_lab::taub_nut::{FibrationChart, TaubNut};
use instanton_lab::{LabError, Point4};
use nalgebra::{Matrix3, Vector3};

fn generic_gram() -> Gram {
    normalize(&Gram::new(Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, 1.0))).unwrap()).normalized
}

fn model(gram: Gram) -> AleModel {
    AleModel::new(gram, GroupWeight::dihedral(3).unwrap())
}

#[test]
fn kappa_is_convex_and_chi_stays_in_range() {
    let prof = CutoffProfile::new(3.0).unwrap();
    let h = 1e-3;
    let mut t = -1.0;
    while t < 4.0 {
        let (a, b, c) = (kappa_convex(t - h), kappa_convex(t), kappa_convex(t + h));
        assert!(a - 2.0 * b + c >= -1e-12, "κ not convex at {t}");
        let x = prof.chi(t);
        assert!((0.0..=1.0).contains(&x));
        t += 0.01;
    }
    assert_eq!(kappa_convex(-0.3), 0.0);
    assert!((kappa_convex(2.5) - 2.0).abs() < 1e-12);
    assert_eq!(prof.chi(1.9), 0.0);
    assert_eq!(prof.chi(3.1), 1.0);
}

#[test]
fn psi_c_vanishes_on_its_zero_loci() {
    let m = 0.8;
    // sinh(4my1) = 0 and y2 = y3 = 0 kill it.
    assert_eq!(psi_c_partial([0.0, 1.3, -0.4], m, [0, 0, 0]).unwrap().norm(), 0.0);
    assert_eq!(psi_c_partial([0.7, 0.0, 0.0], m, [0, 0, 0]).unwrap().norm(), 0.0);
    assert!(psi_c_partial([0.7, 0.2, 0.0], m, [0, 0, 0]).unwrap().norm() > 0.0);
}

#[test]
fn psi_c_partials_match_differences() {
    let m = 1.3;
    let y = [0.4, -0.9, 1.7];
    let h = 1e-4;
    for i in 0..3 {
        let mut e = [0u8; 3];
        e[i] = 1;
        let mut yp = y;
        let mut ym = y;
        yp[i] += h;
        ym[i] -= h;
        let fd = (psi_c_partial(yp, m, [0; 3]).unwrap() - psi_c_partial(ym, m, [0; 3]).unwrap()) / (2.0 * h);
        let ex = psi_c_partial(y, m, e).unwrap();
        assert!((fd - ex).norm() < 1e-7 * (1.0 + ex.norm()), "axis {i}: {fd} vs {ex}");
        for j in 0..3 {
            let mut e2 = e;
            e2[j] += 1;
            let mut yp = y;
            let mut ym = y;
            yp[j] += h;
            ym[j] -= h;
            let fd = (psi_c_partial(yp, m, e).unwrap() - psi_c_partial(ym, m, e).unwrap()) / (2.0 * h);
            let ex = psi_c_partial(y, m, e2).unwrap();
            assert!((fd - ex).norm() < 1e-6 * (1.0 + ex.norm()), "{e2:?}: {fd} vs {ex}");
        }
    }
}

#[test]
fn psi_c_hierarchy_respects_bounds() {
    let radii = geometric_grid(50.0, 2000.0, 10);
    for m in [0.5, 1.0] {
        for d in psi_c_hierarchy(m, &DEFAULT_PATHS, &radii, 3).unwrap() {
            assert!(d.fit.exponent <= d.expected + 0.1, "{:?}: {} > {}", d.index, d.fit.exponent, d.expected);
        }
    }
}

#[test]
fn psi_c_potential_for_theta_decays() {
    let tn = TaubNut::new(1.0).unwrap();
    let chart = FibrationChart::new(tn);
    let radii = geometric_grid(20.0, 1000.0, 10);
    let gap = fit_paths(&chart, &DEFAULT_PATHS, &radii, |p| ddc_gap(&tn, p)).unwrap();
    let theta = fit_paths(&chart, &DEFAULT_PATHS, &radii, |p| theta_f_norm(&tn, 1, p)).unwrap();
    assert!(gap.exponent <= -1.7, "gap {}", gap.exponent);
    assert!(gap.exponent < theta.exponent - 1.5);
    let main = fit_paths(&chart, &DEFAULT_PATHS, &radii, |p| {
        let t = main_term(&tn, p)?;
        Ok((t.psi - t.main_term).norm())
    })
    .unwrap();
    let p = chart.point(DEFAULT_PATHS[0].at(300.0));
    let t = main_term(&tn, &p).unwrap();
    assert!(main.exponent < -3.5, "main term gap {}", main.exponent);
    assert!(((t.printed - t.main_term) / t.main_term).norm() > 0.5);
}

#[test]
fn coupling_table_closed_forms() {
    for m in [0.3, 1.0, 4.0] {
        let tn = TaubNut::new(m).unwrap();
        for p in [Point4::new(0.3, -1.1, 0.8, 0.5), Point4::new(-2.0, 0.4, 1.5, -0.7)] {
            let t = coupling_table(&tn, &p).unwrap();
            assert!(t.closed_defect() < 1e-10, "defect {}", t.closed_defect());
            // ξ-pairing of φ agrees with the display; the ζ entries do not.
            assert!((t.printed[1] - t.closed[1]).norm() < 1e-12);
            assert!((t.printed[2] - t.closed[2] * 2.0).norm() < 1e-12);
        }
    }
}

#[test]
fn euclidean_and_mixed_estimates_decay() {
    let m = model(generic_gram());
    let prof = CutoffProfile::new(4.0).unwrap();
    let dir = Point4::new(0.3, -0.7, 0.5, 0.4);
    let u = dir.scale(1.0 / dir.r());
    let s = geometric_grid(10.0, 200.0, 10).iter().map(|&r| (r, estimate_euc(&m, &prof, &u.scale(r)))).collect();
    let e14 = fit_samples(s).unwrap();
    assert!(e14.exponent <= -7.5, "{}", e14.exponent);

    let tn = TaubNut::new(1.0).unwrap();
    let chart = FibrationChart::new(tn);
    let radii = geometric_grid(20.0, 1000.0, 10);
    let e15 = fit_paths(&chart, &DEFAULT_PATHS, &radii, |p| estimate_mixd(&m, &prof, &tn, p)).unwrap();
    assert!(e15.exponent <= -1.7, "{}", e15.exponent);
    let beth = BethMap::for_model(&m).unwrap();
    let e18 = fit_paths(&chart, &DEFAULT_PATHS, &radii, |p| estimate_fb(&m, &beth, &tn, p)).unwrap();
    assert!(e18.exponent <= -1.7, "{}", e18.exponent);
}

#[test]
fn glued_volume_form_converges() {
    let m = model(generic_gram());
    let pot = GluedPotential::new(m, 1.0, CutoffProfile::new(4.0).unwrap(), 14.0, 1.0, GlueCut::Power).unwrap();
    let chart = FibrationChart::new(pot.tn);
    let radii = geometric_grid(150.0, 1500.0, 8);
    let f = fit_paths(&chart, &DEFAULT_PATHS, &radii, |p| volume_gap(p, &pot)).unwrap();
    assert!(f.exponent <= -1.7, "{}", f.exponent);
}

#[test]
fn zero_gram_drops_the_mixed_potential() {
    let m = model(Gram::zero());
    let prof = CutoffProfile::new(2.0).unwrap();
    let tn = TaubNut::new(1.0).unwrap();
    let p = Point4::new(3.0, -4.0, 5.0, 2.0);
    assert_eq!(psi_mixd(&m, &prof, &tn, &p).unwrap(), 0.0);
    assert!((psi_euc(&m, &prof, &p) - p.r2() / 4.0).abs() < 1e-12);
    assert!(estimate_euc(&m, &prof, &p) < 1e-12);
}

#[test]
fn glue_cut_switches_where_expected() {
    let m = model(Gram::zero());
    let pot = GluedPotential::new(m, 1.0, CutoffProfile::new(2.0).unwrap(), 12.0, 0.25, GlueCut::Power).unwrap();
    assert_eq!(pot.outer_cut(12.9), 0.0);
    assert_eq!(pot.outer_cut(12.0 + 17.0), 1.0);
    assert!((pot.transition_end() - 28.0).abs() < 1e-12);
    assert!(GluedPotential::new(m, 1.0, CutoffProfile::new(1.0).unwrap(), 12.0, 0.5, GlueCut::Power).is_err());
    assert!(GluedPotential::new(m, 1.0, CutoffProfile::new(2.0).unwrap(), 12.0, 0.0, GlueCut::Power).is_err());
}

#[test]
fn positivity_certificate_at_small_mass() {
    for gram in [Gram::zero(), generic_gram()] {
        let cert = tune_parameters(&model(gram), 1e-4, &SearchRanges::default(), &SweepGrid::default()).unwrap();
        assert!(cert.positive());
        assert!(cert.margins.inner > 0.0 && cert.margins.neck > 0.0 && cert.margins.outer > 0.0);
    }
}

#[test]
fn unit_mass_has_no_certificate() {
    // Positivity along ξ needs the switch to end beyond r0·exp(m r0²).
    let ranges = SearchRanges { ks: vec![2.0], r0_offsets: vec![0.0], betas: vec![0.5, 0.125], cut: GlueCut::Power };
    match tune_parameters(&model(Gram::zero()), 1.0, &ranges, &SweepGrid::default()) {
        Err(LabError::SearchFailed { best_margin }) => assert!(best_margin < 0.0),
        other => panic!("expected failure, got {other:?}"),
    }
}

#[test]
fn scaled_cut_cannot_be_rescued_by_small_beta() {
    let pot_for = |beta| GluedPotential::new(model(Gram::zero()), 1e-4, CutoffProfile::new(2.0).unwrap(), 12.0, beta, GlueCut::Scaled).unwrap();
    for beta in [0.25, 1.0 / 64.0] {
        let c = positivity_sweep(&pot_for(beta), &SweepGrid::default()).unwrap();
        assert!(c.margins.outer < 0.0, "β = {beta}: {:?}", c.margins);
    }
}

#[test]
fn r_beta_shrinks_with_beta() {
    let m = model(generic_gram());
    let sup = |beta| {
        let pot = GluedPotential::new(m, 1e-4, CutoffProfile::new(2.0).unwrap(), 12.0, beta, GlueCut::Power).unwrap();
        positivity_sweep(&pot, &SweepGrid::default()).unwrap().r_beta_sup
    };
    let (a, b) = (sup(0.25), sup(0.125));
    assert!(b < a / 2.0, "{a} → {b}");
}

#[test]
fn y1_derivative_display_verdict() {
    let radii = geometric_grid(20.0, 2000.0, 6);
    let v = adjudicate_y1_display(&[0.5, 1.0, 2.0], &DEFAULT_PATHS, &radii).unwrap();
    assert!(v.unsimplified < 1e-9 && v.mass_coefficient < 1e-9);
    assert!(v.unit_coefficient > 0.1);
    assert_eq!(v.winner.as_deref(), Some("mass-coefficient"));
    // at m = 1 the two simplified displays coincide
    let v1 = adjudicate_y1_display(&[1.0], &DEFAULT_PATHS, &radii).unwrap();
    assert!(v1.unit_coefficient < 1e-9 && v1.winner.is_none());
}
