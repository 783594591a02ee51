//! Pulled-back Taub-NUT data against closed forms and the mass-shift identity.

use instanton_lab::ale::{AleModel, GroupWeight};
use instanton_lab::beth::*;
use instanton_lab::calculus::geometric_grid;
use instanton_lab::euclidean::{structure, DihedralGroup};
use instanton_lab::so3::Gram;
use instanton_lab::taub_nut::{xi, zeta_frame, FibrationChart, TaubNut};
use instanton_lab::Point4;
use nalgebra::{Matrix3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_point(rng: &mut ChaCha8Rng, scale: f64) -> Point4 {
    Point4::new(
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    )
}

#[test]
fn couplings_match_chain_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let i1 = structure(0);
    for _ in 0..40 {
        let tn = TaubNut::new(rng.gen_range(0.1..3.0)).unwrap();
        let b = BethMap::with_default_kappa(rng.gen_range(0.0..2.0)).unwrap();
        let p = random_point(&mut rng, 2.0);
        let f = fb_forms(&b, &tn, &p).unwrap();
        let cc = closed_couplings(&b, &tn, &p).unwrap();
        let x = xi(&p);
        let z = zeta_frame(&tn, &p).unwrap();
        let mix = -(i1 * x);
        let iz = i1 * z;
        let checks = [
            (f.eta.dot(&x), 1.0),
            (f.eta.dot(&mix), 0.0),
            (f.dy[0].dot(&x), 0.0),
            (f.dy[0].dot(&mix), cc.dy1b_minus_i1xi),
            (f.dy[0].dot(&z), cc.dy1b_zeta),
            (f.dy[0].dot(&iz), cc.dy1b_i1zeta),
            (f.eta.dot(&z), cc.etab_zeta),
            (f.eta.dot(&iz), cc.etab_i1zeta),
        ];
        for (k, (got, want)) in checks.iter().enumerate() {
            assert!((got - want).abs() < 1e-9, "coupling {k}: {got} vs {want} at {p:?}");
        }
        let eta = eta_b_closed_form(&b, &tn, &p).unwrap();
        assert!((eta - f.eta).norm() < 1e-9);
    }
}

#[test]
fn dalpha_couplings_match_difference_quotient() {
    let tn = TaubNut::new(0.7).unwrap();
    let b = BethMap::new(1.3, 3.0).unwrap();
    let p = Point4::new(0.6, -0.4, 0.9, 0.3);
    let cc = closed_couplings(&b, &tn, &p).unwrap();
    let i1 = structure(0);
    let z = zeta_frame(&tn, &p).unwrap();
    let h = 1e-5;
    let da = |v: &Vector4<f64>| {
        let at = |s: f64| b.alpha(Point4 { x: (p.vector() + v * s).into() }.r2());
        (at(h) - at(-h)) / (2.0 * h)
    };
    assert!((da(&(-(i1 * xi(&p)))) - cc.dalpha_minus_i1xi).abs() < 1e-8);
    assert!((da(&z) - cc.dalpha_zeta).abs() < 1e-8);
    assert!((da(&(i1 * z)) - cc.dalpha_i1zeta).abs() < 1e-8);
}

#[test]
fn mass_shift_agrees_with_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let tn = TaubNut::new(rng.gen_range(0.05..5.0)).unwrap();
        let b = BethMap::with_default_kappa(rng.gen_range(0.0..3.0)).unwrap();
        let p = random_point(&mut rng, 3.0);
        let x = pulled_back_coords(&b, &tn, &p).unwrap();
        let y = pulled_back_mass_shift(&b, &tn, &p).unwrap();
        let scale = x.r_big.max(1.0);
        for j in 0..3 {
            assert!((x.y[j] - y.y[j]).abs() < 1e-10 * scale);
        }
        assert!((x.r_big - y.r_big).abs() < 1e-10 * scale);
        assert!((x.u - y.u).abs() < 1e-10 * scale && (x.v - y.v).abs() < 1e-10 * scale);
        let c = tn.coords(&p).unwrap();
        let a2 = b.alpha(p.r2()).powi(2);
        assert_eq!(x.y[1], (b.apply(&p).x[0] * b.apply(&p).x[3] + b.apply(&p).x[1] * b.apply(&p).x[2]));
        assert!((x.y[1] - a2 * c.y2).abs() < 1e-12 * scale);
        assert!((x.y[2] - a2 * c.y3).abs() < 1e-12 * scale);
    }
}

#[test]
fn mass_derivative_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let p = random_point(&mut rng, 2.0);
        let mu: f64 = rng.gen_range(0.1..2.0);
        let h = 1e-4 * mu;
        let y = |m: f64| TaubNut::new(m).unwrap().coords(&p).unwrap().y1;
        let fd = (y(mu - 2.0 * h) - 8.0 * y(mu - h) + 8.0 * y(mu + h) - y(mu + 2.0 * h)) / (12.0 * h);
        let exact = y1_mass_derivative(&p, mu).unwrap();
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "{fd} vs {exact}");
        // y1 ≤ 0 exactly where |z1| ≤ |z2|, and there y1 increases with μ: |y1| shrinks
        let y1 = y(mu);
        assert_eq!(y1 <= 0.0, p.z1().norm() <= p.z2().norm());
        assert!(exact * y1 <= 0.0);
    }
}

#[test]
fn zero_a_leaves_taub_nut_unchanged() {
    let tn = TaubNut::new(1.1).unwrap();
    let b = BethMap::new(0.0, 1.0).unwrap();
    let p = Point4::new(0.4, 0.3, -1.0, 0.2);
    let direct = instanton_lab::calculus::jet_values(&tn.metric_jet(&p, 1).unwrap());
    assert_eq!(fb_metric(&b, &tn, &p).unwrap(), direct);
    assert!((direct - tn.metric(&p).unwrap()).norm() < 1e-14);
    let x = pulled_back_coords(&b, &tn, &p).unwrap();
    let c = tn.coords(&p).unwrap();
    assert_eq!(x.y, [c.y1, c.y2, c.y3]);
}

#[test]
fn dihedral_equivariance_is_exact() {
    let b = BethMap::with_default_kappa(0.9).unwrap();
    let p = Point4::new(0.7, -0.1, 0.35, 1.2);
    for k in [2, 3, 5] {
        for g in DihedralGroup::new(k).unwrap().elements() {
            let lhs = b.apply(&g.act(&p));
            let rhs = g.act(&b.apply(&p));
            assert!((lhs.vector() - rhs.vector()).norm() <= 4.0 * f64::EPSILON * p.r());
        }
    }
}

#[test]
fn decay_rates() {
    let gram = Gram::new(Matrix3::new(3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0)).unwrap();
    let model = AleModel::new(gram, GroupWeight::dihedral(3).unwrap());
    let b = BethMap::for_model(&model).unwrap();
    let chart = FibrationChart::new(TaubNut::new(1.0).unwrap());
    let d = beth_decay(&b, &chart, &DEFAULT_PATHS, &geometric_grid(10.0, 1000.0, 10)).unwrap();
    for f in d.y.iter().chain([&d.r_big, &d.metric, &d.metric_derivative]) {
        assert!(f.exponent <= -0.8, "{}", f.exponent);
    }
    assert!(d.metric_derivative.exponent <= -0.7);
    assert!(d.eta.exponent <= -1.7);
    let dir = Point4::new(0.3, -0.5, 0.6, 0.55);
    let v = volume_decay(&b, &dir, &geometric_grid(20.0, 400.0, 10)).unwrap();
    assert!((v.exponent + 8.0).abs() < 0.3, "{}", v.exponent);
    let cs = complex_structure_decay(&b, &model, &dir, &geometric_grid(20.0, 200.0, 10)).unwrap();
    assert!(cs.exponent <= -7.5, "{}", cs.exponent);
}
