//! The sphere systems checked against a brute-force Laplacian of fθ₁ + gθ₂ + hθ₃.

use instanton_lab::ale::*;
use instanton_lab::calculus::*;
use instanton_lab::euclidean::*;
use instanton_lab::{Point4, Result};
use nalgebra::Matrix4;

type SphereFn = dyn Fn(&Point4) -> f64;

fn sample_functions() -> [Box<SphereFn>; 3] {
    [
        Box::new(|q: &Point4| {
            let x = q.x;
            (x[0] * x[1] + 0.3 * x[2] * x[2] - 0.2 * x[0] * x[3]) / q.r2() + 0.1
        }),
        Box::new(|q: &Point4| {
            let x = q.x;
            (x[1] * x[2] - 0.5 * x[3] * x[3] + 0.25 * x[0] * x[0]) / q.r2()
        }),
        Box::new(|q: &Point4| {
            let x = q.x;
            (x[0] * x[2] + 0.7 * x[1] * x[3]) / q.r2() - 0.2
        }),
    ]
}

#[test]
fn laplacian_of_theta_combination_matches_harmonic_system() {
    let [f, g, h] = sample_functions();
    let w = |q: &Point4| -> Result<Matrix4<f64>> {
        let b = base_forms(q)?;
        let r2 = q.r2();
        Ok(b.theta[0] * (f(q) / r2) + b.theta[1] * (g(q) / r2) + b.theta[2] * (h(q) / r2))
    };
    let sch = Scheme::new(1e-2, 4).unwrap();
    for p in [Point4::new(0.5, 0.5, 0.5, 0.5), Point4::new(0.8, -0.2, 0.1, 0.3), Point4::new(-0.1, 0.9, 0.4, -0.3)] {
        let p = p.scale(1.0 / p.r());
        let mut lap = Matrix4::zeros();
        for i in 0..4 {
            let inner = |q: &Point4| partial(&w, q, i, &sch);
            lap -= partial(&inner, &p, i, &sch).unwrap();
        }
        let brute = theta_coefficients(&lap, &p).unwrap();
        let res = sphere_system_check([&*f, &*g, &*h], &p, &sch).unwrap();
        for j in 0..3 {
            assert!((brute[j] - res.harmonic_system[j]).abs() < 1e-4, "row {j}: {brute:?} vs {:?}", res.harmonic_system);
        }
    }
}

#[test]
fn constants_solve_the_closed_system() {
    let c: [Box<SphereFn>; 3] = [Box::new(|_| 1.5), Box::new(|_| -0.3), Box::new(|_| 2.0)];
    let sch = Scheme::default();
    let res = sphere_system_check([&*c[0], &*c[1], &*c[2]], &Point4::new(0.3, 0.4, 0.5, 0.6), &sch).unwrap();
    for v in res.closed_system {
        assert!(v.abs() < 1e-9);
    }
}

#[test]
fn degree_two_harmonics_are_sphere_eigenfunctions() {
    let sch = Scheme::new(1e-2, 4).unwrap();
    let p = Point4::new(0.2, -0.7, 0.5, 0.46);
    let p = p.scale(1.0 / p.r());
    for q in degree2_harmonics() {
        let u = move |x: &Point4| (x.vector().transpose() * q * x.vector())[(0, 0)] / x.r2();
        let l = sphere_laplacian(&u, &p, &sch).unwrap();
        assert!((l - 8.0 * u(&p)).abs() < 1e-6, "{l} vs {}", 8.0 * u(&p));
    }
}
