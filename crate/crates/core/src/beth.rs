//! The radial corrector ℶ(z) = α(z)·z with α = 1 + a/(κ + r⁴), and the Taub-NUT data
//! pulled back through it.
//!
//! ℶ preserves arg z1 − arg z2, multiplies z1z2 by α² and shifts the mass seen by the
//! LeBrun equations to mα², so in the fibration chart it acts as
//! (y1, y2, y3, ψ) ↦ (α² y1_{mα²}, α² y2, α² y3, ψ). The decay checks use that form.

use crate::ale::AleModel;
use crate::calculus::{christoffel, fit_decay, fit_samples, DecayFit, covariant_derivative_2tensor, inverse_spd, norm_2tensor, norm_3tensor, norm_covector};
use crate::error::{LabError, Result};
use crate::euclidean::{madd, mscale, outer, values, vvalues, M4, Point4, V4};
use crate::jet::{Jet, Scalar};
use crate::taub_nut::{fibration, metric_from, pullback_2tensor_jet, pullback_covector_jet, solve_y1, FibrationChart, TaubNut};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BethMap {
    pub a: f64,
    pub kappa: f64,
}

/// min over s ≥ 0 of d/ds [s α(s)] = 1 − 9a/(16κ), attained at s⁴ = 5κ/3.
pub fn radial_derivative_min(a: f64, kappa: f64) -> f64 {
    1.0 - 9.0 * a / (16.0 * kappa)
}

/// α − 1 for a profile; κ = 0 is allowed here (the singular model a/r⁴).
fn excess(a: f64, kappa: f64, r2: f64) -> f64 {
    a / (kappa + r2 * r2)
}

impl BethMap {
    pub fn new(a: f64, kappa: f64) -> Result<BethMap> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(LabError::InvalidParameter(format!("a must be finite and ≥ 0, got {a}")));
        }
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(LabError::InvalidParameter(format!("kappa must be ≥ 1, got {kappa}")));
        }
        if radial_derivative_min(a, kappa) <= 0.0 {
            return Err(LabError::InvalidParameter(format!(
                "radial profile not monotone for a = {a}, kappa = {kappa}"
            )));
        }
        Ok(BethMap { a, kappa })
    }

    /// max(1, 80a), i.e. 20c(|ξ2|² + |ξ3|²) when a = c(|ξ2|² + |ξ3|²)/4.
    pub fn default_kappa(a: f64) -> f64 {
        (80.0 * a).max(1.0)
    }

    pub fn with_default_kappa(a: f64) -> Result<BethMap> {
        BethMap::new(a, BethMap::default_kappa(a))
    }

    /// a = c(Z22 + Z33)/4 from the model's Gram matrix and group weight.
    pub fn for_model(model: &AleModel) -> Result<BethMap> {
        let a = model.weight.norm * (model.gram.entry(1, 1) + model.gram.entry(2, 2)) / 4.0;
        BethMap::with_default_kappa(a)
    }

    pub fn alpha<S: Scalar>(&self, r2: S) -> S {
        (r2 * r2 + self.kappa).recip() * self.a + 1.0
    }

    /// α − 1 without cancellation.
    pub fn excess(&self, r2: f64) -> f64 {
        excess(self.a, self.kappa, r2)
    }

    pub fn apply_at<S: Scalar>(&self, x: &V4<S>) -> V4<S> {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
        let al = self.alpha(r2);
        x.map(|c| c * al)
    }

    pub fn apply(&self, p: &Point4) -> Point4 {
        Point4 { x: self.apply_at(&p.x) }
    }

    /// Radius s with s·α(s) = ρ, by safeguarded Newton on [ρ/α_max, ρ].
    pub fn radial_inverse(&self, rho: f64, tol: f64) -> Result<f64> {
        if rho == 0.0 {
            return Ok(0.0);
        }
        let g = |s: f64| {
            let s4 = s.powi(4);
            let d = self.kappa + s4;
            (s * (1.0 + self.a / d) - rho, 1.0 + self.a * (self.kappa - 3.0 * s4) / (d * d))
        };
        let (mut lo, mut hi) = (rho / (1.0 + self.a / self.kappa), rho);
        let mut s = rho;
        for _ in 0..100 {
            let (val, der) = g(s);
            if val.abs() <= tol * rho.max(1.0) * 0.5 {
                return Ok(s);
            }
            if val > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let mut next = s - val / der;
            if !(next >= lo && next <= hi) {
                next = 0.5 * (lo + hi);
            }
            if next == s {
                return Ok(s);
            }
            s = next;
        }
        Err(LabError::NoConvergence { iterations: 100, residual: g(s).0.abs() })
    }

    pub fn inverse(&self, p: &Point4, tol: f64) -> Result<Point4> {
        if tol <= 0.0 {
            return Err(LabError::InvalidParameter("tol must be positive".into()));
        }
        let rho = p.r();
        if rho == 0.0 {
            return Ok(*p);
        }
        let s = self.radial_inverse(rho, tol)?;
        Ok(p.scale(s / rho))
    }

    /// Dℶ = αI + x ⊗ ∇α with ∇α = −4a r² x/(κ + r⁴)².
    pub fn jacobian(&self, p: &Point4) -> Matrix4<f64> {
        let r2 = p.r2();
        let d = self.kappa + r2 * r2;
        let x = p.vector();
        let grad = x * (-4.0 * self.a * r2 / (d * d));
        Matrix4::identity() * self.alpha(r2) + x * grad.transpose()
    }

    /// ℶ*Ω/Ω − 1, in a form free of cancellation between O(1) terms.
    pub fn volume_defect(&self, p: &Point4) -> f64 {
        volume_defect_profile(self.a, self.kappa, p)
    }

    /// det Dℶ − 1 computed from the Jacobian matrix.
    pub fn volume_defect_det(&self, p: &Point4) -> f64 {
        self.jacobian(p).determinant() - 1.0
    }
}

/// Volume defect of z ↦ (1 + a/(κ + r⁴))z. With t = α − 1 and s = −x·∇α = 4ar⁴/(κ+r⁴)²,
/// det = (1+t)³(1+t−s), whose part linear in a is 4t − s = 4aκ/(κ+r⁴)².
/// κ = 0 is accepted for p ≠ 0.
pub fn volume_defect_profile(a: f64, kappa: f64, p: &Point4) -> f64 {
    let r2 = p.r2();
    let d = kappa + r2 * r2;
    let t = a / d;
    let s = 4.0 * a * r2 * r2 / (d * d);
    4.0 * a * kappa / (d * d) + t * t * (6.0 + 4.0 * t + t * t) - s * t * (3.0 + 3.0 * t + t * t)
}

/// d/da at a = 0 of the volume defect, by a central difference in a.
pub fn linearized_volume_defect(kappa: f64, p: &Point4, h: f64) -> f64 {
    (volume_defect_profile(h, kappa, p) - volume_defect_profile(-h, kappa, p)) / (2.0 * h)
}

/// The fibration quantities at ℶ(p).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulledBack {
    pub y: [f64; 3],
    pub r_big: f64,
    pub v_pot: f64,
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
}

impl PulledBack {
    fn from_uv(u2: f64, v2: f64, y: [f64; 3], m: f64, alpha: f64) -> PulledBack {
        let r_big = 0.5 * (u2 + v2);
        PulledBack {
            y,
            r_big,
            v_pot: (1.0 + 4.0 * m * r_big) / (2.0 * r_big),
            u: u2.sqrt(),
            v: v2.sqrt(),
            alpha,
        }
    }
}

/// y_j ∘ ℶ and friends, by solving at ℶ(p).
pub fn pulled_back_coords(beth: &BethMap, tn: &TaubNut, p: &Point4) -> Result<PulledBack> {
    let q = beth.apply(p);
    let c = tn.coords(&q)?;
    Ok(PulledBack {
        y: [c.y1, c.y2, c.y3],
        r_big: c.r_big,
        v_pot: c.v_pot,
        u: c.u,
        v: c.v,
        alpha: beth.alpha(p.r2()),
    })
}

/// Same data from the mass-shift identity u^b = α u_{mα²}, v^b = α v_{mα²}, y1^b = α² y1_{mα²},
/// y2^b = α² y2, y3^b = α² y3.
pub fn pulled_back_mass_shift(beth: &BethMap, tn: &TaubNut, p: &Point4) -> Result<PulledBack> {
    let al = beth.alpha(p.r2());
    let al2 = al * al;
    let shifted = TaubNut::new(tn.m() * al2)?;
    let c = shifted.coords(p)?;
    Ok(PulledBack::from_uv(
        al2 * c.u * c.u,
        al2 * c.v * c.v,
        [al2 * c.y1, al2 * c.y2, al2 * c.y3],
        tn.m(),
        al,
    ))
}

/// ∂y_{1,μ}/∂μ = −4R_μ y_{1,μ}/(1 + 4μR_μ) at fixed z.
pub fn y1_mass_derivative(p: &Point4, mu: f64) -> Result<f64> {
    let c = TaubNut::new(mu)?.coords(p)?;
    Ok(-4.0 * c.r_big * c.y1 / (1.0 + 4.0 * mu * c.r_big))
}

/// ℶ*𝐟 and the pulled-back coframe at p, by the chain rule on jets.
#[derive(Debug, Clone)]
pub struct PulledBackForms {
    pub metric: Matrix4<f64>,
    pub dy: [Vector4<f64>; 3],
    pub eta: Vector4<f64>,
}

pub fn fb_forms(beth: &BethMap, tn: &TaubNut, p: &Point4) -> Result<PulledBackForms> {
    if p.r2() == 0.0 {
        return Err(LabError::PoleAtOrigin);
    }
    let x = Jet::point(p.x, 1);
    let q = beth.apply_at(&x);
    let qp = Point4 { x: vvalues(&q).into() };
    let fib = fibration(&q, tn.m(), tn.coords(&qp)?.y1);
    let mut d = [[Jet::constant(0.0); 4]; 4];
    for i in 0..4 {
        for a in 0..4 {
            d[i][a] = Jet::constant(q[i].d1(a));
        }
    }
    let fv = |v: &V4<Jet>| v.map(|c| Jet::constant(c.value()));
    let g = metric_from(&fib);
    let gv: M4<Jet> = g.map(|row| row.map(|c| Jet::constant(c.value())));
    Ok(PulledBackForms {
        metric: values(&pullback_2tensor_jet(&gv, &d)),
        dy: [0, 1, 2].map(|j| vvalues(&pullback_covector_jet(&fv(&fib.dy[j]), &d))),
        eta: vvalues(&pullback_covector_jet(&fv(&fib.eta), &d)),
    })
}

/// ℶ*𝐟 at p.
pub fn fb_metric(beth: &BethMap, tn: &TaubNut, p: &Point4) -> Result<Matrix4<f64>> {
    Ok(fb_forms(beth, tn, p)?.metric)
}

/// Closed forms for the couplings of the pulled-back frame, written with
/// ζ the field dual to dy2 and ξ the circle generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedCouplings {
    pub dalpha_minus_i1xi: f64,
    pub dalpha_zeta: f64,
    pub dalpha_i1zeta: f64,
    pub dy1b_minus_i1xi: f64,
    pub dy1b_zeta: f64,
    pub dy1b_i1zeta: f64,
    pub etab_zeta: f64,
    pub etab_i1zeta: f64,
}

pub fn closed_couplings(beth: &BethMap, tn: &TaubNut, p: &Point4) -> Result<ClosedCouplings> {
    let m = tn.m();
    let c = tn.coords(p)?;
    let b = pulled_back_coords(beth, tn, p)?;
    let (a, k) = (beth.a, beth.kappa);
    let r2 = p.r2();
    let d2 = (k + r2 * r2).powi(2);
    let (n1, n2) = (p.z1().norm_sqr(), p.z2().norm_sqr());
    let al = b.alpha;
    let ch = (4.0 * m * c.y1).cosh();
    let sh = (4.0 * m * (c.y1 - b.y[0])).sinh();
    let da_rad = -4.0 * a * r2 / d2 * ch / c.r_big;
    let da = [-4.0 * a * (n1 * n1 - n2 * n2) / d2, da_rad * c.y2, da_rad * c.y3];
    let den = 1.0 + 4.0 * m * b.r_big;
    let dy1 = |yj: f64, dalpha: f64| al * al * yj * sh / (c.r_big * den) + 2.0 * b.y[0] * dalpha / (al * den);
    Ok(ClosedCouplings {
        dalpha_minus_i1xi: da[0],
        dalpha_zeta: da[1],
        dalpha_i1zeta: da[2],
        dy1b_minus_i1xi: 1.0 / b.v_pot + 2.0 * b.y[0] * da[0] / (al * den),
        dy1b_zeta: dy1(c.y2, da[1]),
        dy1b_i1zeta: dy1(c.y3, da[2]),
        etab_zeta: -al * al * c.y3 * sh / (2.0 * b.r_big * c.r_big),
        etab_i1zeta: al * al * c.y2 * sh / (2.0 * b.r_big * c.r_big),
    })
}

/// η^b = (1/(2R^b))[(u^b)² d arg z1 − (v^b)² d arg z2], valid where z1 z2 ≠ 0.
pub fn eta_b_closed_form(beth: &BethMap, tn: &TaubNut, p: &Point4) -> Result<Vector4<f64>> {
    let (n1, n2) = (p.z1().norm_sqr(), p.z2().norm_sqr());
    if n1 == 0.0 || n2 == 0.0 {
        return Err(LabError::DomainViolation { point: p.x });
    }
    let b = pulled_back_coords(beth, tn, p)?;
    let x = p.x;
    let dth1 = Vector4::new(-x[1], x[0], 0.0, 0.0) / n1;
    let dth2 = Vector4::new(0.0, 0.0, -x[3], x[2]) / n2;
    Ok((dth1 * (b.u * b.u) - dth2 * (b.v * b.v)) / (2.0 * b.r_big))
}

/// The chart map c ↦ c^b = (α² y1_{mα²}, α² y2, α² y3, ψ) on generic scalars; `y1b_root`
/// is the value of y1 at ℶ(x(c)). Also returns α − 1 and r² at c as plain numbers.
fn chart_beth<S: Scalar>(beth: &BethMap, chart: &FibrationChart, c: &[S; 4], y1b_root: f64) -> [S; 4] {
    let m = chart.tn.m();
    let [y1, y2, y3, psi] = *c;
    let rho2 = y2 * y2 + y3 * y3;
    let r = (y1 * y1 + rho2).sqrt();
    let (u2, v2) = if y1.val() >= 0.0 { (r + y1, rho2 / (r + y1)) } else { (rho2 / (r - y1), r - y1) };
    let e4 = (y1 * (4.0 * m)).exp();
    let a = u2 * e4;
    let b = v2 / e4;
    let al = beth.alpha(a + b);
    let al2 = al * al;
    let (a, b) = (a * al2, b * al2);
    let mut yb = S::cst(y1b_root);
    for _ in 0..3 {
        let ep = (yb * (4.0 * m)).exp();
        let em = ep.recip();
        let f = yb * 2.0 - a * em + b * ep;
        let df = (a * em + b * ep) * (4.0 * m) + 2.0;
        yb -= f / df;
    }
    [yb, y2 * al2, y3 * al2, psi]
}

fn chart_r2(chart: &FibrationChart, c: &[f64; 4]) -> f64 {
    let m = chart.tn.m();
    let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let ch = (4.0 * m * c[0]).cosh();
    let sh = (4.0 * m * c[0]).sinh();
    2.0 * (r * ch + c[0] * sh)
}

/// η in the chart: ½dψ + (y1/(2Rρ²))(y2 dy3 − y3 dy2).
fn chart_eta<S: Scalar>(c: &[S; 4]) -> V4<S> {
    let [y1, y2, y3, _] = *c;
    let rho2 = y2 * y2 + y3 * y3;
    let r = (y1 * y1 + rho2).sqrt();
    let k = y1 / (r * rho2 * 2.0);
    [S::zero(), -(k * y3), k * y2, S::cst(0.5)]
}

/// Differences between the pulled-back and original Taub-NUT data at one chart point,
/// each measured in 𝐟.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BethDifferences {
    pub r_big: f64,
    pub dy: [f64; 3],
    pub dr_big: f64,
    pub metric: f64,
    pub metric_derivative: f64,
    pub eta: f64,
    pub dy_forms: [f64; 3],
}

pub fn chart_differences(beth: &BethMap, chart: &FibrationChart, c: [f64; 4]) -> Result<BethDifferences> {
    let m = chart.tn.m();
    let r2 = chart_r2(chart, &c);
    let t = beth.excess(r2);
    let al2m1 = t * (2.0 + t);
    // y1 at ℶ(x(c)) from the scaled |z1|², |z2|²
    let rb = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let (u2, v2) = if c[0] >= 0.0 {
        (rb + c[0], (c[1] * c[1] + c[2] * c[2]) / (rb + c[0]))
    } else {
        ((c[1] * c[1] + c[2] * c[2]) / (rb - c[0]), rb - c[0])
    };
    let e4 = (4.0 * m * c[0]).exp();
    let y1b = solve_y1(u2 * e4 * (1.0 + al2m1), v2 / e4 * (1.0 + al2m1), m)?;

    let cj = Jet::point(c, 2);
    let cb = chart_beth(beth, chart, &cj, y1b);
    let mut jac = [[Jet::constant(0.0); 4]; 4];
    for i in 0..4 {
        for a in 0..4 {
            jac[i][a] = cb[i].deriv(a);
        }
    }
    let g = chart.metric_direct(&cj);
    let gb = pullback_2tensor_jet(&chart.metric_direct(&cb), &jac);
    let h: M4<Jet> = madd(&gb, &mscale(&g, Jet::constant(-1.0)));
    let g0 = values(&g);
    let pt = chart.point(c);
    let gi = inverse_spd(&g0, &pt)?;
    let dg = [0, 1, 2, 3].map(|k| Matrix4::from_fn(|i, j| g[i][j].d1(k)));
    let gam = christoffel(&gi, &dg);
    let h0 = values(&h);
    let dh = [0, 1, 2, 3].map(|k| Matrix4::from_fn(|i, j| h[i][j].d1(k)));
    let nab = covariant_derivative_2tensor(&h0, &dh, &gam);

    let eta = vvalues(&chart_eta(&cj));
    let eta_b = vvalues(&pullback_covector_jet(&chart_eta(&cb), &jac));
    let dy_forms = [0, 1, 2].map(|j| {
        let row = Vector4::from_fn(|a, _| jac[j][a].value());
        let mut e = Vector4::zeros();
        e[j] = 1.0;
        norm_covector(&(row - e), &gi)
    });

    let y = [c[0], c[1], c[2]];
    let dy = [cb[0].value() - c[0], al2m1 * c[1], al2m1 * c[2]];
    let yb = [cb[0].value(), cb[1].value(), cb[2].value()];
    let rbb = (yb[0] * yb[0] + yb[1] * yb[1] + yb[2] * yb[2]).sqrt();
    let num: f64 = (0..3).map(|j| dy[j] * (yb[j] + y[j])).sum();
    Ok(BethDifferences {
        r_big: rb,
        dy,
        dr_big: num / (rbb + rb),
        metric: norm_2tensor(&h0, &gi),
        metric_derivative: norm_3tensor(&nab, &gi),
        eta: norm_covector(&(eta_b - eta), &gi),
        dy_forms,
    })
}

/// The model complex structure I1 + ι1 against ℶ*I1 = Dℶ⁻¹ I1 Dℶ, in |·|_𝐞.
pub fn complex_structure_gap(beth: &BethMap, model: &AleModel, p: &Point4) -> Result<f64> {
    if p.r2() == 0.0 {
        return Err(LabError::PoleAtOrigin);
    }
    let d = beth.jacobian(p);
    let di = d.try_inverse().ok_or(LabError::DomainViolation { point: p.x })?;
    let i1 = crate::euclidean::structure(0);
    let pulled = di * i1 * d;
    let iota = values(&model.iota1(&p.x));
    Ok((i1 + iota - pulled).norm())
}

/// A path to infinity in the fibration chart: y1 fixed, (y2, y3) = ρ(cos θ, sin θ)
/// with R² = y1² + ρ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPath {
    pub y1: f64,
    pub angle: f64,
    pub psi: f64,
}

impl ChartPath {
    pub fn at(&self, r_big: f64) -> [f64; 4] {
        let rho = (r_big * r_big - self.y1 * self.y1).max(0.0).sqrt();
        [self.y1, rho * self.angle.cos(), rho * self.angle.sin(), self.psi]
    }
}

pub const DEFAULT_PATHS: [ChartPath; 3] = [
    ChartPath { y1: 0.3, angle: 0.9, psi: 0.2 },
    ChartPath { y1: -0.5, angle: 2.4, psi: -1.0 },
    ChartPath { y1: 0.05, angle: -1.3, psi: 2.0 },
];

/// Worst (largest) exponent over paths for every compared quantity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BethDecay {
    pub y: [DecayFit; 3],
    pub r_big: DecayFit,
    pub metric: DecayFit,
    pub metric_derivative: DecayFit,
    pub eta: DecayFit,
}

fn worst(fits: Vec<DecayFit>) -> DecayFit {
    fits.into_iter()
        .max_by(|a, b| a.exponent.total_cmp(&b.exponent))
        .expect("at least one path")
}

pub fn beth_decay(beth: &BethMap, chart: &FibrationChart, paths: &[ChartPath], radii: &[f64]) -> Result<BethDecay> {
    if paths.is_empty() {
        return Err(LabError::InvalidParameter("no paths".into()));
    }
    let mut per: Vec<[DecayFit; 7]> = Vec::new();
    for path in paths {
        let diffs: Vec<BethDifferences> =
            radii.iter().map(|&r| chart_differences(beth, chart, path.at(r))).collect::<Result<_>>()?;
        let fit = |f: &dyn Fn(&BethDifferences) -> f64| {
            fit_samples(radii.iter().zip(&diffs).map(|(&r, d)| (r, f(d).abs())).collect())
        };
        per.push([
            fit(&|d| d.dy[0])?,
            fit(&|d| d.dy[1])?,
            fit(&|d| d.dy[2])?,
            fit(&|d| d.dr_big)?,
            fit(&|d| d.metric)?,
            fit(&|d| d.metric_derivative)?,
            fit(&|d| d.eta)?,
        ]);
    }
    let col = |k: usize| worst(per.iter().map(|f| f[k].clone()).collect());
    Ok(BethDecay {
        y: [col(0), col(1), col(2)],
        r_big: col(3),
        metric: col(4),
        metric_derivative: col(5),
        eta: col(6),
    })
}

/// |ℶ*Ω/Ω − 1| along the Euclidean ray through `dir`.
pub fn volume_decay(beth: &BethMap, dir: &Point4, radii: &[f64]) -> Result<DecayFit> {
    let u = dir.scale(1.0 / dir.r());
    fit_decay(|r| Ok(beth.volume_defect(&u.scale(r)).abs()), radii)
}

/// |I1 + ι1 − ℶ*I1|_𝐞 along the Euclidean ray through `dir`.
pub fn complex_structure_decay(beth: &BethMap, model: &AleModel, dir: &Point4, radii: &[f64]) -> Result<DecayFit> {
    let u = dir.scale(1.0 / dir.r());
    fit_decay(|r| complex_structure_gap(beth, model, &u.scale(r)), radii)
}

/// Dℶ on generic scalars.
pub fn jacobian_jet<S: Scalar>(beth: &BethMap, x: &V4<S>) -> M4<S> {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    let d = r2 * r2 + beth.kappa;
    let grad = x.map(|c| c * r2 * (-4.0 * beth.a) / (d * d));
    let mut j = outer(x, &grad);
    let al = beth.alpha(r2);
    for (i, row) in j.iter_mut().enumerate() {
        row[i] += al;
    }
    j
}
