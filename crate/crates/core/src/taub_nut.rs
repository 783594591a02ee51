//! Taub-NUT metric on ℂ² in LeBrun's coordinates.
//!
//! The implicit equations |z1| = e^{m(u²−v²)}u, |z2| = e^{m(v²−u²)}v reduce to a
//! single equation for y1 = ½(u²−v²): with A = |z1|², B = |z2|²,
//! u² = A e^{−4m y1}, v² = B e^{4m y1} and 2y1 = u² − v². The left side minus the
//! right side is strictly increasing in y1, so the root is unique.

use crate::error::{LabError, Result};
use crate::euclidean::{act_on_covector, lift, outer, madd, mscale, structure, values, vvalues, M4, Point4, V4};
use crate::jet::{Jet, Scalar};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mass(f64);

impl Mass {
    pub fn new(m: f64) -> Result<Mass> {
        if m > 0.0 && m.is_finite() {
            Ok(Mass(m))
        } else {
            Err(LabError::InvalidParameter(format!("mass must be positive, got {m}")))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Asymptotic fibre length π√(2/m).
    pub fn fibre_length_at_infinity(&self) -> f64 {
        std::f64::consts::PI * (2.0 / self.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaubNutCoords {
    pub u: f64,
    pub v: f64,
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    /// R = ½(u² + v²).
    pub r_big: f64,
    /// V = (1 + 4mR)/(2R); infinite at the origin.
    pub v_pot: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Root of 2y − A e^{−4my} + B e^{4my} = 0 for A > B ≥ 0, in [0, (A−B)/2].
/// Works with H(y) = ln(2y + B e^{4my}) + 4my − ln A, which is increasing and
/// mildly curved, so Newton converges from the right end of the bracket.
fn solve_positive(a: f64, b: f64, m: f64) -> Result<f64> {
    let ln_a = a.ln();
    let ln_b = if b > 0.0 { b.ln() } else { f64::NEG_INFINITY };
    let h = |y: f64| -> (f64, f64) {
        let l1 = (2.0 * y).ln();
        let l2 = ln_b + 4.0 * m * y;
        let lse = log_add_exp(l1, l2);
        let val = lse + 4.0 * m * y - ln_a;
        // weight of the exponential term inside the logarithm
        let p = if l2 == f64::NEG_INFINITY { 0.0 } else { (l2 - lse).exp() };
        let deriv = if y > 0.0 { (1.0 - p) / y } else { f64::INFINITY } + 4.0 * m * p + 4.0 * m;
        (val, deriv)
    };
    let (mut lo, mut hi) = (0.0, 0.5 * (a - b));
    let mut y = hi;
    let mut last = f64::INFINITY;
    for it in 0..200 {
        let (val, der) = h(y);
        if val == 0.0 {
            return Ok(y);
        }
        if val > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let mut next = y - val / der;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - y).abs();
        y = next;
        if step <= 2.0 * f64::EPSILON * y.abs() || hi - lo <= 2.0 * f64::EPSILON * hi {
            return Ok(y);
        }
        last = val.abs();
        let _ = it;
    }
    Err(LabError::NoConvergence { iterations: 200, residual: last })
}

/// y1 as a function of A = |z1|², B = |z2|² and the mass.
pub fn solve_y1(a: f64, b: f64, m: f64) -> Result<f64> {
    if a == b {
        Ok(0.0)
    } else if a > b {
        solve_positive(a, b, m)
    } else {
        Ok(-solve_positive(b, a, m)?)
    }
}

pub fn solve_lebrun(p: &Point4, m: Mass) -> Result<TaubNutCoords> {
    let x = p.x;
    let a = x[0] * x[0] + x[1] * x[1];
    let b = x[2] * x[2] + x[3] * x[3];
    let mm = m.value();
    let y1 = solve_y1(a, b, mm)?;
    let u2 = if a > 0.0 { (a.ln() - 4.0 * mm * y1).exp() } else { 0.0 };
    let v2 = if b > 0.0 { (b.ln() + 4.0 * mm * y1).exp() } else { 0.0 };
    let r_big = 0.5 * (u2 + v2);
    let v_pot = if r_big > 0.0 { (1.0 + 4.0 * mm * r_big) / (2.0 * r_big) } else { f64::INFINITY };
    Ok(TaubNutCoords {
        u: u2.sqrt(),
        v: v2.sqrt(),
        y1,
        y2: x[0] * x[3] + x[1] * x[2],
        y3: x[1] * x[3] - x[0] * x[2],
        r_big,
        v_pot,
    })
}

/// Residual of the implicit equations for the returned (u, v), scaled by max(1, |p|).
pub fn lebrun_residual(p: &Point4, m: Mass, c: &TaubNutCoords) -> f64 {
    let mm = m.value();
    let d = mm * (c.u * c.u - c.v * c.v);
    let r1 = (p.z1().norm() - d.exp() * c.u).abs();
    let r2 = (p.z2().norm() - (-d).exp() * c.v).abs();
    r1.max(r2) / p.r().max(1.0)
}

/// Relative residual of the scalar equation 2y1 = |z1|² e^{-4my1} − |z2|² e^{4my1}
/// that the solver actually solves. Unlike [`lebrun_residual`] it is not inflated by
/// the conditioning of e^{±m(u² − v²)} at large m|p|².
pub fn lebrun_relative_residual(p: &Point4, m: Mass, c: &TaubNutCoords) -> f64 {
    let mm = m.value();
    let a = p.z1().norm_sqr();
    let b = p.z2().norm_sqr();
    let (ea, eb) = if a > 0.0 { ((a.ln() - 4.0 * mm * c.y1).exp(), 0.0) } else { (0.0, 0.0) };
    let eb = if b > 0.0 { (b.ln() + 4.0 * mm * c.y1).exp() } else { eb };
    let scale = 2.0 * c.y1.abs() + ea + eb;
    if scale == 0.0 {
        return 0.0;
    }
    (2.0 * c.y1 - ea + eb).abs() / scale
}

/// Relative defect of R² = y1² + y2² + y3².
pub fn radius_consistency(c: &TaubNutCoords) -> f64 {
    let lhs = c.r_big * c.r_big;
    let rhs = c.y1 * c.y1 + c.y2 * c.y2 + c.y3 * c.y3;
    (lhs - rhs).abs() / lhs.max(1e-300)
}

/// The fibration data evaluated on a generic scalar type.
#[derive(Debug, Clone, Copy)]
pub struct Fibration<S: Scalar> {
    pub y: [S; 3],
    pub r_big: S,
    pub v_pot: S,
    /// u² and v².
    pub u2: S,
    pub v2: S,
    /// e^{4m y1}
    pub e4: S,
    pub dy: [V4<S>; 3],
    pub eta: V4<S>,
}

/// Closed-form fibration data at `x`, given the converged y1 at x's value.
/// On jets, three Newton steps lift the root to full derivative order.
pub fn fibration<S: Scalar>(x: &V4<S>, m: f64, y1_root: f64) -> Fibration<S> {
    let a = x[0] * x[0] + x[1] * x[1];
    let b = x[2] * x[2] + x[3] * x[3];
    let mut y1 = S::cst(y1_root);
    for _ in 0..3 {
        let ep = (y1 * (4.0 * m)).exp();
        let em = ep.recip();
        let f = y1 * 2.0 - a * em + b * ep;
        let df = (a * em + b * ep) * (4.0 * m) + 2.0;
        y1 -= f / df;
    }
    let e4 = (y1 * (4.0 * m)).exp();
    let em = e4.recip();
    let u2 = a * em;
    let v2 = b * e4;
    let r_big = (u2 + v2) * 0.5;
    let v_pot = (r_big * (4.0 * m) + 1.0) / (r_big * 2.0);
    let denom = ((r_big * (4.0 * m) + 1.0) * 2.0).recip();
    let dy1 = [
        x[0] * em * 2.0 * denom,
        x[1] * em * 2.0 * denom,
        -(x[2] * e4 * 2.0 * denom),
        -(x[3] * e4 * 2.0 * denom),
    ];
    let dy2 = [x[3], x[2], x[1], x[0]];
    let dy3 = [-x[2], x[3], -x[0], x[1]];
    let i1 = lift::<S>(&structure(0));
    let vdy1 = dy1.map(|c| c * v_pot);
    let eta = act_on_covector(&i1, &vdy1);
    Fibration {
        y: [y1, x[0] * x[3] + x[1] * x[2], x[1] * x[3] - x[0] * x[2]],
        r_big,
        v_pot,
        u2,
        v2,
        e4,
        dy: [dy1, dy2, dy3],
        eta,
    }
}

/// f = V Σ dy_j² + V⁻¹ η².
pub fn metric_from<S: Scalar>(fib: &Fibration<S>) -> M4<S> {
    let mut g = mscale(&outer(&fib.eta, &fib.eta), fib.v_pot.recip());
    for dy in &fib.dy {
        g = madd(&g, &mscale(&outer(dy, dy), fib.v_pot));
    }
    g
}

/// Point-wise Taub-NUT evaluator for one mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaubNut {
    pub mass: Mass,
}

impl TaubNut {
    pub fn new(m: f64) -> Result<TaubNut> {
        Ok(TaubNut { mass: Mass::new(m)? })
    }

    pub fn m(&self) -> f64 {
        self.mass.value()
    }

    pub fn coords(&self, p: &Point4) -> Result<TaubNutCoords> {
        solve_lebrun(p, self.mass)
    }

    /// Fibration data on jets of the given degree (p ≠ 0).
    pub fn fibration_jet(&self, p: &Point4, degree: usize) -> Result<Fibration<Jet>> {
        self.fibration_at(&Jet::point(p.x, degree), p)
    }

    /// Fibration data at arbitrary scalar inputs whose values are `p`.
    pub fn fibration_at<S: Scalar>(&self, x: &V4<S>, p: &Point4) -> Result<Fibration<S>> {
        if p.r2() == 0.0 {
            return Err(LabError::PoleAtOrigin);
        }
        let c = self.coords(p)?;
        Ok(fibration(x, self.m(), c.y1))
    }

    pub fn potential(&self, p: &Point4) -> Result<f64> {
        let c = self.coords(p)?;
        Ok(0.5 * (c.r_big + self.m() * (c.r_big * c.r_big + c.y1 * c.y1)))
    }

    /// φ_m = ¼(u² + v² + m(u⁴ + v⁴)).
    pub fn potential_uv(&self, p: &Point4) -> Result<f64> {
        let c = self.coords(p)?;
        let (u2, v2) = (c.u * c.u, c.v * c.v);
        Ok(0.25 * (u2 + v2 + self.m() * (u2 * u2 + v2 * v2)))
    }

    /// φ_m on generic scalars.
    pub fn potential_at<S: Scalar>(&self, x: &V4<S>, p: &Point4) -> Result<S> {
        if p.r2() == 0.0 {
            return Ok(S::zero());
        }
        let f = self.fibration_at(x, p)?;
        Ok((f.r_big + (f.r_big * f.r_big + f.y[0] * f.y[0]) * self.m()) * 0.5)
    }

    pub fn metric(&self, p: &Point4) -> Result<Matrix4<f64>> {
        if p.r2() == 0.0 {
            return Ok(Matrix4::identity());
        }
        Ok(values(&metric_from(&self.fibration_at(&p.x, p)?)))
    }

    /// Metric entries as jets (p ≠ 0).
    pub fn metric_jet(&self, p: &Point4, degree: usize) -> Result<M4<Jet>> {
        Ok(metric_from(&self.fibration_jet(p, degree)?))
    }

    pub fn eta(&self, p: &Point4) -> Result<Vector4<f64>> {
        Ok(vvalues(&self.fibration_at(&p.x, p)?.eta))
    }

    /// Coframe (V^{-1/2}η, V^{1/2}dy1, V^{1/2}dy2, V^{1/2}dy3) and its dual frame.
    pub fn frames(&self, p: &Point4) -> Result<Frames> {
        if p.r2() == 0.0 {
            return Err(LabError::OriginFrame);
        }
        let f = self.fibration_at(&p.x, p)?;
        let sv = f.v_pot.sqrt();
        let rows = [
            vvalues(&f.eta) / sv,
            vvalues(&f.dy[0]) * sv,
            vvalues(&f.dy[1]) * sv,
            vvalues(&f.dy[2]) * sv,
        ];
        let co = Matrix4::from_fn(|a, i| rows[a][i]);
        let inv = co.try_inverse().ok_or(LabError::OriginFrame)?;
        Ok(Frames {
            coframe: rows,
            frame: [0, 1, 2, 3].map(|b| inv.column(b).into_owned()),
        })
    }

    /// J2, J3 solving f(J·,·) = ω_j^e, i.e. J = f⁻¹ I_j.
    pub fn companion_structures(&self, p: &Point4) -> Result<[Matrix4<f64>; 2]> {
        let g = self.metric(p)?;
        let gi = crate::calculus::inverse_spd(&g, p)?;
        Ok([gi * structure(1), gi * structure(2)])
    }

    /// Length 2πV^{−1/2} of the circle fibre through p.
    pub fn fibre_length(&self, p: &Point4) -> Result<f64> {
        let c = self.coords(p)?;
        Ok(2.0 * std::f64::consts::PI / c.v_pot.sqrt())
    }

    /// Point with prescribed fibration coordinates y and fibre angle ψ.
    /// z1 z2 = i(y2 + i y3); arg z1 − arg z2 = ψ.
    pub fn point_from_y(&self, y: [f64; 3], psi: f64) -> Point4 {
        let m = self.m();
        let rb = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        let u2 = rb + y[0];
        let v2 = rb - y[0];
        let a1 = (2.0 * m * y[0]).exp() * u2.max(0.0).sqrt();
        let a2 = (-2.0 * m * y[0]).exp() * v2.max(0.0).sqrt();
        let w = num_complex::Complex64::new(-y[2], y[1]);
        let sum = if w.norm() > 0.0 { w.arg() } else { 0.0 };
        let t1 = 0.5 * (sum + psi);
        let t2 = 0.5 * (sum - psi);
        Point4::new(a1 * t1.cos(), a1 * t1.sin(), a2 * t2.cos(), a2 * t2.sin())
    }
}

/// The fibration chart c = (y1, y2, y3, ψ) with ψ = arg z1 − arg z2, valid off the
/// axis y2 = y3 = 0. In this chart 𝐟_m = V|dy|² + V⁻¹η² with η = ½dψ + y1/(2R) dσ,
/// σ = arg z1 + arg z2, and its condition number stays near 16m² at large R,
/// which is why large-radius curvature and decay checks are done here.
#[derive(Debug, Clone, Copy)]
pub struct FibrationChart {
    pub tn: TaubNut,
}

impl FibrationChart {
    pub fn new(tn: TaubNut) -> FibrationChart {
        FibrationChart { tn }
    }

    /// x(c) on generic scalars. σ is expanded around its value at the base point.
    pub fn to_x<S: Scalar>(&self, c: &[S; 4]) -> V4<S> {
        let m = self.tn.m();
        let [y1, y2, y3, psi] = *c;
        let rho2 = y2 * y2 + y3 * y3;
        let r = (y1 * y1 + rho2).sqrt();
        let (u2, v2) = if y1.val() >= 0.0 {
            (r + y1, rho2 / (r + y1))
        } else {
            (rho2 / (r - y1), r - y1)
        };
        let a1 = (y1 * (2.0 * m)).exp() * u2.sqrt();
        let a2 = (y1 * (-2.0 * m)).exp() * v2.sqrt();
        let (a, b) = (-y3, y2);
        let (a0, b0) = (a.val(), b.val());
        let sigma = (((b * a0 - a * b0) / (a * a0 + b * b0)).atan()) + b0.atan2(a0);
        let t1 = (sigma + psi) * 0.5;
        let t2 = (sigma - psi) * 0.5;
        [a1 * t1.cos(), a1 * t1.sin(), a2 * t2.cos(), a2 * t2.sin()]
    }

    pub fn point(&self, c: [f64; 4]) -> Point4 {
        Point4 { x: self.to_x(&c) }
    }

    /// Chart point on the ray through direction `dir` in y-space at radius R.
    pub fn ray(dir: [f64; 3], r: f64, psi: f64) -> [f64; 4] {
        let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        [dir[0] * r / n, dir[1] * r / n, dir[2] * r / n, psi]
    }

    /// x as jets in the chart variables together with the Jacobian ∂x/∂c
    /// (one degree lower).
    pub fn embed(&self, c: [f64; 4], degree: usize) -> (V4<Jet>, M4<Jet>) {
        let cj = Jet::point(c, degree + 1);
        let x = self.to_x(&cj);
        let mut d = [[Jet::constant(0.0); 4]; 4];
        for i in 0..4 {
            for a in 0..4 {
                d[i][a] = x[i].deriv(a);
            }
        }
        (x, d)
    }

    /// Pullback of 𝐟_m through the chart, as jets of the given degree.
    pub fn metric_pullback(&self, c: [f64; 4], degree: usize) -> M4<Jet> {
        let (x, d) = self.embed(c, degree);
        let f = metric_from(&fibration(&x, self.tn.m(), c[0]));
        pullback_2tensor_jet(&f, &d)
    }

    /// The Gibbons-Hawking form of the same metric, written directly in the chart.
    pub fn metric_direct<S: Scalar>(&self, c: &[S; 4]) -> M4<S> {
        let m = self.tn.m();
        let [y1, y2, y3, _] = *c;
        let rho2 = y2 * y2 + y3 * y3;
        let r = (y1 * y1 + rho2).sqrt();
        let v = r.recip() * 0.5 + 2.0 * m;
        let k = y1 / (r * rho2 * 2.0);
        let eta = [S::zero(), -(k * y3), k * y2, S::cst(0.5)];
        let mut g = mscale(&outer(&eta, &eta), v.recip());
        for i in 0..3 {
            g[i][i] += v;
        }
        g
    }

    pub fn curvature(&self, c: [f64; 4]) -> Result<crate::calculus::Curvature> {
        let g = self.metric_pullback(c, 2);
        let p = self.point(c);
        crate::calculus::curvature(&crate::calculus::MetricDerivs::from_jets(&g), &p)
    }
}

/// Dᵀ T D for a 2-tensor T in x-coordinates and D = ∂x/∂c.
pub fn pullback_2tensor_jet<S: Scalar>(t: &M4<S>, d: &M4<S>) -> M4<S> {
    let mut out = [[S::zero(); 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let mut acc = S::zero();
            for i in 0..4 {
                for j in 0..4 {
                    acc += d[i][a] * t[i][j] * d[j][b];
                }
            }
            out[a][b] = acc;
        }
    }
    out
}

/// Dᵀ β for a covector β in x-coordinates.
pub fn pullback_covector_jet<S: Scalar>(beta: &V4<S>, d: &M4<S>) -> V4<S> {
    let mut out = [S::zero(); 4];
    for (a, o) in out.iter_mut().enumerate() {
        for i in 0..4 {
            *o += beta[i] * d[i][a];
        }
    }
    out
}

/// S¹ generator ξ for (z1, z2) ↦ (e^{iθ}z1, e^{−iθ}z2).
pub fn xi(p: &Point4) -> Vector4<f64> {
    let x = p.x;
    Vector4::new(-x[1], x[0], x[3], -x[2])
}

pub fn xi_at<S: Scalar>(x: &V4<S>) -> V4<S> {
    [-x[1], x[0], x[3], -x[2]]
}

#[derive(Debug, Clone)]
pub struct Frames {
    /// e_0*, …, e_3* as covectors.
    pub coframe: [Vector4<f64>; 4],
    /// e_0, …, e_3 as vectors.
    pub frame: [Vector4<f64>; 4],
}

impl Frames {
    /// max |e_i*(e_j) − δ_ij|.
    pub fn duality_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let d = if i == j { 1.0 } else { 0.0 };
                m = m.max((self.coframe[i].dot(&self.frame[j]) - d).abs());
            }
        }
        m
    }
}

/// The horizontal field dual to dy2 (named ζ in the frame formulas).
pub fn zeta_frame(tn: &TaubNut, p: &Point4) -> Result<Vector4<f64>> {
    let f = tn.frames(p)?;
    let c = tn.coords(p)?;
    Ok(f.frame[2] * c.v_pot.sqrt())
}

/// Closed form of the same field: ζ = w1∂z1 + w2∂z2 + c.c. with
/// w1 = i e^{4my1} z̄2/(2R), w2 = i e^{−4my1} z̄1/(2R).
pub fn zeta_closed_form(tn: &TaubNut, p: &Point4) -> Result<Vector4<f64>> {
    let c = tn.coords(p)?;
    let i2r = num_complex::Complex64::new(0.0, 0.5 / c.r_big);
    let e = (4.0 * tn.m() * c.y1).exp();
    let w1 = p.z2().conj() * e * i2r;
    let w2 = p.z1().conj() / e * i2r;
    Ok(Vector4::new(w1.re, w1.im, w2.re, w2.im))
}

/// Jet-exact curvature of f_m at p.
pub fn curvature_exact(tn: &TaubNut, p: &Point4) -> Result<crate::calculus::Curvature> {
    let g = tn.metric_jet(p, 2)?;
    crate::calculus::curvature(&crate::calculus::MetricDerivs::from_jets(&g), p)
}

/// |∇e_j|_f for each frame vector, with exact derivatives.
pub fn frame_derivative_norms(tn: &TaubNut, p: &Point4) -> Result<[f64; 4]> {
    let fib = tn.fibration_jet(p, 2)?;
    let g = metric_from(&fib);
    let md = crate::calculus::MetricDerivs::from_jets(&g);
    let gi = crate::calculus::inverse_spd(&md.g, p)?;
    let gam = crate::calculus::christoffel(&gi, &md.dg);
    // frame e_a = columns of the inverse coframe matrix; differentiate via
    // ∂(C⁻¹) = −C⁻¹ (∂C) C⁻¹.
    let sv = fib.v_pot.sqrt();
    let rows: [V4<Jet>; 4] = [
        fib.eta.map(|c| c / sv),
        fib.dy[0].map(|c| c * sv),
        fib.dy[1].map(|c| c * sv),
        fib.dy[2].map(|c| c * sv),
    ];
    let c0 = Matrix4::from_fn(|a, i| rows[a][i].value());
    let ci = c0.try_inverse().ok_or(LabError::OriginFrame)?;
    let dci: [Matrix4<f64>; 4] = [0, 1, 2, 3].map(|k| {
        let dc = Matrix4::from_fn(|a, i| rows[a][i].d1(k));
        -ci * dc * ci
    });
    let mut out = [0.0; 4];
    for (b, o) in out.iter_mut().enumerate() {
        let x = ci.column(b).into_owned();
        let dx = [0, 1, 2, 3].map(|k| dci[k].column(b).into_owned());
        let nab = crate::calculus::covariant_derivative_vector(&x, &dx, &gam);
        *o = crate::calculus::norm_mixed(&nab, &md.g, &gi);
    }
    Ok(out)
}
