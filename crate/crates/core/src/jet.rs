//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] carries every partial derivative of a quantity up to a fixed total
//! degree with respect to at most four input variables. Evaluating a closed-form
//! expression on jets gives exact derivatives (up to rounding), which is what the
//! large-radius decay fits need: finite differences lose too many digits once the
//! Taub-NUT metric becomes strongly anisotropic in the x coordinates.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

/// Maximum number of coefficients (4 variables, total degree 4).
pub const MAX_COEFFS: usize = 70;
pub const MAX_VARS: usize = 4;
pub const MAX_DEGREE: usize = 4;

/// Monomial layout and product table for one (variables, degree) pair.
#[derive(Debug)]
pub struct Shape {
    pub nvars: usize,
    pub degree: usize,
    exps: Vec<[u8; MAX_VARS]>,
    mul: Vec<(u8, u8, u8)>,
    /// For each variable: (source index, destination index, factor) of d/dx_i.
    deriv: [Vec<(u8, u8, f64)>; MAX_VARS],
}

impl Shape {
    fn build(nvars: usize, degree: usize) -> Shape {
        let mut exps = Vec::new();
        for total in 0..=degree {
            let mut cur = [0u8; MAX_VARS];
            gen_exps(nvars, total, 0, &mut cur, &mut exps);
        }
        let index = |e: &[u8; MAX_VARS], exps: &Vec<[u8; MAX_VARS]>| exps.iter().position(|x| x == e);
        let mut mul = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                let mut s = [0u8; MAX_VARS];
                for k in 0..MAX_VARS {
                    s[k] = a[k] + b[k];
                }
                if let Some(k) = index(&s, &exps) {
                    mul.push((i as u8, j as u8, k as u8));
                }
            }
        }
        let mut deriv: [Vec<(u8, u8, f64)>; MAX_VARS] = Default::default();
        for (v, dv) in deriv.iter_mut().enumerate().take(nvars) {
            for (i, a) in exps.iter().enumerate() {
                if a[v] == 0 {
                    continue;
                }
                let mut b = *a;
                b[v] -= 1;
                let k = index(&b, &exps).expect("lower monomial present");
                dv.push((i as u8, k as u8, a[v] as f64));
            }
        }
        Shape { nvars, degree, exps, mul, deriv }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn index_of(&self, e: [u8; MAX_VARS]) -> Option<usize> {
        self.exps.iter().position(|x| *x == e)
    }
}

fn gen_exps(nvars: usize, left: usize, var: usize, cur: &mut [u8; MAX_VARS], out: &mut Vec<[u8; MAX_VARS]>) {
    if var + 1 == nvars {
        cur[var] = left as u8;
        out.push(*cur);
        cur[var] = 0;
        return;
    }
    for k in (0..=left).rev() {
        cur[var] = k as u8;
        gen_exps(nvars, left - k, var + 1, cur, out);
    }
    cur[var] = 0;
}

/// Shared shape for `nvars` variables truncated at total degree `degree`.
pub fn shape(nvars: usize, degree: usize) -> &'static Shape {
    static SHAPES: OnceLock<Vec<Shape>> = OnceLock::new();
    assert!((1..=MAX_VARS).contains(&nvars) && degree <= MAX_DEGREE, "unsupported jet shape");
    let all = SHAPES.get_or_init(|| {
        let mut v = Vec::new();
        for n in 1..=MAX_VARS {
            for d in 0..=MAX_DEGREE {
                v.push(Shape::build(n, d));
            }
        }
        v
    });
    &all[(nvars - 1) * (MAX_DEGREE + 1) + degree]
}

/// A truncated Taylor expansion. `shape == None` marks a plain constant.
#[derive(Clone, Copy)]
pub struct Jet {
    shape: Option<&'static Shape>,
    c: [f64; MAX_COEFFS],
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let n = self.shape.map_or(1, |s| s.len());
        f.debug_struct("Jet").field("coeffs", &&self.c[..n]).finish()
    }
}

impl Jet {
    pub fn constant(x: f64) -> Jet {
        let mut c = [0.0; MAX_COEFFS];
        c[0] = x;
        Jet { shape: None, c }
    }

    /// The coordinate function x_i expanded at `value`.
    pub fn var(shape: &'static Shape, i: usize, value: f64) -> Jet {
        let mut e = [0u8; MAX_VARS];
        e[i] = 1;
        let mut c = [0.0; MAX_COEFFS];
        c[0] = value;
        if shape.degree >= 1 {
            c[shape.index_of(e).expect("linear monomial")] = 1.0;
        }
        Jet { shape: Some(shape), c }
    }

    /// All coordinates of a point in ℝ⁴ as jets of the given degree.
    pub fn point(p: [f64; 4], degree: usize) -> [Jet; 4] {
        let s = shape(4, degree);
        [Jet::var(s, 0, p[0]), Jet::var(s, 1, p[1]), Jet::var(s, 2, p[2]), Jet::var(s, 3, p[3])]
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn degree(&self) -> usize {
        self.shape.map_or(0, |s| s.degree)
    }

    /// Partial derivative ∂^e evaluated at the expansion point.
    pub fn partial(&self, e: [u8; MAX_VARS]) -> f64 {
        let s = match self.shape {
            None => return if e == [0; MAX_VARS] { self.c[0] } else { 0.0 },
            Some(s) => s,
        };
        match s.index_of(e) {
            None => 0.0,
            Some(k) => {
                let fact: f64 = e.iter().map(|&n| (1..=n as u32).product::<u32>() as f64).product();
                self.c[k] * fact
            }
        }
    }

    pub fn d1(&self, i: usize) -> f64 {
        let mut e = [0u8; MAX_VARS];
        e[i] += 1;
        self.partial(e)
    }

    pub fn d2(&self, i: usize, j: usize) -> f64 {
        let mut e = [0u8; MAX_VARS];
        e[i] += 1;
        e[j] += 1;
        self.partial(e)
    }

    pub fn gradient(&self) -> [f64; 4] {
        [self.d1(0), self.d1(1), self.d1(2), self.d1(3)]
    }

    /// d/dx_i as a jet; the top-degree information is lost.
    pub fn deriv(&self, i: usize) -> Jet {
        let s = match self.shape {
            None => return Jet::constant(0.0),
            Some(s) => s,
        };
        let mut c = [0.0; MAX_COEFFS];
        for &(src, dst, f) in &s.deriv[i] {
            c[dst as usize] += f * self.c[src as usize];
        }
        Jet { shape: Some(s), c }
    }

    fn joint(a: Option<&'static Shape>, b: Option<&'static Shape>) -> Option<&'static Shape> {
        match (a, b) {
            (None, s) | (s, None) => s,
            (Some(x), Some(y)) => {
                assert!(std::ptr::eq(x, y), "jet shape mismatch");
                Some(x)
            }
        }
    }

    /// Compose with a univariate function given its Taylor coefficients
    /// t_k = f^(k)(a)/k! at a = self.value().
    fn compose(&self, t: &[f64]) -> Jet {
        let s = match self.shape {
            None => return Jet::constant(t[0]),
            Some(s) => s,
        };
        let mut delta = *self;
        delta.c[0] = 0.0;
        let d = s.degree;
        let mut out = Jet::constant(t[d]);
        out.shape = Some(s);
        for k in (0..d).rev() {
            out = out * delta;
            out.c[0] += t[k];
        }
        out
    }

    fn taylor_len(&self) -> usize {
        self.degree() + 1
    }
}

impl From<f64> for Jet {
    fn from(x: f64) -> Jet {
        Jet::constant(x)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let shape = Jet::joint(self.shape, o.shape);
        let n = shape.map_or(1, |s| s.len());
        let mut c = self.c;
        for k in 0..n {
            c[k] += o.c[k];
        }
        Jet { shape, c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let shape = Jet::joint(self.shape, o.shape);
        let n = shape.map_or(1, |s| s.len());
        let mut c = self.c;
        for k in 0..n {
            c[k] -= o.c[k];
        }
        Jet { shape, c }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        match (self.shape, o.shape) {
            (None, _) => o * self.c[0],
            (_, None) => self * o.c[0],
            (Some(a), Some(b)) => {
                assert!(std::ptr::eq(a, b), "jet shape mismatch");
                let mut c = [0.0; MAX_COEFFS];
                for &(i, j, k) in &a.mul {
                    c[k as usize] += self.c[i as usize] * o.c[j as usize];
                }
                Jet { shape: Some(a), c }
            }
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        if o.shape.is_none() {
            return self * (1.0 / o.c[0]);
        }
        self * o.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, x: f64) -> Jet {
        self.c[0] += x;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, x: f64) -> Jet {
        self.c[0] -= x;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, x: f64) -> Jet {
        let n = self.shape.map_or(1, |s| s.len());
        for k in 0..n {
            self.c[k] *= x;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, x: f64) -> Jet {
        self * (1.0 / x)
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, o: Jet) {
        *self = *self - o;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, o: Jet) {
        *self = *self * o;
    }
}

/// Real scalars that closed-form fields can be evaluated on: plain `f64` for values,
/// [`Jet`] for exact derivatives.
pub trait Scalar:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
{
    fn cst(x: f64) -> Self;
    fn val(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn recip(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn atan(self) -> Self;
    /// Highest derivative order carried (0 for plain numbers).
    fn order(&self) -> usize;
    /// Compose with a univariate function from its Taylor coefficients
    /// t_k = f^(k)(a)/k! at a = self.val(); needs order() + 1 of them.
    fn taylor(self, t: &[f64]) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn sq(self) -> Self {
        self * self
    }
    fn powi(self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut out = Self::one();
        for _ in 0..n {
            out *= self;
        }
        out
    }
}

impl Scalar for f64 {
    fn cst(x: f64) -> f64 {
        x
    }
    fn val(&self) -> f64 {
        *self
    }
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    fn ln(self) -> f64 {
        f64::ln(self)
    }
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
    fn recip(self) -> f64 {
        1.0 / self
    }
    fn powf(self, p: f64) -> f64 {
        f64::powf(self, p)
    }
    fn sinh(self) -> f64 {
        f64::sinh(self)
    }
    fn cosh(self) -> f64 {
        f64::cosh(self)
    }
    fn sin(self) -> f64 {
        f64::sin(self)
    }
    fn cos(self) -> f64 {
        f64::cos(self)
    }
    fn atan(self) -> f64 {
        f64::atan(self)
    }
    fn powi(self, n: i32) -> f64 {
        f64::powi(self, n)
    }
    fn order(&self) -> usize {
        0
    }
    fn taylor(self, t: &[f64]) -> f64 {
        t[0]
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// Generalized binomial coefficient C(p, k).
fn binom(p: f64, k: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out *= (p - i as f64) / (i as f64 + 1.0);
    }
    out
}

impl Scalar for Jet {
    fn cst(x: f64) -> Jet {
        Jet::constant(x)
    }
    fn order(&self) -> usize {
        self.degree()
    }
    fn taylor(self, t: &[f64]) -> Jet {
        self.compose(t)
    }
    fn val(&self) -> f64 {
        self.c[0]
    }
    fn exp(self) -> Jet {
        let e = self.c[0].exp();
        let t: Vec<f64> = (0..self.taylor_len()).map(|k| e / factorial(k)).collect();
        self.compose(&t)
    }
    fn ln(self) -> Jet {
        let a = self.c[0];
        let t: Vec<f64> = (0..self.taylor_len())
            .map(|k| {
                if k == 0 {
                    a.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * a.powi(k as i32))
                }
            })
            .collect();
        self.compose(&t)
    }
    fn sqrt(self) -> Jet {
        self.powf(0.5)
    }
    fn recip(self) -> Jet {
        let a = self.c[0];
        let t: Vec<f64> = (0..self.taylor_len())
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / a.powi(k as i32 + 1))
            .collect();
        self.compose(&t)
    }
    fn powf(self, p: f64) -> Jet {
        let a = self.c[0];
        let t: Vec<f64> = (0..self.taylor_len()).map(|k| binom(p, k) * a.powf(p - k as f64)).collect();
        self.compose(&t)
    }
    fn sinh(self) -> Jet {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        let t: Vec<f64> = (0..self.taylor_len())
            .map(|k| if k % 2 == 0 { s } else { c } / factorial(k))
            .collect();
        self.compose(&t)
    }
    fn cosh(self) -> Jet {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        let t: Vec<f64> = (0..self.taylor_len())
            .map(|k| if k % 2 == 0 { c } else { s } / factorial(k))
            .collect();
        self.compose(&t)
    }
    fn sin(self) -> Jet {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        let cyc = [s, c, -s, -c];
        let t: Vec<f64> = (0..self.taylor_len()).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&t)
    }
    fn cos(self) -> Jet {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        let cyc = [c, -s, -c, s];
        let t: Vec<f64> = (0..self.taylor_len()).map(|k| cyc[k % 4] / factorial(k)).collect();
        self.compose(&t)
    }
    fn atan(self) -> Jet {
        let a = self.c[0];
        let n = self.taylor_len();
        // Taylor coefficients of 1/(1+t²) at a, integrated once
        let sh = shape(1, n.saturating_sub(1).max(1));
        let tau = Jet::var(sh, 0, a);
        let g = (tau * tau + 1.0).recip();
        let mut t = vec![a.atan()];
        for k in 1..n {
            t.push(g.partial([(k - 1) as u8, 0, 0, 0]) / factorial(k - 1) / k as f64);
        }
        self.compose(&t)
    }
    fn powi(self, n: i32) -> Jet {
        if self.shape.is_none() {
            return Jet::constant(self.c[0].powi(n));
        }
        if n >= 0 {
            let mut out = Jet::constant(1.0);
            for _ in 0..n {
                out = out * self;
            }
            out
        } else {
            self.powi(-n).recip()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_sizes() {
        assert_eq!(shape(4, 3).len(), 35);
        assert_eq!(shape(4, 4).len(), 70);
        assert_eq!(shape(3, 4).len(), 35);
        assert_eq!(shape(1, 2).len(), 3);
    }

    #[test]
    fn polynomial_partials() {
        let [x, y, z, _] = Jet::point([1.5, -0.5, 2.0, 0.0], 3);
        let f = x * x * y + z * z * z;
        assert!((f.value() - (1.5 * 1.5 * -0.5 + 8.0)).abs() < 1e-15);
        assert!((f.d1(0) - 2.0 * 1.5 * -0.5).abs() < 1e-15);
        assert!((f.d2(0, 1) - 3.0).abs() < 1e-15);
        assert!((f.partial([0, 0, 3, 0]) - 6.0).abs() < 1e-14);
        assert!((f.partial([2, 1, 0, 0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn transcendental_partials() {
        let s = shape(1, 4);
        let x = Jet::var(s, 0, 0.7);
        let checks: [(Jet, [f64; 5]); 3] = [
            (x.exp(), [0.7f64.exp(); 5]),
            (x.sinh(), [0.7f64.sinh(), 0.7f64.cosh(), 0.7f64.sinh(), 0.7f64.cosh(), 0.7f64.sinh()]),
            (
                x.ln(),
                [0.7f64.ln(), 1.0 / 0.7, -1.0 / 0.49, 2.0 / 0.343, -6.0 / 0.2401],
            ),
        ];
        for (j, want) in checks {
            for (k, w) in want.iter().enumerate() {
                let got = j.partial([k as u8, 0, 0, 0]);
                assert!((got - w).abs() < 1e-12 * w.abs().max(1.0), "k={k} got={got} want={w}");
            }
        }
        let r = x.recip();
        assert!((r.partial([3, 0, 0, 0]) + 6.0 / 0.7f64.powi(4)).abs() < 1e-10);
        let q = x.sqrt() * x.sqrt();
        assert!((q.partial([1, 0, 0, 0]) - 1.0).abs() < 1e-13);
        assert!(q.partial([2, 0, 0, 0]).abs() < 1e-12);
    }

    #[test]
    fn trig_partials() {
        let [x, y, _, _] = Jet::point([0.3, -0.7, 0.0, 0.0], 4);
        let f = (x * y).sin() + x.cos() * 2.0 + (x - y).atan();
        let (a, b) = (0.3f64, -0.7f64);
        let t = a - b;
        assert!((f.value() - ((a * b).sin() + 2.0 * a.cos() + t.atan())).abs() < 1e-15);
        // d/dx: y cos(xy) − 2 sin x + 1/(1+t²)
        let fx = b * (a * b).cos() - 2.0 * a.sin() + 1.0 / (1.0 + t * t);
        assert!((f.d1(0) - fx).abs() < 1e-14);
        // d³/dx³ of atan(x−y): (6t² − 2)/(1+t²)³
        let g = (x - y).atan();
        assert!((g.partial([3, 0, 0, 0]) - (6.0 * t * t - 2.0) / (1.0 + t * t).powi(3)).abs() < 1e-13);
        let h = x.sin();
        assert!((h.partial([4, 0, 0, 0]) - a.sin()).abs() < 1e-14);
    }

    #[test]
    fn derivative_lowers_degree() {
        let [x, y, _, _] = Jet::point([0.3, 0.4, 0.0, 0.0], 3);
        let f = (x * y).exp();
        let fx = f.deriv(0);
        let want = 0.4 * (0.12f64).exp();
        assert!((fx.value() - want).abs() < 1e-14);
        // d/dy of fx = exp(xy)(1 + xy)
        assert!((fx.d1(1) - 0.12f64.exp() * 1.12).abs() < 1e-13);
    }

    #[test]
    fn constants_broadcast() {
        let [x, ..] = Jet::point([2.0, 0.0, 0.0, 0.0], 2);
        let c = Jet::constant(3.0);
        let f = c * x + c;
        assert_eq!(f.value(), 9.0);
        assert_eq!(f.d1(0), 3.0);
        assert_eq!((c / x).d1(0), -0.75);
    }
}
