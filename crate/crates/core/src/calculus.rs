//! Differential operators on fields over ℝ⁴.
//!
//! Two derivative sources are available. Finite differences work on any
//! evaluator `Fn(&Point4) -> Result<T>`; jets (see [`crate::jet`]) give exact
//! derivatives of closed-form fields and are used where rounding would swamp a
//! small signal.

use crate::error::{LabError, Result};
use crate::euclidean::{act_on_covector, from_matrix, lift, M4, Point4, V4};
use crate::jet::{Jet, Scalar};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    /// Step relative to max(1, |p|).
    pub step: f64,
    /// Stencil accuracy, 2 or 4.
    pub order: u8,
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme { step: 1e-3, order: 4 }
    }
}

impl Scheme {
    pub fn new(step: f64, order: u8) -> Result<Scheme> {
        if !(step > 0.0) || !(order == 2 || order == 4) {
            return Err(LabError::InvalidParameter(format!("scheme step={step} order={order}")));
        }
        Ok(Scheme { step, order })
    }

    pub fn h(&self, p: &Point4) -> f64 {
        self.step * p.r().max(1.0)
    }

    pub fn halved(&self) -> Scheme {
        Scheme { step: self.step / 2.0, order: self.order }
    }
}

fn shifted(p: &Point4, axis: usize, d: f64) -> Point4 {
    let mut q = *p;
    q.x[axis] += d;
    q
}

fn eval_in_domain<T, F: Fn(&Point4) -> Result<T>>(f: &F, q: &Point4) -> Result<T> {
    f(q).map_err(|e| match e {
        LabError::PoleAtOrigin | LabError::OriginFrame => LabError::DomainViolation { point: q.x },
        other => other,
    })
}

/// Central difference ∂f/∂x_axis with an explicit step.
pub fn partial_h<T, F>(f: &F, p: &Point4, axis: usize, h: f64, order: u8) -> Result<T>
where
    T: Clone + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    F: Fn(&Point4) -> Result<T>,
{
    let fp = eval_in_domain(f, &shifted(p, axis, h))?;
    let fm = eval_in_domain(f, &shifted(p, axis, -h))?;
    if order == 2 {
        return Ok((fp - fm) * (0.5 / h));
    }
    let fp2 = eval_in_domain(f, &shifted(p, axis, 2.0 * h))?;
    let fm2 = eval_in_domain(f, &shifted(p, axis, -2.0 * h))?;
    Ok(((fp - fm) * 8.0 - (fp2 - fm2)) * (1.0 / (12.0 * h)))
}

pub fn partial<T, F>(f: &F, p: &Point4, axis: usize, scheme: &Scheme) -> Result<T>
where
    T: Clone + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    F: Fn(&Point4) -> Result<T>,
{
    partial_h(f, p, axis, scheme.h(p), scheme.order)
}

pub fn gradient<F>(f: &F, p: &Point4, scheme: &Scheme) -> Result<Vector4<f64>>
where
    F: Fn(&Point4) -> Result<f64>,
{
    let mut g = Vector4::zeros();
    for i in 0..4 {
        g[i] = partial(f, p, i, scheme)?;
    }
    Ok(g)
}

/// d of a 1-form: (dβ)_ij = ∂_i β_j − ∂_j β_i.
pub fn exterior_d1<F>(beta: &F, p: &Point4, scheme: &Scheme) -> Result<Matrix4<f64>>
where
    F: Fn(&Point4) -> Result<Vector4<f64>>,
{
    let mut db = [Vector4::zeros(); 4];
    for (i, d) in db.iter_mut().enumerate() {
        *d = partial(beta, p, i, scheme)?;
    }
    Ok(Matrix4::from_fn(|i, j| db[i][j] - db[j][i]))
}

/// Components c_ijk (i<j<k) of a 3-form in the order 012, 013, 023, 123.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeForm(pub [f64; 4]);

pub const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];

impl ThreeForm {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// d of a 2-form: (dW)_ijk = ∂_i W_jk + ∂_j W_ki + ∂_k W_ij.
pub fn exterior_d2<F>(w: &F, p: &Point4, scheme: &Scheme) -> Result<ThreeForm>
where
    F: Fn(&Point4) -> Result<Matrix4<f64>>,
{
    let mut dw = [Matrix4::zeros(); 4];
    for (i, d) in dw.iter_mut().enumerate() {
        *d = partial(w, p, i, scheme)?;
    }
    let mut c = [0.0; 4];
    for (n, [i, j, k]) in TRIPLES.iter().enumerate() {
        c[n] = dw[*i][(*j, *k)] + dw[*j][(*k, *i)] + dw[*k][(*i, *j)];
    }
    Ok(ThreeForm(c))
}

/// dd^c_J f = d(J df), by nested differences. `j` may depend on the point.
pub fn ddc<F, J>(f: &F, j: &J, p: &Point4, scheme: &Scheme) -> Result<Matrix4<f64>>
where
    F: Fn(&Point4) -> Result<f64>,
    J: Fn(&Point4) -> Result<Matrix4<f64>>,
{
    let beta = |q: &Point4| -> Result<Vector4<f64>> {
        let g = gradient(f, q, scheme)?;
        let jm = j(q)?;
        Ok(-jm.transpose() * g)
    };
    exterior_d1(&beta, p, scheme)
}

pub fn ddc_const<F>(f: &F, j: &Matrix4<f64>, p: &Point4, scheme: &Scheme) -> Result<Matrix4<f64>>
where
    F: Fn(&Point4) -> Result<f64>,
{
    ddc(f, &|_: &Point4| Ok(*j), p, scheme)
}

/// Exact dd^c_J f from jets: `f` needs degree ≥ 2 and `j` degree ≥ 1.
pub fn ddc_jet(f: &Jet, j: &M4<Jet>) -> Matrix4<f64> {
    let grad: V4<Jet> = [f.deriv(0), f.deriv(1), f.deriv(2), f.deriv(3)];
    let beta = act_on_covector(j, &grad);
    d1_jet(&beta)
}

/// Exact d of a 1-form given as jets of degree ≥ 1.
pub fn d1_jet(beta: &V4<Jet>) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| beta[j].d1(i) - beta[i].d1(j))
}

/// Exact d of a 2-form given as jets of degree ≥ 1.
pub fn d2_jet(w: &M4<Jet>) -> ThreeForm {
    let mut c = [0.0; 4];
    for (n, [i, j, k]) in TRIPLES.iter().enumerate() {
        c[n] = w[*j][*k].d1(*i) + w[*k][*i].d1(*j) + w[*i][*j].d1(*k);
    }
    ThreeForm(c)
}

/// A metric with its first and second coordinate derivatives at a point.
#[derive(Debug, Clone)]
pub struct MetricDerivs {
    pub g: Matrix4<f64>,
    pub dg: [Matrix4<f64>; 4],
    pub ddg: [[Matrix4<f64>; 4]; 4],
}

impl MetricDerivs {
    pub fn from_fd<F>(g: &F, p: &Point4, scheme: &Scheme) -> Result<MetricDerivs>
    where
        F: Fn(&Point4) -> Result<Matrix4<f64>>,
    {
        let g0 = g(p)?;
        let mut dg = [Matrix4::zeros(); 4];
        let mut ddg = [[Matrix4::zeros(); 4]; 4];
        for k in 0..4 {
            dg[k] = partial(g, p, k, scheme)?;
            for l in 0..=k {
                let inner = |q: &Point4| partial(g, q, l, scheme);
                let v = partial(&inner, p, k, scheme)?;
                ddg[k][l] = v;
                ddg[l][k] = v;
            }
        }
        Ok(MetricDerivs { g: g0, dg, ddg })
    }

    /// From a metric whose entries are jets of degree ≥ 2.
    pub fn from_jets(g: &M4<Jet>) -> MetricDerivs {
        let g0 = Matrix4::from_fn(|i, j| g[i][j].value());
        let dg = [0, 1, 2, 3].map(|k| Matrix4::from_fn(|i, j| g[i][j].d1(k)));
        let ddg = [0, 1, 2, 3].map(|k| [0, 1, 2, 3].map(|l| Matrix4::from_fn(|i, j| g[i][j].d2(k, l))));
        MetricDerivs { g: g0, dg, ddg }
    }
}

pub type Christoffel = [[[f64; 4]; 4]; 4];
pub type Riemann = [[[[f64; 4]; 4]; 4]; 4];

pub fn inverse_spd(g: &Matrix4<f64>, p: &Point4) -> Result<Matrix4<f64>> {
    let ch = g.cholesky().ok_or(LabError::NotPositiveDefinite { point: p.x })?;
    Ok(ch.inverse())
}

/// Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij).
pub fn christoffel(g_inv: &Matrix4<f64>, dg: &[Matrix4<f64>; 4]) -> Christoffel {
    let mut gam = [[[0.0; 4]; 4]; 4];
    for (k, gk) in gam.iter_mut().enumerate() {
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for l in 0..4 {
                    s += g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gk[i][j] = 0.5 * s;
            }
        }
    }
    gam
}

#[derive(Debug, Clone)]
pub struct Curvature {
    pub g: Matrix4<f64>,
    pub g_inv: Matrix4<f64>,
    pub christoffel: Christoffel,
    /// R_abcd, with Ric_bd = g^ac R_abcd (positive on round spheres).
    pub riemann: Riemann,
    pub ricci: Matrix4<f64>,
}

pub fn curvature(md: &MetricDerivs, p: &Point4) -> Result<Curvature> {
    let g_inv = inverse_spd(&md.g, p)?;
    let gam = christoffel(&g_inv, &md.dg);
    let g = &md.g;
    let dd = |a: usize, b: usize, i: usize, j: usize| md.ddg[a][b][(i, j)];
    let mut rm = [[[[0.0; 4]; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut s = 0.5 * (dd(b, c, a, d) + dd(a, d, b, c) - dd(b, d, a, c) - dd(a, c, b, d));
                    for e in 0..4 {
                        for f in 0..4 {
                            s += g[(e, f)] * (gam[e][b][c] * gam[f][a][d] - gam[e][b][d] * gam[f][a][c]);
                        }
                    }
                    rm[a][b][c][d] = s;
                }
            }
        }
    }
    let mut ric = Matrix4::zeros();
    for b in 0..4 {
        for d in 0..4 {
            let mut s = 0.0;
            for a in 0..4 {
                for c in 0..4 {
                    s += g_inv[(a, c)] * rm[a][b][c][d];
                }
            }
            ric[(b, d)] = s;
        }
    }
    Ok(Curvature { g: *g, g_inv, christoffel: gam, riemann: rm, ricci: ric })
}

pub fn levi_civita<F>(g: &F, p: &Point4, scheme: &Scheme) -> Result<Christoffel>
where
    F: Fn(&Point4) -> Result<Matrix4<f64>>,
{
    let g0 = g(p)?;
    let g_inv = inverse_spd(&g0, p)?;
    let mut dg = [Matrix4::zeros(); 4];
    for (k, d) in dg.iter_mut().enumerate() {
        *d = partial(g, p, k, scheme)?;
    }
    Ok(christoffel(&g_inv, &dg))
}

pub fn curvature_fd<F>(g: &F, p: &Point4, scheme: &Scheme) -> Result<Curvature>
where
    F: Fn(&Point4) -> Result<Matrix4<f64>>,
{
    curvature(&MetricDerivs::from_fd(g, p, scheme)?, p)
}

impl Curvature {
    /// |Rm|_g with all indices raised.
    pub fn rm_norm(&self) -> f64 {
        let up = raise_all4(&self.riemann, &self.g_inv);
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        s += up[a][b][c][d] * self.riemann[a][b][c][d];
                    }
                }
            }
        }
        s.max(0.0).sqrt()
    }

    pub fn ricci_norm(&self) -> f64 {
        norm_2tensor(&self.ricci, &self.g_inv)
    }

    /// Largest |R_abcd + R_acdb + R_adbc|.
    pub fn bianchi_defect(&self) -> f64 {
        let r = &self.riemann;
        let mut m: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        m = m.max((r[a][b][c][d] + r[a][c][d][b] + r[a][d][b][c]).abs());
                    }
                }
            }
        }
        m
    }
}

fn raise_all4(t: &Riemann, gi: &Matrix4<f64>) -> Riemann {
    let mut cur = *t;
    for slot in 0..4 {
        let mut next = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let idx = [a, b, c, d];
                        let mut s = 0.0;
                        for e in 0..4 {
                            let mut j = idx;
                            j[slot] = e;
                            s += gi[(idx[slot], e)] * cur[j[0]][j[1]][j[2]][j[3]];
                        }
                        next[a][b][c][d] = s;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// |β|_g for a covector.
pub fn norm_covector(beta: &Vector4<f64>, g_inv: &Matrix4<f64>) -> f64 {
    (beta.transpose() * g_inv * beta)[(0, 0)].max(0.0).sqrt()
}

/// |T|_g for a covariant 2-tensor (Frobenius with both indices raised).
pub fn norm_2tensor(t: &Matrix4<f64>, g_inv: &Matrix4<f64>) -> f64 {
    (g_inv * t * g_inv * t.transpose()).trace().max(0.0).sqrt()
}

/// |A|_g for an endomorphism A (matrix acting on vectors).
pub fn norm_endomorphism(a: &Matrix4<f64>, g: &Matrix4<f64>, g_inv: &Matrix4<f64>) -> f64 {
    (g * a * g_inv * a.transpose()).trace().max(0.0).sqrt()
}

/// |X|_g for a vector.
pub fn norm_vector(x: &Vector4<f64>, g: &Matrix4<f64>) -> f64 {
    (x.transpose() * g * x)[(0, 0)].max(0.0).sqrt()
}

/// ∇T for a covariant 2-tensor, as [k][i][j] = (∇_k T)_ij.
pub fn covariant_derivative_2tensor(t: &Matrix4<f64>, dt: &[Matrix4<f64>; 4], gam: &Christoffel) -> [Matrix4<f64>; 4] {
    let mut out = [Matrix4::zeros(); 4];
    for (k, o) in out.iter_mut().enumerate() {
        for i in 0..4 {
            for j in 0..4 {
                let mut s = dt[k][(i, j)];
                for l in 0..4 {
                    s -= gam[l][k][i] * t[(l, j)] + gam[l][k][j] * t[(i, l)];
                }
                o[(i, j)] = s;
            }
        }
    }
    out
}

/// ∇β for a covector, as a matrix (k, i) = (∇_k β)_i.
pub fn covariant_derivative_covector(beta: &Vector4<f64>, dbeta: &[Vector4<f64>; 4], gam: &Christoffel) -> Matrix4<f64> {
    Matrix4::from_fn(|k, i| {
        let mut s = dbeta[k][i];
        for l in 0..4 {
            s -= gam[l][k][i] * beta[l];
        }
        s
    })
}

/// ∇X for a vector field, as a matrix (k, i) = (∇_k X)^i.
pub fn covariant_derivative_vector(x: &Vector4<f64>, dx: &[Vector4<f64>; 4], gam: &Christoffel) -> Matrix4<f64> {
    Matrix4::from_fn(|k, i| {
        let mut s = dx[k][i];
        for l in 0..4 {
            s += gam[i][k][l] * x[l];
        }
        s
    })
}

/// Norm of a fully covariant 3-tensor stored as [k](i, j).
pub fn norm_3tensor(a: &[Matrix4<f64>; 4], g_inv: &Matrix4<f64>) -> f64 {
    let mut s = 0.0;
    for k in 0..4 {
        for kk in 0..4 {
            let gkk = g_inv[(k, kk)];
            if gkk == 0.0 {
                continue;
            }
            s += gkk * (g_inv * a[k] * g_inv * a[kk].transpose()).trace();
        }
    }
    s.max(0.0).sqrt()
}

/// Norm of a (1,1) tensor stored as (k, i) with k covariant and i contravariant.
pub fn norm_mixed(a: &Matrix4<f64>, g: &Matrix4<f64>, g_inv: &Matrix4<f64>) -> f64 {
    (g_inv * a * g * a.transpose()).trace().max(0.0).sqrt()
}

/// tr_g h and δ_g h = −g^ij (∇_i h)_jk.
pub fn trace_and_divergence<H, G>(h: &H, g: &G, p: &Point4, scheme: &Scheme) -> Result<(f64, Vector4<f64>)>
where
    H: Fn(&Point4) -> Result<Matrix4<f64>>,
    G: Fn(&Point4) -> Result<Matrix4<f64>>,
{
    let g0 = g(p)?;
    let g_inv = inverse_spd(&g0, p)?;
    let h0 = h(p)?;
    let tr = (g_inv * h0).trace();
    let gam = levi_civita(g, p, scheme)?;
    let mut dh = [Matrix4::zeros(); 4];
    for (k, d) in dh.iter_mut().enumerate() {
        *d = partial(h, p, k, scheme)?;
    }
    let nab = covariant_derivative_2tensor(&h0, &dh, &gam);
    let mut div = Vector4::zeros();
    for k in 0..4 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += g_inv[(i, j)] * nab[i][(j, k)];
            }
        }
        div[k] = -s;
    }
    Ok((tr, div))
}

/// Euclidean Laplacian Σ ∂_i² f (positive-spectrum sign not applied).
pub fn flat_laplacian<F>(f: &F, p: &Point4, scheme: &Scheme) -> Result<f64>
where
    F: Fn(&Point4) -> Result<f64>,
{
    let mut s = 0.0;
    for i in 0..4 {
        let inner = |q: &Point4| partial(f, q, i, scheme);
        s += partial(&inner, p, i, scheme)?;
    }
    Ok(s)
}

/// A value with a two-step Richardson error bar.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Evaluate `f` at `scheme` and at half the step; return the refined value and
/// the difference scaled by the stencil order.
pub fn richardson<F>(f: F, scheme: &Scheme) -> Result<Estimate>
where
    F: Fn(&Scheme) -> Result<f64>,
{
    let a = f(scheme)?;
    let b = f(&scheme.halved())?;
    let k = 2f64.powi(scheme.order as i32);
    Ok(Estimate { value: b, error: (b - a).abs() / (k - 1.0) })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub residual: f64,
    pub samples: Vec<(f64, f64)>,
}

impl DecayFit {
    pub fn model(&self, radius: f64) -> f64 {
        (self.intercept + self.exponent * radius.ln()).exp()
    }
}

/// Least-squares slope of log(norm) against log(radius).
pub fn fit_samples(samples: Vec<(f64, f64)>) -> Result<DecayFit> {
    for &(r, v) in &samples {
        if !r.is_finite() || !v.is_finite() || v <= 0.0 {
            return Err(LabError::NonFinite { radius: r });
        }
    }
    let n = samples.len();
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if n < 6 || hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(LabError::TooFewSamples { needed: 6, got: n });
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(DecayFit { exponent: slope, intercept, residual: (rss / n as f64).sqrt(), samples })
}

/// Sample `norm` on the radii and fit; evaluations may run in parallel.
pub fn fit_decay<F>(norm: F, radii: &[f64]) -> Result<DecayFit>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    use rayon::prelude::*;
    let vals: Vec<Result<f64>> = radii.par_iter().map(|&r| norm(r)).collect();
    let mut samples = Vec::with_capacity(radii.len());
    for (&r, v) in radii.iter().zip(vals) {
        let v = v?;
        if !v.is_finite() {
            return Err(LabError::NonFinite { radius: r });
        }
        samples.push((r, v));
    }
    fit_samples(samples)
}

/// Geometric grid lo..hi with n points.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Matrix of jets to plain values and a lifted constant, for mixed computations.
pub fn jet_values(m: &M4<Jet>) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| m[i][j].value())
}

pub fn constant_jets(m: &Matrix4<f64>) -> M4<Jet> {
    lift::<Jet>(m)
}

pub fn matrix_array(m: &Matrix4<f64>) -> M4<f64> {
    from_matrix(m)
}

/// Scalar field evaluated on jets, converted into a plain function for FD use.
pub fn plain<S: Scalar>(v: S) -> f64 {
    v.val()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euclidean::{structure, theta, r2};

    #[test]
    fn fourth_order_derivative_exactness_on_quartics() {
        let f = |q: &Point4| Ok(q.x[0].powi(4) + q.x[1] * q.x[0]);
        let p = Point4::new(0.7, 0.2, 0.0, 0.0);
        let d: f64 = partial(&f, &p, 0, &Scheme::default()).unwrap();
        assert!((d - (4.0 * 0.343 + 0.2)).abs() < 1e-11);
    }

    #[test]
    fn d_of_rdr_vanishes() {
        let beta = |q: &Point4| Ok(q.vector());
        let w = exterior_d1(&beta, &Point4::new(0.3, 1.0, -2.0, 0.5), &Scheme::default()).unwrap();
        assert!(w.abs().max() < 1e-12);
    }

    #[test]
    fn ddc_of_half_r2_is_twice_omega() {
        let f = |q: &Point4| Ok(0.5 * q.r2());
        for j in 0..3 {
            let w = ddc_const(&f, &structure(j), &Point4::new(0.4, -0.3, 1.2, 0.9), &Scheme::default()).unwrap();
            let want = structure(j).transpose() * 2.0;
            assert!((w - want).abs().max() < 1e-8, "j={j}");
        }
    }

    #[test]
    fn ddc_of_inverse_r2_is_four_theta() {
        let f = |q: &Point4| Ok(1.0 / q.r2());
        let p = Point4::new(0.0, 1.0, 0.0, 0.0);
        for j in 0..3 {
            let w = ddc_const(&f, &structure(j), &p, &Scheme::default()).unwrap();
            let t = crate::euclidean::values(&theta(j, &p.x));
            assert!((w - t * 4.0).abs().max() < 1e-8, "j={j}");
        }
    }

    #[test]
    fn ddc_jet_matches_fd() {
        let p = Point4::new(0.4, -0.3, 1.2, 0.9);
        let x = Jet::point(p.x, 2);
        let f = r2(&x).recip();
        let i1 = constant_jets(&structure(0));
        let exact = ddc_jet(&f, &i1);
        let fd = ddc_const(&|q: &Point4| Ok(1.0 / q.r2()), &structure(0), &p, &Scheme::default()).unwrap();
        assert!((exact - fd).abs().max() < 1e-8);
    }

    #[test]
    fn flat_metric_has_zero_curvature() {
        let g = |_: &Point4| Ok(Matrix4::identity() * 2.5);
        let c = curvature_fd(&g, &Point4::new(1.0, 2.0, 3.0, 4.0), &Scheme::default()).unwrap();
        assert_eq!(c.rm_norm(), 0.0);
        assert_eq!(c.ricci_norm(), 0.0);
    }

    #[test]
    fn round_sphere_is_einstein() {
        // Stereographic round S⁴: g = 4/(1+|x|²)² δ, Ric = 3g.
        let g = |q: &Point4| Ok(Matrix4::identity() * (4.0 / (1.0 + q.r2()).powi(2)));
        let p = Point4::new(0.2, -0.1, 0.3, 0.05);
        let c = curvature_fd(&g, &p, &Scheme::default()).unwrap();
        assert!((c.ricci - c.g * 3.0).abs().max() < 1e-7);
        assert!(c.bianchi_defect() < 1e-7);
        // Jets give the same answer.
        let x = Jet::point(p.x, 2);
        let conf = (r2(&x) + 1.0).powi(2).recip() * 4.0;
        let mut gj = [[Jet::constant(0.0); 4]; 4];
        for (i, row) in gj.iter_mut().enumerate() {
            row[i] = conf;
        }
        let cj = curvature(&MetricDerivs::from_jets(&gj), &p).unwrap();
        assert!((cj.ricci - cj.g * 3.0).abs().max() < 1e-12);
        // |Rm|² = 2·n(n−1) for unit sectional curvature, n = 4.
        assert!((cj.rm_norm() - 24f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn identity_trace_and_divergence() {
        let e = |_: &Point4| Ok(Matrix4::identity());
        let (tr, div) = trace_and_divergence(&e, &e, &Point4::new(1.0, 0.0, 0.0, 0.0), &Scheme::default()).unwrap();
        assert_eq!(tr, 4.0);
        assert_eq!(div.norm(), 0.0);
    }

    #[test]
    fn divergence_of_x1_times_identity() {
        // h = x1 e: δh = −Σ_j ∂_j h_jk = −dx1.
        let h = |q: &Point4| Ok(Matrix4::identity() * q.x[0]);
        let e = |_: &Point4| Ok(Matrix4::identity());
        let (_, div) = trace_and_divergence(&h, &e, &Point4::new(0.5, 0.1, 0.2, 0.3), &Scheme::default()).unwrap();
        assert!((div - Vector4::new(-1.0, 0.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn exact_power_law_fit() {
        let radii = geometric_grid(1.0, 100.0, 12);
        let fit = fit_decay(|r| Ok(r.powf(-3.0)), &radii).unwrap();
        assert!((fit.exponent + 3.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn fit_rejects_short_grids() {
        assert!(matches!(
            fit_decay(|r| Ok(r), &geometric_grid(1.0, 2.0, 8)),
            Err(LabError::TooFewSamples { .. })
        ));
        assert!(matches!(
            fit_decay(|r| Ok(if r > 5.0 { f64::NAN } else { r }), &geometric_grid(1.0, 20.0, 8)),
            Err(LabError::NonFinite { .. })
        ));
    }

    #[test]
    fn richardson_ratio_matches_order() {
        let f = |q: &Point4| Ok((q.x[0] * 1.3).sin() * q.x[1].exp());
        let p = Point4::new(0.4, 0.2, 0.0, 0.0);
        let exact = 1.3 * (0.52f64).cos() * 0.2f64.exp();
        for order in [2u8, 4] {
            let s = Scheme { step: 0.05, order };
            let e1: f64 = partial(&f, &p, 0, &s).unwrap() - exact;
            let e2: f64 = partial(&f, &p, 0, &s.halved()).unwrap() - exact;
            let ratio = (e2 / e1) / 2f64.powi(-(order as i32));
            assert!((0.8..=1.2).contains(&ratio), "order {order} ratio {ratio}");
        }
    }
}
