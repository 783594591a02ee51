//! The flat hyperkähler base ℝ⁴ ≅ ℂ²: standard complex structures, the forms
//! rdr, α_j, ω_j, θ_j, and the binary dihedral group.

use crate::error::{LabError, Result};
use crate::jet::Scalar;
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type V4<S> = [S; 4];
pub type M4<S> = [[S; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point4 {
    pub x: [f64; 4],
}

impl Point4 {
    pub const ORIGIN: Point4 = Point4 { x: [0.0; 4] };

    pub fn new(x1: f64, x2: f64, x3: f64, x4: f64) -> Point4 {
        Point4 { x: [x1, x2, x3, x4] }
    }

    pub fn from_complex(z1: Complex64, z2: Complex64) -> Point4 {
        Point4::new(z1.re, z1.im, z2.re, z2.im)
    }

    pub fn z1(&self) -> Complex64 {
        Complex64::new(self.x[0], self.x[1])
    }

    pub fn z2(&self) -> Complex64 {
        Complex64::new(self.x[2], self.x[3])
    }

    pub fn r2(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum()
    }

    pub fn r(&self) -> f64 {
        self.r2().sqrt()
    }

    pub fn scale(&self, s: f64) -> Point4 {
        Point4 { x: self.x.map(|v| v * s) }
    }

    pub fn vector(&self) -> Vector4<f64> {
        Vector4::from(self.x)
    }
}

impl From<[f64; 4]> for Point4 {
    fn from(x: [f64; 4]) -> Point4 {
        Point4 { x }
    }
}

/// Matrices of I1, I2, I3 acting on column vectors in the basis ∂x1..∂x4.
/// I1 is multiplication by i on (x1+ix2, x3+ix4), I2 on (x1+ix3, x4+ix2),
/// I3 on (x1+ix4, x2+ix3).
pub const STRUCTURES: [[[f64; 4]; 4]; 3] = [
    [[0., -1., 0., 0.], [1., 0., 0., 0.], [0., 0., 0., -1.], [0., 0., 1., 0.]],
    [[0., 0., -1., 0.], [0., 0., 0., 1.], [1., 0., 0., 0.], [0., -1., 0., 0.]],
    [[0., 0., 0., -1.], [0., 0., -1., 0.], [0., 1., 0., 0.], [1., 0., 0., 0.]],
];

pub fn structure(j: usize) -> Matrix4<f64> {
    to_matrix(&STRUCTURES[j])
}

/// (I1, I2, I3).
pub fn standard_structures() -> [Matrix4<f64>; 3] {
    [structure(0), structure(1), structure(2)]
}

pub fn to_matrix(m: &M4<f64>) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| m[i][j])
}

pub fn from_matrix(m: &Matrix4<f64>) -> M4<f64> {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

pub fn values<S: Scalar>(m: &M4<S>) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| m[i][j].val())
}

pub fn vvalues<S: Scalar>(v: &V4<S>) -> Vector4<f64> {
    Vector4::from_fn(|i, _| v[i].val())
}

pub fn lift<S: Scalar>(m: &Matrix4<f64>) -> M4<S> {
    let mut out = [[S::zero(); 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = S::cst(m[(i, j)]);
        }
    }
    out
}

/// Action of an endomorphism on a covector: (Jβ)(X) = −β(JX), i.e. −Jᵀβ.
pub fn act_on_covector<S: Scalar>(j: &M4<S>, beta: &V4<S>) -> V4<S> {
    let mut out = [S::zero(); 4];
    for (i, o) in out.iter_mut().enumerate() {
        for k in 0..4 {
            *o -= j[k][i] * beta[k];
        }
    }
    out
}

pub fn wedge<S: Scalar>(a: &V4<S>, b: &V4<S>) -> M4<S> {
    let mut out = [[S::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[i] * b[j] - b[i] * a[j];
        }
    }
    out
}

/// a⊗b + b⊗a.
pub fn sym_product<S: Scalar>(a: &V4<S>, b: &V4<S>) -> M4<S> {
    let mut out = [[S::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[i] * b[j] + b[i] * a[j];
        }
    }
    out
}

pub fn outer<S: Scalar>(a: &V4<S>, b: &V4<S>) -> M4<S> {
    let mut out = [[S::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[i] * b[j];
        }
    }
    out
}

pub fn madd<S: Scalar>(a: &M4<S>, b: &M4<S>) -> M4<S> {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] += b[i][j];
        }
    }
    out
}

pub fn mscale<S: Scalar>(a: &M4<S>, s: S) -> M4<S> {
    let mut out = *a;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v *= s;
        }
    }
    out
}

pub fn mmul<S: Scalar>(a: &M4<S>, b: &M4<S>) -> M4<S> {
    let mut out = [[S::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn transpose<S: Scalar>(a: &M4<S>) -> M4<S> {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn r2<S: Scalar>(x: &V4<S>) -> S {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]
}

/// rdr = Σ x_i dx_i.
pub fn rdr<S: Scalar>(x: &V4<S>) -> V4<S> {
    *x
}

/// α_j = I_j(rdr); with the covector convention its components are I_j·x.
pub fn alpha<S: Scalar>(j: usize, x: &V4<S>) -> V4<S> {
    act_on_covector(&lift::<S>(&structure(j)), x)
}

/// ω_j^e = e(I_j·,·), the matrix I_jᵀ.
pub fn omega_e(j: usize) -> Matrix4<f64> {
    structure(j).transpose()
}

/// θ_a = (rdr∧α_a − α_b∧α_c)/r⁶ for (a,b,c) cyclic.
pub fn theta<S: Scalar>(a: usize, x: &V4<S>) -> M4<S> {
    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
    let r6 = r2(x).powi(3);
    let t = madd(&wedge(&rdr(x), &alpha(a, x)), &mscale(&wedge(&alpha(b, x), &alpha(c, x)), S::cst(-1.0)));
    mscale(&t, r6.recip())
}

/// Values of the fundamental forms at a point.
#[derive(Debug, Clone)]
pub struct BaseForms {
    pub rdr: Vector4<f64>,
    pub alpha: [Vector4<f64>; 3],
    pub omega: [Matrix4<f64>; 3],
    pub theta: [Matrix4<f64>; 3],
}

pub fn base_forms(p: &Point4) -> Result<BaseForms> {
    if p.r2() == 0.0 {
        return Err(LabError::PoleAtOrigin);
    }
    let x = p.x;
    Ok(BaseForms {
        rdr: Vector4::from(x),
        alpha: [0, 1, 2].map(|j| Vector4::from(alpha(j, &x))),
        omega: [0, 1, 2].map(omega_e),
        theta: [0, 1, 2].map(|j| values(&theta(j, &x))),
    })
}

/// Euclidean Hodge star on 2-forms for the orientation dx1∧dx2∧dx3∧dx4.
pub fn hodge_star(w: &Matrix4<f64>) -> Matrix4<f64> {
    let mut out = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    s += 0.5 * levi_civita([i, j, k, l]) * w[(k, l)];
                }
            }
            out[(i, j)] = s;
        }
    }
    out
}

pub fn levi_civita(idx: [usize; 4]) -> f64 {
    let mut v = idx;
    let mut sign = 1.0;
    for i in 0..4 {
        for j in i + 1..4 {
            if v[i] == v[j] {
                return 0.0;
            }
        }
    }
    for i in 0..4 {
        while v[i] != i {
            let t = v[i];
            v.swap(i, t);
            sign = -sign;
        }
    }
    sign
}

/// Coefficient of dx1∧dx2∧dx3∧dx4 in a∧b for 2-forms a, b.
pub fn wedge_2_2(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let e = levi_civita([i, j, k, l]);
                    if e != 0.0 {
                        s += e * a[(i, j)] * b[(k, l)];
                    }
                }
            }
        }
    }
    s / 4.0
}

/// Element ζ_k^a τ^b of the binary dihedral group of order 4k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DihedralElement {
    pub k: u32,
    pub a: u32,
    pub b: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct DihedralGroup {
    pub k: u32,
}

impl DihedralGroup {
    pub fn new(k: u32) -> Result<DihedralGroup> {
        if k < 2 {
            return Err(LabError::InvalidParameter(format!("dihedral order k = {k} < 2")));
        }
        Ok(DihedralGroup { k })
    }

    pub fn order(&self) -> usize {
        4 * self.k as usize
    }

    pub fn zeta(&self) -> DihedralElement {
        DihedralElement { k: self.k, a: 1, b: 0 }
    }

    pub fn tau(&self) -> DihedralElement {
        DihedralElement { k: self.k, a: 0, b: 1 }
    }

    pub fn identity(&self) -> DihedralElement {
        DihedralElement { k: self.k, a: 0, b: 0 }
    }

    pub fn elements(&self) -> Vec<DihedralElement> {
        let mut v = Vec::new();
        for b in 0..2 {
            for a in 0..2 * self.k {
                v.push(DihedralElement { k: self.k, a, b });
            }
        }
        v
    }
}

/// Real 4×4 matrix of a unitary 2×2 matrix acting on (z1, z2).
pub fn complex_to_real(u: [[Complex64; 2]; 2]) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for r in 0..2 {
        for c in 0..2 {
            let w = u[r][c];
            m[(2 * r, 2 * c)] = w.re;
            m[(2 * r, 2 * c + 1)] = -w.im;
            m[(2 * r + 1, 2 * c)] = w.im;
            m[(2 * r + 1, 2 * c + 1)] = w.re;
        }
    }
    m
}

impl DihedralElement {
    pub fn unitary(&self) -> [[Complex64; 2]; 2] {
        let th = std::f64::consts::PI * self.a as f64 / self.k as f64;
        let z = Complex64::from_polar(1.0, th);
        let zero = Complex64::new(0.0, 0.0);
        let zeta = [[z, zero], [zero, z.conj()]];
        if self.b == 0 {
            zeta
        } else {
            let one = Complex64::new(1.0, 0.0);
            let tau = [[zero, -one], [one, zero]];
            let mut out = [[zero; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] = zeta[i][0] * tau[0][j] + zeta[i][1] * tau[1][j];
                }
            }
            out
        }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        complex_to_real(self.unitary())
    }

    pub fn act(&self, p: &Point4) -> Point4 {
        let v = self.matrix() * p.vector();
        Point4::new(v[0], v[1], v[2], v[3])
    }
}

/// Pullback g*T of a 2-tensor field: T(g p)(g·, g·).
pub fn pullback_2tensor<F>(g: &DihedralElement, field: F, p: &Point4) -> Result<Matrix4<f64>>
where
    F: Fn(&Point4) -> Result<Matrix4<f64>>,
{
    let m = g.matrix();
    Ok(m.transpose() * field(&g.act(p))? * m)
}

pub fn pullback_covector<F>(g: &DihedralElement, field: F, p: &Point4) -> Result<Vector4<f64>>
where
    F: Fn(&Point4) -> Result<Vector4<f64>>,
{
    Ok(g.matrix().transpose() * field(&g.act(p))?)
}
