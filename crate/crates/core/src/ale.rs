//! First-order asymptotic tensors of ALE instantons with parameter ζ (through its Gram
//! matrix): the metric correction h_ζ, the complex-structure correction ι₁ and the
//! Kähler-form correction ϖ₁, plus the structural checks they satisfy.

use crate::calculus::{partial, Scheme};
use crate::error::{LabError, Result};
use crate::euclidean::{
    alpha, lift, madd, mmul, mscale, outer, r2, rdr, structure, sym_product, theta, DihedralGroup, M4, Point4, V4,
};
use crate::jet::Scalar;
use crate::so3::Gram;
use nalgebra::{DMatrix, Matrix4};
use serde::{Deserialize, Serialize};

/// |Γ| and ‖Γ‖ = |Γ|/π².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupWeight {
    pub gamma_order: u32,
    pub norm: f64,
}

impl GroupWeight {
    pub fn new(gamma_order: u32) -> Result<GroupWeight> {
        if gamma_order == 0 {
            return Err(LabError::InvalidParameter("|Γ| must be positive".into()));
        }
        Ok(GroupWeight {
            gamma_order,
            norm: gamma_order as f64 / std::f64::consts::PI.powi(2),
        })
    }

    /// Weight of the binary dihedral group of order 4k.
    pub fn dihedral(k: u32) -> Result<GroupWeight> {
        let g = DihedralGroup::new(k)?;
        GroupWeight::new(g.order() as u32)
    }
}

/// The asymptotic data for one Gram matrix and group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AleModel {
    pub gram: Gram,
    pub weight: GroupWeight,
}

fn zc(z: &Gram, i: usize, j: usize) -> f64 {
    z.entry(i, j)
}

impl AleModel {
    pub fn new(gram: Gram, weight: GroupWeight) -> AleModel {
        AleModel { gram, weight }
    }

    fn c(&self) -> f64 {
        self.weight.norm
    }

    /// h_ζ as the explicit combination of symmetric products.
    pub fn h_zeta<S: Scalar>(&self, x: &V4<S>) -> M4<S> {
        let c = self.c();
        let z = &self.gram;
        let r = rdr(x);
        let a = [alpha(0, x), alpha(1, x), alpha(2, x)];
        let inv6 = r2(x).powi(3).recip();
        let sq = |v: &V4<S>| outer(v, v);
        let mut h = [[S::zero(); 4]; 4];
        for (j, k, l) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let t = madd(&madd(&sq(&r), &sq(&a[j])), &mscale(&madd(&sq(&a[k]), &sq(&a[l])), S::cst(-1.0)));
            h = madd(&h, &mscale(&t, S::cst(-c * zc(z, j, j))));
        }
        let neg = S::cst(-1.0);
        let t12 = madd(&sym_product(&a[0], &a[1]), &mscale(&sym_product(&r, &a[2]), neg));
        let t13 = madd(&sym_product(&a[0], &a[2]), &sym_product(&r, &a[1]));
        let t23 = madd(&sym_product(&a[1], &a[2]), &mscale(&sym_product(&r, &a[0]), neg));
        h = madd(&h, &mscale(&t12, S::cst(-c * zc(z, 0, 1))));
        h = madd(&h, &mscale(&t13, S::cst(-c * zc(z, 0, 2))));
        h = madd(&h, &mscale(&t23, S::cst(-c * zc(z, 1, 2))));
        mscale(&h, inv6)
    }

    /// ϖ_j built from row j of `gram`: −‖Γ‖ Σ_k Z_jk θ_k.
    pub fn varpi_row<S: Scalar>(&self, gram: &Gram, j: usize, x: &V4<S>) -> M4<S> {
        let mut w = [[S::zero(); 4]; 4];
        for k in 0..3 {
            let z = gram.entry(j, k);
            if z != 0.0 {
                w = madd(&w, &mscale(&theta(k, x), S::cst(-self.c() * z)));
            }
        }
        w
    }

    /// ϖ₁^ζ = −‖Γ‖(|ζ₁|²θ₁ + ⟨ζ₁,ζ₂⟩θ₂ + ⟨ζ₁,ζ₃⟩θ₃).
    pub fn varpi1<S: Scalar>(&self, x: &V4<S>) -> M4<S> {
        self.varpi_row(&self.gram, 0, x)
    }

    /// The 𝐞-coupling 𝐞(ι₁·,·) as a symmetric matrix.
    pub fn iota1_coupling<S: Scalar>(&self, x: &V4<S>) -> M4<S> {
        let c = self.c();
        let z = &self.gram;
        let (z22, z33, z23) = (z.entry(1, 1), z.entry(2, 2), z.entry(1, 2));
        let r = rdr(x);
        let a = [alpha(0, x), alpha(1, x), alpha(2, x)];
        let inv6 = r2(x).powi(3).recip();
        let sq = |v: &V4<S>| outer(v, v);
        let mut s = mscale(&sym_product(&a[1], &a[2]), S::cst(c * (z33 - z22)));
        s = madd(&s, &mscale(&sym_product(&r, &a[0]), S::cst(-c * (z33 + z22))));
        let q = madd(&madd(&sq(&r), &sq(&a[2])), &mscale(&madd(&sq(&a[0]), &sq(&a[1])), S::cst(-1.0)));
        s = madd(&s, &mscale(&q, S::cst(-c * z23)));
        mscale(&s, inv6)
    }

    /// ι₁ as an endomorphism of vectors. 𝐞(ιX, Y) = Xᵀιᵀ Y, so ι is the coupling
    /// matrix transposed, which is itself because the coupling is symmetric.
    pub fn iota1<S: Scalar>(&self, x: &V4<S>) -> M4<S> {
        crate::euclidean::transpose(&self.iota1_coupling(x))
    }

    /// Right-hand side of the decomposition h_ζ = Σ_j ϖ_j^{ζ^{(j)}}(·, I_j·) with
    /// ζ^{(1)} = ζ, ζ^{(2)} = ζ', ζ^{(3)} = ζ''.
    pub fn h_decomposed<S: Scalar>(&self, x: &V4<S>) -> M4<S> {
        let grams = [self.gram, self.gram.drop_first(), self.gram.drop_first_two()];
        let mut h = [[S::zero(); 4]; 4];
        for (j, g) in grams.iter().enumerate() {
            let w = self.varpi_row(g, j, x);
            h = madd(&h, &mmul(&w, &lift(&structure(j))));
        }
        h
    }

    /// −‖Γ‖ Σ_{j≤k} Z_jk θ'_k(·, I'_j·) for an arbitrary hyperkähler triple and its θ's.
    /// With the standard triple this is h_ζ. The sum runs over j ≤ k only and
    /// θ_k(·,I_j·) − θ_j(·,I_k·) = ∓2 rdr·α_l/r⁶, so this is not an SO(3)-covariant
    /// contraction.
    pub fn h_from_basis(&self, structures: &[Matrix4<f64>; 3], thetas: &[Matrix4<f64>; 3]) -> Matrix4<f64> {
        let mut h = Matrix4::zeros();
        for j in 0..3 {
            for k in j..3 {
                h += thetas[k] * structures[j] * (-self.c() * self.gram.entry(j, k));
            }
        }
        h
    }

    pub fn with_gram(&self, gram: Gram) -> AleModel {
        AleModel { gram, weight: self.weight }
    }

    /// Relative change of h when the gram is rotated to AZAᵀ and the triple (I_j, θ_j)
    /// is rotated by A at the same time. Zero would mean formula-level equivariance.
    pub fn covariance_defect(&self, a: &crate::so3::Rotation, p: &Point4) -> Result<f64> {
        let b = crate::euclidean::base_forms(p)?;
        let s = crate::euclidean::standard_structures();
        let rot = |v: &[Matrix4<f64>; 3]| -> [Matrix4<f64>; 3] {
            [0, 1, 2].map(|j| (0..3).map(|l| v[l] * a.0[(j, l)]).sum())
        };
        let h = self.h_from_basis(&s, &b.theta);
        let h2 = self.with_gram(crate::so3::act(a, &self.gram)).h_from_basis(&rot(&s), &rot(&b.theta));
        Ok((h2 - h).norm() / h.norm().max(f64::MIN_POSITIVE))
    }
}

/// Checked evaluation: all the first-order tensors at a point.
#[derive(Debug, Clone)]
pub struct AleTensors {
    pub h: Matrix4<f64>,
    pub varpi1: Matrix4<f64>,
    pub iota1: Matrix4<f64>,
}

pub fn ale_tensors(model: &AleModel, p: &Point4) -> Result<AleTensors> {
    if p.r2() == 0.0 {
        return Err(LabError::PoleAtOrigin);
    }
    let x = p.x;
    Ok(AleTensors {
        h: crate::euclidean::values(&model.h_zeta(&x)),
        varpi1: crate::euclidean::values(&model.varpi1(&x)),
        iota1: crate::euclidean::values(&model.iota1(&x)),
    })
}

/// A function on 𝕊³, extended to ℝ⁴∖0 as a 0-homogeneous function.
pub fn homogeneous_extension<F>(f: &F, p: &Point4) -> Result<f64>
where
    F: Fn(&Point4) -> f64 + ?Sized,
{
    let r = p.r();
    if r == 0.0 {
        return Err(LabError::DomainViolation { point: p.x });
    }
    Ok(f(&p.scale(1.0 / r)))
}

/// Positive sphere Laplacian Δ_𝕊³ f at a unit point, as −Σ∂² of the 0-homogeneous extension.
pub fn sphere_laplacian<F>(f: &F, p: &Point4, scheme: &Scheme) -> Result<f64>
where
    F: Fn(&Point4) -> f64 + ?Sized,
{
    let ext = |q: &Point4| homogeneous_extension(f, q);
    Ok(-crate::calculus::flat_laplacian(&ext, p, scheme)?)
}

/// Tangential derivative e_j·f with e_j = I_j(x/r), at a unit point.
pub fn tangential<F>(f: &F, j: usize, p: &Point4, scheme: &Scheme) -> Result<f64>
where
    F: Fn(&Point4) -> f64 + ?Sized,
{
    let ext = |q: &Point4| homogeneous_extension(f, q);
    let dir = structure(j) * p.vector() / p.r();
    let mut s = 0.0;
    for i in 0..4 {
        if dir[i] != 0.0 {
            s += dir[i] * partial(&ext, p, i, scheme)?;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SphereResiduals {
    /// Residuals of Δf − 4(e₃g − e₂h), Δg − 4(e₁h − e₃f), Δh − 4(e₂f − e₁g).
    pub closed_system: [f64; 3],
    /// Residuals of Δf − 16f − 4e₃g + 4e₂h and its cyclic permutations.
    pub harmonic_system: [f64; 3],
}

/// Both linear sphere systems at a unit point for functions (f, g, h) on 𝕊³.
pub fn sphere_system_check<F>(fgh: [&F; 3], p: &Point4, scheme: &Scheme) -> Result<SphereResiduals>
where
    F: Fn(&Point4) -> f64 + ?Sized,
{
    let q = p.scale(1.0 / p.r());
    let mut lap = [0.0; 3];
    let mut der = [[0.0; 3]; 3];
    let mut val = [0.0; 3];
    for u in 0..3 {
        lap[u] = sphere_laplacian(fgh[u], &q, scheme)?;
        val[u] = fgh[u](&q);
        for j in 0..3 {
            der[u][j] = tangential(fgh[u], j, &q, scheme)?;
        }
    }
    let mut closed = [0.0; 3];
    let mut harm = [0.0; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        // e_c·(next) − e_b·(previous), cyclic in (f, g, h) and (e1, e2, e3)
        let cross = der[b][c] - der[c][b];
        closed[a] = lap[a] - 4.0 * cross;
        harm[a] = lap[a] - 16.0 * val[a] - 4.0 * cross;
    }
    Ok(SphereResiduals {
        closed_system: closed,
        harmonic_system: harm,
    })
}

/// Coefficients of an anti-self-dual 2-form on the θ-basis at p (θ_j are orthogonal
/// with |θ_j|²_𝐞 = 2 r⁻⁸ in the Frobenius-over-2 normalization).
pub fn theta_coefficients(w: &Matrix4<f64>, p: &Point4) -> Result<[f64; 3]> {
    let b = crate::euclidean::base_forms(p)?;
    Ok([0, 1, 2].map(|j| w.dot(&b.theta[j]) / b.theta[j].dot(&b.theta[j])))
}

/// Basis of degree-2 harmonic polynomials on ℝ⁴, as symmetric matrices Q (u = xᵀQx).
pub fn degree2_harmonics() -> Vec<Matrix4<f64>> {
    let mut out = Vec::new();
    for j in 1..4 {
        let mut q = Matrix4::zeros();
        q[(0, 0)] = 1.0;
        q[(j, j)] = -1.0;
        out.push(q);
    }
    for i in 0..4 {
        for j in i + 1..4 {
            let mut q = Matrix4::zeros();
            q[(i, j)] = 0.5;
            q[(j, i)] = 0.5;
            out.push(q);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragingReport {
    pub k: u32,
    pub dimension: usize,
    pub rank: usize,
    /// Largest singular value of the averaging operator on the harmonic space.
    pub operator_norm: f64,
    /// Same for the cyclic subgroup generated by ζ_k alone (should be nonzero).
    pub cyclic_rank: usize,
}

/// Matrix of u ↦ (1/|G|) Σ g*u on degree-2 harmonics, recovered from point samples
/// by least squares in the harmonic basis.
fn averaging_matrix(elements: &[crate::euclidean::DihedralElement], samples: &[Point4]) -> DMatrix<f64> {
    let basis = degree2_harmonics();
    let n = basis.len();
    let eval = |q: &Matrix4<f64>, p: &Point4| (p.vector().transpose() * q * p.vector())[(0, 0)];
    let design = DMatrix::from_fn(samples.len(), n, |s, b| eval(&basis[b], &samples[s]));
    let svd = design.clone().svd(true, true);
    let mut out = DMatrix::zeros(n, n);
    for (b, q) in basis.iter().enumerate() {
        let rhs = nalgebra::DVector::from_fn(samples.len(), |s, _| {
            let p = &samples[s];
            elements.iter().map(|g| eval(q, &g.act(p))).sum::<f64>() / elements.len() as f64
        });
        let coef = svd.solve(&rhs, 1e-12).expect("svd solve");
        out.set_column(b, &coef);
    }
    out
}

fn numerical_rank(m: &DMatrix<f64>) -> (usize, f64) {
    let sv = m.clone().singular_values();
    let top = sv.max();
    (sv.iter().filter(|&&s| s > 1e-9).count(), top)
}

/// Average of every degree-2 harmonic over 𝒟_k, as a rank computation.
pub fn dihedral_averaging(k: u32, samples: &[Point4]) -> Result<AveragingReport> {
    let g = DihedralGroup::new(k)?;
    if samples.len() < 9 {
        return Err(LabError::TooFewSamples { needed: 9, got: samples.len() });
    }
    let full = averaging_matrix(&g.elements(), samples);
    let cyclic: Vec<_> = g.elements().into_iter().filter(|e| e.b == 0).collect();
    let cyc = averaging_matrix(&cyclic, samples);
    let (rank, norm) = numerical_rank(&full);
    Ok(AveragingReport {
        k,
        dimension: 9,
        rank,
        operator_norm: norm,
        cyclic_rank: numerical_rank(&cyc).0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euclidean::values;

    fn model(z: [f64; 9]) -> AleModel {
        AleModel::new(Gram::from_row_major(&z).unwrap(), GroupWeight::dihedral(2).unwrap())
    }

    const GENERIC: [f64; 9] = [2.0, 0.3, -0.4, 0.3, 1.5, 0.2, -0.4, 0.2, 1.1];
    const P: [f64; 4] = [0.7, -1.1, 0.4, 0.9];

    #[test]
    fn weight_of_dihedral_groups() {
        let w = GroupWeight::dihedral(3).unwrap();
        assert_eq!(w.gamma_order, 12);
        assert!((w.norm - 12.0 / std::f64::consts::PI.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn zero_gram_gives_zero() {
        let m = model([0.0; 9]);
        assert_eq!(values(&m.h_zeta(&P)), Matrix4::zeros());
        assert_eq!(values(&m.varpi1(&P)), Matrix4::zeros());
    }

    #[test]
    fn trace_free_and_decomposition() {
        let m = model(GENERIC);
        let h = values(&m.h_zeta(&P));
        assert!(h.trace().abs() < 1e-14);
        let d = values(&m.h_decomposed(&P));
        assert!((h - d).abs().max() < 1e-14, "{h} {d}");
        let t = crate::euclidean::base_forms(&Point4::from(P)).unwrap().theta;
        let hb = m.h_from_basis(&crate::euclidean::standard_structures(), &t);
        assert!((h - hb).abs().max() < 1e-14);
    }

    #[test]
    fn iota_anticommutes_and_matches_hermitian_split() {
        let m = model(GENERIC);
        let i1 = structure(0);
        let io = values(&m.iota1(&P));
        assert!((io * i1 + i1 * io).abs().max() < 1e-15);
        assert!((io - io.transpose()).abs().max() == 0.0);
        // h_{ζ'} = ω₁(·, ι₁·) and ½(h − h(I₁·,I₁·)) = h_{ζ'}
        let h = values(&m.h_zeta(&P));
        let hp = values(&m.with_gram(m.gram.drop_first()).h_zeta(&P));
        assert!(((h - i1.transpose() * h * i1) * 0.5 - hp).abs().max() < 1e-15);
        assert!((i1.transpose() * io - hp).abs().max() < 1e-15);
    }

    #[test]
    fn rotation_exposes_frame_dependence() {
        let m = model(GENERIC);
        let p = Point4::from(P);
        assert!(m.covariance_defect(&crate::so3::Rotation::identity(), &p).unwrap() < 1e-15);
        let a = crate::so3::Rotation::axis_angle(nalgebra::Vector3::new(0.3, -1.0, 0.5), 0.8);
        assert!(m.covariance_defect(&a, &p).unwrap() > 1e-3);
        // the antisymmetric part responsible for it
        let x = P;
        let d = values(&theta(1, &x)) * structure(0) - values(&theta(0, &x)) * structure(1);
        let want = values(&sym_product(&rdr(&x), &alpha(2, &x))) * (-2.0 / r2(&x).powi(3));
        assert!((d - want).abs().max() < 1e-14);
    }

    #[test]
    fn normalized_gram_specialization() {
        // |ζ₂|² = |ζ₃|², ⟨ζ₂,ζ₃⟩ = 0 leaves only the rdr·α₁ term
        let m = model([2.0, 0.5, -0.3, 0.5, 1.2, 0.0, -0.3, 0.0, 1.2]);
        let x = P;
        let want = mscale(&sym_product(&rdr(&x), &alpha(0, &x)), -m.c() * 2.4 / r2(&x).powi(3));
        assert!((values(&m.iota1_coupling(&x)) - values(&want)).abs().max() < 1e-15);
    }

    #[test]
    fn averaging_kills_harmonics() {
        let pts: Vec<Point4> = (0..16)
            .map(|i| {
                let t = i as f64;
                Point4::new((0.7 * t).sin(), (1.3 * t + 0.2).cos(), (2.1 * t).sin() + 0.3, (0.4 * t).cos() - 0.1)
            })
            .collect();
        for k in [2, 3, 5] {
            let r = dihedral_averaging(k, &pts).unwrap();
            assert_eq!(r.rank, 0, "k={k} norm={}", r.operator_norm);
            assert!(r.cyclic_rank > 0);
        }
    }
}
