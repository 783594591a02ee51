//! Gram matrices of the deformation parameter and their SO(3) normalization.

use crate::error::{LabError, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Z = (⟨ζ_j, ζ_l⟩), symmetric positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gram(pub Matrix3<f64>);

impl Gram {
    pub fn new(z: Matrix3<f64>) -> Result<Gram> {
        let scale = z.abs().max().max(1e-300);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidParameter("gram has non-finite entries".into()));
        }
        if (z - z.transpose()).abs().max() > 1e-12 * scale {
            return Err(LabError::InvalidParameter("gram must be symmetric".into()));
        }
        let z = (z + z.transpose()) * 0.5;
        let (l, _) = sym_eigen(&z);
        if l[2] < -1e-10 * scale {
            return Err(LabError::InvalidParameter(format!("gram must be positive semidefinite, smallest eigenvalue {}", l[2])));
        }
        Ok(Gram(z))
    }

    pub fn zero() -> Gram {
        Gram(Matrix3::zeros())
    }

    /// From 9 row-major entries.
    pub fn from_row_major(v: &[f64]) -> Result<Gram> {
        if v.len() != 9 {
            return Err(LabError::InvalidParameter(format!("gram needs 9 entries, got {}", v.len())));
        }
        Gram::new(Matrix3::from_row_slice(v))
    }

    /// Gram matrix of three vectors ζ_1, ζ_2, ζ_3.
    pub fn from_vectors(zeta: &[Vec<f64>; 3]) -> Result<Gram> {
        let n = zeta[0].len();
        if zeta.iter().any(|z| z.len() != n) {
            return Err(LabError::InvalidParameter("ζ components must have equal length".into()));
        }
        let z = Matrix3::from_fn(|i, j| zeta[i].iter().zip(&zeta[j]).map(|(a, b)| a * b).sum());
        Gram::new(z)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.0
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Eigenvalues λ1 ≥ λ2 ≥ λ3.
    pub fn eigenvalues(&self) -> [f64; 3] {
        sym_eigen(&self.0).0
    }

    /// ζ' = (0, ζ2, ζ3): first row and column zeroed.
    pub fn drop_first(&self) -> Gram {
        let mut z = self.0;
        for i in 0..3 {
            z[(0, i)] = 0.0;
            z[(i, 0)] = 0.0;
        }
        Gram(z)
    }

    /// ζ'' = (0, 0, ζ3).
    pub fn drop_first_two(&self) -> Gram {
        let mut z = Matrix3::zeros();
        z[(2, 2)] = self.0[(2, 2)];
        Gram(z)
    }

    /// |Z'22 − Z'33| + |Z'23|: the defect of the normalization condition.
    pub fn normalization_defect(&self) -> f64 {
        (self.0[(1, 1)] - self.0[(2, 2)]).abs().max(self.0[(1, 2)].abs())
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation(pub Matrix3<f64>);

impl Rotation {
    pub fn new(a: Matrix3<f64>) -> Result<Rotation> {
        if (a.transpose() * a - Matrix3::identity()).abs().max() > 1e-12 || (a.determinant() - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidParameter("matrix is not in SO(3)".into()));
        }
        Ok(Rotation(a))
    }

    pub fn identity() -> Rotation {
        Rotation(Matrix3::identity())
    }

    /// Rotation by `angle` about a unit `axis`.
    pub fn axis_angle(axis: Vector3<f64>, angle: f64) -> Rotation {
        let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Rotation(*r.matrix())
    }

    pub fn orthogonality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity())
            .abs()
            .max()
            .max((self.0.determinant() - 1.0).abs())
    }
}

/// Z ↦ A Z Aᵀ.
pub fn act(a: &Rotation, z: &Gram) -> Gram {
    let m = a.0 * z.0 * a.0.transpose();
    Gram((m + m.transpose()) * 0.5)
}

/// The signed permutations swapping coordinates (2,3), (1,2) and (1,3).
pub const SIGNED_PERMUTATIONS: [[[f64; 3]; 3]; 3] = [
    [[1., 0., 0.], [0., 0., 1.], [0., -1., 0.]],
    [[0., 1., 0.], [-1., 0., 0.], [0., 0., 1.]],
    [[0., 0., 1.], [0., 1., 0.], [-1., 0., 0.]],
];

fn signed_permutation(i: usize) -> Matrix3<f64> {
    let p = SIGNED_PERMUTATIONS[i];
    Matrix3::from_fn(|r, c| p[r][c])
}

/// Eigenvalues by the trigonometric form of Cardano's formula, sorted decreasingly.
pub fn cardano_eigenvalues(z: &Matrix3<f64>) -> [f64; 3] {
    let q = z.trace() / 3.0;
    let p1 = z[(0, 1)].powi(2) + z[(0, 2)].powi(2) + z[(1, 2)].powi(2);
    let p2 = (z[(0, 0)] - q).powi(2) + (z[(1, 1)] - q).powi(2) + (z[(2, 2)] - q).powi(2) + 2.0 * p1;
    if p2 <= f64::MIN_POSITIVE {
        return [q; 3];
    }
    let p = (p2 / 6.0).sqrt();
    let b = (z - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let l2 = 3.0 * q - l1 - l3;
    let mut l = [l1, l2, l3];
    l.sort_by(|a, b| b.total_cmp(a));
    l
}

fn eigenvector_guess(z: &Matrix3<f64>, lambda: f64) -> Option<Vector3<f64>> {
    let m = z - Matrix3::identity() * lambda;
    let rows = [m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()];
    let cands = [rows[0].cross(&rows[1]), rows[0].cross(&rows[2]), rows[1].cross(&rows[2])];
    let best = cands.iter().max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
    let scale = m.norm().powi(2).max(1e-300);
    if best.norm() > 1e-8 * scale {
        Some(best.normalize())
    } else {
        None
    }
}

/// One cyclic Jacobi sweep on the symmetric `m`, accumulating rotations into `v`
/// so that vᵀ z v stays equal to m.
fn jacobi_sweep(m: &mut Matrix3<f64>, v: &mut Matrix3<f64>) {
    for (p, q) in [(0, 1), (0, 2), (1, 2)] {
        let apq = m[(p, q)];
        if apq == 0.0 {
            continue;
        }
        let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let t = if theta == 0.0 { 1.0 } else { t };
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        let mut g = Matrix3::identity();
        g[(p, p)] = c;
        g[(q, q)] = c;
        g[(p, q)] = s;
        g[(q, p)] = -s;
        *m = g.transpose() * *m * g;
        *v *= g;
    }
}

/// Symmetric eigendecomposition: eigenvalues λ1 ≥ λ2 ≥ λ3 and O ∈ SO(3) whose rows are
/// the matching eigenvectors, O Z Oᵀ = diag(λ).
pub fn sym_eigen(z: &Matrix3<f64>) -> ([f64; 3], Matrix3<f64>) {
    let l = cardano_eigenvalues(z);
    let mut cols: Vec<Vector3<f64>> = Vec::new();
    for &lam in &l {
        if let Some(v) = eigenvector_guess(z, lam) {
            let mut w = v;
            for c in &cols {
                w -= c * c.dot(&w);
            }
            if w.norm() > 0.5 {
                cols.push(w.normalize());
                continue;
            }
        }
        cols.push(Vector3::zeros());
    }
    // complete degenerate directions by Gram-Schmidt on the canonical basis
    for i in 0..3 {
        if cols[i].norm() == 0.0 {
            for e in [Vector3::x(), Vector3::y(), Vector3::z()] {
                let mut w = e;
                for c in cols.iter().filter(|c| c.norm() > 0.0) {
                    w -= c * c.dot(&w);
                }
                if w.norm() > 0.5 {
                    cols[i] = w.normalize();
                    break;
                }
            }
        }
    }
    let mut v = Matrix3::from_columns(&cols);
    if v.determinant() < 0.0 {
        v.set_column(2, &(-v.column(2)));
    }
    // polish: Jacobi sweeps on the nearly diagonal matrix
    let mut m = v.transpose() * z * v;
    for _ in 0..4 {
        let off = m[(0, 1)].abs() + m[(0, 2)].abs() + m[(1, 2)].abs();
        if off <= f64::EPSILON * 1e-3 * m.norm() {
            break;
        }
        jacobi_sweep(&mut m, &mut v);
    }
    let mut lam = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
    let mut o = v.transpose();
    // reorder decreasingly using the signed permutations (keeps O in SO(3))
    for _ in 0..3 {
        for (i, j, k) in [(0, 1, 1), (1, 2, 0), (0, 2, 2)] {
            if lam[i] < lam[j] {
                lam.swap(i, j);
                o = signed_permutation(k) * o;
            }
        }
    }
    (lam, o)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub rotation: Rotation,
    pub normalized: Gram,
    pub eigenvalues: [f64; 3],
    /// True when a tie in the spectrum let us skip Q.
    pub degenerate: bool,
}

/// Relative tie threshold for eigenvalues.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// A ∈ SO(3) with (AZAᵀ)22 = (AZAᵀ)33 and (AZAᵀ)23 = 0; A = QO.
pub fn normalize(z: &Gram) -> Normalization {
    let (l, o) = sym_eigen(&z.0);
    let tie = TIE_TOLERANCE * z.norm().max(f64::MIN_POSITIVE);
    let (q, degenerate) = if l[1] - l[2] <= tie {
        (Matrix3::identity(), true)
    } else if l[0] - l[1] <= tie {
        (signed_permutation(2), true)
    } else {
        let a = ((l[0] - l[1]) / (l[0] - l[2])).sqrt();
        let b = ((l[1] - l[2]) / (l[0] - l[2])).sqrt();
        (Matrix3::new(a, 0.0, b, 0.0, 1.0, 0.0, -b, 0.0, a), false)
    };
    let a = Rotation(q * o);
    Normalization {
        rotation: a,
        normalized: act(&a, z),
        eigenvalues: l,
        degenerate,
    }
}

/// Λ = √((λ1−λ2)(λ2−λ3)).
pub fn big_lambda(l: &[f64; 3]) -> f64 {
    ((l[0] - l[1]).max(0.0) * (l[1] - l[2]).max(0.0)).sqrt()
}

/// The one-parameter family of normalized shapes congruent to Z.
pub fn normalized_family(z: &Gram, phi: f64) -> Gram {
    let l = z.eigenvalues();
    let big = big_lambda(&l);
    let (c, s) = (big * phi.cos(), big * phi.sin());
    Gram(Matrix3::new(l[0] + l[2] - l[1], c, s, c, l[1], 0.0, s, 0.0, l[1]))
}

/// Angle φ placing a normalized Z' on the family, with the residual of that fit.
pub fn family_angle(zn: &Gram) -> (f64, f64) {
    let phi = zn.0[(0, 2)].atan2(zn.0[(0, 1)]);
    let fam = normalized_family(zn, phi);
    (phi, (fam.0 - zn.0).abs().max())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_321_example() {
        let z = Gram::new(Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, 1.0))).unwrap();
        let n = normalize(&z);
        let want = Matrix3::new(2.0, 0.0, -1.0, 0.0, 2.0, 0.0, -1.0, 0.0, 2.0);
        assert!((n.normalized.0 - want).abs().max() < 1e-12);
        assert!(n.rotation.orthogonality_defect() < 1e-12);
        let fam = normalized_family(&z, 0.0);
        assert!((fam.0 - Matrix3::new(2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 2.0)).abs().max() < 1e-12);
    }

    #[test]
    fn scalar_gram_is_fixed() {
        let z = Gram::new(Matrix3::identity() * 2.5).unwrap();
        let n = normalize(&z);
        assert!(n.degenerate);
        assert!((n.normalized.0 - z.0).abs().max() < 1e-14);
    }

    #[test]
    fn double_top_eigenvalue() {
        let z = Gram::new(Matrix3::from_diagonal(&Vector3::new(1.0, 4.0, 4.0))).unwrap();
        let n = normalize(&z);
        assert!(n.normalized.normalization_defect() < 1e-13);
        assert!((n.normalized.entry(1, 1) - 4.0).abs() < 1e-13);
        let z = Gram::new(Matrix3::from_diagonal(&Vector3::new(5.0, 5.0, 1.0))).unwrap();
        let n = normalize(&z);
        assert!(n.degenerate);
        assert!(n.normalized.normalization_defect() < 1e-13);
        assert!((n.normalized.entry(1, 1) - 5.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_non_psd() {
        assert!(Gram::new(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 0.0))).is_err());
        assert!(Gram::from_row_major(&[1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).is_err());
        assert!(Gram::from_row_major(&[1.0; 4]).is_err());
    }

    #[test]
    fn permutations_are_rotations() {
        for i in 0..3 {
            assert!(Rotation::new(signed_permutation(i)).is_ok());
        }
    }
}
