//! Seeded sampling. Every suite draws from ChaCha8 streams keyed by (seed, stream id),
//! so sample points are the same on every platform and independent of thread count.

use crate::euclidean::Point4;
use crate::so3::Gram;
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type LabRng = ChaCha8Rng;

/// Generator for one named use of the seed. The stream id is a stable FNV-1a hash of
/// the name, so adding a new stream does not shift existing ones.
pub fn stream(seed: u64, name: &str) -> LabRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(fnv1a(name.as_bytes()));
    r
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Uniform direction on 𝕊³ (normalized Gaussian via Box–Muller).
pub fn unit_direction(rng: &mut LabRng) -> Point4 {
    loop {
        let g = [gauss(rng), gauss(rng), gauss(rng), gauss(rng)];
        let p = Point4 { x: g };
        let r = p.r();
        if r > 1e-8 {
            return p.scale(1.0 / r);
        }
    }
}

fn gauss(rng: &mut LabRng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Uniform in the shell lo ≤ |p| ≤ hi (radius drawn with density ∝ r³).
pub fn point_in_shell(rng: &mut LabRng, lo: f64, hi: f64) -> Point4 {
    let t: f64 = rng.gen();
    let r = (lo.powi(4) + t * (hi.powi(4) - lo.powi(4))).powf(0.25);
    unit_direction(rng).scale(r)
}

/// Log-uniform in [lo, hi].
pub fn log_uniform(rng: &mut LabRng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Gram matrix of three random vectors in ℝ^rank (rank 3 gives a generic one).
pub fn random_gram(rng: &mut LabRng, rank: usize) -> Gram {
    let v: [Vec<f64>; 3] = std::array::from_fn(|_| (0..rank).map(|_| rng.gen_range(-2.0..2.0)).collect());
    let z = Matrix3::from_fn(|i, j| v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum());
    Gram((z + z.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..4).map(|_| stream(7, "x").gen()).collect();
        let mut s = stream(7, "x");
        let b: Vec<f64> = (0..4).map(|_| s.gen()).collect();
        assert_eq!(a[0], b[0]);
        let mut t = stream(7, "y");
        assert_ne!(b[0], t.gen::<f64>());
    }

    #[test]
    fn shell_and_direction() {
        let mut r = stream(1, "shell");
        for _ in 0..200 {
            let p = point_in_shell(&mut r, 2.0, 3.0);
            assert!(p.r() >= 2.0 - 1e-12 && p.r() <= 3.0 + 1e-12);
        }
        let g = random_gram(&mut r, 3);
        assert!(g.eigenvalues()[2] > -1e-12);
    }
}
