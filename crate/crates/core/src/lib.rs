//! Numerical verification of hyperkähler ALE/ALF formulas on ℝ⁴ ≅ ℂ².
//!
//! Conventions used throughout:
//! - coordinates `x = (x1, x2, x3, x4)` with `z1 = x1 + i x2`, `z2 = x3 + i x4`;
//! - a 2-tensor `T` is stored as the matrix `T_ij = T(∂_i, ∂_j)`; a 2-form `a∧b`
//!   has matrix `a bᵀ − b aᵀ`; the symmetric product is `a·b = a⊗b + b⊗a`;
//! - an endomorphism `J` acts on vectors as a matrix and on covectors by
//!   `(Jβ)(X) = −β(JX)`.

pub mod ale;
pub mod beth;
pub mod calculus;
pub mod error;
pub mod euclidean;
pub mod gluing;
pub mod jet;
pub mod report;
pub mod rng;
pub mod so3;
pub mod suites;
pub mod taub_nut;

pub use error::{LabError, Result};
pub use euclidean::Point4;
pub use jet::{Jet, Scalar};
