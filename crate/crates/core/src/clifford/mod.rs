//! The Clifford algebra `Cl(ℝⁿ)` with the Euclidean quadratic form.
//!
//! Multivectors are stored densely with one coefficient per basis blade; blades
//! are addressed by bitmask. [`OrthogonalMap`] carries the induced action of
//! `O(n)` on the whole algebra and [`CliffordGroupElement`] realizes the same
//! action algebraically through the twisted conjugation.

mod cayley;
mod group;
mod multivector;
mod orthogonal;

pub use cayley::{blade_sign, BladeIndex, CayleyTable, ProductTerm, MAX_DIM};
pub use group::CliffordGroupElement;
pub use multivector::Multivector;
pub use orthogonal::{OrthogonalMap, ORTHOGONALITY_TOL};

/// Binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}
