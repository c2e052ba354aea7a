use super::multivector::Multivector;
use crate::error::{Error, Result};

/// Clifford-group element `c · v₁ ⋯ v_k` kept in factored form, so its inverse
/// is available without general multivector inversion.
#[derive(Clone, Debug)]
pub struct CliffordGroupElement {
    dim: usize,
    scalar: f64,
    vectors: Vec<Vec<f64>>,
}

impl CliffordGroupElement {
    pub fn new(dim: usize, scalar: f64, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if scalar == 0.0 || !scalar.is_finite() {
            return Err(Error::NotInvertible(format!("scalar factor {scalar}")));
        }
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(dim, v.len()));
            }
            let q: f64 = v.iter().map(|x| x * x).sum();
            if q == 0.0 {
                return Err(Error::NotInvertible(format!("factor {i} has q(v) = 0")));
            }
        }
        Ok(Self {
            dim,
            scalar,
            vectors,
        })
    }

    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vectors
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::NotInvertible("empty factor list without a dimension".into()))?;
        Self::new(dim, 1.0, vectors)
    }

    pub fn scalar(dim: usize, c: f64) -> Result<Self> {
        Self::new(dim, c, Vec::new())
    }

    pub fn to_multivector(&self) -> Result<Multivector> {
        let mut w = Multivector::embed_scalar(self.dim, self.scalar)?;
        for v in &self.vectors {
            w = w.geometric_product(&Multivector::embed_vector(v)?)?;
        }
        Ok(w)
    }

    /// `w⁻¹ = c⁻¹ v_k⁻¹ ⋯ v₁⁻¹` with `v⁻¹ = v / q(v)`.
    pub fn inverse_multivector(&self) -> Result<Multivector> {
        let mut w = Multivector::embed_scalar(self.dim, 1.0 / self.scalar)?;
        for v in self.vectors.iter().rev() {
            let q: f64 = v.iter().map(|x| x * x).sum();
            let inv: Vec<f64> = v.iter().map(|x| x / q).collect();
            w = w.geometric_product(&Multivector::embed_vector(&inv)?)?;
        }
        Ok(w)
    }

    /// Adjusted twisted conjugation `ρ(w)(x) = w x^[0] w⁻¹ + α(w) x^[1] w⁻¹`.
    pub fn twisted_conjugation(&self, x: &Multivector) -> Result<Multivector> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, x.dim()));
        }
        let w = self.to_multivector()?;
        let w_inv = self.inverse_multivector()?;
        let even = w.geometric_product(&x.even_part())?.geometric_product(&w_inv)?;
        let odd = w
            .main_involution()
            .geometric_product(&x.odd_part())?
            .geometric_product(&w_inv)?;
        Ok(&even + &odd)
    }

    /// Orthogonal matrix of `ρ(w)` restricted to vectors: the composition of
    /// the reflections `R_{v₁} ∘ ⋯ ∘ R_{v_k}` (row-major).
    pub fn orthogonal_matrix(&self) -> Vec<f64> {
        let n = self.dim;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        for v in &self.vectors {
            let vv: f64 = v.iter().map(|x| x * x).sum();
            // m ← m · R_v
            let mut next = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        let r = if k == j { 1.0 } else { 0.0 } - 2.0 * v[k] * v[j] / vv;
                        s += m[i * n + k] * r;
                    }
                    next[i * n + j] = s;
                }
            }
            m = next;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{BladeIndex, OrthogonalMap};
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn basis(dim: usize, bits: u16) -> Multivector {
        Multivector::basis(dim, BladeIndex(bits)).unwrap()
    }

    #[test]
    fn single_vector_is_a_reflection() {
        // ρ(e1) reflects across the hyperplane normal to e1.
        let w = CliffordGroupElement::from_vectors(vec![vec![1.0, 0.0]]).unwrap();
        let e1 = basis(2, 1);
        let e2 = basis(2, 2);
        assert!(w.twisted_conjugation(&e1).unwrap().max_abs_diff(&e1.scale(-1.0)) < 1e-15);
        assert!(w.twisted_conjugation(&e2).unwrap().max_abs_diff(&e2) < 1e-15);
    }

    #[test]
    fn scalar_acts_trivially() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let w = CliffordGroupElement::scalar(3, -2.5).unwrap();
        for _ in 0..20 {
            let x = Multivector::random(3, &mut rng).unwrap();
            assert!(w.twisted_conjugation(&x).unwrap().max_abs_diff(&x) < 1e-12);
        }
    }

    #[test]
    fn zero_factor_rejected() {
        assert!(matches!(
            CliffordGroupElement::from_vectors(vec![vec![0.0, 0.0, 0.0]]),
            Err(Error::NotInvertible(_))
        ));
        assert!(CliffordGroupElement::scalar(2, 0.0).is_err());
    }

    #[test]
    fn matches_orthogonal_action_on_every_grade() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for n in 2..=4 {
            for k in 1..=n {
                let vectors: Vec<Vec<f64>> = (0..k)
                    .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
                    .collect();
                let w = CliffordGroupElement::new(n, rng.gen_range(0.5..2.0), vectors).unwrap();
                let q = OrthogonalMap::new(n, w.orthogonal_matrix()).unwrap();
                for _ in 0..10 {
                    let x = Multivector::random(n, &mut rng).unwrap();
                    let lhs = w.twisted_conjugation(&x).unwrap();
                    let rhs = q.apply(&x).unwrap();
                    let rel = lhs.max_abs_diff(&rhs) / rhs.norm().max(1e-300);
                    assert!(rel <= 1e-10, "n={n} k={k} rel={rel}");
                }
            }
        }
    }

    #[test]
    fn preserves_grades_and_products() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let vectors: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..3).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let w = CliffordGroupElement::from_vectors(vectors).unwrap();
            let x = Multivector::random(3, &mut rng).unwrap();
            let y = Multivector::random(3, &mut rng).unwrap();
            for m in 0..=3 {
                let a = w.twisted_conjugation(&x.grade_project(m).unwrap()).unwrap();
                let b = w.twisted_conjugation(&x).unwrap().grade_project(m).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-12);
            }
            let lhs = w.twisted_conjugation(&(&x * &y)).unwrap();
            let rhs = &w.twisted_conjugation(&x).unwrap() * &w.twisted_conjugation(&y).unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-10);
        }
    }
}
