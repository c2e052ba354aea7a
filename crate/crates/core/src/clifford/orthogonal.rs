use rand::Rng;
use rand_distr::StandardNormal;

use super::cayley::{CayleyTable, MAX_DIM};
use super::multivector::Multivector;
use crate::error::{Error, Result};

/// Tolerance on `max |QᵀQ − I|` accepted by [`OrthogonalMap::new`].
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// An element `Q ∈ O(n)` together with its action on all of `Cl(ℝⁿ)`.
///
/// The action extends `Q` multiplicatively: the image of `e_A = e_{i₁}⋯e_{i_k}`
/// is `(Qe_{i₁})⋯(Qe_{i_k})`. It is precomputed once as a `2ⁿ × 2ⁿ` matrix.
#[derive(Clone, Debug)]
pub struct OrthogonalMap {
    dim: usize,
    matrix: Vec<f64>,
    /// Column-major blade action: `blade_action[A * size + B]` is the
    /// coefficient of `e_B` in the image of `e_A`.
    blade_action: Vec<f64>,
}

impl OrthogonalMap {
    /// `matrix` is row-major `n × n`.
    pub fn new(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::DimensionUnsupported(dim));
        }
        if matrix.len() != dim * dim {
            return Err(Error::Shape(format!(
                "orthogonal matrix has {} entries, expected {}",
                matrix.len(),
                dim * dim
            )));
        }
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let qtq: f64 = (0..dim).map(|k| matrix[k * dim + i] * matrix[k * dim + j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((qtq - target).abs());
            }
        }
        if !(worst <= ORTHOGONALITY_TOL) {
            return Err(Error::NotOrthogonal(worst));
        }
        let blade_action = blade_action(dim, &matrix)?;
        Ok(Self {
            dim,
            matrix,
            blade_action,
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1.0;
        }
        Self::new(dim, m)
    }

    /// Householder reflection across the hyperplane normal to `v`.
    pub fn reflection(v: &[f64]) -> Result<Self> {
        let dim = v.len();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            return Err(Error::NotInvertible("zero reflection vector".into()));
        }
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                m[i * dim + j] = if i == j { 1.0 } else { 0.0 } - 2.0 * v[i] * v[j] / vv;
            }
        }
        Self::new(dim, m)
    }

    /// Haar-distributed sample from O(n) (both components), via Gram–Schmidt
    /// on a Gaussian matrix. Each column is orthogonalised twice so `QᵀQ = I`
    /// holds to rounding.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        loop {
            let mut cols: Vec<Vec<f64>> = (0..dim)
                .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let mut ok = true;
            for i in 0..dim {
                for _ in 0..2 {
                    for j in 0..i {
                        let d: f64 = (0..dim).map(|k| cols[i][k] * cols[j][k]).sum();
                        for k in 0..dim {
                            cols[i][k] -= d * cols[j][k];
                        }
                    }
                }
                let norm = cols[i].iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-6 {
                    ok = false;
                    break;
                }
                cols[i].iter_mut().for_each(|x| *x /= norm);
            }
            if !ok {
                continue;
            }
            let mut m = vec![0.0; dim * dim];
            for (j, col) in cols.iter().enumerate() {
                for (i, &c) in col.iter().enumerate() {
                    m[i * dim + j] = c;
                }
            }
            return Self::new(dim, m);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn determinant_sign(&self) -> f64 {
        // The pseudoscalar maps to det(Q) times itself.
        let size = 1 << self.dim;
        let top = size - 1;
        self.blade_action[top * size + top].signum()
    }

    /// `Q₁Q₂` (apply `other` first).
    pub fn compose(&self, other: &OrthogonalMap) -> Result<OrthogonalMap> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let n = self.dim;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = (0..n).map(|k| self.matrix[i * n + k] * other.matrix[k * n + j]).sum();
            }
        }
        OrthogonalMap::new(n, m)
    }

    pub fn apply_vector(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|i| (0..n).map(|k| self.matrix[i * n + k] * v[k]).sum())
            .collect()
    }

    pub fn apply(&self, x: &Multivector) -> Result<Multivector> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, x.dim()));
        }
        let mut out = vec![0.0; x.coeffs().len()];
        self.apply_coeffs(x.coeffs(), &mut out);
        Multivector::new(self.dim, out)
    }

    /// Applies the blade action to a raw coefficient slice of length `2ⁿ`.
    pub fn apply_coeffs(&self, x: &[f64], out: &mut [f64]) {
        let size = 1 << self.dim;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (a, &c) in x.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let col = &self.blade_action[a * size..(a + 1) * size];
            for (o, &m) in out.iter_mut().zip(col) {
                *o += c * m;
            }
        }
    }

    /// Applies the action to every `2ⁿ`-sized chunk of `data`.
    pub fn apply_chunks(&self, data: &[f64]) -> Vec<f64> {
        let size = 1 << self.dim;
        let mut out = vec![0.0; data.len()];
        for (src, dst) in data.chunks(size).zip(out.chunks_mut(size)) {
            self.apply_coeffs(src, dst);
        }
        out
    }
}

fn blade_action(dim: usize, q: &[f64]) -> Result<Vec<f64>> {
    let size = 1usize << dim;
    let table = CayleyTable::shared(dim)?;
    let images: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            let mut v = vec![0.0; size];
            for k in 0..dim {
                v[1 << k] = q[k * dim + i];
            }
            v
        })
        .collect();
    let mut action = vec![0.0; size * size];
    // Blades in increasing mask order: each is its lowest generator times a
    // previously computed blade with that generator removed.
    for a in 0..size {
        let col = if a == 0 {
            let mut one = vec![0.0; size];
            one[0] = 1.0;
            one
        } else {
            let low = a.trailing_zeros() as usize;
            let rest = a & !(1 << low);
            let left = &images[low];
            let right = &action[rest * size..(rest + 1) * size];
            let mut out = vec![0.0; size];
            for (i, &x) in left.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                for (j, &y) in right.iter().enumerate() {
                    if y == 0.0 {
                        continue;
                    }
                    let (r, s) = table.entry(i, j);
                    out[r] += s * x * y;
                }
            }
            out
        };
        action[a * size..(a + 1) * size].copy_from_slice(&col);
    }
    Ok(action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::BladeIndex;
    use rand::SeedableRng;

    #[test]
    fn rejects_non_orthogonal() {
        assert!(matches!(
            OrthogonalMap::new(2, vec![1.0, 0.1, 0.0, 1.0]),
            Err(Error::NotOrthogonal(_))
        ));
    }

    #[test]
    fn identity_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let id = OrthogonalMap::identity(3).unwrap();
        let x = Multivector::random(3, &mut rng).unwrap();
        assert_eq!(id.apply(&x).unwrap(), x);
    }

    #[test]
    fn quarter_turn() {
        // rotation by 90° in the (e1, e2) plane
        let q = OrthogonalMap::new(2, vec![0.0, -1.0, 1.0, 0.0]).unwrap();
        let e1 = Multivector::basis(2, BladeIndex(1)).unwrap();
        let e2 = Multivector::basis(2, BladeIndex(2)).unwrap();
        let e12 = Multivector::basis(2, BladeIndex(3)).unwrap();
        assert!(q.apply(&e1).unwrap().max_abs_diff(&e2) < 1e-15);
        assert!(q.apply(&e12).unwrap().max_abs_diff(&e12) < 1e-15);
    }

    #[test]
    fn scalars_are_fixed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let q = OrthogonalMap::random(4, &mut rng).unwrap();
        let s = Multivector::embed_scalar(4, 7.0).unwrap();
        assert!(q.apply(&s).unwrap().max_abs_diff(&s) < 1e-15);
    }

    #[test]
    fn reflection_flips_pseudoscalar() {
        let r = OrthogonalMap::reflection(&[1.0, 2.0, -1.0]).unwrap();
        assert_eq!(r.determinant_sign(), -1.0);
    }
}
