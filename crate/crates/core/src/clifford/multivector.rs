use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_distr::StandardNormal;

use super::cayley::{BladeIndex, CayleyTable, MAX_DIM};
use crate::error::{Error, Result};

/// Dense element of `Cl(ℝⁿ)`: `coeffs[A]` is the coefficient of blade `e_A`
/// with `A` a bitmask.
#[derive(Clone, Debug, PartialEq)]
pub struct Multivector {
    dim: usize,
    coeffs: Vec<f64>,
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::DimensionUnsupported(dim))
    }
}

impl Multivector {
    pub fn new(dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if coeffs.len() != 1 << dim {
            return Err(Error::CoefficientLength {
                got: coeffs.len(),
                expected: 1 << dim,
            });
        }
        Ok(Self { dim, coeffs })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            coeffs: vec![0.0; 1 << dim],
        })
    }

    /// Grade-0 element `s · 1`.
    pub fn embed_scalar(dim: usize, s: f64) -> Result<Self> {
        let mut x = Self::zero(dim)?;
        x.coeffs[0] = s;
        Ok(x)
    }

    /// Grade-1 element `Σ v_i e_{i+1}`; the dimension is `v.len()`.
    pub fn embed_vector(v: &[f64]) -> Result<Self> {
        let mut x = Self::zero(v.len())?;
        for (i, &c) in v.iter().enumerate() {
            x.coeffs[1 << i] = c;
        }
        Ok(x)
    }

    pub fn basis(dim: usize, blade: BladeIndex) -> Result<Self> {
        let mut x = Self::zero(dim)?;
        let slot = x
            .coeffs
            .get_mut(blade.bits())
            .ok_or(Error::GradeOutOfRange {
                grade: blade.grade(),
                dim,
            })?;
        *slot = 1.0;
        Ok(x)
    }

    /// Standard-normal coefficients on every blade.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        check_dim(dim)?;
        let coeffs = (0..1 << dim).map(|_| rng.sample(StandardNormal)).collect();
        Ok(Self { dim, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn scalar_part(&self) -> f64 {
        self.coeffs[0]
    }

    /// Grade-1 coefficients as an ordinary vector (left inverse of
    /// [`Multivector::embed_vector`]).
    pub fn vector_part(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.coeffs[1 << i]).collect()
    }

    pub fn geometric_product(&self, other: &Multivector) -> Result<Multivector> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let table = CayleyTable::shared(self.dim)?;
        let size = self.coeffs.len();
        let mut out = vec![0.0; size];
        for (a, &x) in self.coeffs.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (b, &y) in other.coeffs.iter().enumerate() {
                let (r, s) = table.entry(a, b);
                out[r] += s * x * y;
            }
        }
        Ok(Multivector {
            dim: self.dim,
            coeffs: out,
        })
    }

    /// `x⁽ᵐ⁾`: zero every coefficient whose blade grade differs from `m`.
    pub fn grade_project(&self, m: usize) -> Result<Multivector> {
        if m > self.dim {
            return Err(Error::GradeOutOfRange {
                grade: m,
                dim: self.dim,
            });
        }
        Ok(self.map_blades(|a, c| if a.count_ones() as usize == m { c } else { 0.0 }))
    }

    /// `x^[0]`, the even-grade part.
    pub fn even_part(&self) -> Multivector {
        self.map_blades(|a, c| if a.count_ones() % 2 == 0 { c } else { 0.0 })
    }

    /// `x^[1]`, the odd-grade part.
    pub fn odd_part(&self) -> Multivector {
        self.map_blades(|a, c| if a.count_ones() % 2 == 1 { c } else { 0.0 })
    }

    /// `α(x) = x^[0] − x^[1]`.
    pub fn main_involution(&self) -> Multivector {
        self.map_blades(|a, c| if a.count_ones() % 2 == 1 { -c } else { c })
    }

    /// Reverse: flips the order of generators in every blade.
    pub fn reverse(&self) -> Multivector {
        self.map_blades(|a, c| {
            let k = a.count_ones() as usize;
            if (k * k.saturating_sub(1) / 2) % 2 == 1 {
                -c
            } else {
                c
            }
        })
    }

    /// Extended quadratic form: sum of squared coefficients in the
    /// orthonormal blade basis, optionally restricted to grade `m`.
    pub fn q(&self, grade: Option<usize>) -> Result<f64> {
        match grade {
            None => Ok(self.coeffs.iter().map(|c| c * c).sum()),
            Some(m) if m > self.dim => Err(Error::GradeOutOfRange {
                grade: m,
                dim: self.dim,
            }),
            Some(m) => Ok(self
                .coeffs
                .iter()
                .enumerate()
                .filter(|(a, _)| a.count_ones() as usize == m)
                .map(|(_, c)| c * c)
                .sum()),
        }
    }

    pub fn scale(&self, s: f64) -> Multivector {
        self.map_blades(|_, c| c * s)
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Multivector) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn map_blades(&self, f: impl Fn(usize, f64) -> f64) -> Multivector {
        Multivector {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(a, &c)| f(a, c))
                .collect(),
        }
    }

    fn zip_with(&self, other: &Multivector, f: impl Fn(f64, f64) -> f64) -> Multivector {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        Multivector {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl Add for &Multivector {
    type Output = Multivector;
    fn add(self, rhs: &Multivector) -> Multivector {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Multivector {
    type Output = Multivector;
    fn sub(self, rhs: &Multivector) -> Multivector {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &Multivector {
    type Output = Multivector;
    fn neg(self) -> Multivector {
        self.scale(-1.0)
    }
}

/// Geometric product. Panics on dimension mismatch; use
/// [`Multivector::geometric_product`] for the checked form.
impl Mul for &Multivector {
    type Output = Multivector;
    fn mul(self, rhs: &Multivector) -> Multivector {
        self.geometric_product(rhs).expect("dimension mismatch")
    }
}

impl fmt::Display for Multivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (a, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}·{}", BladeIndex(a as u16).name())?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}
