use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 8;

/// Basis blade `e_A` identified by its bitmask: bit `i` set means `e_{i+1}`
/// is a factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BladeIndex(pub u16);

impl BladeIndex {
    pub fn bits(self) -> usize {
        self.0 as usize
    }

    pub fn grade(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Human-readable name, `1` for the scalar blade and `e13` style otherwise.
    pub fn name(self) -> String {
        if self.0 == 0 {
            return "1".to_string();
        }
        let mut s = String::from("e");
        for i in 0..16 {
            if self.0 >> i & 1 == 1 {
                s.push_str(&(i + 1).to_string());
            }
        }
        s
    }
}

/// Sign of `e_A e_B` in a Euclidean algebra. Counts the transpositions needed
/// to move every generator of `B` past the generators of `A` that exceed it;
/// repeated generators then contract to `+1`.
pub fn blade_sign(a: usize, b: usize) -> f64 {
    let mut a = a >> 1;
    let mut swaps = 0u32;
    while a != 0 {
        swaps += (a & b).count_ones();
        a >>= 1;
    }
    if swaps & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// One nonzero structure constant, `e_a e_b = sign · e_result`, tagged with
/// the grade pair `(grade(a), grade(b))` flattened as `i·(n+1) + j`.
#[derive(Clone, Copy, Debug)]
pub struct ProductTerm {
    pub a: usize,
    pub b: usize,
    pub result: usize,
    pub sign: f64,
    pub pair: usize,
}

/// Blade multiplication table of `Cl(ℝⁿ)`.
#[derive(Debug)]
pub struct CayleyTable {
    dim: usize,
    grades: Vec<usize>,
    entries: Vec<(usize, f64)>,
    terms: Vec<ProductTerm>,
    pairs_by_blade: Vec<Vec<usize>>,
}

impl CayleyTable {
    pub fn new(dim: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::DimensionUnsupported(dim));
        }
        Ok(Self::build(dim))
    }

    /// Also accepts `dim == 0` (the reals), used internally for plain
    /// real-valued tensors.
    pub(crate) fn build(dim: usize) -> Self {
        let size = 1usize << dim;
        let grades: Vec<usize> = (0..size).map(|a| a.count_ones() as usize).collect();
        let mut entries = Vec::with_capacity(size * size);
        let mut terms = Vec::with_capacity(size * size);
        let mut pairs_by_blade = vec![Vec::new(); size];
        for a in 0..size {
            for b in 0..size {
                let result = a ^ b;
                let sign = blade_sign(a, b);
                entries.push((result, sign));
                let pair = grades[a] * (dim + 1) + grades[b];
                terms.push(ProductTerm {
                    a,
                    b,
                    result,
                    sign,
                    pair,
                });
                if !pairs_by_blade[result].contains(&pair) {
                    pairs_by_blade[result].push(pair);
                }
            }
        }
        for pairs in &mut pairs_by_blade {
            pairs.sort_unstable();
        }
        Self {
            dim,
            grades,
            entries,
            terms,
            pairs_by_blade,
        }
    }

    /// Process-wide cached table for dimension `dim` (0..=8).
    pub fn shared(dim: usize) -> Result<Arc<CayleyTable>> {
        static TABLES: [OnceLock<Arc<CayleyTable>>; MAX_DIM + 1] =
            [const { OnceLock::new() }; MAX_DIM + 1];
        let slot = TABLES.get(dim).ok_or(Error::DimensionUnsupported(dim))?;
        Ok(slot.get_or_init(|| Arc::new(CayleyTable::build(dim))).clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        1 << self.dim
    }

    pub fn grade(&self, blade: usize) -> usize {
        self.grades[blade]
    }

    pub fn grades(&self) -> &[usize] {
        &self.grades
    }

    /// `(result blade, sign)` with `e_a e_b = sign · e_result`.
    pub fn product(&self, a: BladeIndex, b: BladeIndex) -> (BladeIndex, f64) {
        let (r, s) = self.entries[a.bits() * self.size() + b.bits()];
        (BladeIndex(r as u16), s)
    }

    pub(crate) fn entry(&self, a: usize, b: usize) -> (usize, f64) {
        self.entries[a * self.size() + b]
    }

    pub fn terms(&self) -> &[ProductTerm] {
        &self.terms
    }

    /// Grade pairs `(i, j)` (flattened) that can contribute to blade `r`.
    pub fn pairs_for_blade(&self, r: usize) -> &[usize] {
        &self.pairs_by_blade[r]
    }

    pub fn blades_of_grade(&self, m: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.size()).filter(move |&a| self.grades[a] == m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsupported_dimensions() {
        assert!(matches!(CayleyTable::new(0), Err(Error::DimensionUnsupported(0))));
        assert!(matches!(CayleyTable::new(9), Err(Error::DimensionUnsupported(9))));
        assert!(CayleyTable::new(8).is_ok());
    }

    #[test]
    fn small_products() {
        let t = CayleyTable::new(2).unwrap();
        assert_eq!(t.product(BladeIndex(0b01), BladeIndex(0b01)), (BladeIndex(0), 1.0));
        assert_eq!(t.product(BladeIndex(0b10), BladeIndex(0b01)), (BladeIndex(0b11), -1.0));
        let t = CayleyTable::new(3).unwrap();
        // e12 e23 = e13
        assert_eq!(t.product(BladeIndex(0b011), BladeIndex(0b110)), (BladeIndex(0b101), 1.0));
    }

    #[test]
    fn result_is_xor() {
        for n in 1..=5 {
            let t = CayleyTable::new(n).unwrap();
            for a in 0..t.size() {
                for b in 0..t.size() {
                    assert_eq!(t.entry(a, b).0, a ^ b);
                }
            }
        }
    }

    #[test]
    fn blade_associativity_exhaustive() {
        for n in 1..=4 {
            let t = CayleyTable::new(n).unwrap();
            let s = t.size();
            for a in 0..s {
                for b in 0..s {
                    for c in 0..s {
                        let (ab, s1) = t.entry(a, b);
                        let (abc, s2) = t.entry(ab, c);
                        let (bc, s3) = t.entry(b, c);
                        let (abc2, s4) = t.entry(a, bc);
                        assert_eq!(abc, abc2);
                        assert_eq!(s1 * s2, s3 * s4, "n={n} a={a} b={b} c={c}");
                    }
                }
            }
        }
    }

    #[test]
    fn blade_names() {
        assert_eq!(BladeIndex(0).name(), "1");
        assert_eq!(BladeIndex(0b101).name(), "e13");
        assert_eq!(BladeIndex(0b101).grade(), 2);
    }
}
