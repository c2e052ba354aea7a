use cgegnn_core::clifford::{BladeIndex, CayleyTable, CliffordGroupElement, Multivector, OrthogonalMap};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mv(dim: usize, coeffs: &[f64]) -> Multivector {
    Multivector::new(dim, coeffs.to_vec()).unwrap()
}

fn coeffs_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1 << dim)
}

#[test]
fn cayley_table_matches_word_reduction() {
    for dim in 1..=6 {
        let table = CayleyTable::new(dim).unwrap();
        for a in 0..1usize << dim {
            for b in 0..1usize << dim {
                let (blade, sign) = table.product(BladeIndex(a as u16), BladeIndex(b as u16));
                let (osign, oblade) = cgegnn_oracles::blade_product(a, b);
                assert_eq!((blade.bits(), sign), (oblade, osign), "dim {dim}, {a} * {b}");
            }
        }
    }
}

#[test]
fn blade_product_examples() {
    let t2 = CayleyTable::new(2).unwrap();
    assert_eq!(t2.product(BladeIndex(0b01), BladeIndex(0b01)), (BladeIndex(0), 1.0));
    assert_eq!(t2.product(BladeIndex(0b10), BladeIndex(0b01)), (BladeIndex(0b11), -1.0));
    let t3 = CayleyTable::new(3).unwrap();
    assert_eq!(t3.product(BladeIndex(0b011), BladeIndex(0b110)), (BladeIndex(0b101), 1.0));
}

#[test]
fn product_examples() {
    let a = mv(2, &[1.0, 1.0, 0.0, 0.0]);
    let b = mv(2, &[1.0, 0.0, 1.0, 0.0]);
    assert_eq!(a.geometric_product(&b).unwrap().coeffs(), &[1.0, 1.0, 1.0, 1.0]);
    let x = Multivector::embed_vector(&[3.0, 4.0]).unwrap();
    assert_eq!(x.geometric_product(&x).unwrap().coeffs(), &[25.0, 0.0, 0.0, 0.0]);
}

#[test]
fn product_matches_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for dim in 1..=4 {
        for _ in 0..250 {
            let a = Multivector::random(dim, &mut rng).unwrap();
            let b = Multivector::random(dim, &mut rng).unwrap();
            let fast = a.geometric_product(&b).unwrap();
            let slow = cgegnn_oracles::geometric_product(dim, a.coeffs(), b.coeffs());
            let err = fast.coeffs().iter().zip(&slow).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-12, "dim {dim}: {err}");
        }
    }
}

#[test]
fn grade_projection_and_forms() {
    let x = mv(2, &[2.0, 3.0, 0.0, 5.0]);
    assert_eq!(x.grade_project(1).unwrap().coeffs(), &[0.0, 3.0, 0.0, 0.0]);
    let e2 = Multivector::embed_vector(&[0.0, 1.0, 0.0]).unwrap();
    assert_eq!(e2.geometric_product(&e2).unwrap().grade_project(0).unwrap().scalar_part(), 1.0);
    let y = mv(2, &[1.0, 1.0, 0.0, 1.0]);
    assert_eq!(y.main_involution().coeffs(), &[1.0, -1.0, 0.0, 1.0]);
    assert_eq!(Multivector::embed_scalar(2, 7.0).unwrap().main_involution().scalar_part(), 7.0);
    assert_eq!(Multivector::embed_vector(&[3.0, 4.0]).unwrap().q(None).unwrap(), 25.0);
    assert_eq!(mv(2, &[2.0, 0.0, 0.0, 1.0]).q(Some(0)).unwrap(), 4.0);
    assert_eq!(Multivector::embed_vector(&[1.0, 0.0, 0.0]).unwrap().coeffs()[1], 1.0);
    assert!(Multivector::embed_scalar(3, 0.0).unwrap().coeffs().iter().all(|&c| c == 0.0));
}

#[test]
fn reflection_by_a_vector() {
    let w = CliffordGroupElement::from_vectors(vec![vec![1.0, 0.0]]).unwrap();
    let e1 = Multivector::embed_vector(&[1.0, 0.0]).unwrap();
    let e2 = Multivector::embed_vector(&[0.0, 1.0]).unwrap();
    // Reflection across the hyperplane normal to e1.
    assert!(w.twisted_conjugation(&e1).unwrap().max_abs_diff(&e1.scale(-1.0)) < 1e-15);
    assert!(w.twisted_conjugation(&e2).unwrap().max_abs_diff(&e2) < 1e-15);
}

#[test]
fn quarter_turn_action() {
    let q = OrthogonalMap::new(2, vec![0.0, -1.0, 1.0, 0.0]).unwrap();
    let e1 = Multivector::embed_vector(&[1.0, 0.0]).unwrap();
    let image = q.apply(&e1).unwrap();
    assert!(image.max_abs_diff(&Multivector::embed_vector(&[0.0, 1.0]).unwrap()) < 1e-15);
    let e12 = mv(2, &[0.0, 0.0, 0.0, 1.0]);
    assert!(q.apply(&e12).unwrap().max_abs_diff(&e12) < 1e-15);
    let identity = OrthogonalMap::identity(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Multivector::random(3, &mut rng).unwrap();
    assert_eq!(identity.apply(&x).unwrap().coeffs(), x.coeffs());
}

proptest! {
    #[test]
    fn product_is_associative(a in coeffs_strategy(3), b in coeffs_strategy(3), c in coeffs_strategy(3)) {
        let (a, b, c) = (mv(3, &a), mv(3, &b), mv(3, &c));
        let left = a.geometric_product(&b).unwrap().geometric_product(&c).unwrap();
        let right = a.geometric_product(&b.geometric_product(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-9 * (1.0 + left.norm()));
    }

    #[test]
    fn unit_element_is_neutral(a in coeffs_strategy(4)) {
        let a = mv(4, &a);
        let one = Multivector::embed_scalar(4, 1.0).unwrap();
        let prod = a.geometric_product(&one).unwrap();
        prop_assert_eq!(prod.coeffs(), a.coeffs());
    }

    #[test]
    fn grades_partition_the_multivector(a in coeffs_strategy(3)) {
        let a = mv(3, &a);
        let mut sum = vec![0.0; 8];
        let mut q_sum = 0.0;
        for m in 0..=3 {
            let part = a.grade_project(m).unwrap();
            sum.iter_mut().zip(part.coeffs()).for_each(|(s, v)| *s += v);
            q_sum += a.q(Some(m)).unwrap();
        }
        prop_assert_eq!(sum.as_slice(), a.coeffs());
        prop_assert!((q_sum - a.q(None).unwrap()).abs() <= 1e-9 * (1.0 + q_sum));
        let twice = a.main_involution().main_involution();
        prop_assert_eq!(twice.coeffs(), a.coeffs());
    }

    #[test]
    fn vector_square_is_squared_norm(v in prop::collection::vec(-10.0f64..10.0, 3)) {
        let x = Multivector::embed_vector(&v).unwrap();
        let sq = x.geometric_product(&x).unwrap();
        let norm2: f64 = v.iter().map(|c| c * c).sum();
        prop_assert!((sq.scalar_part() - norm2).abs() <= 1e-12 * (1.0 + norm2));
        prop_assert!(sq.coeffs()[1..].iter().all(|c| c.abs() <= 1e-12 * (1.0 + norm2)));
        prop_assert_eq!(x.grade_project(1).unwrap().vector_part(), v);
    }

    #[test]
    fn group_action_commutes_with_grades(seed in any::<u64>(), m in 0usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = OrthogonalMap::random(3, &mut rng).unwrap();
        let x = Multivector::random(3, &mut rng).unwrap();
        let a = q.apply(&x.grade_project(m).unwrap()).unwrap();
        let b = q.apply(&x).unwrap().grade_project(m).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-12);
        let seven = Multivector::embed_scalar(3, 7.0).unwrap();
        prop_assert!(q.apply(&seven).unwrap().max_abs_diff(&seven) <= 1e-12);
    }

    #[test]
    fn scalars_act_trivially(c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], x in coeffs_strategy(3)) {
        let w = CliffordGroupElement::scalar(3, c).unwrap();
        let x = mv(3, &x);
        prop_assert!(w.twisted_conjugation(&x).unwrap().max_abs_diff(&x) <= 1e-12 * (1.0 + x.norm()));
    }
}

#[test]
fn random_orthogonal_maps_are_orthogonal_to_rounding() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let q = OrthogonalMap::random(3, &mut rng).unwrap();
        let m = q.matrix();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| m[k * 3 + i] * m[k * 3 + j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot - target).abs() <= 1e-14, "{dot}");
            }
        }
    }
}
