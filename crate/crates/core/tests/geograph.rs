use cgegnn_core::geograph::{
    enumerate_subsets, hausdorff_distance, k_hop, lattice, universality_bump, universality_decode,
    universality_encode, GeometricGraph,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn path3() -> GeometricGraph {
    GeometricGraph::new(1, vec![0.0, 1.0, 2.0], &[(0, 1), (1, 2)]).unwrap()
}

fn random_graph(rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize)>) {
    let m = rng.gen_range(1..=12);
    let p = rng.gen_range(0.05..0.6);
    let edges = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .filter(|_| rng.gen_bool(p))
        .collect();
    (m, edges)
}

#[test]
fn path_and_complete_neighbourhoods() {
    let g = path3();
    assert_eq!(k_hop(&g, 1).unwrap().neighbors(0), &[1]);
    assert_eq!(k_hop(&g, 2).unwrap().neighbors(0), &[1, 2]);
    let k4 = GeometricGraph::complete(1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    for k in 1..=3 {
        assert_eq!(k_hop(&k4, k).unwrap().neighbors(0), &[1, 2, 3]);
    }
}

#[test]
fn k_hop_matches_all_pairs_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (m, edges) = random_graph(&mut rng);
        let g = GeometricGraph::new(1, vec![0.0; m], &edges).unwrap();
        let dist = cgegnn_oracles::floyd_warshall(m, &edges);
        for k in 1..=4 {
            let index = k_hop(&g, k).unwrap();
            for i in 0..m {
                assert_eq!(
                    index.neighbors(i),
                    cgegnn_oracles::k_hop_from_distances(&dist, i, k).as_slice(),
                    "node {i}, k = {k}, edges {edges:?}"
                );
            }
        }
    }
}

#[test]
fn subset_examples() {
    let subsets: Vec<Vec<usize>> = enumerate_subsets(&[2, 3, 4], 2).collect();
    assert_eq!(subsets, vec![vec![2, 3], vec![2, 4], vec![3, 4]]);
    assert_eq!(enumerate_subsets(&[2], 2).count(), 0);
    let eight: Vec<usize> = (0..8).collect();
    assert_eq!(enumerate_subsets(&eight, 3).count(), 56);
}

#[test]
fn subset_counts_match_binomials() {
    for n in 0..=10usize {
        let items: Vec<usize> = (0..n).collect();
        for d in 1..=4 {
            let all: Vec<Vec<usize>> = enumerate_subsets(&items, d).collect();
            assert_eq!(all.len() as u64, cgegnn_oracles::binomial(n, d), "n = {n}, d = {d}");
            assert!(all.windows(2).all(|w| w[0] < w[1]), "not lexicographic");
            assert!(all.iter().all(|s| s.len() == d && s.windows(2).all(|p| p[0] < p[1])));
        }
    }
}

#[test]
fn hausdorff_examples() {
    let g = vec![vec![0.2, 0.4]];
    assert_eq!(hausdorff_distance(&g, &g).unwrap(), 0.0);
    assert_eq!(hausdorff_distance(&[vec![0.0, 0.0]], &[vec![1.0, 0.0]]).unwrap(), 1.0);
    assert!(hausdorff_distance(&[], &g).is_err());
}

#[test]
fn lattice_matches_oracle() {
    for k in 1..=5 {
        for d in 1..=3 {
            assert_eq!(lattice(k, d).unwrap(), cgegnn_oracles::lattice_points(k, d));
        }
    }
}

#[test]
fn bump_values() {
    let k = 3;
    let c = vec![0.5, 0.5];
    assert_eq!(universality_bump(&c, k, &c), 1.0);
    let r = 1.0 / 6.0;
    assert_eq!(universality_bump(&c, k, &[0.5 + r, 0.5]), 0.0);
    assert_eq!(universality_bump(&c, k, &[0.5, 0.5 - 2.0 * r]), 0.0);
    assert!(universality_bump(&c, k, &[0.5 + 0.9 * r, 0.5]) > 0.0);
}

#[test]
fn decoding_recovers_the_snapped_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for k in 2..=4 {
        for d in 1..=2 {
            for m in 2..=3 {
                let lattice_pts = cgegnn_oracles::lattice_points(k, d);
                for _ in 0..100 {
                    let pts: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.gen()).collect()).collect();
                    let snapped = cgegnn_oracles::snapped_set(&pts, k);
                    let encoded = universality_encode(&pts, k, d).unwrap();
                    for (c, &e) in lattice_pts.iter().zip(&encoded) {
                        assert_eq!(e > 0.0, snapped.contains(c), "K = {k}, points {pts:?}");
                    }
                    assert_eq!(universality_decode(&encoded, k, d).unwrap(), snapped);
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn hausdorff_triangle_inequality(
        a in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..5),
        b in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..5),
        c in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..5),
    ) {
        let ab = hausdorff_distance(&a, &b).unwrap();
        let bc = hausdorff_distance(&b, &c).unwrap();
        let ac = hausdorff_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-15);
        prop_assert_eq!(ab, hausdorff_distance(&b, &a).unwrap());
    }
}
