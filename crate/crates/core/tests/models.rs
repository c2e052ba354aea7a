use cgegnn_core::autodiff::Tape;
use cgegnn_core::cgegnn::CgEgnn;
use cgegnn_core::clifford::OrthogonalMap;
use cgegnn_core::geograph::GeometricGraph;
use cgegnn_core::model::{build_model, GraphBatch, GraphModel, Head, ModelConfig, ModelKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn config(kind: ModelKind, orders: &[usize], head: Head) -> ModelConfig {
    ModelConfig {
        kind,
        channels: 3,
        hidden: 8,
        layers: 2,
        max_order: orders.iter().copied().max().unwrap_or(1),
        orders: orders.to_vec(),
        hops: 2,
        vector_features: 1,
        scalar_features: 1,
        head,
        mlp_blocks: 1,
        ..ModelConfig::default()
    }
}

/// Adds Gaussian noise to every parameter so that biases and norm gates are
/// not all at their initial constants.
fn perturbed(cfg: &ModelConfig, seed: u64) -> Box<dyn GraphModel> {
    let mut model = build_model(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for v in model.params_mut().data_mut() {
        *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
    }
    model
}

fn random_graph(rng: &mut ChaCha8Rng, nodes: usize) -> GeometricGraph {
    let edges: Vec<(usize, usize)> = (0..nodes)
        .flat_map(|a| (a + 1..nodes).map(move |b| (a, b)))
        .filter(|_| rng.gen_bool(0.6))
        .collect();
    GeometricGraph::new(3, normal(rng, nodes * 3), &edges)
        .unwrap()
        .with_vector_features(1, normal(rng, nodes * 3))
        .unwrap()
        .with_scalar_features(1, normal(rng, nodes))
        .unwrap()
}

fn rigid(graph: &GeometricGraph, q: &OrthogonalMap, shift: &[f64]) -> GeometricGraph {
    graph
        .map_positions(|p| q.apply_vector(p).iter().zip(shift).map(|(a, b)| a + b).collect())
        .map_vector_features(|v| q.apply_vector(v))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

fn cgegnn(cfg: &ModelConfig, seed: u64) -> CgEgnn {
    let mut model = CgEgnn::new(cfg.clone(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for v in model.params_mut().data_mut() {
        *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
    }
    model
}

#[test]
fn embedding_is_translation_invariant_and_rotation_equivariant() {
    let cfg = config(ModelKind::Cgegnn, &[1], Head::Vector);
    let model = cgegnn(&cfg, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let g = random_graph(&mut rng, 5);
        let q = OrthogonalMap::random(3, &mut rng).unwrap();
        let opts = model.batch_options();
        let embed = |graph: &GeometricGraph| {
            let batch = GraphBatch::new(&[graph], &opts).unwrap();
            let mut tape = Tape::new();
            let h = model.embed(&mut tape, &batch).unwrap();
            tape.value(h).to_vec()
        };
        let base = embed(&g);
        let shifted = embed(&rigid(&g, &OrthogonalMap::identity(3).unwrap(), &[4.0, -8.0, 2.0]));
        assert!(rel_err(&shifted, &base) < 1e-12);
        let rotated = embed(&rigid(&g, &q, &[0.0; 3]));
        assert!(rel_err(&rotated, &q.apply_chunks(&base)) < 1e-8);
    }
}

#[test]
fn isolated_nodes_receive_zero_messages() {
    let cfg = config(ModelKind::Cgegnn, &[1, 2], Head::Vector);
    let model = cgegnn(&cfg, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = GeometricGraph::new(3, normal(&mut rng, 9), &[])
        .unwrap()
        .with_vector_features(1, normal(&mut rng, 9))
        .unwrap()
        .with_scalar_features(1, normal(&mut rng, 3))
        .unwrap();
    let batch = GraphBatch::new(&[&g], &model.batch_options()).unwrap();
    let mut tape = Tape::new();
    let h = model.embed(&mut tape, &batch).unwrap();
    let out = model.convolve(&mut tape, &batch, 0, h).unwrap();
    let zeros = tape.zeros(3, 2 * cfg.channels, 3).unwrap();
    let joined = tape.concat(&[h, zeros]).unwrap();
    let direct = model.conv_layers()[0].update.forward(&mut tape, model.params(), joined).unwrap();
    assert_eq!(tape.value(out), tape.value(direct));
}

#[test]
fn first_order_convolution_matches_direct_sum() {
    let cfg = ModelConfig {
        hops: 1,
        ..config(ModelKind::Cgegnn, &[1], Head::Vector)
    };
    let model = cgegnn(&cfg, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = 5;
    let g = GeometricGraph::complete(3, normal(&mut rng, m * 3))
        .unwrap()
        .with_vector_features(1, normal(&mut rng, m * 3))
        .unwrap()
        .with_scalar_features(1, normal(&mut rng, m))
        .unwrap();
    let batch = GraphBatch::new(&[&g], &model.batch_options()).unwrap();
    let mut tape = Tape::new();
    let h = model.embed(&mut tape, &batch).unwrap();
    let fast = model.convolve(&mut tape, &batch, 0, h).unwrap();
    let fast = tape.value(fast).to_vec();

    let nf = cfg.channels;
    let width = nf * 8;
    let hv = tape.value(h).to_vec();
    let node = |i: usize| hv[i * width..(i + 1) * width].to_vec();
    let conv = &model.conv_layers()[0];
    let mut expected = Vec::new();
    for i in 0..m {
        let mut message = vec![0.0; width];
        for j in (0..m).filter(|&j| j != i) {
            let input = [node(i), node(j)].concat();
            let x = tape.constant(1, 2 * nf, 3, input).unwrap();
            let y = conv.messages[0].forward(&mut tape, model.params(), x).unwrap();
            message.iter_mut().zip(tape.value(y)).for_each(|(a, b)| *a += b);
        }
        let input = [node(i), message].concat();
        let x = tape.constant(1, 2 * nf, 3, input).unwrap();
        let y = conv.update.forward(&mut tape, model.params(), x).unwrap();
        expected.extend_from_slice(tape.value(y));
    }
    assert!(rel_err(&fast, &expected) < 1e-12);
}

#[test]
fn convolution_is_rotation_equivariant() {
    let cfg = config(ModelKind::Cgegnn, &[1, 2], Head::Vector);
    let model = cgegnn(&cfg, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let g = random_graph(&mut rng, 6);
        let batch = GraphBatch::new(&[&g], &model.batch_options()).unwrap();
        let q = OrthogonalMap::random(3, &mut rng).unwrap();
        let mut tape = Tape::new();
        let h = tape.constant(6, cfg.channels, 3, normal(&mut rng, 6 * cfg.channels * 8)).unwrap();
        let out = model.convolve(&mut tape, &batch, 0, h).unwrap();
        let expected = q.apply_chunks(tape.value(out));
        let hq = tape.constant(6, cfg.channels, 3, q.apply_chunks(tape.value(h))).unwrap();
        let out_q = model.convolve(&mut tape, &batch, 0, hq).unwrap();
        assert!(rel_err(tape.value(out_q), &expected) < 1e-8);
    }
}

#[test]
fn zero_head_returns_input_positions_or_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_graph(&mut rng, 4);
    for head in [Head::Vector, Head::Scalar] {
        let cfg = config(ModelKind::Cgegnn, &[1, 2], head);
        let mut model = cgegnn(&cfg, 5);
        for e in model.params().entries().to_vec() {
            if e.name.starts_with("head.") {
                model.params_mut().data_mut()[e.offset..e.offset + e.len].fill(0.0);
            }
        }
        let out = model.predict(&[&g]).unwrap();
        match head {
            Head::Vector => assert_eq!(out, g.positions()),
            Head::Scalar => assert_eq!(out, vec![0.0]),
        }
    }
}

#[test]
fn models_are_e3_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cases = [
        (ModelKind::Cgegnn, vec![1]),
        (ModelKind::Cgegnn, vec![1, 2]),
        (ModelKind::Cgegnn, vec![2, 3]),
        (ModelKind::Egnn, vec![1]),
    ];
    for (kind, orders) in cases {
        for head in [Head::Vector, Head::Scalar] {
            let model = perturbed(&config(kind, &orders, head), rng.gen());
            for _ in 0..10 {
                let nodes = rng.gen_range(2..=7);
                let g = random_graph(&mut rng, nodes);
                let q = OrthogonalMap::random(3, &mut rng).unwrap();
                let shift = normal(&mut rng, 3);
                let out = model.predict(&[&g]).unwrap();
                let moved = model.predict(&[&rigid(&g, &q, &shift)]).unwrap();
                match head {
                    Head::Vector => {
                        let expected: Vec<f64> = out
                            .chunks(3)
                            .flat_map(|p| q.apply_vector(p).into_iter().zip(&shift).map(|(a, b)| a + b))
                            .collect();
                        let err = rel_err(&moved, &expected);
                        assert!(err <= 1e-6, "{kind} {orders:?} vector: {err}");
                    }
                    Head::Scalar => {
                        let err = (moved[0] - out[0]).abs();
                        assert!(err <= 1e-8 * (1.0 + out[0].abs()), "{kind} {orders:?} scalar: {err}");
                    }
                }
            }
        }
    }
}

#[test]
fn relabelling_nodes_permutes_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kind in [ModelKind::Cgegnn, ModelKind::Gnn, ModelKind::Egnn] {
        for head in [Head::Vector, Head::Scalar] {
            let orders: &[usize] = if kind == ModelKind::Cgegnn { &[1, 2] } else { &[1] };
            let model = perturbed(&config(kind, orders, head), 7);
            let g = random_graph(&mut rng, 6);
            let mut perm: Vec<usize> = (0..6).collect();
            perm.shuffle(&mut rng);
            let pg = g.permute(&perm).unwrap();
            let out = model.predict(&[&g]).unwrap();
            let pout = model.predict(&[&pg]).unwrap();
            match head {
                Head::Vector => {
                    // Node `perm[i]` of the relabelled graph is node `i` of the original.
                    let mut expected = vec![0.0; out.len()];
                    for (i, &p) in perm.iter().enumerate() {
                        expected[p * 3..p * 3 + 3].copy_from_slice(&out[i * 3..i * 3 + 3]);
                    }
                    assert!(rel_err(&pout, &expected) < 1e-12, "{kind}");
                }
                Head::Scalar => assert!((pout[0] - out[0]).abs() <= 1e-12 * (1.0 + out[0].abs()), "{kind}"),
            }
        }
    }
}

#[test]
fn missing_higher_order_subsets_change_nothing() {
    // Every node has at most one neighbour, so second-order messages vanish.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = GeometricGraph::new(3, normal(&mut rng, 12), &[(0, 1), (2, 3)])
        .unwrap()
        .with_vector_features(1, normal(&mut rng, 12))
        .unwrap()
        .with_scalar_features(1, normal(&mut rng, 4))
        .unwrap();
    let full = perturbed(&config(ModelKind::Cgegnn, &[1, 2], Head::Vector), 8);
    let first = ModelConfig {
        orders: vec![1],
        ..full.config().clone()
    };
    let mut first_only = build_model(&first, 0).unwrap();
    first_only.params_mut().load(full.params().data()).unwrap();
    assert_eq!(full.predict(&[&g]).unwrap(), first_only.predict(&[&g]).unwrap());
}

#[test]
fn invalid_configs_are_rejected() {
    let base = config(ModelKind::Cgegnn, &[1], Head::Vector);
    for bad in [
        ModelConfig { layers: 0, ..base.clone() },
        ModelConfig { orders: vec![0], ..base.clone() },
        ModelConfig { orders: vec![], ..base.clone() },
        ModelConfig { orders: vec![3], max_order: 2, ..base.clone() },
        ModelConfig { channels: 0, ..base.clone() },
    ] {
        assert!(build_model(&bad, 0).is_err(), "{bad:?}");
    }
}

#[test]
fn output_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = perturbed(&config(ModelKind::Cgegnn, &[1, 2], Head::Vector), 9);
    for m in 1..=6 {
        let g = random_graph(&mut rng, m);
        assert_eq!(model.predict(&[&g]).unwrap().len(), m * 3);
    }
    let scalar = perturbed(&config(ModelKind::Cgegnn, &[1], Head::Scalar), 9);
    let (a, b) = (random_graph(&mut rng, 3), random_graph(&mut rng, 5));
    assert_eq!(scalar.predict(&[&a, &b]).unwrap().len(), 2);
}

/// Central-difference check of `d mse(model(g), target) / d θ` on random
/// parameter coordinates.
fn gradient_check(model: &dyn GraphModel, graphs: &[&GeometricGraph], probes: usize, seed: u64) {
    let batch = GraphBatch::new(graphs, &model.batch_options()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, &batch).unwrap();
    let target = normal(&mut rng, out.len());
    let loss_of = |model: &dyn GraphModel| {
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &batch).unwrap();
        let t = tape.constant(out.batch(), out.channels(), out.dim(), target.clone()).unwrap();
        let loss = tape.mse(out, t).unwrap();
        (tape, loss)
    };
    let (tape, loss) = loss_of(model);
    let loss_value = tape.scalar(loss);
    let grads = tape.backward(loss).unwrap().param_grads(model.params());
    let theta = model.params().data().to_vec();
    for _ in 0..probes {
        let i = rng.gen_range(0..grads.len());
        let numeric = cgegnn_oracles::central_difference(
            |x| {
                let mut probe = build_model(model.config(), 0).unwrap();
                probe.params_mut().load(x).unwrap();
                let (tape, loss) = loss_of(probe.as_ref());
                tape.scalar(loss)
            },
            &theta,
            i,
            1e-5,
        );
        let err = cgegnn_oracles::gradient_relative_error(grads[i], numeric);
        // Below this the central difference itself is rounding noise.
        let roundoff = 4.0 * f64::EPSILON * loss_value.abs().max(1.0) / 1e-5;
        assert!(
            err <= 1e-4 || (grads[i] - numeric).abs() <= roundoff,
            "{}: parameter {i}: {} vs {numeric}",
            model.config().label(),
            grads[i]
        );
    }
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let graphs: Vec<GeometricGraph> = (0..3).map(|_| random_graph(&mut rng, 5)).collect();
    let refs: Vec<&GeometricGraph> = graphs.iter().collect();
    for (kind, head) in [
        (ModelKind::Cgegnn, Head::Vector),
        (ModelKind::Cgegnn, Head::Scalar),
        (ModelKind::Egnn, Head::Vector),
        (ModelKind::Gnn, Head::Scalar),
    ] {
        let orders: &[usize] = if kind == ModelKind::Cgegnn { &[1, 2] } else { &[1] };
        let model = perturbed(&config(kind, orders, head), 10);
        gradient_check(model.as_ref(), &refs, 20, 10);
    }
}

#[test]
fn gnn_is_not_rotation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let model = perturbed(&config(ModelKind::Gnn, &[1], Head::Vector), t);
        let g = random_graph(&mut rng, 5);
        let q = OrthogonalMap::random(3, &mut rng).unwrap();
        let out = model.predict(&[&g]).unwrap();
        let rotated = model.predict(&[&rigid(&g, &q, &[0.0; 3])]).unwrap();
        let expected: Vec<f64> = out.chunks(3).flat_map(|p| q.apply_vector(p)).collect();
        let dev = rotated
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    assert!(worst > 1e-3, "{worst}");
}

#[test]
fn gnn_with_zero_weights_is_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut model = build_model(&config(ModelKind::Gnn, &[1], Head::Scalar), 12).unwrap();
    model.params_mut().data_mut().fill(0.0);
    let a = model.predict(&[&random_graph(&mut rng, 4)]).unwrap();
    let b = model.predict(&[&random_graph(&mut rng, 4)]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn coincident_pair_does_not_move_nodes() {
    let cfg = ModelConfig {
        vector_features: 0,
        scalar_features: 0,
        ..config(ModelKind::Egnn, &[1], Head::Vector)
    };
    let model = perturbed(&cfg, 13);
    let g = GeometricGraph::complete(3, vec![0.5, -1.0, 2.0, 0.5, -1.0, 2.0]).unwrap();
    assert_eq!(model.predict(&[&g]).unwrap(), g.positions());
}
