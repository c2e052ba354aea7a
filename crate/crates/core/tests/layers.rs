use cgegnn_core::autodiff::Tape;
use cgegnn_core::clifford::OrthogonalMap;
use cgegnn_core::layers::{CliffordMlp, GeomProductLayer, LayerSpec, LinearLayer, MlpSpec, NormLayer};
use cgegnn_core::params::ParamStore;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let values = normal(rng, store.len());
    store.load(&values).unwrap();
}

fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

/// Runs `forward` on `x` and on `Q x` and returns the relative error between
/// `f(Q x)` and `Q f(x)`.
fn equivariance_error<F>(dim: usize, batch: usize, channels: usize, rng: &mut ChaCha8Rng, forward: F) -> f64
where
    F: Fn(&mut Tape, cgegnn_core::autodiff::MvTensor) -> cgegnn_core::autodiff::MvTensor,
{
    let q = OrthogonalMap::random(dim, rng).unwrap();
    let x = normal(rng, batch * channels << dim);
    let mut tape = Tape::new();
    let input = tape.constant(batch, channels, dim, x.clone()).unwrap();
    let out = forward(&mut tape, input);
    let expected = q.apply_chunks(tape.value(out));
    let rotated = tape.constant(batch, channels, dim, q.apply_chunks(&x)).unwrap();
    let out_rot = forward(&mut tape, rotated);
    max_rel_err(tape.value(out_rot), &expected)
}

#[test]
fn unit_linear_layer_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    let layer = LinearLayer::new(&mut store, "lin", 3, 1, 1, false, &mut rng);
    store.slice_mut(layer.weight()).fill(1.0);
    let x = normal(&mut rng, 8);
    let mut tape = Tape::new();
    let input = tape.constant(1, 1, 3, x.clone()).unwrap();
    let out = layer.forward(&mut tape, &store, input).unwrap();
    assert_eq!(tape.value(out), x.as_slice());
}

#[test]
fn linear_layer_preserves_grades() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let layer = LinearLayer::new(&mut store, "lin", 3, 2, 3, false, &mut rng);
    let mut x = vec![0.0; 16];
    for c in 0..2 {
        for a in 0..3 {
            x[c * 8 + (1 << a)] = rng.gen_range(-1.0..1.0);
        }
    }
    let mut tape = Tape::new();
    let input = tape.constant(1, 2, 3, x).unwrap();
    let out = layer.forward(&mut tape, &store, input).unwrap();
    for (i, &v) in tape.value(out).iter().enumerate() {
        let blade = i % 8;
        if blade.count_ones() != 1 {
            assert_eq!(v, 0.0, "blade {blade}");
        }
    }
}

#[test]
fn zero_mix_gives_zero_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    let layer = GeomProductLayer::new(&mut store, "gp", 3, 2, 3, true, &mut rng).unwrap();
    store.slice_mut(layer.mix()).fill(0.0);
    let mut tape = Tape::new();
    let input = tape.constant(2, 2, 3, normal(&mut rng, 32)).unwrap();
    let out = layer.forward(&mut tape, &store, input).unwrap();
    assert!(tape.value(out).iter().all(|&v| v == 0.0));
}

#[test]
fn vector_pairing_gives_squared_norm() {
    // With z = x and only the (1, 1 → 0) mixing weight set, the output is the
    // scalar part of x⁽¹⁾ x⁽¹⁾, which is |v|².
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let layer = GeomProductLayer::new(&mut store, "gp", 3, 1, 1, false, &mut rng).unwrap();
    store.slice_mut(layer.pre_linear().weight()).fill(1.0);
    store.slice_mut(layer.pre_linear().bias().unwrap()).fill(0.0);
    let mix = store.slice_mut(layer.mix());
    mix.fill(0.0);
    mix[(4 + 1) * 4] = 1.0;
    let v = [0.3, -1.2, 2.0];
    let mut x = normal(&mut rng, 8);
    for (a, &c) in v.iter().enumerate() {
        x[1 << a] = c;
    }
    let mut tape = Tape::new();
    let input = tape.constant(1, 1, 3, x).unwrap();
    let out = layer.forward(&mut tape, &store, input).unwrap();
    let value = tape.value(out);
    let norm2: f64 = v.iter().map(|c| c * c).sum();
    assert!((value[0] - norm2).abs() < 1e-12);
    assert!(value[1..].iter().all(|&c| c == 0.0));
}

#[test]
fn normalization_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = ParamStore::new();
    let layer = NormLayer::new(&mut store, "norm", 3, 2);
    // Unit-q grades pass through unchanged for any φ.
    store.slice_mut(layer.phi()).copy_from_slice(&normal(&mut rng, 8));
    let mut x = vec![0.0; 16];
    for c in 0..2 {
        for m in 0..=3usize {
            let blade = (0..8).find(|b: &usize| b.count_ones() as usize == m).unwrap();
            x[c * 8 + blade] = if (c + m) % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    let mut tape = Tape::new();
    let input = tape.constant(1, 2, 3, x.clone()).unwrap();
    let out = layer.forward(&mut tape, &store, input).unwrap();
    assert!(max_rel_err(tape.value(out), &x) < 1e-15);
    // σ(φ) → 0 switches the layer off.
    store.slice_mut(layer.phi()).fill(-30.0);
    let x = normal(&mut rng, 16);
    let input = tape.constant(1, 2, 3, x.clone()).unwrap();
    let out = layer.forward(&mut tape, &store, input).unwrap();
    assert!(max_rel_err(tape.value(out), &x) < 1e-11);
}

#[test]
fn activation_examples() {
    let mut tape = Tape::new();
    let mut x = vec![0.0; 8];
    x[0] = -3.0;
    let input = tape.constant(1, 1, 3, x).unwrap();
    let out = tape.activation(input);
    assert!(tape.value(out).iter().all(|&v| v == 0.0));
    let mut e1 = vec![0.0; 8];
    e1[1] = 1.0;
    let input = tape.constant(1, 1, 3, e1).unwrap();
    let out = tape.activation(input);
    let sigma1 = 1.0 / (1.0 + (-1.0f64).exp());
    assert!((tape.value(out)[1] - sigma1).abs() < 1e-15);
    assert!((sigma1 - 0.7311).abs() < 1e-4);
}

#[test]
fn empty_and_unit_networks_are_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let empty = CliffordMlp::new(&mut store, "empty", 3, 2, &MlpSpec::default(), &mut rng).unwrap();
    let spec = MlpSpec {
        layers: vec![LayerSpec::Linear { out: 1 }],
    };
    let unit = CliffordMlp::new(&mut store, "unit", 3, 1, &spec, &mut rng).unwrap();
    store.data_mut().fill(0.0);
    for e in store.entries().to_vec() {
        if e.name.ends_with(".weight") {
            store.data_mut()[e.offset..e.offset + e.len].fill(1.0);
        }
    }
    let mut tape = Tape::new();
    let x = normal(&mut rng, 16);
    let input = tape.constant(1, 2, 3, x.clone()).unwrap();
    let out = empty.forward(&mut tape, &store, input).unwrap();
    assert_eq!(tape.value(out), x.as_slice());
    let input = tape.constant(2, 1, 3, x.clone()).unwrap();
    let out = unit.forward(&mut tape, &store, input).unwrap();
    assert_eq!(tape.value(out), x.as_slice());
}

#[test]
fn single_layers_are_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for dim in [2, 3] {
        for _ in 0..100 {
            let (p, q) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
            let mut store = ParamStore::new();
            let lin = LinearLayer::new(&mut store, "lin", dim, p, q, true, &mut rng);
            let fc = GeomProductLayer::new(&mut store, "fc", dim, p, q, true, &mut rng).unwrap();
            let plain = GeomProductLayer::new(&mut store, "plain", dim, p, p, false, &mut rng).unwrap();
            let norm = NormLayer::new(&mut store, "norm", dim, p);
            randomize(&mut store, &mut rng);
            let errs = [
                equivariance_error(dim, 3, p, &mut rng, |t, x| lin.forward(t, &store, x).unwrap()),
                equivariance_error(dim, 3, p, &mut rng, |t, x| fc.forward(t, &store, x).unwrap()),
                equivariance_error(dim, 3, p, &mut rng, |t, x| plain.forward(t, &store, x).unwrap()),
                equivariance_error(dim, 3, p, &mut rng, |t, x| norm.forward(t, &store, x).unwrap()),
                equivariance_error(dim, 3, p, &mut rng, |t, x| t.activation(x)),
            ];
            for (name, err) in ["linear", "fc product", "plain product", "norm", "activation"].iter().zip(errs) {
                assert!(err <= 1e-10, "{name} at n = {dim}: {err}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_networks_are_equivariant(
        seed in any::<u64>(),
        kinds in prop::collection::vec(0usize..4, 0..6),
        widths in prop::collection::vec(1usize..4, 8),
        fully_connected in any::<bool>(),
        dim in 2usize..=3,
    ) {
        let mut layers: Vec<LayerSpec> = kinds
            .iter()
            .zip(&widths)
            .map(|(&k, &w)| match k {
                0 => LayerSpec::Linear { out: w },
                1 => LayerSpec::GeomProduct { out: w, fully_connected: true },
                2 => LayerSpec::Norm,
                _ => LayerSpec::Activation,
            })
            .collect();
        if !fully_connected {
            // The plain product keeps its width.
            layers.push(LayerSpec::Linear { out: 2 });
        }
        layers.push(LayerSpec::GeomProduct { out: 2, fully_connected });
        let spec = MlpSpec { layers };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let in_channels = 3;
        let net = CliffordMlp::new(&mut store, "net", dim, in_channels, &spec, &mut rng).unwrap();
        randomize(&mut store, &mut rng);
        let err = equivariance_error(dim, 2, in_channels, &mut rng, |t, x| net.forward(t, &store, x).unwrap());
        prop_assert!(err <= 1e-8, "{err}");
    }
}
