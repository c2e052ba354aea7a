//! Randomised property suites behind `cgegnn check`.

use cgegnn_core::autodiff::{MvTensor, Tape};
use cgegnn_core::baselines::DenseMlp;
use cgegnn_core::clifford::{Multivector, OrthogonalMap};
use cgegnn_core::geograph::{universality_decode, universality_encode, GeometricGraph};
use cgegnn_core::layers::{CliffordMlp, GeomProductLayer, LinearLayer, MlpSpec, NormLayer};
use cgegnn_core::model::{build_model, GraphBatch, GraphModel, Head, ModelConfig, ModelKind};
use cgegnn_core::params::ParamStore;
use cgegnn_core::{Error, Result};
use cgegnn_oracles::{gradient_relative_error, snapped_set};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Outcome of one property suite.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    /// Largest error observed (suite-specific metric).
    pub worst: f64,
    pub tol: f64,
    pub failures: usize,
    /// Gradient probes redrawn because a ReLU kink lay within the step.
    pub redrawn: usize,
    /// Short descriptions of the first few failing trials.
    pub details: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn from_errors(name: &str, tol: f64, errors: Vec<(f64, String)>) -> Self {
        let worst = errors.iter().map(|e| e.0).fold(0.0, f64::max);
        let failing: Vec<String> = errors
            .iter()
            .filter(|e| !(e.0 <= tol))
            .map(|e| format!("{} (error {:e})", e.1, e.0))
            .collect();
        Self {
            name: name.into(),
            trials: errors.len(),
            worst,
            tol,
            failures: failing.len(),
            redrawn: 0,
            details: failing.into_iter().take(5).collect(),
        }
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn normal_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

// ---------------------------------------------------------------------------
// Algebra
// ---------------------------------------------------------------------------

/// Geometric product against word reduction, `trials` pairs for each n in 1..=4.
pub fn algebra(trials: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut errors = Vec::with_capacity(4 * trials);
    for dim in 1..=4 {
        let mut rng = trial_rng(seed, dim as u64);
        for t in 0..trials {
            let a = Multivector::random(dim, &mut rng)?;
            let b = Multivector::random(dim, &mut rng)?;
            let got = a.geometric_product(&b)?;
            let want = cgegnn_oracles::geometric_product(dim, a.coeffs(), b.coeffs());
            let err = got
                .coeffs()
                .iter()
                .zip(&want)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            errors.push((err, format!("n = {dim}, pair {t}")));
        }
    }
    Ok(CheckReport::from_errors("algebra", tol, errors))
}

// ---------------------------------------------------------------------------
// Equivariance
// ---------------------------------------------------------------------------

/// Random Erdős–Rényi graph with Gaussian positions and features.
pub fn random_graph(
    rng: &mut ChaCha8Rng,
    dim: usize,
    nodes: usize,
    edge_prob: f64,
    layout: (usize, usize, usize),
) -> Result<GeometricGraph> {
    let (vectors, scalars, edge_dim) = layout;
    let positions = normal_vec(rng, nodes * dim, 1.0);
    let mut edges = Vec::new();
    for a in 0..nodes {
        for b in a + 1..nodes {
            if rng.gen_bool(edge_prob) {
                edges.push((a, b));
            }
        }
    }
    let graph = GeometricGraph::new(dim, positions, &edges)?;
    let count = graph.edges().len();
    graph
        .with_vector_features(vectors, normal_vec(rng, nodes * vectors * dim, 1.0))?
        .with_scalar_features(scalars, normal_vec(rng, nodes * scalars, 1.0))?
        .with_edge_attrs(edge_dim, normal_vec(rng, count * edge_dim, 1.0))
}

/// Random small architecture of the given kind and head in ℝ³.
pub fn random_config(rng: &mut ChaCha8Rng, kind: ModelKind, head: Head) -> ModelConfig {
    let mut cfg = ModelConfig {
        kind,
        head,
        dim: 3,
        channels: rng.gen_range(2..=4),
        hidden: 16,
        layers: rng.gen_range(1..=2),
        hops: rng.gen_range(1..=2),
        vector_features: rng.gen_range(0..=1),
        scalar_features: rng.gen_range(0..=1),
        edge_attr_dim: rng.gen_range(0..=1),
        mlp_blocks: 1,
        fully_connected: rng.gen_bool(0.5),
        ..ModelConfig::default()
    };
    if kind == ModelKind::Cgegnn {
        cfg.max_order = rng.gen_range(1..=3);
        let mut orders: Vec<usize> = (1..=cfg.max_order).filter(|_| rng.gen_bool(0.5)).collect();
        if orders.is_empty() {
            orders.push(rng.gen_range(1..=cfg.max_order));
        }
        cfg.orders = orders;
    }
    cfg
}

/// Freshly initialised model with every parameter (biases and norm weights
/// included) moved by Gaussian noise of scale `noise`.
pub fn perturbed_model(cfg: &ModelConfig, rng: &mut ChaCha8Rng, noise: f64) -> Result<Box<dyn GraphModel>> {
    let mut model = build_model(cfg, rng.gen())?;
    let mut p = model.params().data().to_vec();
    for v in &mut p {
        *v += noise * rng.sample::<f64, _>(StandardNormal);
    }
    model.params_mut().load(&p)?;
    Ok(model)
}

/// Applies `x ↦ Qx + g` to positions and `v ↦ Qv` to vector features.
pub fn transform_graph(graph: &GeometricGraph, q: &OrthogonalMap, shift: &[f64]) -> GeometricGraph {
    graph
        .map_positions(|p| q.apply_vector(p).iter().zip(shift).map(|(a, b)| a + b).collect())
        .map_vector_features(|v| q.apply_vector(v))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative deviation `‖f(Qx + g) − ρ(f(x))‖ / ‖ρ(f(x))‖`, where `ρ` is
/// `y ↦ Qy + g` per node for a vector head and the identity for a scalar head.
pub fn equivariance_error(
    model: &dyn GraphModel,
    graph: &GeometricGraph,
    q: &OrthogonalMap,
    shift: &[f64],
) -> Result<f64> {
    let before = model.predict(&[graph])?;
    let after = model.predict(&[&transform_graph(graph, q, shift)])?;
    let expected: Vec<f64> = match model.config().head {
        Head::Vector => before
            .chunks(graph.dim())
            .flat_map(|y| q.apply_vector(y).iter().zip(shift).map(|(a, b)| a + b).collect::<Vec<_>>())
            .collect(),
        Head::Scalar => before,
    };
    let diff: Vec<f64> = after.iter().zip(&expected).map(|(a, b)| a - b).collect();
    let scale = l2(&expected);
    Ok(if scale > 0.0 { l2(&diff) / scale } else { l2(&diff) })
}

#[derive(Clone, Debug)]
pub struct EquivarianceOptions {
    pub kind: ModelKind,
    pub head: Head,
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
    pub threads: usize,
    pub max_nodes: usize,
}

/// Fresh random model, graph, `Q` and `g` per trial.
pub fn equivariance(opts: &EquivarianceOptions) -> Result<CheckReport> {
    let name = format!("equivariance[{}, {} head]", opts.kind, opts.head);
    let errors = pool(opts.threads)?.install(|| {
        (0..opts.trials as u64)
            .into_par_iter()
            .map(|t| -> Result<(f64, String)> {
                let mut rng = trial_rng(opts.seed, t);
                let cfg = random_config(&mut rng, opts.kind, opts.head);
                let model = perturbed_model(&cfg, &mut rng, 0.1)?;
                let nodes = rng.gen_range(2..=opts.max_nodes.max(2));
                let layout = (cfg.vector_features, cfg.scalar_features, cfg.edge_attr_dim);
                let graph = random_graph(&mut rng, cfg.dim, nodes, 0.5, layout)?;
                let q = OrthogonalMap::random(cfg.dim, &mut rng)?;
                let shift = normal_vec(&mut rng, cfg.dim, 2.0);
                let err = equivariance_error(model.as_ref(), &graph, &q, &shift)?;
                Ok((err, format!("trial {t}: {} on {nodes} nodes", cfg.label())))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(CheckReport::from_errors(&name, opts.tol, errors))
}

/// Same suite with the architecture fixed by a trained model.
pub fn equivariance_of(model: &dyn GraphModel, trials: usize, tol: f64, seed: u64, max_nodes: usize) -> Result<CheckReport> {
    let cfg = model.config();
    let layout = (cfg.vector_features, cfg.scalar_features, cfg.edge_attr_dim);
    let mut errors = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let mut rng = trial_rng(seed, t);
        let nodes = rng.gen_range(2..=max_nodes.max(2));
        let graph = random_graph(&mut rng, cfg.dim, nodes, 0.5, layout)?;
        let q = OrthogonalMap::random(cfg.dim, &mut rng)?;
        let shift = normal_vec(&mut rng, cfg.dim, 2.0);
        let err = equivariance_error(model, &graph, &q, &shift)?;
        errors.push((err, format!("trial {t} on {nodes} nodes")));
    }
    Ok(CheckReport::from_errors(&format!("equivariance[{}]", cfg.label()), tol, errors))
}

/// Largest rotation-only deviation `‖f(Qx) − Qf(x)‖` found over `attempts`
/// random models, graphs and orthogonal maps.
pub fn largest_rotation_deviation(kind: ModelKind, attempts: usize, seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for t in 0..attempts as u64 {
        let mut rng = trial_rng(seed, t);
        let cfg = random_config(&mut rng, kind, Head::Vector);
        let model = perturbed_model(&cfg, &mut rng, 0.1)?;
        let nodes = rng.gen_range(2..=8);
        let layout = (cfg.vector_features, cfg.scalar_features, cfg.edge_attr_dim);
        let graph = random_graph(&mut rng, cfg.dim, nodes, 0.5, layout)?;
        let q = OrthogonalMap::random(cfg.dim, &mut rng)?;
        let zero = vec![0.0; cfg.dim];
        let before = model.predict(&[&graph])?;
        let after = model.predict(&[&transform_graph(&graph, &q, &zero)])?;
        let rotated: Vec<f64> = before.chunks(cfg.dim).flat_map(|y| q.apply_vector(y)).collect();
        let diff: Vec<f64> = after.iter().zip(&rotated).map(|(a, b)| a - b).collect();
        worst = worst.max(l2(&diff));
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// One finite-difference comparison.
struct Probe {
    coordinate: usize,
    analytic: f64,
    numeric: f64,
    error: f64,
}

impl Probe {
    fn new(coordinate: usize, analytic: f64, numeric: f64) -> Self {
        Self {
            coordinate,
            analytic,
            numeric,
            error: gradient_relative_error(analytic, numeric),
        }
    }
}

impl std::fmt::Display for Probe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "coordinate {}: analytic {:e}, numeric {:e}",
            self.coordinate, self.analytic, self.numeric
        )
    }
}

const STEP: f64 = 1e-5;
const MAX_REDRAWS: usize = 1000;

/// Central difference of `eval` at coordinate `i`, or `None` when some ReLU
/// input changes sign within `[x − h, x + h]`.
fn smooth_difference(
    eval: impl Fn(&[f64]) -> Result<(f64, Vec<bool>)>,
    x: &[f64],
    i: usize,
    pattern: &[bool],
) -> Result<Option<f64>> {
    let mut shifted = x.to_vec();
    shifted[i] = x[i] + STEP;
    let (up, up_pattern) = eval(&shifted)?;
    shifted[i] = x[i] - STEP;
    let (down, down_pattern) = eval(&shifted)?;
    if up_pattern != pattern || down_pattern != pattern {
        return Ok(None);
    }
    Ok(Some((up - down) / (2.0 * STEP)))
}

/// Draws `probes` coordinates below `total` at which `numeric` is defined,
/// returning the probes and how many draws were rejected.
fn draw_probes(
    probes: usize,
    total: usize,
    rng: &mut ChaCha8Rng,
    analytic: impl Fn(usize) -> f64,
    numeric: impl Fn(usize) -> Result<Option<f64>>,
) -> Result<(Vec<Probe>, usize)> {
    let mut out = Vec::with_capacity(probes);
    let mut redrawn = 0;
    while out.len() < probes {
        let i = rng.gen_range(0..total);
        match numeric(i)? {
            Some(n) => out.push(Probe::new(i, analytic(i), n)),
            None if redrawn < MAX_REDRAWS => redrawn += 1,
            None => return Err(Error::Config("no kink-free gradient probe found".into())),
        }
    }
    Ok((out, redrawn))
}

/// A scalar objective of a parameter store and one input tensor.
struct Objective<'a> {
    store: ParamStore,
    input: (usize, usize, usize, Vec<f64>),
    weights: Vec<f64>,
    build: Box<dyn Fn(&mut Tape, &ParamStore, MvTensor) -> Result<MvTensor> + 'a>,
}

impl Objective<'_> {
    fn eval(&self, store: &ParamStore, input: &[f64]) -> Result<(Tape, MvTensor, MvTensor)> {
        let (b, c, d, _) = &self.input;
        let mut tape = Tape::new();
        let x = tape.constant(*b, *c, *d, input.to_vec())?;
        let out = (self.build)(&mut tape, store, x)?;
        let loss = tape.weighted_sum(out, self.weights.clone())?;
        Ok((tape, x, loss))
    }

    /// Relative errors at `probes` random kink-free coordinates of the
    /// parameters and input.
    fn probe(&self, probes: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<Probe>, usize)> {
        let input = &self.input.3;
        let (tape, x, loss) = self.eval(&self.store, input)?;
        let pattern = tape.relu_pattern();
        let grads = tape.backward(loss)?;
        let param_grad = grads.param_grads(&self.store);
        let input_grad = grads.get_or_zero(x);
        let np = self.store.len();
        let of_params = |p: &[f64]| {
            let mut s = self.store.clone();
            s.load(p)?;
            let (t, _, l) = self.eval(&s, input)?;
            Ok((t.scalar(l), t.relu_pattern()))
        };
        let of_input = |v: &[f64]| {
            let (t, _, l) = self.eval(&self.store, v)?;
            Ok((t.scalar(l), t.relu_pattern()))
        };
        draw_probes(
            probes,
            np + input.len(),
            rng,
            |i| if i < np { param_grad[i] } else { input_grad[i - np] },
            |i| {
                if i < np {
                    smooth_difference(of_params, self.store.data(), i, &pattern)
                } else {
                    smooth_difference(of_input, input, i - np, &pattern)
                }
            },
        )
    }
}

fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng, scale: f64) {
    for v in store.data_mut() {
        *v = scale * rng.sample::<f64, _>(StandardNormal);
    }
}

fn layer_objectives(rng: &mut ChaCha8Rng) -> Result<Vec<(String, Objective<'static>)>> {
    let dim = 3;
    let blades = 1 << dim;
    let batch = 4;
    let mut cases: Vec<(String, Objective<'static>)> = Vec::new();
    let mut push = |name: &str,
                    store: ParamStore,
                    cin: usize,
                    in_dim: usize,
                    out_len: usize,
                    rng: &mut ChaCha8Rng,
                    build: Box<dyn Fn(&mut Tape, &ParamStore, MvTensor) -> Result<MvTensor>>| {
        let width = if in_dim == 0 { 1 } else { 1 << in_dim };
        let input = (batch, cin, in_dim, normal_vec(rng, batch * cin * width, 1.0));
        let weights = normal_vec(rng, out_len, 1.0);
        cases.push((
            name.into(),
            Objective {
                store,
                input,
                weights,
                build,
            },
        ));
    };

    let mut store = ParamStore::new();
    let lin = LinearLayer::new(&mut store, "linear", dim, 3, 2, true, rng);
    randomize(&mut store, rng, 1.0);
    push("linear", store, 3, dim, batch * 2 * blades, rng, Box::new(move |t, s, x| lin.forward(t, s, x)));

    for fc in [true, false] {
        let mut store = ParamStore::new();
        let out = if fc { 2 } else { 3 };
        let gp = GeomProductLayer::new(&mut store, "gp", dim, 3, out, fc, rng)?;
        randomize(&mut store, rng, 0.5);
        let name = if fc { "geometric product (fully connected)" } else { "geometric product" };
        push(name, store, 3, dim, batch * out * blades, rng, Box::new(move |t, s, x| gp.forward(t, s, x)));
    }

    let mut store = ParamStore::new();
    let norm = NormLayer::new(&mut store, "norm", dim, 3);
    randomize(&mut store, rng, 1.0);
    push("normalization", store, 3, dim, batch * 3 * blades, rng, Box::new(move |t, s, x| norm.forward(t, s, x)));

    push(
        "activation",
        ParamStore::new(),
        3,
        dim,
        batch * 3 * blades,
        rng,
        Box::new(|t, _, x| Ok(t.activation(x))),
    );

    let mut store = ParamStore::new();
    let mlp = CliffordMlp::new(&mut store, "mlp", dim, 2, &MlpSpec::standard(2, 3, 2, true), rng)?;
    randomize(&mut store, rng, 0.5);
    push("clifford mlp", store, 2, dim, batch * 2 * blades, rng, Box::new(move |t, s, x| mlp.forward(t, s, x)));

    let mut store = ParamStore::new();
    let dense = DenseMlp::new(&mut store, "dense", 5, 8, 2, rng);
    push("dense mlp", store, 5, 0, batch * 2, rng, Box::new(move |t, s, x| dense.forward(t, s, x)));
    Ok(cases)
}

/// Relative errors of `probes` random kink-free parameter coordinates of an
/// end-to-end model under an MSE loss against a random target.
fn model_probe(model: &mut dyn GraphModel, graphs: &[GeometricGraph], probes: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<Probe>, usize)> {
    let refs: Vec<&GeometricGraph> = graphs.iter().collect();
    let batch = GraphBatch::new(&refs, &model.batch_options())?;
    let out_len = model.predict(&refs)?.len();
    let target = normal_vec(rng, out_len, 1.0);
    let loss_of = |model: &dyn GraphModel| -> Result<(Tape, MvTensor)> {
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &batch)?;
        let t = tape.constant(out.batch(), out.channels(), out.dim(), target.clone())?;
        let loss = tape.mse(out, t)?;
        Ok((tape, loss))
    };
    let (tape, loss) = loss_of(model)?;
    let pattern = tape.relu_pattern();
    let analytic = tape.backward(loss)?.param_grads(model.params());
    let base = model.params().data().to_vec();
    let model = std::cell::RefCell::new(model);
    let eval = |p: &[f64]| -> Result<(f64, Vec<bool>)> {
        let mut m = model.borrow_mut();
        m.params_mut().load(p)?;
        let (t, l) = loss_of(&**m)?;
        Ok((t.scalar(l), t.relu_pattern()))
    };
    let drawn = draw_probes(probes, base.len(), rng, |i| analytic[i], |i| smooth_difference(eval, &base, i, &pattern));
    model.borrow_mut().params_mut().load(&base)?;
    drawn
}

/// Central differences against the tape for every layer type and for each
/// end-to-end model, `probes` random coordinates per case.
pub fn gradients(probes: usize, tol: f64, seed: u64) -> Result<CheckReport> {
    let mut rng = trial_rng(seed, 0);
    let mut errors = Vec::new();
    let mut redrawn = 0;
    for (name, obj) in layer_objectives(&mut rng)? {
        let (found, skipped) = obj.probe(probes, &mut rng)?;
        redrawn += skipped;
        for p in found {
            errors.push((p.error, format!("{name}, {p}")));
        }
    }
    let models = [
        (ModelKind::Cgegnn, Head::Vector, vec![1, 2]),
        (ModelKind::Cgegnn, Head::Scalar, vec![1, 2]),
        (ModelKind::Egnn, Head::Vector, vec![1]),
        (ModelKind::Gnn, Head::Scalar, vec![1]),
    ];
    for (kind, head, orders) in models {
        let cfg = ModelConfig {
            kind,
            head,
            channels: 3,
            hidden: 8,
            layers: 2,
            max_order: *orders.iter().max().expect("nonempty"),
            orders,
            vector_features: 1,
            scalar_features: 1,
            edge_attr_dim: 1,
            mlp_blocks: 1,
            ..ModelConfig::default()
        };
        let mut model = perturbed_model(&cfg, &mut rng, 0.1)?;
        let graphs = (0..2)
            .map(|_| random_graph(&mut rng, 3, 5, 0.6, (1, 1, 1)))
            .collect::<Result<Vec<_>>>()?;
        let (found, skipped) = model_probe(model.as_mut(), &graphs, probes, &mut rng)?;
        redrawn += skipped;
        for p in found {
            errors.push((p.error, format!("{} ({head} head), {p}", cfg.label())));
        }
    }
    let mut report = CheckReport::from_errors("gradients", tol, errors);
    report.redrawn = redrawn;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Universality
// ---------------------------------------------------------------------------

/// `count` uniform points in `[0, 1]^d` with pairwise ∞-distance at least
/// `separation`, by rejection.
pub fn separated_points(rng: &mut ChaCha8Rng, count: usize, d: usize, separation: f64) -> Result<Vec<Vec<f64>>> {
    for _ in 0..10_000 {
        let pts: Vec<Vec<f64>> = (0..count).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
        let ok = pts.iter().enumerate().all(|(i, p)| {
            pts[i + 1..].iter().all(|q| {
                p.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) >= separation
            })
        });
        if ok {
            return Ok(pts);
        }
    }
    Err(Error::Config(format!(
        "could not place {count} points in [0,1]^{d} with separation {separation}"
    )))
}

#[derive(Clone, Debug)]
pub struct UniversalityOptions {
    pub resolutions: Vec<usize>,
    pub dims: Vec<usize>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

/// Brute-force check of the lattice encoding: every lattice point has a
/// positive summed bump iff it is the snap of some input point, and decoding
/// the sum returns exactly the snapped set. The error count is the number of
/// mismatching sets.
pub fn universality(opts: &UniversalityOptions) -> Result<CheckReport> {
    let mut errors = Vec::new();
    let mut stream = 0u64;
    for &k in &opts.resolutions {
        for &d in &opts.dims {
            for &m in &opts.sizes {
                let mut rng = trial_rng(opts.seed, stream);
                stream += 1;
                // separation 1/(3K): the point-spacing hypothesis of the construction
                let separation = 1.0 / (3 * k) as f64;
                for t in 0..opts.trials {
                    let pts = separated_points(&mut rng, m, d, separation)?;
                    let encoded = universality_encode(&pts, k, d)?;
                    let snapped = snapped_set(&pts, k);
                    let lattice = cgegnn_oracles::lattice_points(k, d);
                    let positive_ok = lattice
                        .iter()
                        .zip(&encoded)
                        .all(|(c, &e)| (e > 0.0) == snapped.contains(c));
                    let decoded = universality_decode(&encoded, k, d)?;
                    let bad = usize::from(!positive_ok) + usize::from(decoded != snapped);
                    errors.push((bad as f64, format!("K = {k}, d = {d}, M = {m}, set {t}")));
                }
            }
        }
    }
    Ok(CheckReport::from_errors("universality", 0.0, errors))
}
