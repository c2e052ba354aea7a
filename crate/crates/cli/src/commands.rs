//! Command implementations. Each prints one JSON summary line on success.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cgegnn_core::datasets::{feature_layout, generate_dataset, read_manifest, Dataset, DatasetConfig, Task};
use cgegnn_core::kv::KeyValues;
use cgegnn_core::model::{build_model, Head, ModelConfig, ModelKind};
use cgegnn_core::training::{evaluate, train, write_metrics, Checkpoint, StopReason, TrainConfig};
use cgegnn_core::Error;
use serde_json::json;

use crate::checks::{self, CheckReport, EquivarianceOptions, UniversalityOptions};
use crate::{CheckArgs, CheckKind, Cli, CliError, Command, EvalArgs, GenArgs, ReportArgs, TrainArgs, SEED_ENV};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => gen(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Eval(a) => eval(&a),
        Command::Report(a) => report(&a),
        Command::Check(a) => check(&a),
    }
}

/// Explicit value, else `CGEGNN_SEED`, else 0.
fn seed_or_env(explicit: Option<u64>) -> Result<u64> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v} is not a non-negative integer"))),
        Err(_) => Ok(0),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn gen(a: &GenArgs) -> Result<()> {
    let (mut train, mut val, mut test) = match a.samples {
        Some(n) => (n - 2 * (n / 3), n / 3, n / 3),
        None => (1000, 200, 200),
    };
    train = a.train.unwrap_or(train);
    val = a.val.unwrap_or(val);
    test = a.test.unwrap_or(test);
    let mut cfg = DatasetConfig::new(a.task, seed_or_env(a.seed)?, train, val, test);
    let hull_flags = a.nodes.is_some() || a.min_separation.is_some();
    let nbody_flags =
        a.particles.is_some() || a.steps.is_some() || a.dt.is_some() || a.softening.is_some() || a.collision_floor.is_some();
    match a.task {
        Task::Hull3d if nbody_flags => return Err(CliError::Usage("n-body flags given for hull3d".into())),
        Task::Nbody if hull_flags => return Err(CliError::Usage("hull flags given for nbody".into())),
        _ => {}
    }
    cfg.hull.nodes = a.nodes.unwrap_or(cfg.hull.nodes);
    cfg.hull.min_separation = a.min_separation.unwrap_or(cfg.hull.min_separation);
    let nb = &mut cfg.nbody;
    nb.particles = a.particles.unwrap_or(nb.particles);
    nb.steps = a.steps.unwrap_or(nb.steps);
    nb.dt = a.dt.unwrap_or(nb.dt);
    nb.softening = a.softening.unwrap_or(nb.softening);
    nb.collision_floor = a.collision_floor.unwrap_or(nb.collision_floor);
    if a.threads < 1 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let manifest = generate_dataset(&cfg, &a.out, a.threads)?;
    println!(
        "{}",
        json!({
            "command": "gen",
            "task": manifest.task.to_string(),
            "out": a.out.display().to_string(),
            "count": manifest.count,
            "train": cfg.train,
            "val": cfg.val,
            "test": cfg.test,
            "config_hash": manifest.config_hash,
        })
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

const MODEL_KEYS: [&str; 10] = [
    "model",
    "orders",
    "max_order",
    "channels",
    "hidden",
    "layers",
    "hops",
    "mlp_blocks",
    "fully_connected",
    "max_subsets_per_node",
];

const TRAIN_KEYS: [&str; 9] = [
    "lr",
    "weight_decay",
    "batch_size",
    "max_iters",
    "eval_interval",
    "patience",
    "seed",
    "cosine",
    "eval_batch_size",
];

/// Config-file entries overlaid with the flags that were given.
fn merged_settings(a: &TrainArgs) -> Result<KeyValues> {
    let mut kv = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let kv = KeyValues::parse(&text)?;
            if let Some(k) = kv.keys().find(|k| !MODEL_KEYS.contains(k) && !TRAIN_KEYS.contains(k)) {
                return Err(CliError::Usage(format!("unknown key `{k}` in {}", path.display())));
            }
            kv
        }
        None => KeyValues::new(),
    };
    macro_rules! overlay {
        ($($field:ident),*) => {
            $(if let Some(v) = &a.$field {
                kv.set(stringify!($field), v);
            })*
        };
    }
    overlay!(
        model,
        orders,
        max_order,
        channels,
        hidden,
        layers,
        hops,
        mlp_blocks,
        fully_connected,
        max_subsets_per_node,
        lr,
        weight_decay,
        batch_size,
        max_iters,
        eval_interval,
        patience,
        seed,
        cosine,
        eval_batch_size
    );
    if !kv.contains("seed") {
        kv.set("seed", seed_or_env(None)?);
    }
    Ok(kv)
}

/// Model configuration for a task: feature layout and head follow the data.
pub fn model_config_for(task: Task, settings: &KeyValues) -> cgegnn_core::Result<ModelConfig> {
    let mut kv = KeyValues::new();
    for key in MODEL_KEYS {
        if let Some(v) = settings.get(key) {
            kv.set(key, v);
        }
    }
    let (vectors, scalars, edge) = feature_layout(task);
    kv.set("dim", 3);
    kv.set("vector_features", vectors);
    kv.set("scalar_features", scalars);
    kv.set("edge_attr_dim", edge);
    kv.set(
        "head",
        match task {
            Task::Nbody => Head::Vector,
            Task::Hull3d => Head::Scalar,
        },
    );
    ModelConfig::from_kv(&kv)
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let settings = merged_settings(a)?;
    let manifest = read_manifest(&a.data)?;
    let model_cfg = model_config_for(manifest.task, &settings).map_err(|e| CliError::Usage(e.to_string()))?;
    let train_cfg = TrainConfig::from_kv(&settings).map_err(|e| CliError::Usage(e.to_string()))?;
    let data = Dataset::load(&a.data)?;

    let mut metadata = train_cfg.to_kv();
    metadata.set("task", manifest.task);
    metadata.set("data_hash", &manifest.config_hash);

    let mut model = build_model(&model_cfg, train_cfg.seed)?;
    let test = (!data.test.is_empty()).then_some(data.test.as_slice());
    let outcome = train(model.as_mut(), &data.train, &data.val, test, &train_cfg, &metadata)?;

    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    outcome.best.save(&a.out)?;
    let metrics_path = a.metrics.clone().unwrap_or_else(|| with_suffix(&a.out, ".metrics.csv"));
    let mut buf = Vec::new();
    write_metrics(&mut buf, &outcome.metrics).map_err(|e| Error::io(&metrics_path, e))?;
    write_file(&metrics_path, &String::from_utf8(buf).expect("csv is UTF-8"))?;

    let label = model_cfg.label();
    let test_text = outcome.test_mse.map(|t| format!("{t:e}")).unwrap_or_default();
    let summary_path = a.summary.clone().unwrap_or_else(|| with_suffix(&a.out, ".run.csv"));
    write_file(
        &summary_path,
        &format!(
            "{RUN_HEADER}\n{label},{},{:e},{test_text},{}\n",
            train_cfg.seed, outcome.best_val_mse, outcome.iterations
        ),
    )?;

    if let StopReason::Diverged(msg) = &outcome.stop {
        return Err(CliError::Failed(format!(
            "training diverged ({msg}); best checkpoint from iteration {} kept at {}",
            outcome.best.iteration,
            a.out.display()
        )));
    }
    println!(
        "{}",
        json!({
            "command": "train",
            "model": label,
            "seed": train_cfg.seed,
            "iterations": outcome.iterations,
            "best_iteration": outcome.best.iteration,
            "best_val_mse": outcome.best_val_mse,
            "test_mse": outcome.test_mse,
            "stop": match outcome.stop {
                StopReason::MaxIters => "max_iters",
                StopReason::EarlyStopped => "early_stopped",
                StopReason::Diverged(_) => "diverged",
            },
            "checkpoint": a.out.display().to_string(),
            "metrics": metrics_path.display().to_string(),
        })
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn eval(a: &EvalArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.ckpt)?;
    let data = Dataset::load(&a.data)?;
    let split = data.split(&a.split).map_err(|e| CliError::Usage(e.to_string()))?;
    let model = ckpt.model()?;
    let mse = evaluate(model.as_ref(), split, a.batch_size)?;
    println!(
        "{}",
        json!({
            "command": "eval",
            "model": ckpt.config.label(),
            "split": a.split,
            "samples": split.len(),
            "mse": mse,
        })
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub const RUN_HEADER: &str = "model,seed,best_val_mse,test_mse,iterations";
pub const REPORT_HEADER: &str = "model,mean_mse,std_mse,seeds";

fn run_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<std::result::Result<_, _>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            run_files(&path, out)?;
        } else if path.to_string_lossy().ends_with(".run.csv") {
            out.push(path);
        }
    }
    Ok(())
}

/// Sample mean and standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn report(a: &ReportArgs) -> Result<()> {
    let mut files = Vec::new();
    run_files(&a.runs, &mut files)?;
    let mut by_model: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for path in &files {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some(RUN_HEADER) {
            return Err(Error::format(path, "unexpected run summary header").into());
        }
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::format(path, format!("expected 5 columns in `{line}`")).into());
            }
            if cols[3].is_empty() {
                continue;
            }
            let mse: f64 = cols[3]
                .parse()
                .map_err(|_| Error::format(path, format!("bad test_mse `{}`", cols[3])))?;
            by_model.entry(cols[0].to_string()).or_default().push(mse);
        }
    }
    let mut csv = format!("{REPORT_HEADER}\n");
    for (model, values) in &by_model {
        let (mean, std) = mean_std(values);
        csv.push_str(&format!("{model},{mean:e},{std:e},{}\n", values.len()));
    }
    match &a.out {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    println!(
        "{}",
        json!({
            "command": "report",
            "runs": files.len(),
            "models": by_model.len(),
            "out": a.out.as_ref().map(|p| p.display().to_string()),
        })
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

fn print_report(r: &CheckReport) {
    let status = if r.passed() { "PASS" } else { "FAIL" };
    println!(
        "{status} {}: worst error {:e} (tol {:e}, {} trials, {} failures)",
        r.name, r.worst, r.tol, r.trials, r.failures
    );
    for d in &r.details {
        println!("  {d}");
    }
}

fn check(a: &CheckArgs) -> Result<()> {
    let seed = seed_or_env(a.seed)?;
    if a.threads < 1 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let only_for = |cond: bool, flag: &str| {
        if cond {
            Err(CliError::Usage(format!("{flag} does not apply to `check {:?}`", a.kind).to_lowercase()))
        } else {
            Ok(())
        }
    };
    if a.kind != CheckKind::Universality {
        only_for(a.resolutions.is_some() || a.sizes.is_some() || a.dims.is_some(), "--K/--M/--d")?;
    }
    if a.kind != CheckKind::Equivariance {
        only_for(
            a.ckpt.is_some() || a.model.is_some() || a.head.is_some() || a.scalar_tol.is_some(),
            "--ckpt/--model/--head/--scalar-tol",
        )?;
    }
    let vector_tol = a.tol.unwrap_or(1e-6);
    let scalar_tol = a.scalar_tol.unwrap_or(1e-8);
    let reports: Vec<CheckReport> = match a.kind {
        CheckKind::Algebra => vec![checks::algebra(a.trials.unwrap_or(1000), seed, a.tol.unwrap_or(1e-12))?],
        CheckKind::Grad => vec![checks::gradients(a.trials.unwrap_or(50), a.tol.unwrap_or(1e-4), seed)?],
        CheckKind::Universality => {
            let opts = UniversalityOptions {
                resolutions: a.resolutions.clone().unwrap_or_else(|| vec![2, 3, 4]),
                dims: a.dims.clone().unwrap_or_else(|| vec![1, 2]),
                sizes: a.sizes.clone().unwrap_or_else(|| vec![2, 3]),
                trials: a.trials.unwrap_or(100),
                seed,
            };
            if opts.resolutions.contains(&0) || opts.dims.contains(&0) || opts.sizes.contains(&0) {
                return Err(CliError::Usage("--K, --M and --d must be positive".into()));
            }
            vec![checks::universality(&opts)?]
        }
        CheckKind::Equivariance => {
            let trials = a.trials.unwrap_or(100);
            if let Some(path) = &a.ckpt {
                if a.model.is_some() || a.head.is_some() {
                    return Err(CliError::Usage("--model/--head conflict with --ckpt".into()));
                }
                let ckpt = Checkpoint::load(path)?;
                let model = ckpt.model()?;
                let tol = match ckpt.config.head {
                    Head::Vector => vector_tol,
                    Head::Scalar => scalar_tol,
                };
                vec![checks::equivariance_of(model.as_ref(), trials, tol, seed, a.max_nodes)?]
            } else {
                let kind = a.model.unwrap_or(ModelKind::Cgegnn);
                let heads = match a.head {
                    Some(h) => vec![h],
                    None => vec![Head::Vector, Head::Scalar],
                };
                heads
                    .into_iter()
                    .map(|head| {
                        checks::equivariance(&EquivarianceOptions {
                            kind,
                            head,
                            trials,
                            tol: if head == Head::Vector { vector_tol } else { scalar_tol },
                            seed,
                            threads: a.threads,
                            max_nodes: a.max_nodes,
                        })
                    })
                    .collect::<cgegnn_core::Result<Vec<_>>>()?
            }
        }
    };
    for r in &reports {
        print_report(r);
    }
    let passed = reports.iter().all(CheckReport::passed);
    let worst = reports.iter().map(|r| r.worst).fold(0.0, f64::max);
    println!(
        "{}",
        json!({
            "command": "check",
            "kind": format!("{:?}", a.kind).to_lowercase(),
            "passed": passed,
            "worst_error": worst,
            "suites": reports.iter().map(|r| json!({
                "name": r.name,
                "trials": r.trials,
                "worst_error": r.worst,
                "tol": r.tol,
                "failures": r.failures,
            })).collect::<Vec<_>>(),
        })
    );
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} check failed", format!("{:?}", a.kind).to_lowercase())))
    }
}
