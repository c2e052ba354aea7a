//! Loss, optimizer, checkpoints and the training loop.

pub mod checkpoint;
pub mod optim;

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tape;
use crate::datasets::Sample;
use crate::error::{Error, Result};
use crate::geograph::GeometricGraph;
use crate::kv::KeyValues;
use crate::model::{GraphBatch, GraphModel};
pub use checkpoint::{Checkpoint, RngState};
pub use optim::{scheduled_lr, Adam};

/// Mean of squared differences over all entries.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "prediction has {} values, target {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("mse of empty arrays".into()));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_iters: u64,
    pub eval_interval: u64,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub cosine: bool,
    /// Graphs per forward pass during evaluation.
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-4,
            batch_size: 32,
            max_iters: 1000,
            eval_interval: 100,
            patience: 50,
            seed: 0,
            cosine: false,
            eval_batch_size: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Config("learning rate must be a finite non-negative number".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        if self.batch_size < 1 || self.eval_batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.eval_interval < 1 {
            return Err(Error::Config("eval interval must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("lr", self.lr);
        kv.set("weight_decay", self.weight_decay);
        kv.set("batch_size", self.batch_size);
        kv.set("max_iters", self.max_iters);
        kv.set("eval_interval", self.eval_interval);
        kv.set("patience", self.patience);
        kv.set("seed", self.seed);
        kv.set("cosine", self.cosine);
        kv.set("eval_batch_size", self.eval_batch_size);
        kv
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            lr: kv.parsed_or("lr", d.lr)?,
            weight_decay: kv.parsed_or("weight_decay", d.weight_decay)?,
            batch_size: kv.parsed_or("batch_size", d.batch_size)?,
            max_iters: kv.parsed_or("max_iters", d.max_iters)?,
            eval_interval: kv.parsed_or("eval_interval", d.eval_interval)?,
            patience: kv.parsed_or("patience", d.patience)?,
            seed: kv.parsed_or("seed", d.seed)?,
            cosine: kv.parsed_or("cosine", d.cosine)?,
            eval_batch_size: kv.parsed_or("eval_batch_size", d.eval_batch_size)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One row of the metrics log.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iter: u64,
    pub train_loss: f64,
    pub val_mse: f64,
    pub wall_ms: u128,
}

pub const METRICS_HEADER: &str = "iter,train_loss,val_mse,wall_ms";

impl MetricsRow {
    pub fn csv(&self) -> String {
        format!("{},{:e},{:e},{}", self.iter, self.train_loss, self.val_mse, self.wall_ms)
    }
}

pub fn write_metrics<W: Write>(mut w: W, rows: &[MetricsRow]) -> std::io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv())?;
    }
    Ok(())
}

/// Why a run stopped.
#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    MaxIters,
    EarlyStopped,
    /// Loss or gradient became non-finite; the best checkpoint so far is kept.
    Diverged(String),
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation MSE.
    pub best: Checkpoint,
    pub best_val_mse: f64,
    pub test_mse: Option<f64>,
    pub metrics: Vec<MetricsRow>,
    pub iterations: u64,
    pub stop: StopReason,
}

fn targets_of(samples: &[&Sample]) -> Vec<f64> {
    samples.iter().flat_map(|s| s.target.iter().copied()).collect()
}

/// MSE of `model` over `samples`, averaged over every target entry.
pub fn evaluate(model: &dyn GraphModel, samples: &[Sample], batch_size: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty split".into()));
    }
    let opts = model.batch_options();
    let mut sq = 0.0;
    let mut count = 0usize;
    for chunk in samples.chunks(batch_size.max(1)) {
        let graphs: Vec<&GeometricGraph> = chunk.iter().map(|s| &s.graph).collect();
        let batch = GraphBatch::new(&graphs, &opts)?;
        let mut tape = Tape::new();
        let out = model.forward(&mut tape, &batch)?;
        let refs: Vec<&Sample> = chunk.iter().collect();
        let target = targets_of(&refs);
        let pred = tape.value(out);
        if pred.len() != target.len() {
            return Err(Error::Shape(format!(
                "model predicts {} values, targets hold {}",
                pred.len(),
                target.len()
            )));
        }
        sq += pred.iter().zip(&target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
        count += target.len();
    }
    Ok(sq / count as f64)
}

/// Loss and parameter gradient on one mini-batch.
pub fn loss_and_grad(model: &dyn GraphModel, samples: &[&Sample]) -> Result<(f64, Vec<f64>)> {
    let graphs: Vec<&GeometricGraph> = samples.iter().map(|s| &s.graph).collect();
    let batch = GraphBatch::new(&graphs, &model.batch_options())?;
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, &batch)?;
    let target = targets_of(samples);
    let t = tape.constant(out.batch(), out.channels(), out.dim(), target)?;
    let loss = tape.mse(out, t)?;
    let value = tape.scalar(loss);
    let grads = tape.backward(loss)?.param_grads(model.params());
    Ok((value, grads))
}

/// Mini-batch Adam with periodic validation, early stopping and best-model
/// retention. `test` is evaluated once with the best parameters.
pub fn train(
    model: &mut dyn GraphModel,
    train_set: &[Sample],
    val_set: &[Sample],
    test_set: Option<&[Sample]>,
    cfg: &TrainConfig,
    metadata: &KeyValues,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config("training needs nonempty train and validation splits".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.params().len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut cursor = order.len();

    let snapshot = |model: &dyn GraphModel, adam: &Adam, iter: u64, rng: &ChaCha8Rng| Checkpoint {
        config: model.config().clone(),
        metadata: metadata.clone(),
        params: model.params().data().to_vec(),
        optimizer: adam.clone(),
        iteration: iter,
        rng: RngState::capture(rng),
    };

    let mut best_val = evaluate(model, val_set, cfg.eval_batch_size)?;
    let mut best = snapshot(model, &adam, 0, &rng);
    let mut metrics = vec![MetricsRow {
        iter: 0,
        train_loss: f64::NAN,
        val_mse: best_val,
        wall_ms: start.elapsed().as_millis(),
    }];
    let mut since_best = 0usize;
    let mut loss_sum = 0.0;
    let mut loss_count = 0u64;
    let mut stop = StopReason::MaxIters;
    let mut iter = 0u64;

    while iter < cfg.max_iters {
        if cursor + cfg.batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_size).min(order.len());
        let batch: Vec<&Sample> = order[cursor..end].iter().map(|&i| &train_set[i]).collect();
        cursor = end;

        let (loss, grads) = loss_and_grad(model, &batch)?;
        if !loss.is_finite() {
            stop = StopReason::Diverged(Error::NonFiniteLoss(iter + 1).to_string());
            break;
        }
        let lr = scheduled_lr(cfg.lr, iter, cfg.max_iters, cfg.cosine);
        if let Err(e) = adam.step(model.params_mut().data_mut(), &grads, lr, cfg.weight_decay) {
            match e {
                Error::NonFiniteGradient(_) => {
                    stop = StopReason::Diverged(e.to_string());
                    break;
                }
                other => return Err(other),
            }
        }
        iter += 1;
        loss_sum += loss;
        loss_count += 1;

        if iter % cfg.eval_interval == 0 || iter == cfg.max_iters {
            let val = evaluate(model, val_set, cfg.eval_batch_size)?;
            metrics.push(MetricsRow {
                iter,
                train_loss: loss_sum / loss_count as f64,
                val_mse: val,
                wall_ms: start.elapsed().as_millis(),
            });
            loss_sum = 0.0;
            loss_count = 0;
            if !val.is_finite() {
                stop = StopReason::Diverged(format!("validation MSE became {val} at iteration {iter}"));
                break;
            }
            if val < best_val {
                best_val = val;
                best = snapshot(model, &adam, iter, &rng);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    stop = StopReason::EarlyStopped;
                    break;
                }
            }
            log::info!("iter {iter}: val mse {val:.6e} (best {best_val:.6e})");
        }
    }

    model.params_mut().load(&best.params)?;
    let test_mse = match test_set {
        Some(t) if !t.is_empty() => Some(evaluate(model, t, cfg.eval_batch_size)?),
        _ => None,
    };
    Ok(TrainOutcome {
        best,
        best_val_mse: best_val,
        test_mse,
        metrics,
        iterations: iter,
        stop,
    })
}
