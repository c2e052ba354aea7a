//! Trains the baseline and CG-EGNN variants on one generated task and prints
//! their test MSE.
//!
//! Usage: compare <hull3d|nbody> [iters] [batch] [seed] [lr]

use std::time::Instant;

use cgegnn_core::datasets::{feature_layout, Dataset, DatasetConfig, Task};
use cgegnn_core::kv::KeyValues;
use cgegnn_core::model::{build_model, Head, ModelConfig, ModelKind};
use cgegnn_core::training::{train, TrainConfig};

fn main() -> cgegnn_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let task: Task = arg(1, "hull3d").parse()?;
    let iters: u64 = arg(2, "2000").parse().unwrap();
    let batch: usize = arg(3, "16").parse().unwrap();
    let seed: u64 = arg(4, "0").parse().unwrap();
    let lr: f64 = arg(5, "1e-3").parse().unwrap();
    let (data, head, variants) = match task {
        Task::Hull3d => (
            Dataset::generate(&DatasetConfig::new(task, 100 + seed, 2000, 500, 500))?,
            Head::Scalar,
            vec![(ModelKind::Gnn, vec![1]), (ModelKind::Cgegnn, vec![1]), (ModelKind::Cgegnn, vec![1, 2])],
        ),
        Task::Nbody => (
            Dataset::generate(&DatasetConfig::new(task, 200 + seed, 1000, 200, 200))?,
            Head::Vector,
            vec![(ModelKind::Gnn, vec![1]), (ModelKind::Cgegnn, vec![1])],
        ),
    };
    let (vf, sf, ef) = feature_layout(task);
    for (kind, orders) in variants {
        let mcfg = ModelConfig {
            kind,
            max_order: *orders.iter().max().unwrap(),
            orders,
            head,
            vector_features: vf,
            scalar_features: sf,
            edge_attr_dim: ef,
            mlp_blocks: 1,
            ..ModelConfig::default()
        };
        if let Ok(only) = std::env::var("ONLY") {
            if !only.split(',').any(|l| l == mcfg.label()) {
                continue;
            }
        }
        let mut model = build_model(&mcfg, seed)?;
        let tcfg = TrainConfig {
            lr,
            batch_size: batch,
            max_iters: iters,
            eval_interval: (iters / 10).max(1),
            seed,
            cosine: true,
            ..TrainConfig::default()
        };
        let t = Instant::now();
        let out = train(model.as_mut(), &data.train, &data.val, Some(&data.test), &tcfg, &KeyValues::new())?;
        let curve: Vec<String> = out.metrics.iter().map(|m| format!("{:.4}", m.val_mse)).collect();
        println!(
            "{:<12} test {:.5} best val {:.5} in {:.0}s  [{}]",
            mcfg.label(),
            out.test_mse.unwrap(),
            out.best_val_mse,
            t.elapsed().as_secs_f64(),
            curve.join(" ")
        );
    }
    Ok(())
}
