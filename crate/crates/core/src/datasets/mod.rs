//! Synthetic tasks, their line-delimited record files and manifests.

pub mod hull;
pub mod nbody;

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geograph::GeometricGraph;
use crate::kv::KeyValues;
use hull::hull_volume_3d;
use nbody::{simulate_nbody, NBodyConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Nbody,
    Hull3d,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Nbody => "nbody",
            Task::Hull3d => "hull3d",
        })
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nbody" => Ok(Task::Nbody),
            "hull3d" => Ok(Task::Hull3d),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HullConfig {
    pub nodes: usize,
    /// Minimum pairwise ∞-norm distance between points of one sample.
    pub min_separation: f64,
}

impl Default for HullConfig {
    fn default() -> Self {
        Self {
            nodes: 6,
            min_separation: 0.0,
        }
    }
}

/// Everything that determines a generated dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub task: Task,
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub hull: HullConfig,
    pub nbody: NBodyConfig,
}

impl DatasetConfig {
    pub fn new(task: Task, seed: u64, train: usize, val: usize, test: usize) -> Self {
        Self {
            task,
            seed,
            train,
            val,
            test,
            hull: HullConfig::default(),
            nbody: NBodyConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.task {
            Task::Hull3d => {
                if self.hull.nodes < 4 {
                    return Err(Error::Config("a 3D hull needs at least 4 nodes".into()));
                }
                if !(self.hull.min_separation >= 0.0) {
                    return Err(Error::Config("min_separation must be non-negative".into()));
                }
            }
            Task::Nbody => self.nbody.validate()?,
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    /// Task-relevant settings as key/value text (the hashed config).
    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("task", self.task);
        kv.set("seed", self.seed);
        kv.set("train", self.train);
        kv.set("val", self.val);
        kv.set("test", self.test);
        match self.task {
            Task::Hull3d => {
                kv.set("nodes", self.hull.nodes);
                kv.set("min_separation", self.hull.min_separation);
            }
            Task::Nbody => {
                let c = &self.nbody;
                kv.set("particles", c.particles);
                kv.set("steps", c.steps);
                kv.set("dt", c.dt);
                kv.set("softening", c.softening);
                kv.set("position_scale", c.position_scale);
                kv.set("velocity_scale", c.velocity_scale);
                kv.set("collision_floor", c.collision_floor);
                kv.set("max_attempts", c.max_attempts);
            }
        }
        kv
    }

    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_kv().to_text().as_bytes()))
    }
}

/// One line of a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: u64,
    pub positions: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charges: Option<Vec<f64>>,
    pub target: Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Scalar(f64),
    Array(Vec<f64>),
}

impl Target {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Target::Scalar(v) => vec![*v],
            Target::Array(v) => v.clone(),
        }
    }
}

/// Record converted to a graph plus its flat regression target.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub graph: GeometricGraph,
    pub target: Vec<f64>,
}

impl SampleRecord {
    /// Complete graph on the points. N-body samples carry the velocity as a
    /// vector feature, the charge as a scalar feature and the charge product
    /// as an edge attribute.
    pub fn to_sample(&self, task: Task) -> Result<Sample> {
        let target = self.target.values();
        if target.iter().chain(&self.positions).any(|v| !v.is_finite()) {
            return Err(Error::Graph(format!("record {} has non-finite values", self.id)));
        }
        let graph = GeometricGraph::complete(3, self.positions.clone())?;
        let graph = match task {
            Task::Hull3d => {
                if target.len() != 1 {
                    return Err(Error::Shape(format!("hull record {} needs one target", self.id)));
                }
                graph
            }
            Task::Nbody => {
                let vel = self
                    .velocities
                    .clone()
                    .ok_or_else(|| Error::Shape(format!("n-body record {} lacks velocities", self.id)))?;
                let charges = self
                    .charges
                    .clone()
                    .ok_or_else(|| Error::Shape(format!("n-body record {} lacks charges", self.id)))?;
                if target.len() != self.positions.len() {
                    return Err(Error::Shape(format!(
                        "n-body record {} target has {} values for {} positions",
                        self.id,
                        target.len(),
                        self.positions.len()
                    )));
                }
                let products: Vec<f64> = graph
                    .edges()
                    .iter()
                    .map(|&(a, b)| charges[a] * charges[b])
                    .collect();
                graph
                    .with_vector_features(1, vel)?
                    .with_scalar_features(1, charges)?
                    .with_edge_attrs(1, products)?
            }
        };
        Ok(Sample {
            id: self.id,
            graph,
            target,
        })
    }
}

/// Feature layout of a task's graphs: `(vector, scalar, edge attribute)` counts.
pub fn feature_layout(task: Task) -> (usize, usize, usize) {
    match task {
        Task::Hull3d => (0, 0, 0),
        Task::Nbody => (1, 1, 1),
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn inf_separation_ok(points: &[[f64; 3]], alpha: f64) -> bool {
    points.iter().enumerate().all(|(i, p)| {
        points[i + 1..].iter().all(|q| {
            let d = (0..3).map(|k| (p[k] - q[k]).abs()).fold(0.0, f64::max);
            d >= alpha
        })
    })
}

/// Draws record `index`; depends only on `(config, index)`.
pub fn generate_record(config: &DatasetConfig, index: u64) -> Result<SampleRecord> {
    let mut rng = sample_rng(config.seed, index);
    match config.task {
        Task::Hull3d => {
            let nodes = config.hull.nodes;
            for _ in 0..10_000 {
                let points: Vec<[f64; 3]> = (0..nodes)
                    .map(|_| {
                        [
                            rng.sample(StandardNormal),
                            rng.sample(StandardNormal),
                            rng.sample(StandardNormal),
                        ]
                    })
                    .collect();
                if !inf_separation_ok(&points, config.hull.min_separation) {
                    continue;
                }
                let volume = match hull_volume_3d(&points) {
                    Ok(v) => v,
                    Err(Error::DegenerateHull(_)) => continue,
                    Err(e) => return Err(e),
                };
                return Ok(SampleRecord {
                    id: index,
                    positions: points.iter().flatten().copied().collect(),
                    velocities: None,
                    charges: None,
                    target: Target::Scalar(volume),
                });
            }
            Err(Error::Config(format!(
                "could not draw {nodes} points with separation {}",
                config.hull.min_separation
            )))
        }
        Task::Nbody => {
            let traj = simulate_nbody(&config.nbody, &mut rng)?;
            Ok(SampleRecord {
                id: index,
                positions: traj.initial.positions,
                velocities: Some(traj.initial.velocities),
                charges: Some(traj.initial.charges),
                target: Target::Array(traj.final_state.positions),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: [usize; 2],
    pub val: [usize; 2],
    pub test: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub task: Task,
    pub seed: u64,
    pub config: String,
    pub config_hash: String,
    pub count: usize,
    pub splits: SplitRanges,
}

pub const SPLITS: [&str; 3] = ["train", "val", "test"];
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn split_path(dir: &Path, split: &str) -> PathBuf {
    dir.join(format!("{split}.jsonl"))
}

/// Generates all records (in parallel on `threads` workers) and writes
/// `train.jsonl`, `val.jsonl`, `test.jsonl` and `manifest.json` under `dir`.
pub fn generate_dataset(config: &DatasetConfig, dir: &Path, threads: usize) -> Result<Manifest> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let records: Vec<SampleRecord> = pool.install(|| {
        (0..config.total() as u64)
            .into_par_iter()
            .map(|i| generate_record(config, i))
            .collect::<Result<Vec<_>>>()
    })?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bounds = [
        0,
        config.train,
        config.train + config.val,
        config.total(),
    ];
    for (s, name) in SPLITS.iter().enumerate() {
        let path = split_path(dir, name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for rec in &records[bounds[s]..bounds[s + 1]] {
            let line = serde_json::to_string(rec).map_err(|e| Error::format(&path, e.to_string()))?;
            writeln!(w, "{line}").map_err(|e| Error::io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    let manifest = Manifest {
        task: config.task,
        seed: config.seed,
        config: config.to_kv().to_text(),
        config_hash: config.config_hash(),
        count: config.total(),
        splits: SplitRanges {
            train: [bounds[0], bounds[1]],
            val: [bounds[1], bounds[2]],
            test: [bounds[2], bounds[3]],
        },
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
}

pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// The three splits of a generated dataset, converted to graphs.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub task: Task,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = read_manifest(dir)?;
        let mut splits = Vec::with_capacity(3);
        for name in SPLITS {
            let path = split_path(dir, name);
            let samples = read_records(&path)?
                .iter()
                .map(|r| r.to_sample(manifest.task))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| match e {
                    Error::Io { .. } | Error::Format { .. } => e,
                    other => Error::format(&path, other.to_string()),
                })?;
            splits.push(samples);
        }
        let test = splits.pop().expect("three splits");
        let val = splits.pop().expect("three splits");
        let train = splits.pop().expect("three splits");
        Ok(Self {
            task: manifest.task,
            train,
            val,
            test,
        })
    }

    /// Builds a dataset in memory without touching the file system.
    pub fn generate(config: &DatasetConfig) -> Result<Self> {
        config.validate()?;
        let make = |range: std::ops::Range<usize>| {
            range
                .map(|i| generate_record(config, i as u64)?.to_sample(config.task))
                .collect::<Result<Vec<_>>>()
        };
        let a = config.train;
        let b = a + config.val;
        Ok(Self {
            task: config.task,
            train: make(0..a)?,
            val: make(a..b)?,
            test: make(b..config.total())?,
        })
    }

    pub fn split(&self, name: &str) -> Result<&[Sample]> {
        match name {
            "train" => Ok(&self.train),
            "val" => Ok(&self.val),
            "test" => Ok(&self.test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}
