//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! | field            | encoding                                   |
//! |------------------|--------------------------------------------|
//! | magic            | 4 bytes `CGEG`                             |
//! | version          | u32                                        |
//! | config text      | u32 byte length, UTF-8 `key = value` lines |
//! | parameters       | u64 count, then `count` f64                |
//! | optimizer        | u64 step, u64 length, `m` f64s, `v` f64s   |
//! | iteration        | u64                                        |
//! | RNG state        | 32-byte seed, u64 stream, u128 word position |
//!
//! The config text holds the model configuration (including the `model`
//! kind tag) plus any run metadata stored under other keys.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::model::{build_model, GraphModel, ModelConfig};
use crate::training::optim::Adam;

pub const MAGIC: &[u8; 4] = b"CGEG";
pub const VERSION: u32 = 1;

/// Exact position of a ChaCha8 stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    /// Run metadata kept alongside the model keys.
    pub metadata: KeyValues,
    pub params: Vec<f64>,
    pub optimizer: Adam,
    pub iteration: u64,
    pub rng: RngState,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> std::result::Result<usize, String> {
        let n = self.u64()?;
        let n = usize::try_from(n).map_err(|_| format!("length {n} too large"))?;
        if n > (self.bytes.len() - self.pos) / 8 {
            return Err(format!("length {n} exceeds remaining data"));
        }
        Ok(n)
    }

    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

impl Checkpoint {
    /// Header text: model keys overlaid on the metadata.
    fn header(&self) -> String {
        let mut kv = self.metadata.clone();
        kv.merge(&self.config.to_kv());
        kv.to_text()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = self.header();
        let mut out = Vec::with_capacity(64 + header.len() + 24 * self.params.len());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, header.len() as u32);
        out.extend_from_slice(header.as_bytes());
        put_u64(&mut out, self.params.len() as u64);
        put_f64s(&mut out, &self.params);
        put_u64(&mut out, self.optimizer.step);
        put_u64(&mut out, self.optimizer.m.len() as u64);
        put_f64s(&mut out, &self.optimizer.m);
        put_f64s(&mut out, &self.optimizer.v);
        put_u64(&mut out, self.iteration);
        out.extend_from_slice(&self.rng.seed);
        put_u64(&mut out, self.rng.stream);
        out.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err("not a checkpoint (bad magic)".into());
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("unsupported checkpoint version {version}"));
        }
        let hlen = r.u32()? as usize;
        let header = std::str::from_utf8(r.take(hlen)?).map_err(|e| format!("header: {e}"))?;
        let kv = KeyValues::parse(header).map_err(|e| e.to_string())?;
        let config = ModelConfig::from_kv(&kv).map_err(|e| e.to_string())?;
        let model_keys = config.to_kv();
        let mut metadata = KeyValues::new();
        for key in kv.keys().filter(|k| !model_keys.contains(k)) {
            metadata.set(key, kv.get(key).expect("key present"));
        }
        let count = r.len()?;
        let params = r.f64s(count)?;
        let step = r.u64()?;
        let mlen = r.len()?;
        let m = r.f64s(mlen)?;
        let v = r.f64s(mlen)?;
        let iteration = r.u64()?;
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(Self {
            config,
            metadata,
            params,
            optimizer: Adam { step, m, v },
            iteration,
            rng: RngState { seed, stream, word_pos },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|msg| Error::format(path, msg))
    }

    /// Rebuilds the model and loads the stored parameters.
    pub fn model(&self) -> Result<Box<dyn GraphModel>> {
        let mut model = build_model(&self.config, 0)?;
        model.params_mut().load(&self.params)?;
        Ok(model)
    }
}
