//! Flat parameter storage shared by every model.

use rand::Rng;

use crate::error::{Error, Result};

/// Index of a parameter block inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// All trainable values of a model in one contiguous `Vec<f64>`.
///
/// Blocks are registered once at construction; their order fixes the flat
/// layout used by the optimizer and by checkpoints.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    data: Vec<f64>,
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a block initialised from `Uniform(−bound, bound)`.
    pub fn add_uniform<R: Rng + ?Sized>(&mut self, name: &str, len: usize, bound: f64, rng: &mut R) -> ParamId {
        let values = (0..len)
            .map(|_| if bound > 0.0 { rng.gen_range(-bound..bound) } else { 0.0 })
            .collect();
        self.add(name, values)
    }

    pub fn add_constant(&mut self, name: &str, len: usize, value: f64) -> ParamId {
        self.add(name, vec![value; len])
    }

    pub fn add(&mut self, name: &str, values: Vec<f64>) -> ParamId {
        let id = ParamId(self.entries.len());
        self.entries.push(ParamEntry {
            name: name.to_string(),
            offset: self.data.len(),
            len: values.len(),
        });
        self.data.extend(values);
        id
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn entry(&self, id: ParamId) -> &ParamEntry {
        &self.entries[id.0]
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn slice(&self, id: ParamId) -> &[f64] {
        let e = &self.entries[id.0];
        &self.data[e.offset..e.offset + e.len]
    }

    pub fn slice_mut(&mut self, id: ParamId) -> &mut [f64] {
        let e = &self.entries[id.0];
        &mut self.data[e.offset..e.offset + e.len]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Replaces all values; the length must match.
    pub fn load(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.data.len() {
            return Err(Error::Shape(format!(
                "parameter vector has {} values, model expects {}",
                values.len(),
                self.data.len()
            )));
        }
        self.data.copy_from_slice(values);
        Ok(())
    }
}
