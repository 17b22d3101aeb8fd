//! Named parameter tensors with per-tensor freeze flags.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::autograd::{Mat, Tape, Var};
use crate::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Mat,
    pub frozen: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    tensors: BTreeMap<String, Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Mat, frozen: bool) {
        self.tensors.insert(name.into(), Param { value, frozen });
    }

    pub fn get(&self, name: &str) -> Result<&Mat, ModelError> {
        self.tensors
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| ModelError::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Mat, ModelError> {
        self.tensors
            .get_mut(name)
            .map(|p| &mut p.value)
            .ok_or_else(|| ModelError::UnknownParameter(name.to_string()))
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.tensors.get(name).is_none_or(|p| p.frozen)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn trainable_names(&self) -> Vec<String> {
        self.tensors
            .iter()
            .filter(|(_, p)| !p.frozen)
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// SHA-256 over names, shapes and little-endian bytes of the selected tensors.
    pub fn hash_where(&self, select: impl Fn(&str, &Param) -> bool) -> String {
        let mut h = Sha256::new();
        for (name, p) in self.tensors.iter().filter(|(k, p)| select(k, p)) {
            h.update(name.as_bytes());
            h.update((p.value.nrows() as u64).to_le_bytes());
            h.update((p.value.ncols() as u64).to_le_bytes());
            for x in p.value.iter() {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn frozen_hash(&self) -> String {
        self.hash_where(|_, p| p.frozen)
    }
}

pub(crate) fn normal(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> Mat {
    let dist = Normal::new(0.0, std).expect("finite std");
    Mat::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

/// Parameter leaves bound onto one tape.
pub(crate) struct Binder<'a> {
    store: &'a ParamStore,
    track_grads: bool,
    bound: BTreeMap<String, Var>,
}

impl<'a> Binder<'a> {
    pub fn new(store: &'a ParamStore, track_grads: bool) -> Self {
        Self {
            store,
            track_grads,
            bound: BTreeMap::new(),
        }
    }

    pub fn bind(&mut self, tape: &mut Tape, name: &str) -> Result<Var, ModelError> {
        if let Some(v) = self.bound.get(name) {
            return Ok(*v);
        }
        let value = self.store.get(name)?.clone();
        let var = tape.leaf(value, self.track_grads && !self.store.is_frozen(name));
        self.bound.insert(name.to_string(), var);
        Ok(var)
    }

    pub fn bound(&self) -> &BTreeMap<String, Var> {
        &self.bound
    }
}
