//! Named parameter arrays and the glue that binds them into a [`Graph`].

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Ordered collection of named parameters. Insertion order is the
/// canonical order for optimizers, checkpoints and gradient checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param { name, value, trainable });
        ParamId(self.params.len() - 1)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    /// Replaces values from another store with identical names and shapes.
    pub fn load_values(&mut self, other: &[Param]) -> Result<()> {
        if other.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter arrays, found {}",
                self.params.len(),
                other.len()
            )));
        }
        for (mine, theirs) in self.params.iter_mut().zip(other) {
            if mine.name != theirs.name || mine.value.shape() != theirs.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} {:?} does not match {} {:?}",
                    mine.name,
                    mine.value.shape(),
                    theirs.name,
                    theirs.value.shape()
                )));
            }
            mine.value = theirs.value.clone();
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[Param] {
        &self.params
    }

    pub fn norms(&self) -> String {
        self.params
            .iter()
            .map(|p| format!("{}={:.4e}", p.name, p.value.norm()))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Gradients aligned with a [`ParamStore`]; `None` where nothing flowed.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn empty(n: usize) -> Self {
        Gradients { grads: vec![None; n] }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    pub fn set(&mut self, id: ParamId, grad: Tensor) {
        self.grads[id.0] = Some(grad);
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            match (mine, theirs) {
                (Some(m), Some(t)) => m.add_assign(t),
                (slot @ None, Some(t)) => *slot = Some(t.clone()),
                _ => {}
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.scale_in_place(factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().flatten().all(Tensor::all_finite)
    }
}

/// Lazily registers parameters as borrowed leaves of a graph, once each.
pub struct Binder {
    vars: Vec<Option<Var>>,
}

impl Binder {
    pub fn new(store: &ParamStore) -> Self {
        Binder { vars: vec![None; store.len()] }
    }

    pub fn bind<'a>(&mut self, g: &mut Graph<'a>, store: &'a ParamStore, id: ParamId) -> Var {
        if let Some(v) = self.vars[id.0] {
            return v;
        }
        let p = store.get(id);
        let v = g.borrowed(&p.value, p.trainable);
        self.vars[id.0] = Some(v);
        v
    }

    /// Reads parameter gradients out of a graph after `backward`.
    pub fn gradients(&self, g: &Graph<'_>) -> Gradients {
        let grads = self
            .vars
            .iter()
            .map(|v| v.and_then(|v| if g.requires_grad(v) { g.grad(v).cloned() } else { None }))
            .collect();
        Gradients { grads }
    }
}

/// Uniform samples in `[-bound, bound]`.
pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::from_vec(rows, cols, data).expect("shape by construction")
}

/// Glorot-uniform initialization for a `rows × cols` weight.
pub fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rng, rows, cols, bound)
}

/// One forward/backward pass: a fresh graph plus lazily bound parameters.
pub struct Forward<'a> {
    pub g: Graph<'a>,
    store: &'a ParamStore,
    binder: Binder,
}

impl<'a> Forward<'a> {
    pub fn new(store: &'a ParamStore, seed: u64) -> Self {
        Forward { g: Graph::new(seed), store, binder: Binder::new(store) }
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.binder.bind(&mut self.g, self.store, id)
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn gradients(&self) -> Gradients {
        self.binder.gradients(&self.g)
    }
}
