//! Named parameter storage, the canonical parameter layout, node feature
//! vocabularies and the binding of parameters onto a tape.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, Result};
use crate::graph::{HeteroGraph, NodeRef, Relation};
use crate::numerics::{Matrix, SparseRow, Tape, Tensor};
use crate::rng::stable_hash;

/// Seed for hashing ids that are missing from the vocabulary.
const FEATURE_HASH_SEED: u64 = 0x5eed_f00d;

/// Learnable matrices addressed by unique name, kept in layout order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    names: Vec<String>,
    values: Vec<Matrix>,
    index: HashMap<String, usize>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `name`, or replaces its value if it already exists.
    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) {
        let name = name.into();
        if let Some(&i) = self.index.get(&name) {
            self.values[i] = value;
            return;
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<&Matrix> {
        Ok(&self.values[self.id(name)?])
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Matrix> {
        let i = self.id(name)?;
        Ok(&mut self.values[i])
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> + '_ {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter())
    }

    pub fn entry_count(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }
}

pub fn ffn_hidden(node_type: &str) -> String {
    format!("ffn.{node_type}.hidden")
}

pub fn ffn_out(node_type: &str) -> String {
    format!("ffn.{node_type}.out")
}

pub fn rhmp_self(hop: usize) -> String {
    format!("rhmp.w0.{hop}")
}

pub fn rhmp_relation(relation: Relation, hop: usize) -> String {
    format!("rhmp.{relation}.{hop}")
}

pub fn ahmp_self(hop: usize) -> String {
    format!("ahmp.w0.{hop}")
}

pub fn ahmp_query(hop: usize) -> String {
    format!("ahmp.q.{hop}")
}

pub const AHMP_SHARED_QUERY: &str = "ahmp.q.shared";
pub const SESSION_PROJECTION: &str = "attn.w_prime";
pub const LSTM_GATES: [&str; 4] = ["input", "forget", "cell", "output"];

pub fn lstm_param(gate: &str, part: &str) -> String {
    format!("lstm.{gate}.{part}")
}

/// Every parameter name with its shape, in canonical order.
pub fn layout(cfg: &ModelConfig, vocab: &Vocabulary) -> Vec<(String, (usize, usize))> {
    let d = cfg.dim;
    let d2 = 2 * d;
    let mut out = Vec::new();
    for ty in vocab.type_names() {
        out.push((ffn_hidden(ty), (vocab.input_width(ty), cfg.hidden)));
        out.push((ffn_out(ty), (cfg.hidden, d)));
    }
    for hop in 1..=cfg.layers {
        out.push((rhmp_self(hop), (d, d)));
        for r in Relation::ALL {
            out.push((rhmp_relation(r, hop), (d, d)));
        }
    }
    for hop in 1..=cfg.layers {
        out.push((ahmp_self(hop), (d, d)));
        out.push((ahmp_query(hop), (1, d2)));
    }
    out.push((AHMP_SHARED_QUERY.to_string(), (1, d2)));
    out.push((SESSION_PROJECTION.to_string(), (d2, d2)));
    for gate in LSTM_GATES {
        out.push((lstm_param(gate, "w"), (d2, d2)));
        out.push((lstm_param(gate, "u"), (d2, d2)));
        out.push((lstm_param(gate, "b"), (1, d2)));
    }
    out
}

/// Per-node-type id vocabularies. Known ids are one-hot encoded; unknown
/// ids hash into `hash_buckets` extra columns after the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    types: BTreeMap<String, Vec<String>>,
    hash_buckets: usize,
    index: HashMap<String, HashMap<String, usize>>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    types: BTreeMap<String, Vec<String>>,
    hash_buckets: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Self::new(r.types, r.hash_buckets)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            types: v.types,
            hash_buckets: v.hash_buckets,
        }
    }
}

impl Vocabulary {
    pub fn new(mut types: BTreeMap<String, Vec<String>>, hash_buckets: usize) -> Self {
        let mut index = HashMap::new();
        for (ty, ids) in types.iter_mut() {
            ids.sort();
            ids.dedup();
            index.insert(
                ty.clone(),
                ids.iter()
                    .enumerate()
                    .map(|(i, id)| (id.clone(), i))
                    .collect(),
            );
        }
        Self {
            types,
            hash_buckets,
            index,
        }
    }

    /// One vocabulary entry per node of `g`.
    pub fn from_graph(g: &HeteroGraph, hash_buckets: usize) -> Self {
        let mut types: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (_, n) in g.nodes() {
            types
                .entry(n.node_type.name().to_string())
                .or_default()
                .push(n.id.clone());
        }
        Self::new(types, hash_buckets)
    }

    pub fn type_names(&self) -> impl Iterator<Item = &str> + '_ {
        self.types.keys().map(String::as_str)
    }

    pub fn hash_buckets(&self) -> usize {
        self.hash_buckets
    }

    pub fn input_width(&self, node_type: &str) -> usize {
        self.types.get(node_type).map_or(0, Vec::len) + self.hash_buckets
    }

    pub fn contains(&self, node: &NodeRef) -> bool {
        self.index
            .get(node.node_type.name())
            .is_some_and(|m| m.contains_key(&node.id))
    }

    /// Sparse raw feature of `node`.
    pub fn feature(&self, node: &NodeRef) -> Result<SparseRow> {
        let ty = node.node_type.name();
        let known = self
            .index
            .get(ty)
            .ok_or_else(|| ModelError::UnknownNodeType(ty.to_string()))?;
        if let Some(&i) = known.get(&node.id) {
            return Ok(vec![(i, 1.0)]);
        }
        if self.hash_buckets == 0 {
            return Ok(Vec::new());
        }
        let bucket = stable_hash(FEATURE_HASH_SEED, &node.id) % self.hash_buckets as u64;
        Ok(vec![(known.len() + bucket as usize, 1.0)])
    }
}

/// Parameters bound lazily onto one tape. Only parameters actually used in
/// the forward pass are copied onto the tape.
pub struct Bound<'p> {
    pub tape: Tape,
    params: &'p Params,
    handles: Vec<Option<Tensor>>,
    trainable: bool,
}

impl<'p> Bound<'p> {
    /// `trainable = false` binds parameters as constants (inference).
    pub fn new(params: &'p Params, trainable: bool) -> Self {
        Self {
            tape: Tape::new(),
            params,
            handles: vec![None; params.len()],
            trainable,
        }
    }

    pub fn params(&self) -> &'p Params {
        self.params
    }

    pub fn p(&mut self, name: &str) -> Result<Tensor> {
        let id = self.params.id(name)?;
        if let Some(t) = self.handles[id] {
            return Ok(t);
        }
        let value = self.params.values()[id].clone();
        let t = if self.trainable {
            self.tape.param(value)
        } else {
            self.tape.constant(value)
        };
        self.handles[id] = Some(t);
        Ok(t)
    }

    /// Gradient of every parameter after `tape.backward`, `None` for unused ones.
    pub fn grads(&self) -> Vec<Option<Matrix>> {
        self.handles
            .iter()
            .map(|h| h.and_then(|t| self.tape.grad(t).cloned()))
            .collect()
    }
}
