use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Result, Tape, Tensor, TensorError, Var};

/// Ordered, named parameter tensors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tensor; names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter '{name}'");
        self.names.push(name);
        self.values.push(t);
    }

    /// Glorot-uniform `rows × cols` matrix.
    pub fn insert_glorot(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut impl Rng) {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        self.insert(name, Tensor::from_fn(rows, cols, |_, _| rng.gen_range(-a..a)));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Records every tensor on `tape` as a trainable leaf or a constant.
    pub fn bind(&self, tape: &Tape, trainable: bool) -> Bound {
        let vars = self
            .values
            .iter()
            .map(|t| {
                if trainable {
                    tape.param(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            })
            .collect();
        Bound {
            index: self.names.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect(),
            vars,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            tensors: self.names.iter().cloned().zip(self.values.iter().cloned()).collect(),
        }
    }

    /// Rebuilds a store with the given names (in that order) from a checkpoint.
    pub fn from_checkpoint(ck: &Checkpoint, names: &[String]) -> Result<Self> {
        let mut s = Self::new();
        for n in names {
            let t = ck.tensors.get(n).ok_or_else(|| TensorError::Missing(n.clone()))?;
            s.insert(n.clone(), t.clone());
        }
        Ok(s)
    }
}

/// A [`ParamStore`] recorded on a tape.
#[derive(Debug, Clone)]
pub struct Bound {
    index: HashMap<String, usize>,
    vars: Vec<Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Var {
        match self.index.get(name) {
            Some(&i) => self.vars[i],
            None => panic!("parameter '{name}' not bound"),
        }
    }

    pub fn try_get(&self, name: &str) -> Option<Var> {
        self.index.get(name).map(|&i| self.vars[i])
    }

    /// Substitutes the var bound to `name`, e.g. to differentiate with respect
    /// to one tensor while the rest stay constant.
    pub fn set(&mut self, name: &str, v: Var) {
        match self.index.get(name) {
            Some(&i) => self.vars[i] = v,
            None => panic!("parameter '{name}' not bound"),
        }
    }

    /// Vars in store order, matching [`ParamStore::values`].
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Named tensors serialized as JSON; doubles round-trip bit-exactly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tensors serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s).map_err(|e| TensorError::Format(e.to_string()))?;
        for (name, t) in &ck.tensors {
            Tensor::new(t.rows(), t.cols(), t.data().to_vec())
                .map_err(|e| TensorError::Format(format!("{name}: {e}")))?;
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> std::result::Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        Ok(Self::from_json(&std::fs::read_to_string(path)?)?)
    }
}
