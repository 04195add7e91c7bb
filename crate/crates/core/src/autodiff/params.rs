//! Named parameter tensors with gradient slots and Adam state.

use std::collections::BTreeMap;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GPRM";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: Tensor,
    grad: Tensor,
    m: Tensor,
    v: Tensor,
}

impl Entry {
    fn new(value: Tensor) -> Self {
        let [r, c] = value.shape();
        Self {
            value,
            grad: Tensor::zeros(r, c),
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, Entry>,
    step: u64,
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.entries.insert(name.into(), Entry::new(value));
    }

    /// Uniform Glorot initialisation in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn insert_glorot(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        let t = Tensor::from_vec(fan_in, fan_out, data).expect("sized by construction");
        self.insert(name, t);
    }

    pub fn insert_zeros(&mut self, name: &str, rows: usize, cols: usize) {
        self.insert(name, Tensor::zeros(rows, cols));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn value(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name).map(|e| &e.value)
    }

    pub fn value_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name).map(|e| &mut e.value)
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name).map(|e| &e.grad)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn n_scalars(&self) -> usize {
        self.entries.values().map(|e| e.value.len()).sum()
    }

    pub fn add_grad(&mut self, name: &str, g: &Tensor) -> Result<()> {
        let e = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::invalid(format!("unknown parameter `{name}`")))?;
        if !e.grad.same_shape(g) {
            return Err(Error::shape(format!(
                "gradient {:?} for parameter `{name}` of shape {:?}",
                g.shape(),
                e.value.shape()
            )));
        }
        e.grad.add_assign(g);
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for e in self.entries.values_mut() {
            e.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// One Adam step with bias correction and decoupled weight decay
    /// (`θ ← θ - lr·wd·θ`, then the Adam delta). Gradients are zeroed
    /// afterwards.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        if cfg.lr.is_nan() || cfg.lr <= 0.0 {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", cfg.lr)));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for e in self.entries.values_mut() {
            let n = e.value.len();
            let (value, grad) = (e.value.data_mut(), e.grad.data());
            let (m, v) = (e.m.data_mut(), e.v.data_mut());
            for k in 0..n {
                let g = grad[k];
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                value[k] -= cfg.lr * cfg.weight_decay * value[k];
                value[k] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        self.zero_grads();
        Ok(())
    }

    /// Copies parameter values from `other`, leaving optimiser state alone.
    pub fn copy_values_from(&mut self, other: &ParamStore) {
        for (name, e) in &mut self.entries {
            if let Some(o) = other.entries.get(name) {
                e.value = o.value.clone();
            }
        }
    }

    /// Values only, with fresh gradient and moment slots.
    pub fn values_only(&self) -> ParamStore {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|(k, e)| (k.clone(), Entry::new(e.value.clone())))
                .collect(),
            step: 0,
        }
    }

    /// Values of the parameters whose name starts with `prefix`.
    pub fn with_prefix(&self, prefix: &str) -> ParamStore {
        ParamStore {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| k.starts_with(prefix))
                .map(|(k, e)| (k.clone(), Entry::new(e.value.clone())))
                .collect(),
            step: 0,
        }
    }

    /// Adds every parameter of `other`; names must not collide.
    pub fn merge(&mut self, other: &ParamStore) -> Result<()> {
        for (k, e) in &other.entries {
            if self.entries.contains_key(k) {
                return Err(Error::invalid(format!("parameter `{k}` defined twice")));
            }
            self.entries.insert(k.clone(), Entry::new(e.value.clone()));
        }
        Ok(())
    }

    /// Binary encoding: magic, version, count, then per tensor the name,
    /// shape and little-endian `f64` payload, followed by a SHA-256 of all
    /// preceding bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, e) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(e.value.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(e.value.cols() as u32).to_le_bytes());
            for x in e.value.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 + 32 {
            return Err(Error::Format("parameter file truncated".into()));
        }
        let (body, sum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != sum {
            return Err(Error::Format("parameter checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a parameter file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!(
                "parameter file version {version}, expected {VERSION}"
            )));
        }
        let count = r.u32()?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
            }
            store.insert(name, Tensor::from_vec(rows, cols, data)?);
        }
        if r.pos != body.len() {
            return Err(Error::Format("trailing bytes in parameter file".into()));
        }
        Ok(store)
    }
}

pub(crate) struct Reader<'a> {
    pub(crate) buf: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("unexpected end of data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
