use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::force::{check_lambda, gate_and_mask, mask_for_gate, Gate};
use crate::graph::Graph;
use crate::paths::PathTable;
use crate::ties::TieMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_dim: usize,
    /// Widths of the aggregation layers; the output layer comes after.
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub lambda: f64,
    pub hops: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if self.output_dim < 2 {
            return Err(Error::invalid(format!("latent dimension must be at least 2, got {}", self.output_dim)));
        }
        if self.output_dim >= self.input_dim {
            return Err(Error::invalid(format!(
                "latent dimension {} must be below the feature dimension {}",
                self.output_dim, self.input_dim
            )));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        if self.hops == 0 {
            return Err(Error::invalid("hop radius must be at least 1"));
        }
        Ok(())
    }

    fn n_layers(&self) -> usize {
        self.hidden_dims.len()
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }
}

/// Fresh encoder parameters: `enc.w{p}`, `enc.b{p}` for every aggregation
/// layer and `enc.w_out`, `enc.b_out`.
pub fn init_encoder(cfg: &EncoderConfig, rng: &mut impl Rng) -> Result<ParamStore> {
    cfg.validate()?;
    let mut store = ParamStore::new();
    let dims = cfg.layer_dims();
    for (p, &(fan_in, fan_out)) in dims.iter().enumerate() {
        let (w, b) = layer_names(p, cfg.n_layers());
        store.insert_glorot(&w, fan_in, fan_out, rng);
        store.insert_zeros(&b, 1, fan_out);
    }
    Ok(store)
}

fn layer_names(p: usize, n_layers: usize) -> (String, String) {
    if p == n_layers {
        ("enc.w_out".into(), "enc.b_out".into())
    } else {
        (format!("enc.w{}", p + 1), format!("enc.b{}", p + 1))
    }
}

/// Embedding rows plus the per-layer signals and gates that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub values: Tensor,
    /// `z⁰ = X`, then the output of every aggregation layer.
    pub layers: Vec<Tensor>,
    /// Gate used by each aggregation layer.
    pub gates: Vec<Gate>,
}

/// Kernel on the rows of `z`: rescaled cosine similarity times the tie,
/// wherever the gate is open. The gate is computed from the current values
/// (or taken from `frozen`) and enters the tape as a constant mask.
pub(crate) fn gated_kernel(
    tape: &mut Tape,
    z: Var,
    ties: &TieMatrix,
    paths: &PathTable,
    lambda: f64,
    frozen: Option<&Gate>,
) -> Result<(Var, Gate)> {
    let sim = tape.cosine_sim(z)?;
    let (gate, mask) = match frozen {
        Some(g) => (g.clone(), mask_for_gate(g, ties)),
        None => gate_and_mask(tape.value(sim), ties, paths, lambda),
    };
    let mask = tape.constant(mask)?;
    Ok((tape.mul(sim, mask)?, gate))
}

pub(crate) struct Encoded {
    pub y: Var,
    pub layers: Vec<Var>,
    pub gates: Vec<Gate>,
}

fn check_inputs(
    params: &ParamStore,
    x: &Tensor,
    ties: &TieMatrix,
    paths: &PathTable,
    cfg: &EncoderConfig,
) -> Result<()> {
    cfg.validate()?;
    if x.cols() != cfg.input_dim {
        return Err(Error::shape(format!(
            "encoder expects {} input features, graph has {}",
            cfg.input_dim,
            x.cols()
        )));
    }
    if ties.n() != x.rows() || paths.n_vertices() != x.rows() {
        return Err(Error::shape("ties and paths must match the graph"));
    }
    if paths.max_hops() != cfg.hops {
        return Err(Error::shape(format!(
            "encoder configured for hop radius {}, paths use {}",
            cfg.hops,
            paths.max_hops()
        )));
    }
    for (p, &(fan_in, fan_out)) in cfg.layer_dims().iter().enumerate() {
        let (w, b) = layer_names(p, cfg.n_layers());
        match (params.value(&w), params.value(&b)) {
            (Some(wt), Some(bt)) if wt.shape() == [fan_in, fan_out] && bt.shape() == [1, fan_out] => {}
            _ => return Err(Error::shape(format!("parameters `{w}`/`{b}` missing or misshapen"))),
        }
    }
    Ok(())
}

pub(crate) fn encode(
    tape: &mut Tape,
    params: &ParamStore,
    x: &Tensor,
    ties: &TieMatrix,
    paths: &PathTable,
    cfg: &EncoderConfig,
    frozen: Option<&[Gate]>,
) -> Result<Encoded> {
    check_inputs(params, x, ties, paths, cfg)?;
    if let Some(f) = frozen {
        if f.len() != cfg.n_layers() || f.iter().any(|g| g.n() != x.rows()) {
            return Err(Error::shape("frozen gates do not match the encoder"));
        }
    }
    let mut z = tape.constant(x.clone())?;
    let mut layers = vec![z];
    let mut gates = Vec::with_capacity(cfg.n_layers());
    for p in 0..cfg.n_layers() {
        let (k, gate) = gated_kernel(tape, z, ties, paths, cfg.lambda, frozen.map(|f| &f[p]))?;
        gates.push(gate);
        let pulled = tape.propagate(k, z)?;
        let a = tape.add(z, pulled)?;
        z = dense(tape, params, a, p, cfg.n_layers())?;
        z = tape.relu(z)?;
        layers.push(z);
    }
    let out = dense(tape, params, z, cfg.n_layers(), cfg.n_layers())?;
    let y = tape.tanh(out)?;
    Ok(Encoded { y, layers, gates })
}

fn dense(tape: &mut Tape, params: &ParamStore, a: Var, p: usize, n_layers: usize) -> Result<Var> {
    let (w, b) = layer_names(p, n_layers);
    let w = tape.param(params, &w)?;
    let b = tape.param(params, &b)?;
    let h = tape.matmul(a, w)?;
    tape.add_row(h, b)
}

/// Embeds every vertex of `g`.
pub fn encoder_forward(
    params: &ParamStore,
    g: &Graph,
    ties: &TieMatrix,
    paths: &PathTable,
    cfg: &EncoderConfig,
) -> Result<Embedding> {
    let mut tape = Tape::new();
    let enc = encode(&mut tape, params, g.features(), ties, paths, cfg, None)?;
    Ok(Embedding {
        values: tape.value(enc.y).clone(),
        layers: enc.layers.iter().map(|&v| tape.value(v).clone()).collect(),
        gates: enc.gates,
    })
}

/// The same layer stack applied to each row on its own, with no
/// aggregation at all.
pub fn encoder_forward_isolated(params: &ParamStore, x: &Tensor, cfg: &EncoderConfig) -> Result<Tensor> {
    let mut tape = Tape::new();
    let mut z = tape.constant(x.clone())?;
    for p in 0..cfg.n_layers() {
        z = dense(&mut tape, params, z, p, cfg.n_layers())?;
        z = tape.relu(z)?;
    }
    let out = dense(&mut tape, params, z, cfg.n_layers(), cfg.n_layers())?;
    let y = tape.tanh(out)?;
    Ok(tape.value(y).clone())
}
