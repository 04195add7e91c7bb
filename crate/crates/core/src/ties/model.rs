//! Inductive tie approximator.
//!
//! A pair `(i, j)` is described by the z-normalised structural embeddings of
//! both endpoints and their hop distance over the radius. A two-layer scorer
//! with a ReLU hidden layer and logistic output is fitted to exact ties by
//! full-batch Adam on the mean squared error. Nothing in the input refers to
//! vertex identity, so a fitted model applies to any graph.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{structural_matrix, STRUCTURAL_DIM};
use super::TieMatrix;
use crate::autodiff::{AdamConfig, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::paths::PathTable;

const FORMAT: &str = "gravity-tie-model";
const VERSION: u32 = 1;

/// Width of a pair descriptor: two structural embeddings and the scaled hop
/// distance.
pub const PAIR_DIM: usize = 2 * STRUCTURAL_DIM + 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TieModelConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TieModelConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 2000,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TieModel {
    hops: usize,
    mean: [f64; STRUCTURAL_DIM],
    std: [f64; STRUCTURAL_DIM],
    params: ParamStore,
    loss_history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StoredTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Stored {
    format: String,
    version: u32,
    hops: usize,
    mean: Vec<f64>,
    std: Vec<f64>,
    tensors: BTreeMap<String, StoredTensor>,
}

impl TieModel {
    /// Fits the scorer to `truth` over every ordered pair reachable in
    /// `paths`.
    pub fn train(g: &Graph, truth: &TieMatrix, paths: &PathTable, cfg: &TieModelConfig) -> Result<Self> {
        if truth.n() != g.n_vertices() || paths.n_vertices() != g.n_vertices() {
            return Err(Error::shape("ties and paths must describe the training graph"));
        }
        if cfg.hidden == 0 {
            return Err(Error::invalid("tie model hidden width must be positive"));
        }
        let pairs = reachable_pairs(paths);
        if pairs.is_empty() {
            return Err(Error::NoReachablePairs);
        }

        let structural = structural_matrix(g);
        let (mean, std) = column_stats(&structural);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = ParamStore::new();
        params.insert_glorot("w1", PAIR_DIM, cfg.hidden, &mut rng);
        params.insert_zeros("b1", 1, cfg.hidden);
        params.insert_glorot("w2", cfg.hidden, 1, &mut rng);
        params.insert_zeros("b2", 1, 1);
        let mut model = TieModel {
            hops: paths.max_hops(),
            mean,
            std,
            params,
            loss_history: Vec::with_capacity(cfg.epochs),
        };

        let inputs = model.pair_features(&structural, paths, &pairs);
        let target = Tensor::from_vec(
            pairs.len(),
            1,
            pairs.iter().map(|&(i, j)| truth.get(i, j)).collect(),
        )?;
        let adam = AdamConfig::new(cfg.lr, 0.0);
        let scale = 1.0 / pairs.len() as f64;
        for _ in 0..cfg.epochs {
            let mut tape = Tape::new();
            let x = tape.constant(inputs.clone())?;
            let y = tape.constant(target.clone())?;
            let out = model.score(&mut tape, x)?;
            let diff = tape.sub(out, y)?;
            let sq = tape.mul(diff, diff)?;
            let total = tape.sum(sq)?;
            let loss = tape.scale(total, scale)?;
            model.loss_history.push(tape.value(loss).item());
            tape.backward(loss)?;
            tape.accumulate_into(&mut model.params)?;
            model.params.adam_step(&adam)?;
        }
        model.params = model.params.values_only();
        Ok(model)
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    /// Training MSE after each epoch.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    fn score(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w1 = tape.param(&self.params, "w1")?;
        let b1 = tape.param(&self.params, "b1")?;
        let w2 = tape.param(&self.params, "w2")?;
        let b2 = tape.param(&self.params, "b2")?;
        let h = tape.matmul(x, w1)?;
        let h = tape.add_row(h, b1)?;
        let h = tape.relu(h)?;
        let o = tape.matmul(h, w2)?;
        let o = tape.add_row(o, b2)?;
        tape.sigmoid(o)
    }

    fn pair_features(&self, structural: &Tensor, paths: &PathTable, pairs: &[(usize, usize)]) -> Tensor {
        let mut out = Tensor::zeros(pairs.len(), PAIR_DIM);
        let hops = self.hops as f64;
        for (r, &(i, j)) in pairs.iter().enumerate() {
            let row = out.row_mut(r);
            for k in 0..STRUCTURAL_DIM {
                row[k] = (structural.get(i, k).ln_1p() - self.mean[k]) / self.std[k];
                row[STRUCTURAL_DIM + k] = (structural.get(j, k).ln_1p() - self.mean[k]) / self.std[k];
            }
            row[PAIR_DIM - 1] = paths.hop_distance(i, j).unwrap_or(0) as f64 / hops;
        }
        out
    }

    fn check_paths(&self, g: &Graph, paths: &PathTable) -> Result<()> {
        let w1 = self.params.value("w1").expect("model has w1");
        if w1.rows() != PAIR_DIM {
            return Err(Error::shape(format!(
                "tie model expects {} pair features, feature construction yields {PAIR_DIM}",
                w1.rows()
            )));
        }
        if paths.max_hops() != self.hops {
            return Err(Error::shape(format!(
                "tie model was fitted with hop radius {}, paths use {}",
                self.hops,
                paths.max_hops()
            )));
        }
        if paths.n_vertices() != g.n_vertices() {
            return Err(Error::shape("path table does not match the graph"));
        }
        Ok(())
    }

    fn predict_pairs(&self, g: &Graph, paths: &PathTable, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let structural = structural_matrix(g);
        let inputs = self.pair_features(&structural, paths, pairs);
        let mut tape = Tape::new();
        let x = tape.constant(inputs)?;
        let out = self.score(&mut tape, x)?;
        Ok(tape.value(out).data().to_vec())
    }

    /// Predicted tie of `j` on `i`; 0 when `j` is out of hop range.
    pub fn predict(&self, g: &Graph, paths: &PathTable, i: usize, j: usize) -> Result<f64> {
        self.check_paths(g, paths)?;
        if !paths.reachable(i, j) {
            return Ok(0.0);
        }
        Ok(self.predict_pairs(g, paths, &[(i, j)])?[0])
    }

    /// Predicted ties for every ordered pair.
    pub fn predict_matrix(&self, g: &Graph, paths: &PathTable) -> Result<TieMatrix> {
        self.check_paths(g, paths)?;
        let pairs = reachable_pairs(paths);
        let preds = self.predict_pairs(g, paths, &pairs)?;
        let n = g.n_vertices();
        let mut values = Tensor::zeros(n, n);
        for (&(i, j), p) in pairs.iter().zip(preds) {
            values.set(i, j, p);
        }
        TieMatrix::from_tensor(values)
    }

    pub fn to_json(&self) -> String {
        let tensors = self
            .params
            .names()
            .map(|name| {
                let t = self.params.value(name).expect("listed");
                (
                    name.to_string(),
                    StoredTensor {
                        rows: t.rows(),
                        cols: t.cols(),
                        data: t.data().to_vec(),
                    },
                )
            })
            .collect();
        let stored = Stored {
            format: FORMAT.into(),
            version: VERSION,
            hops: self.hops,
            mean: self.mean.to_vec(),
            std: self.std.to_vec(),
            tensors,
        };
        serde_json::to_string_pretty(&stored).expect("plain data serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let stored: Stored =
            serde_json::from_str(s).map_err(|e| Error::Format(format!("tie model: {e}")))?;
        if stored.format != FORMAT {
            return Err(Error::Format(format!("not a tie model (format `{}`)", stored.format)));
        }
        if stored.version != VERSION {
            return Err(Error::Format(format!(
                "tie model version {}, expected {VERSION}",
                stored.version
            )));
        }
        let arr = |v: Vec<f64>, what: &str| -> Result<[f64; STRUCTURAL_DIM]> {
            v.try_into()
                .map_err(|_| Error::Format(format!("tie model {what} has the wrong length")))
        };
        let mut params = ParamStore::new();
        for (name, t) in stored.tensors {
            params.insert(name, Tensor::from_vec(t.rows, t.cols, t.data)?);
        }
        for name in ["w1", "b1", "w2", "b2"] {
            if !params.contains(name) {
                return Err(Error::Format(format!("tie model is missing `{name}`")));
            }
        }
        Ok(TieModel {
            hops: stored.hops,
            mean: arr(stored.mean, "mean")?,
            std: arr(stored.std, "std")?,
            params,
            loss_history: Vec::new(),
        })
    }
}

fn reachable_pairs(paths: &PathTable) -> Vec<(usize, usize)> {
    let n = paths.n_vertices();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if paths.reachable(i, j) {
                out.push((i, j));
            }
        }
    }
    out
}

fn column_stats(x: &Tensor) -> ([f64; STRUCTURAL_DIM], [f64; STRUCTURAL_DIM]) {
    let n = x.rows().max(1) as f64;
    let mut mean = [0.0; STRUCTURAL_DIM];
    let mut std = [1.0; STRUCTURAL_DIM];
    for k in 0..STRUCTURAL_DIM {
        let m = (0..x.rows()).map(|r| x.get(r, k).ln_1p()).sum::<f64>() / n;
        let var = (0..x.rows()).map(|r| (x.get(r, k).ln_1p() - m).powi(2)).sum::<f64>() / n;
        mean[k] = m;
        std[k] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    (mean, std)
}
