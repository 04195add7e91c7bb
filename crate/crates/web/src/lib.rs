//! Browser bindings: a stochastic block model graph with its ties, the
//! receptive field of a vertex under a threshold, and a small training run
//! with a two-dimensional latent space.

use serde_json::json;
use wasm_bindgen::prelude::*;

use gravity::{
    all_pairs_paths, force_kernel, generate_sbm, predict_graph, receptive_field, tie_matrix_exact, train_with, Graph,
    PathTable, SbmConfig, TieMatrix, TrainConfig,
};

const HOPS: usize = 2;

fn js_err(e: gravity::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    graph: Graph,
    paths: PathTable,
    ties: TieMatrix,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, blocks: usize, per_block: usize, p_in: f64, p_out: f64) -> Result<Demo, JsError> {
        let graph = generate_sbm(&SbmConfig {
            blocks,
            per_block,
            p_in,
            p_out,
            seed: u64::from(seed),
            ..Default::default()
        })
        .map_err(js_err)?;
        let paths = all_pairs_paths(&graph, HOPS).map_err(js_err)?;
        let ties = tie_matrix_exact(&graph, &paths);
        Ok(Demo { graph, paths, ties })
    }

    pub fn n(&self) -> usize {
        self.graph.n_vertices()
    }

    /// Flat `[i0, j0, i1, j1, ...]`.
    pub fn edges(&self) -> Vec<u32> {
        self.graph.edges().iter().flat_map(|&(i, j, _)| [i as u32, j as u32]).collect()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.graph.labels().iter().map(|l| l.map_or(u32::MAX, |c| c as u32)).collect()
    }

    /// Row-major `N × N` tie matrix.
    pub fn ties(&self) -> Vec<f64> {
        self.ties.values().data().to_vec()
    }

    /// Vertices whose attribute force on `i` survives threshold `lambda`.
    pub fn receptive_field(&self, i: usize, lambda: f64) -> Result<Vec<u32>, JsError> {
        if i >= self.n() {
            return Err(JsError::new(&format!("vertex {i} out of range")));
        }
        let k = force_kernel(self.graph.features(), &self.ties, &self.paths, lambda).map_err(js_err)?;
        Ok(receptive_field(&k, i).into_iter().map(|v| v as u32).collect())
    }

    /// Trains with a 2-D latent space and returns JSON with per-epoch
    /// losses, embedding frames every `frame_every` epochs, and accuracies.
    pub fn train(&self, lambda: f64, epochs: usize, frame_every: usize) -> Result<String, JsError> {
        let mut cfg = TrainConfig {
            lambda,
            latent_dim: 2,
            max_epochs: epochs,
            patience: epochs,
            ..Default::default()
        };
        cfg.set("hops", &HOPS.to_string()).map_err(js_err)?;
        cfg.set("silhouette_out", "nearest").map_err(js_err)?;
        let every = frame_every.max(1);
        let mut frames = Vec::new();
        let mut losses = Vec::new();
        let model = train_with(&self.graph, &cfg, |rec, y| {
            losses.push(json!([rec.total, rec.val_acc]));
            if rec.epoch % every == 0 || rec.epoch == 1 {
                frames.push(json!({ "epoch": rec.epoch, "y": y.data() }));
            }
        })
        .map_err(js_err)?;
        let preds = predict_graph(&model, &self.graph).map_err(js_err)?;
        let test = &model.split.test;
        let correct = test.iter().filter(|&&v| self.graph.label(v) == Some(preds[v].class)).count();
        let out = json!({
            "losses": losses,
            "frames": frames,
            "best_epoch": model.best_epoch,
            "test_acc": correct as f64 / test.len().max(1) as f64,
            "predicted": preds.iter().map(|p| p.class).collect::<Vec<_>>(),
        });
        Ok(out.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_graph_and_field() {
        let d = Demo::new(0, 3, 10, 0.4, 0.02).map_err(|_| ()).unwrap();
        assert_eq!(d.n(), 30);
        assert_eq!(d.ties().len(), 900);
        let wide = d.receptive_field(0, 0.0).map_err(|_| ()).unwrap();
        let narrow = d.receptive_field(0, 0.9).map_err(|_| ()).unwrap();
        assert!(narrow.iter().all(|v| wide.contains(v)));
    }

    #[test]
    fn short_training_run_reports_frames() {
        let d = Demo::new(1, 3, 10, 0.4, 0.02).map_err(|_| ()).unwrap();
        let text = d.train(0.3, 12, 5).map_err(|_| ()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["losses"].as_array().unwrap().len(), 12);
        // epochs 1, 5, 10
        assert_eq!(v["frames"].as_array().unwrap().len(), 3);
        assert_eq!(v["frames"][0]["y"].as_array().unwrap().len(), 60);
    }
}
