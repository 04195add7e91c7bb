//! Joint training loop, early stopping, classification and evaluation.

mod archive;
mod classify;
mod config;
mod split;

pub use classify::{classify, evaluate_inductive, predict_graph, ClassReport, InductiveReport, Prediction, TieContext};
pub use config::{TieSource, TrainConfig, CONFIG_KEYS};
pub use split::{stratified_split, Split};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, ParamStore, Tape, Tensor};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::net::{
    encoder_forward, init_discriminator, init_encoder, objective, DiscriminatorConfig, EncoderConfig, Problem,
};
use crate::numeric::argmax;
use crate::paths::{all_pairs_paths, PathTable};
use crate::ties::{tie_matrix_exact, TieMatrix, TieModel, TieModelConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub enc_loss: f64,
    pub disc_loss: f64,
    pub total: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub input_dim: usize,
    pub n_classes: usize,
    /// Encoder (`enc.*`) and discriminator (`disc.*`) parameters at the best
    /// epoch.
    pub params: ParamStore,
    pub tie_model: Option<TieModel>,
    /// Embeddings of the training vertices, one row each.
    pub reference: Tensor,
    pub reference_labels: Vec<usize>,
    /// Training-graph index of each reference row.
    pub reference_vertices: Vec<usize>,
    /// [`Graph::digest`] of the training graph.
    pub train_digest: String,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub split: Split,
}

impl TrainedModel {
    pub fn encoder_config(&self) -> EncoderConfig {
        self.config.encoder_config(self.input_dim)
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        self.config.discriminator_config(self.n_classes)
    }

    pub fn best_val_acc(&self) -> f64 {
        self.history[self.best_epoch - 1].val_acc
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        if g.feature_dim() != self.input_dim {
            return Err(Error::shape(format!(
                "model expects {} features per vertex, graph has {}",
                self.input_dim,
                g.feature_dim()
            )));
        }
        Ok(())
    }

    /// Ties on `g` from the model's tie source.
    pub fn ties_for(&self, g: &Graph, paths: &PathTable) -> Result<TieMatrix> {
        match (&self.tie_model, self.config.tie_source) {
            (Some(m), TieSource::Learned) => m.predict_matrix(g, paths),
            (None, TieSource::Learned) => Err(Error::Format("learned-tie model without a tie model".into())),
            (_, TieSource::Exact) => Ok(tie_matrix_exact(g, paths)),
        }
    }

    /// Embeds every vertex of `g` with the trained encoder.
    pub fn embed(&self, g: &Graph) -> Result<Tensor> {
        self.check_graph(g)?;
        let paths = all_pairs_paths(g, self.config.hops)?;
        let ties = self.ties_for(g, &paths)?;
        Ok(encoder_forward(&self.params, g, &ties, &paths, &self.encoder_config())?.values)
    }
}

/// Trains on `g` with `cfg`. See [`train_with`].
pub fn train(g: &Graph, cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with(g, cfg, |_, _| {})
}

/// Trains on `g`, calling `on_epoch` with each epoch's record and the
/// embedding produced by that epoch's forward pass.
///
/// Validation accuracy of an epoch is measured on the same forward pass, so
/// it scores the parameters before that epoch's update; those are the ones
/// restored when the epoch turns out best.
pub fn train_with(g: &Graph, cfg: &TrainConfig, mut on_epoch: impl FnMut(&EpochRecord, &Tensor)) -> Result<TrainedModel> {
    cfg.validate()?;
    if !g.is_labeled() {
        return Err(Error::invalid("training needs a labelled graph"));
    }
    let enc_cfg = cfg.encoder_config(g.feature_dim());
    enc_cfg.validate()?;
    let disc_cfg = cfg.discriminator_config(g.n_classes());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let split = stratified_split(g, [cfg.train_frac, cfg.val_frac, cfg.test_frac], &mut rng)?;
    let label = |v: usize| g.label(v).expect("split vertices are labelled");
    let train_labels: Vec<usize> = split.train.iter().map(|&v| label(v)).collect();
    let val_labels: Vec<usize> = split.val.iter().map(|&v| label(v)).collect();

    let paths = all_pairs_paths(g, cfg.hops)?;
    let exact = tie_matrix_exact(g, &paths);
    let (tie_model, ties) = match cfg.tie_source {
        TieSource::Exact => (None, exact),
        TieSource::Learned => {
            let tm_cfg = TieModelConfig {
                hidden: cfg.tie_hidden,
                epochs: cfg.tie_epochs,
                lr: cfg.tie_lr,
                seed: cfg.seed,
            };
            let m = TieModel::train(g, &exact, &paths, &tm_cfg)?;
            let t = m.predict_matrix(g, &paths)?;
            (Some(m), t)
        }
    };

    let mut params = init_encoder(&enc_cfg, &mut rng)?;
    params.merge(&init_discriminator(&disc_cfg, &mut rng)?)?;
    let adam = AdamConfig::new(cfg.lr, cfg.weight_decay);
    let pb = Problem {
        features: g.features(),
        ties: &ties,
        paths: &paths,
        train: &split.train,
        train_labels: &train_labels,
        encoder: &enc_cfg,
        discriminator: &disc_cfg,
        gamma: cfg.gamma,
        silhouette: cfg.silhouette(),
    };

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, ParamStore)> = None;
    for epoch in 1..=cfg.max_epochs {
        let diverged = |e: Error| match e {
            Error::NonFinite(_) => Error::Diverged { epoch },
            other => other,
        };
        let mut tape = Tape::new();
        let obj = objective(&mut tape, &params, &pb, None).map_err(diverged)?;
        let probs = tape.value(obj.probs);
        let correct = split
            .val
            .iter()
            .zip(&val_labels)
            .filter(|&(&v, &l)| argmax(probs.row(v)) == l)
            .count();
        let rec = EpochRecord {
            epoch,
            enc_loss: tape.value(obj.enc_loss).item(),
            disc_loss: tape.value(obj.disc_loss).item(),
            total: tape.value(obj.total).item(),
            val_acc: correct as f64 / split.val.len() as f64,
        };
        on_epoch(&rec, tape.value(obj.embedding));
        if best.as_ref().is_none_or(|(_, acc, _)| rec.val_acc >= *acc) {
            best = Some((epoch, rec.val_acc, params.values_only()));
        }
        history.push(rec);
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if epoch - best_epoch >= cfg.patience {
            break;
        }
        tape.backward(obj.total).map_err(diverged)?;
        tape.accumulate_into(&mut params)?;
        params.adam_step(&adam)?;
        if params.names().any(|n| !params.value(n).is_some_and(Tensor::is_finite)) {
            return Err(Error::Diverged { epoch });
        }
    }

    let (best_epoch, _, best_params) = best.expect("at least one epoch runs");
    let emb = encoder_forward(&best_params, g, &ties, &paths, &enc_cfg)?;
    Ok(TrainedModel {
        config: cfg.clone(),
        input_dim: g.feature_dim(),
        n_classes: g.n_classes(),
        params: best_params,
        tie_model,
        reference: emb.values.select_rows(&split.train),
        reference_labels: train_labels,
        reference_vertices: split.train.clone(),
        train_digest: g.digest(),
        history,
        best_epoch,
        split,
    })
}
