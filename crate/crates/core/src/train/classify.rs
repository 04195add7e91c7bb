use serde::Serialize;

use crate::error::{Error, Result};
use crate::force::similarity;
use crate::graph::Graph;
use crate::net::{discriminator_forward, encoder_forward};
use crate::numeric::{argmax, invariant_sum};
use crate::paths::{all_pairs_paths, PathTable};
use crate::ties::TieMatrix;

use super::TrainedModel;

/// How a query vertex relates to the reference vertices.
pub enum TieContext<'a> {
    /// The query is `vertex` of the training graph; `ties` and `paths` are
    /// the training-graph ones the model was fitted with.
    Training {
        vertex: usize,
        ties: &'a TieMatrix,
        paths: &'a PathTable,
    },
    /// The query lives on another graph: no path reaches the references and
    /// every effective tie is 1.
    Detached,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub class: usize,
    pub probs: Vec<f64>,
    pub attraction: Vec<f64>,
}

/// Attraction of `emb_row` towards each class of the reference set, passed
/// through the discriminator. Reference pairs follow the same λ gate as in
/// training.
pub fn classify(model: &TrainedModel, emb_row: &[f64], ctx: &TieContext) -> Result<Prediction> {
    let k = model.n_classes;
    let lambda = model.config.lambda;
    let mut terms = vec![Vec::new(); k];
    let mut members = vec![0usize; k];
    for (r, &c) in model.reference_labels.iter().enumerate() {
        members[c] += 1;
        let t = match ctx {
            TieContext::Training { vertex, ties, paths } => {
                let u = model.reference_vertices[r];
                if !paths.reachable(*vertex, u) {
                    continue;
                }
                ties.get(*vertex, u)
            }
            TieContext::Detached => 1.0,
        };
        let f = similarity(emb_row, model.reference.row(r))? * t;
        if f >= lambda {
            terms[c].push(f);
        }
    }
    if let Some(c) = members.iter().position(|&m| m == 0) {
        return Err(Error::invalid(format!("reference set has no vertex of class {c}")));
    }
    let attraction: Vec<f64> = terms.iter_mut().map(|t| invariant_sum(t)).collect();
    let probs = discriminator_forward(&model.params, &attraction, &model.discriminator_config())?;
    Ok(Prediction {
        class: argmax(&probs),
        probs,
        attraction,
    })
}

/// Predictions for every vertex of `g`. The training graph itself (same
/// digest) is classified with its own ties; any other graph is detached.
pub fn predict_graph(model: &TrainedModel, g: &Graph) -> Result<Vec<Prediction>> {
    model.check_graph(g)?;
    let paths = all_pairs_paths(g, model.config.hops)?;
    let ties = model.ties_for(g, &paths)?;
    let emb = encoder_forward(&model.params, g, &ties, &paths, &model.encoder_config())?.values;
    let same = g.digest() == model.train_digest;
    (0..g.n_vertices())
        .map(|v| {
            let ctx = if same {
                TieContext::Training {
                    vertex: v,
                    ties: &ties,
                    paths: &paths,
                }
            } else {
                TieContext::Detached
            };
            classify(model, emb.row(v), &ctx)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InductiveReport {
    pub accuracy: f64,
    pub n_scored: usize,
    pub per_class: Vec<ClassReport>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub best_epoch: usize,
}

impl InductiveReport {
    /// Scores `preds` against the labelled vertices among `vertices`.
    pub fn score(labels: &[Option<usize>], preds: &[Prediction], vertices: &[usize], n_classes: usize, best_epoch: usize) -> Result<Self> {
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        let mut n = 0;
        for &v in vertices {
            if let Some(l) = labels[v] {
                if l >= n_classes {
                    return Err(Error::invalid(format!("label {l} beyond the model's {n_classes} classes")));
                }
                confusion[l][preds[v].class] += 1;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::invalid("no labelled vertices to score"));
        }
        let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
        let per_class = (0..n_classes)
            .map(|c| {
                let predicted: usize = (0..n_classes).map(|t| confusion[t][c]).sum();
                let support: usize = confusion[c].iter().sum();
                let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
                ClassReport {
                    class: c,
                    precision: ratio(confusion[c][c], predicted),
                    recall: ratio(confusion[c][c], support),
                    support,
                }
            })
            .collect();
        Ok(Self {
            accuracy: correct as f64 / n as f64,
            n_scored: n,
            per_class,
            confusion,
            best_epoch,
        })
    }
}

/// Classifies every vertex of a labelled graph against the training
/// reference set and scores the result.
pub fn evaluate_inductive(model: &TrainedModel, g_test: &Graph) -> Result<InductiveReport> {
    if !g_test.is_labeled() {
        return Err(Error::invalid("evaluation graph carries no labels"));
    }
    let preds = predict_graph(model, g_test)?;
    let all: Vec<usize> = (0..g_test.n_vertices()).collect();
    InductiveReport::score(g_test.labels(), &preds, &all, model.n_classes, model.best_epoch)
}
