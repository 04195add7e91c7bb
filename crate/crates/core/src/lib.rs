//! Force-gated graph representation learning.
//!
//! Vertices attract each other with a strength given by attribute similarity
//! times a structural *social tie*; pairs whose product falls below a
//! threshold λ do not interact. An encoder aggregates latent signals through
//! that gated kernel, and a silhouette objective plus a discriminator over
//! per-class attraction rows shape the embedding.
//!
//! ```no_run
//! use gravity::{generate_sbm, train, SbmConfig, TrainConfig};
//!
//! let g = generate_sbm(&SbmConfig::default())?;
//! let model = train(&g, &TrainConfig::default())?;
//! println!("best validation accuracy {}", model.best_val_acc());
//! # Ok::<(), gravity::Error>(())
//! ```

pub mod autodiff;
mod error;
pub mod force;
mod graph;
pub mod io;
pub mod net;
pub mod numeric;
pub mod paths;
mod sbm;
pub mod ties;
pub mod train;

pub use autodiff::{AdamConfig, ParamStore, Tape, Tensor, Var};
pub use error::{Error, Result};
pub use force::{force_kernel, group_force, membership, receptive_field, similarity, ForceKernel, GroupForce};
pub use graph::Graph;
pub use io::load_graph;
pub use paths::{all_pairs_paths, PathTable};
pub use sbm::{generate_sbm, SbmConfig};
pub use ties::{tie_exact, tie_matrix_exact, tie_metrics, TieMatrix, TieMetrics, TieModel, TieModelConfig};
pub use train::{classify, evaluate_inductive, predict_graph, train, train_with, InductiveReport, TieSource, TrainConfig, TrainedModel};
