use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::force::Gate;
use crate::paths::PathTable;
use crate::ties::TieMatrix;

use super::discriminator::discriminate;
use super::encoder::{encode, gated_kernel};
use super::loss::{check_gamma, discriminator_loss_on_tape, silhouette_on_tape};
use super::{DiscriminatorConfig, EncoderConfig, SilhouetteOpts};

/// Everything the training objective depends on besides the parameters.
pub struct Problem<'a> {
    pub features: &'a Tensor,
    pub ties: &'a TieMatrix,
    pub paths: &'a PathTable,
    /// Vertices whose labels drive both losses and the membership matrix.
    pub train: &'a [usize],
    pub train_labels: &'a [usize],
    pub encoder: &'a EncoderConfig,
    pub discriminator: &'a DiscriminatorConfig,
    pub gamma: f64,
    pub silhouette: SilhouetteOpts,
}

/// Gates of every encoder layer and of the latent kernel feeding the
/// discriminator.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSet {
    pub layers: Vec<Gate>,
    pub latent: Gate,
}

pub struct ObjectiveVars {
    pub embedding: Var,
    /// Latent group force `K(Y) · M` for every vertex.
    pub group_force: Var,
    /// Discriminator output for every vertex.
    pub probs: Var,
    pub enc_loss: Var,
    pub disc_loss: Var,
    pub total: Var,
    pub gates: GateSet,
}

/// Records the full objective on `tape`. With `frozen`, every gate is taken
/// from it instead of being recomputed.
pub fn objective(tape: &mut Tape, params: &ParamStore, pb: &Problem, frozen: Option<&GateSet>) -> Result<ObjectiveVars> {
    check_gamma(pb.gamma)?;
    let n = pb.features.rows();
    let k = pb.discriminator.n_classes;
    if pb.train.len() != pb.train_labels.len() {
        return Err(Error::shape("one label per training vertex required"));
    }
    let mut m = Tensor::zeros(n, k);
    for (&v, &l) in pb.train.iter().zip(pb.train_labels) {
        if v >= n || l >= k {
            return Err(Error::invalid(format!("training vertex {v} with label {l} out of range")));
        }
        m.set(v, l, 1.0);
    }

    let enc = encode(
        tape,
        params,
        pb.features,
        pb.ties,
        pb.paths,
        pb.encoder,
        frozen.map(|f| f.layers.as_slice()),
    )?;
    let (kernel, latent) = gated_kernel(
        tape,
        enc.y,
        pb.ties,
        pb.paths,
        pb.encoder.lambda,
        frozen.map(|f| &f.latent),
    )?;
    let m = tape.constant(m)?;
    let group_force = tape.propagate(kernel, m)?;
    let probs = discriminate(tape, params, group_force, pb.discriminator)?;

    let y_train = tape.select_rows(enc.y, pb.train)?;
    let enc_loss = silhouette_on_tape(tape, y_train, pb.train_labels, pb.silhouette)?;
    let p_train = tape.select_rows(probs, pb.train)?;
    let disc_loss = discriminator_loss_on_tape(tape, p_train, pb.train_labels)?;
    let weighted = tape.scale(disc_loss, pb.gamma)?;
    let total = tape.add(enc_loss, weighted)?;

    Ok(ObjectiveVars {
        embedding: enc.y,
        group_force,
        probs,
        enc_loss,
        disc_loss,
        total,
        gates: GateSet {
            layers: enc.gates,
            latent,
        },
    })
}
