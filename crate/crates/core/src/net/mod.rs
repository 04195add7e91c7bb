//! Force-gated encoder, discriminator over group-force rows, and the
//! training objective.

mod discriminator;
mod encoder;
mod loss;
mod objective;

pub use discriminator::{
    discriminator_forward, discriminator_forward_rows, init_discriminator, DiscriminatorConfig,
};
pub use encoder::{encoder_forward, encoder_forward_isolated, init_encoder, Embedding, EncoderConfig};
pub use loss::{discriminator_loss, silhouette_loss, silhouette_scores, total_loss, SilhouetteNorm, SilhouetteOpts, SilhouetteOut};
pub use objective::{objective, GateSet, ObjectiveVars, Problem};
