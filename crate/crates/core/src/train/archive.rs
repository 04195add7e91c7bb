//! Single-file model archive: magic `GRVA`, version, three length-prefixed
//! sections (encoder parameters, discriminator parameters, JSON metadata)
//! and a SHA-256 of everything before it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{ParamStore, Reader, Tensor};
use crate::error::{Error, Result};
use crate::ties::TieModel;

use super::{EpochRecord, Split, TrainConfig, TrainedModel};

const MAGIC: &[u8; 4] = b"GRVA";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    config: TrainConfig,
    input_dim: usize,
    n_classes: usize,
    tie_model: Option<String>,
    reference: Tensor,
    reference_labels: Vec<usize>,
    reference_vertices: Vec<usize>,
    train_digest: String,
    history: Vec<EpochRecord>,
    best_epoch: usize,
    split: Split,
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = Meta {
            config: self.config.clone(),
            input_dim: self.input_dim,
            n_classes: self.n_classes,
            tie_model: self.tie_model.as_ref().map(TieModel::to_json),
            reference: self.reference.clone(),
            reference_labels: self.reference_labels.clone(),
            reference_vertices: self.reference_vertices.clone(),
            train_digest: self.train_digest.clone(),
            history: self.history.clone(),
            best_epoch: self.best_epoch,
            split: self.split.clone(),
        };
        let sections = [
            self.params.with_prefix("enc.").to_bytes(),
            self.params.with_prefix("disc.").to_bytes(),
            serde_json::to_vec(&meta).expect("plain data serialises"),
        ];
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for s in &sections {
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            out.extend_from_slice(s);
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 + 32 {
            return Err(Error::Format("model archive truncated".into()));
        }
        let (body, sum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != sum {
            return Err(Error::Format("model archive checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not a model archive".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("model archive version {version}, expected {VERSION}")));
        }
        let mut section = || -> Result<&[u8]> {
            let len = usize::try_from(r.u64()?).map_err(|_| Error::Format("section too large".into()))?;
            r.take(len)
        };
        let mut params = ParamStore::from_bytes(section()?)?;
        params.merge(&ParamStore::from_bytes(section()?)?)?;
        let meta: Meta = serde_json::from_slice(section()?)
            .map_err(|e| Error::Format(format!("model metadata: {e}")))?;
        if r.pos != body.len() {
            return Err(Error::Format("trailing bytes in model archive".into()));
        }
        let tie_model = meta.tie_model.as_deref().map(TieModel::from_json).transpose()?;
        if meta.best_epoch == 0 || meta.best_epoch > meta.history.len() || meta.reference.rows() != meta.reference_labels.len() {
            return Err(Error::Format("inconsistent model metadata".into()));
        }
        Ok(TrainedModel {
            config: meta.config,
            input_dim: meta.input_dim,
            n_classes: meta.n_classes,
            params,
            tie_model,
            reference: meta.reference,
            reference_labels: meta.reference_labels,
            reference_vertices: meta.reference_vertices,
            train_digest: meta.train_digest,
            history: meta.history,
            best_epoch: meta.best_epoch,
            split: meta.split,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
