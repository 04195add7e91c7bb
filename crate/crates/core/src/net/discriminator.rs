use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// Input and output width.
    pub n_classes: usize,
    pub hidden_dims: Vec<usize>,
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::invalid("discriminator needs at least 2 classes"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.n_classes;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.n_classes));
        dims
    }
}

fn layer_names(p: usize, n_hidden: usize) -> (String, String) {
    if p == n_hidden {
        ("disc.w_out".into(), "disc.b_out".into())
    } else {
        (format!("disc.w{}", p + 1), format!("disc.b{}", p + 1))
    }
}

/// Fresh parameters `disc.w{r}`, `disc.b{r}`, `disc.w_out`, `disc.b_out`.
pub fn init_discriminator(cfg: &DiscriminatorConfig, rng: &mut impl Rng) -> Result<ParamStore> {
    cfg.validate()?;
    let mut store = ParamStore::new();
    for (p, &(fan_in, fan_out)) in cfg.layer_dims().iter().enumerate() {
        let (w, b) = layer_names(p, cfg.hidden_dims.len());
        store.insert_glorot(&w, fan_in, fan_out, rng);
        store.insert_zeros(&b, 1, fan_out);
    }
    Ok(store)
}

/// Class probabilities for every row of `f`.
pub(crate) fn discriminate(tape: &mut Tape, params: &ParamStore, f: Var, cfg: &DiscriminatorConfig) -> Result<Var> {
    cfg.validate()?;
    if tape.value(f).cols() != cfg.n_classes {
        return Err(Error::shape(format!(
            "discriminator expects rows of length {}, got {}",
            cfg.n_classes,
            tape.value(f).cols()
        )));
    }
    let n_hidden = cfg.hidden_dims.len();
    let mut h = f;
    for (p, &(fan_in, fan_out)) in cfg.layer_dims().iter().enumerate() {
        let (w, b) = layer_names(p, n_hidden);
        match (params.value(&w), params.value(&b)) {
            (Some(wt), Some(bt)) if wt.shape() == [fan_in, fan_out] && bt.shape() == [1, fan_out] => {}
            _ => return Err(Error::shape(format!("parameters `{w}`/`{b}` missing or misshapen"))),
        }
        let w = tape.param(params, &w)?;
        let b = tape.param(params, &b)?;
        h = tape.matmul(h, w)?;
        h = tape.add_row(h, b)?;
        if p < n_hidden {
            h = tape.relu(h)?;
        }
    }
    tape.softmax_rows(h)
}

pub fn discriminator_forward_rows(params: &ParamStore, rows: &Tensor, cfg: &DiscriminatorConfig) -> Result<Tensor> {
    let mut tape = Tape::new();
    let f = tape.constant(rows.clone())?;
    let p = discriminate(&mut tape, params, f, cfg)?;
    Ok(tape.value(p).clone())
}

/// Class probabilities for one group-force row.
pub fn discriminator_forward(params: &ParamStore, force_row: &[f64], cfg: &DiscriminatorConfig) -> Result<Vec<f64>> {
    let row = Tensor::from_vec(1, force_row.len(), force_row.to_vec())?;
    Ok(discriminator_forward_rows(params, &row, cfg)?.into_vec())
}
