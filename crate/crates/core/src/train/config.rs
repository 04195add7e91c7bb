use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::check_lambda;
use crate::net::{DiscriminatorConfig, EncoderConfig, SilhouetteNorm, SilhouetteOpts, SilhouetteOut};

/// Where the ties used by the encoder come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieSource {
    /// Path-product ties computed on whatever graph is being embedded.
    Exact,
    /// Ties predicted by a tie model fitted to the training graph.
    Learned,
}

impl std::str::FromStr for TieSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "learned" => Ok(Self::Learned),
            _ => Err(Error::invalid(format!("tie_source must be `exact` or `learned`, got `{s}`"))),
        }
    }
}

impl std::fmt::Display for TieSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Learned => "learned",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub disc_hidden_dims: Vec<usize>,
    pub hops: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub tie_source: TieSource,
    pub tie_epochs: usize,
    pub tie_lr: f64,
    pub tie_hidden: usize,
    pub silhouette_normalization: SilhouetteNorm,
    pub silhouette_out: SilhouetteOut,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.3,
            gamma: 1.0,
            latent_dim: 8,
            hidden_dims: vec![32],
            disc_hidden_dims: vec![16],
            hops: 3,
            lr: 0.01,
            weight_decay: 5e-4,
            max_epochs: 200,
            patience: 100,
            seed: 0,
            train_frac: 0.6,
            val_frac: 0.2,
            test_frac: 0.2,
            tie_source: TieSource::Exact,
            tie_epochs: 500,
            tie_lr: 0.01,
            tie_hidden: 64,
            silhouette_normalization: SilhouetteNorm::Sum,
            silhouette_out: SilhouetteOut::Farthest,
        }
    }
}

/// Keys accepted in a config file, with a one-line description each.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("lambda", "gate threshold λ in [0,1]"),
    ("gamma", "discriminator loss weight γ ≥ 0"),
    ("latent_dim", "embedding width q (2 ≤ q < feature dimension)"),
    ("hidden_dims", "comma-separated widths of the aggregation layers"),
    ("disc_hidden_dims", "comma-separated discriminator hidden widths (may be empty)"),
    ("hops", "hop radius H for paths and ties"),
    ("lr", "Adam learning rate"),
    ("weight_decay", "decoupled weight decay"),
    ("max_epochs", "epoch limit"),
    ("patience", "epochs without validation improvement before stopping"),
    ("seed", "seed for the split, initialisation and tie model"),
    ("train_frac", "fraction of each class used for training"),
    ("val_frac", "fraction of each class used for validation"),
    ("test_frac", "fraction of each class held out for testing"),
    ("tie_source", "`exact` or `learned`"),
    ("tie_epochs", "tie model epochs (learned ties)"),
    ("tie_lr", "tie model learning rate (learned ties)"),
    ("tie_hidden", "tie model hidden width (learned ties)"),
    ("silhouette_normalization", "`sum` or `mean` of similarities in the silhouette"),
    ("silhouette_out", "`farthest` or `nearest` competing class as the silhouette Out term"),
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("`{key}`: cannot parse `{v}`")))
}

fn dims(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "lambda" => self.lambda = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "latent_dim" => self.latent_dim = num(key, v)?,
            "hidden_dims" => self.hidden_dims = dims(key, v)?,
            "disc_hidden_dims" => self.disc_hidden_dims = dims(key, v)?,
            "hops" => self.hops = num(key, v)?,
            "lr" => self.lr = num(key, v)?,
            "weight_decay" => self.weight_decay = num(key, v)?,
            "max_epochs" => self.max_epochs = num(key, v)?,
            "patience" => self.patience = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "train_frac" => self.train_frac = num(key, v)?,
            "val_frac" => self.val_frac = num(key, v)?,
            "test_frac" => self.test_frac = num(key, v)?,
            "tie_source" => self.tie_source = v.parse()?,
            "tie_epochs" => self.tie_epochs = num(key, v)?,
            "tie_lr" => self.tie_lr = num(key, v)?,
            "tie_hidden" => self.tie_hidden = num(key, v)?,
            "silhouette_normalization" => self.silhouette_normalization = v.parse()?,
            "silhouette_out" => self.silhouette_out = v.parse()?,
            _ => return Err(Error::invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; unknown keys are errors. The result is
    /// validated.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: origin.to_path_buf(),
                line: ln + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| match e {
                Error::Invalid(m) => err(m),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Every key with its resolved value, in the file format.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("lambda", format!("{:?}", self.lambda));
        line("gamma", format!("{:?}", self.gamma));
        line("latent_dim", self.latent_dim.to_string());
        line("hidden_dims", join(&self.hidden_dims));
        line("disc_hidden_dims", join(&self.disc_hidden_dims));
        line("hops", self.hops.to_string());
        line("lr", format!("{:?}", self.lr));
        line("weight_decay", format!("{:?}", self.weight_decay));
        line("max_epochs", self.max_epochs.to_string());
        line("patience", self.patience.to_string());
        line("seed", self.seed.to_string());
        line("train_frac", format!("{:?}", self.train_frac));
        line("val_frac", format!("{:?}", self.val_frac));
        line("test_frac", format!("{:?}", self.test_frac));
        line("tie_source", self.tie_source.to_string());
        line("tie_epochs", self.tie_epochs.to_string());
        line("tie_lr", format!("{:?}", self.tie_lr));
        line("tie_hidden", self.tie_hidden.to_string());
        line("silhouette_normalization", self.silhouette_normalization.to_string());
        line("silhouette_out", self.silhouette_out.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        crate::net::total_loss(0.0, 0.0, self.gamma)?;
        if self.latent_dim < 2 {
            return Err(Error::invalid("latent_dim must be at least 2"));
        }
        if self.hidden_dims.iter().chain(&self.disc_hidden_dims).any(|&h| h == 0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if self.hops == 0 {
            return Err(Error::invalid("hops must be at least 1"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::invalid(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight_decay must be non-negative"));
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid("max_epochs and patience must be at least 1"));
        }
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid("split fractions must be positive"));
        }
        if fracs.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(Error::invalid("split fractions must sum to at most 1"));
        }
        if self.tie_epochs == 0 || self.tie_hidden == 0 || !(self.tie_lr.is_finite() && self.tie_lr > 0.0) {
            return Err(Error::invalid("tie model settings must be positive"));
        }
        Ok(())
    }

    pub fn silhouette(&self) -> SilhouetteOpts {
        SilhouetteOpts {
            norm: self.silhouette_normalization,
            out: self.silhouette_out,
        }
    }

    pub fn encoder_config(&self, input_dim: usize) -> EncoderConfig {
        EncoderConfig {
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            output_dim: self.latent_dim,
            lambda: self.lambda,
            hops: self.hops,
        }
    }

    pub fn discriminator_config(&self, n_classes: usize) -> DiscriminatorConfig {
        DiscriminatorConfig {
            n_classes,
            hidden_dims: self.disc_hidden_dims.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("cfg")
    }

    #[test]
    fn defaults_follow_the_protocol() {
        let c = TrainConfig::default();
        assert_eq!(c.lr, 0.01);
        assert_eq!(c.weight_decay, 5e-4);
        assert_eq!(c.patience, 100);
        c.validate().unwrap();
    }

    #[test]
    fn round_trips_through_text() {
        let mut c = TrainConfig::default();
        c.hidden_dims = vec![16, 8];
        c.disc_hidden_dims = vec![];
        c.tie_source = TieSource::Learned;
        c.lambda = 0.1 + 0.2;
        c.silhouette_out = SilhouetteOut::Nearest;
        assert_eq!(TrainConfig::parse(&c.to_kv_string(), p()).unwrap(), c);
    }

    #[test]
    fn bad_lambda_and_unknown_keys() {
        let e = TrainConfig::parse("lambda = 1.5\n", p()).unwrap_err();
        assert!(e.to_string().contains("λ must lie in [0,1]"), "{e}");
        let e = TrainConfig::parse("# c\nlamda = 0.5\n", p()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        assert!(TrainConfig::parse("lambda 0.5\n", p()).is_err());
        assert!(TrainConfig::parse("gamma = -1\n", p()).is_err());
        assert!(TrainConfig::parse("train_frac = 0.9\n", p()).is_err());
        assert!(TrainConfig::parse("patience = 0\n", p()).is_err());
    }
}
