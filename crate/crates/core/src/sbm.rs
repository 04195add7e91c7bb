//! Stochastic block model fixtures with Gaussian vertex attributes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SbmConfig {
    pub blocks: usize,
    pub per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_shift: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            blocks: 4,
            per_block: 20,
            p_in: 0.3,
            p_out: 0.02,
            feature_dim: 16,
            feature_shift: 2.0,
            seed: 0,
        }
    }
}

/// Draws an SBM graph with unit edge weights.
///
/// Vertex `v` belongs to block `v / per_block` and carries that block as its
/// label. Attributes are unit-variance spherical Gaussians; the mean of
/// block `k` is `feature_shift` on every coordinate `c` with
/// `c % blocks == k` and zero elsewhere.
pub fn generate_sbm(cfg: &SbmConfig) -> Result<Graph> {
    if cfg.blocks < 2 {
        return Err(Error::invalid(format!(
            "an SBM needs at least 2 blocks, got {}",
            cfg.blocks
        )));
    }
    if cfg.per_block == 0 {
        return Err(Error::invalid("per_block must be at least 1"));
    }
    for (name, p) in [("p_in", cfg.p_in), ("p_out", cfg.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("{name} must lie in [0,1], got {p}")));
        }
    }
    if cfg.feature_dim == 0 || !cfg.feature_shift.is_finite() {
        return Err(Error::invalid("feature_dim must be positive and feature_shift finite"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.blocks * cfg.per_block;
    let block = |v: usize| v / cfg.per_block;

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if block(i) == block(j) { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }

    let mut features = Tensor::zeros(n, cfg.feature_dim);
    for v in 0..n {
        for (c, x) in features.row_mut(v).iter_mut().enumerate() {
            let mean = if c % cfg.blocks == block(v) { cfg.feature_shift } else { 0.0 };
            let noise: f64 = rng.sample(StandardNormal);
            *x = mean + noise;
        }
    }
    let labels = (0..n).map(|v| Some(block(v))).collect();
    Graph::new(features, &edges, labels, cfg.blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_probabilities_give_cliques() {
        let g = generate_sbm(&SbmConfig {
            blocks: 2,
            per_block: 3,
            p_in: 1.0,
            p_out: 0.0,
            ..SbmConfig::default()
        })
        .unwrap();
        assert_eq!(g.n_edges(), 6);
        for (i, j, _) in g.edges() {
            assert_eq!(i / 3, j / 3);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SbmConfig { seed: 11, ..SbmConfig::default() };
        let a = generate_sbm(&cfg).unwrap();
        let b = generate_sbm(&cfg).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.features(), b.features());
    }

    #[test]
    fn rejects_single_block() {
        let cfg = SbmConfig { blocks: 1, ..SbmConfig::default() };
        assert!(generate_sbm(&cfg).is_err());
        let cfg = SbmConfig { p_in: 1.5, ..SbmConfig::default() };
        assert!(generate_sbm(&cfg).is_err());
    }

    #[test]
    fn intra_block_edge_count_matches_binomial_mean() {
        // E[intra] = p_in * C(20, 2) * 4 = 0.3 * 190 * 4 = 228
        let expected = 0.3 * 190.0 * 4.0;
        let mut total = 0.0;
        let seeds = 20;
        for seed in 0..seeds {
            let g = generate_sbm(&SbmConfig { seed, ..SbmConfig::default() }).unwrap();
            let intra = g.edges().iter().filter(|(i, j, _)| i / 20 == j / 20).count();
            let intra = intra as f64;
            assert!((intra - expected).abs() <= 0.25 * expected, "seed {seed}: {intra}");
            total += intra;
        }
        let mean = total / seeds as f64;
        assert!((mean - expected).abs() <= 0.05 * expected, "mean {mean}");
    }
}
