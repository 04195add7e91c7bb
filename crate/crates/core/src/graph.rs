//! Weighted undirected attributed graph.

use sha2::{Digest, Sha256};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::numeric::invariant_sum;

/// Attributed, weighted, undirected graph with optional vertex labels.
///
/// Adjacency lists are sorted by neighbour index and always symmetric.
/// Vertices are indexed densely `0..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    features: Tensor,
    adjacency: Vec<Vec<(usize, f64)>>,
    strength: Vec<f64>,
    labels: Vec<Option<usize>>,
    n_classes: usize,
}

impl Graph {
    /// Builds and validates a graph. `edges` lists each undirected edge once.
    pub fn new(
        features: Tensor,
        edges: &[(usize, usize, f64)],
        labels: Vec<Option<usize>>,
        n_classes: usize,
    ) -> Result<Self> {
        let n = features.rows();
        if !features.is_finite() {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) references a vertex outside 0..{n}"
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop on vertex {i}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) has weight {w}; weights must be finite and positive"
                )));
            }
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for (i, list) in adjacency.iter_mut().enumerate() {
            list.sort_by_key(|&(j, _)| j);
            if let Some(pair) = list.windows(2).find(|p| p[0].0 == p[1].0) {
                let j = pair[0].0;
                return Err(if pair[0].1 == pair[1].1 {
                    Error::invalid(format!("duplicate edge ({}, {})", i.min(j), i.max(j)))
                } else {
                    Error::invalid(format!(
                        "duplicate edge ({}, {}) with asymmetric weights {} and {}",
                        i.min(j),
                        i.max(j),
                        pair[0].1,
                        pair[1].1
                    ))
                });
            }
        }

        if labels.len() != n {
            return Err(Error::invalid(format!(
                "{} labels for {n} vertices",
                labels.len()
            )));
        }
        let any_label = labels.iter().any(Option::is_some);
        if any_label && n_classes < 2 {
            return Err(Error::invalid(format!(
                "labelled graphs need at least 2 classes, got K={n_classes}"
            )));
        }
        if let Some((v, k)) = labels
            .iter()
            .enumerate()
            .find_map(|(v, l)| l.filter(|&k| k >= n_classes).map(|k| (v, k)))
        {
            return Err(Error::invalid(format!(
                "vertex {v} has label {k}, outside 0..{n_classes}"
            )));
        }

        let strength = adjacency
            .iter()
            .map(|list| {
                let mut w: Vec<f64> = list.iter().map(|&(_, w)| w).collect();
                invariant_sum(&mut w)
            })
            .collect();
        Ok(Self {
            features,
            adjacency,
            strength,
            labels,
            n_classes,
        })
    }

    /// Unlabelled graph.
    pub fn unlabeled(features: Tensor, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = features.rows();
        Self::new(features, edges, vec![None; n], 0)
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Sum of incident edge weights; 0 for an isolated vertex.
    pub fn weighted_degree(&self, v: usize) -> Result<f64> {
        self.strength.get(v).copied().ok_or_else(|| {
            Error::invalid(format!("vertex {v} out of range 0..{}", self.n_vertices()))
        })
    }

    pub(crate) fn strength(&self, v: usize) -> f64 {
        self.strength[v]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> Option<usize> {
        self.labels[v]
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.iter().any(Option::is_some)
    }

    /// Each undirected edge once, as `(i, j, w)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (i, list) in self.adjacency.iter().enumerate() {
            for &(j, w) in list {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search_by_key(&j, |&(k, _)| k).is_ok()
    }

    /// Relabels vertices: old vertex `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.n_vertices();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of the vertex set"));
        }
        let mut inv = vec![0; n];
        for (v, &p) in perm.iter().enumerate() {
            inv[p] = v;
        }
        let features = self.features.select_rows(&inv);
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(i, j, w)| (perm[i], perm[j], w))
            .collect();
        let labels = inv.iter().map(|&v| self.labels[v]).collect();
        Graph::new(features, &edges, labels, self.n_classes)
    }

    /// Same graph with every edge weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Result<Graph> {
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(i, j, w)| (i, j, w * factor))
            .collect();
        Graph::new(self.features.clone(), &edges, self.labels.clone(), self.n_classes)
    }

    /// Same structure and features with different labels.
    pub fn with_labels(&self, labels: Vec<Option<usize>>, n_classes: usize) -> Result<Graph> {
        Graph::new(self.features.clone(), &self.edges(), labels, n_classes)
    }

    /// SHA-256 over vertex count, features and edges (labels excluded), hex.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_vertices() as u64).to_le_bytes());
        h.update((self.feature_dim() as u64).to_le_bytes());
        for x in self.features.data() {
            h.update(x.to_le_bytes());
        }
        for (i, j, w) in self.edges() {
            h.update((i as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
            h.update(w.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(n: usize) -> Tensor {
        Tensor::filled(n, 1, 1.0)
    }

    #[test]
    fn smallest_graph() {
        let g = Graph::unlabeled(feats(2), &[(0, 1, 1.0)]).unwrap();
        assert_eq!(g.n_vertices(), 2);
        assert_eq!(g.neighbors(0), &[(1, 1.0)]);
        assert_eq!(g.neighbors(1), &[(0, 1.0)]);
    }

    #[test]
    fn weighted_degree_examples() {
        let g = Graph::unlabeled(feats(4), &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(g.weighted_degree(3).unwrap(), 0.0);
        assert_eq!(g.weighted_degree(1).unwrap(), 2.0);
        assert!(g.weighted_degree(4).is_err());

        let tri = Graph::unlabeled(feats(3), &[(0, 1, 2.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        assert_eq!(tri.weighted_degree(0).unwrap(), 3.0);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::unlabeled(feats(2), &[(0, 0, 1.0)]).is_err());
        assert!(Graph::unlabeled(feats(2), &[(0, 1, 0.0)]).is_err());
        assert!(Graph::unlabeled(feats(2), &[(0, 1, f64::NAN)]).is_err());
        assert!(Graph::unlabeled(feats(2), &[(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(Graph::unlabeled(feats(2), &[(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(Graph::new(feats(2), &[], vec![Some(2), None], 2).is_err());
        assert!(Graph::new(feats(2), &[], vec![Some(0), None], 1).is_err());
        let nan = Tensor::from_vec(1, 1, vec![f64::INFINITY]).unwrap();
        assert!(Graph::unlabeled(nan, &[]).is_err());
    }

    #[test]
    fn permutation_moves_everything() {
        let g = Graph::new(
            Tensor::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap(),
            &[(0, 1, 3.0)],
            vec![Some(0), Some(1), None],
            2,
        )
        .unwrap();
        let p = g.permuted(&[2, 0, 1]).unwrap();
        assert!(p.has_edge(2, 0));
        assert_eq!(p.features().get(2, 0), 0.0);
        assert_eq!(p.label(2), Some(0));
        assert_eq!(p.label(1), None);
        assert!(g.permuted(&[0, 0, 1]).is_err());
    }
}
