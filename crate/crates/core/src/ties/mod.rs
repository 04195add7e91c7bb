//! Social ties: exact path-product ties, the learned approximator and the
//! error metrics used to compare them.

mod features;
mod model;

pub use features::{structural_embedding, structural_matrix, STRUCTURAL_DIM};
pub use model::{TieModel, TieModelConfig};

use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::paths::PathTable;

/// `N × N` matrix of directional ties in `[0, 1]` with a zero diagonal.
/// Entry `(i, j)` is 0 whenever `j` is out of hop range of `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TieMatrix {
    values: Tensor,
}

impl TieMatrix {
    pub fn from_tensor(values: Tensor) -> Result<Self> {
        if values.rows() != values.cols() {
            return Err(Error::shape(format!("tie matrix {:?} is not square", values.shape())));
        }
        if let Some(bad) = values.data().iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::invalid(format!("tie value {bad} outside [0,1]")));
        }
        if (0..values.rows()).any(|i| values.get(i, i) != 0.0) {
            return Err(Error::invalid("tie matrix diagonal must be zero"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    /// Same ties with vertex `v` renamed `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> TieMatrix {
        let n = self.n();
        let mut out = Tensor::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(perm[i], perm[j], self.get(i, j));
            }
        }
        TieMatrix { values: out }
    }
}

/// Exact tie of `j` on `i`: the product over consecutive edges `(α, β)` of
/// the stored path `[i, …, j]` of `d(α) / max(d(α), d(β))`, where `d` is the
/// weighted degree. 0 when no path exists within the hop radius.
pub fn tie_exact(g: &Graph, paths: &PathTable, i: usize, j: usize) -> f64 {
    if !paths.reachable(i, j) {
        return 0.0;
    }
    let mut tie = 1.0;
    let mut beta = j;
    while let Some(alpha) = paths.parent(i, beta) {
        let (da, db) = (g.strength(alpha), g.strength(beta));
        tie *= da / da.max(db);
        beta = alpha;
    }
    tie
}

pub fn tie_matrix_exact(g: &Graph, paths: &PathTable) -> TieMatrix {
    let n = g.n_vertices();
    let mut values = Tensor::zeros(n, n);
    let fill = |(i, row): (usize, &mut [f64])| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = tie_exact(g, paths, i, j);
        }
    };
    #[cfg(feature = "parallel")]
    values.data_mut().par_chunks_mut(n.max(1)).enumerate().for_each(fill);
    #[cfg(not(feature = "parallel"))]
    values.data_mut().chunks_mut(n.max(1)).enumerate().for_each(fill);
    TieMatrix { values }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TieMetrics {
    pub mae: f64,
    pub mse: f64,
    pub mape: f64,
    /// Pairs entering MAPE (truth ≥ 1e-8).
    pub n_pairs_used: usize,
    /// Pairs entering MAE and MSE.
    pub n_pairs: usize,
}

const MAPE_FLOOR: f64 = 1e-8;

/// MAE and MSE over ordered off-diagonal pairs where either matrix is
/// nonzero; MAPE over the subset whose truth is at least 1e-8.
///
/// Exact and predicted ties are zero exactly on out-of-range pairs, so for
/// those inputs the support is the set of reachable pairs.
pub fn tie_metrics(pred: &TieMatrix, truth: &TieMatrix) -> Result<TieMetrics> {
    if pred.n() != truth.n() {
        return Err(Error::shape(format!(
            "predicted ties for {} vertices, truth for {}",
            pred.n(),
            truth.n()
        )));
    }
    tie_metrics_over(pred, truth, |i, j| truth.get(i, j) > 0.0 || pred.get(i, j) > 0.0)
}

/// Same as [`tie_metrics`] with an explicit pair filter.
pub fn tie_metrics_over(
    pred: &TieMatrix,
    truth: &TieMatrix,
    include: impl Fn(usize, usize) -> bool,
) -> Result<TieMetrics> {
    let n = truth.n();
    let (mut abs, mut sq, mut pct) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        for j in 0..n {
            if i == j || !include(i, j) {
                continue;
            }
            let (p, t) = (pred.get(i, j), truth.get(i, j));
            let e = (p - t).abs();
            abs.push(e);
            sq.push(e * e);
            if t >= MAPE_FLOOR {
                pct.push(e / t);
            }
        }
    }
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(TieMetrics {
        mae: mean(&abs),
        mse: mean(&sq),
        mape: mean(&pct),
        n_pairs_used: pct.len(),
        n_pairs: abs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::all_pairs_paths;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> Graph {
        Graph::unlabeled(Tensor::filled(n, 1, 1.0), edges).unwrap()
    }

    #[test]
    fn single_edge_tie_is_one() {
        let g = graph(2, &[(0, 1, 1.0)]);
        let p = all_pairs_paths(&g, 3).unwrap();
        assert_eq!(tie_exact(&g, &p, 0, 1), 1.0);
        assert_eq!(tie_exact(&g, &p, 1, 0), 1.0);
    }

    #[test]
    fn triangle_asymmetry() {
        // a=0, b=1, c=2 with w_ab = 2, w_bc = 1, w_ac = 1: d(a)=3, d(c)=2
        let g = graph(3, &[(0, 1, 2.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let p = all_pairs_paths(&g, 3).unwrap();
        assert_eq!(tie_exact(&g, &p, 0, 2), 1.0);
        assert_eq!(tie_exact(&g, &p, 2, 0), 2.0 / 3.0);
    }

    #[test]
    fn out_of_range_is_zero() {
        let g = graph(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
        let p = all_pairs_paths(&g, 2).unwrap();
        assert_eq!(tie_exact(&g, &p, 0, 3), 0.0);
    }

    #[test]
    fn edgeless_and_complete() {
        let g = graph(3, &[]);
        let t = tie_matrix_exact(&g, &all_pairs_paths(&g, 3).unwrap());
        assert!(t.values().data().iter().all(|&x| x == 0.0));

        let k3 = graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let t = tie_matrix_exact(&k3, &all_pairs_paths(&k3, 3).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn metrics_closed_form() {
        let n = 3;
        let mut truth = Tensor::filled(n, n, 1.0);
        let mut pred = Tensor::filled(n, n, 0.9);
        for i in 0..n {
            truth.set(i, i, 0.0);
            pred.set(i, i, 0.0);
        }
        let truth = TieMatrix::from_tensor(truth).unwrap();
        let pred = TieMatrix::from_tensor(pred).unwrap();
        let m = tie_metrics(&pred, &truth).unwrap();
        assert!((m.mae - 0.1).abs() < 1e-12);
        assert!((m.mse - 0.01).abs() < 1e-12);
        assert!((m.mape - 0.1).abs() < 1e-12);
        assert_eq!(m.n_pairs_used, 6);

        let same = tie_metrics(&truth, &truth).unwrap();
        assert_eq!((same.mae, same.mse, same.mape), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_truth_excluded_from_mape_only() {
        let truth = TieMatrix::from_tensor(
            Tensor::from_rows(&[vec![0.0, 0.0], vec![0.5, 0.0]]).unwrap(),
        )
        .unwrap();
        let pred = TieMatrix::from_tensor(
            Tensor::from_rows(&[vec![0.0, 0.2], vec![0.4, 0.0]]).unwrap(),
        )
        .unwrap();
        let m = tie_metrics(&pred, &truth).unwrap();
        assert_eq!(m.n_pairs, 2);
        assert_eq!(m.n_pairs_used, 1);
        assert!((m.mae - 0.15).abs() < 1e-12);
        assert!((m.mape - 0.2).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let a = TieMatrix::from_tensor(Tensor::zeros(2, 2)).unwrap();
        let b = TieMatrix::from_tensor(Tensor::zeros(3, 3)).unwrap();
        assert!(tie_metrics(&a, &b).is_err());
    }
}
