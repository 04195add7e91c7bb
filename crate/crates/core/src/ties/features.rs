use crate::autodiff::Tensor;
use crate::graph::Graph;
use crate::numeric::invariant_sum;

/// Length of [`structural_embedding`].
pub const STRUCTURAL_DIM: usize = 8;

fn raw_stats(g: &Graph, v: usize) -> [f64; 4] {
    let nbrs = g.neighbors(v);
    let deg = nbrs.len();
    let clustering = if deg < 2 {
        0.0
    } else {
        let mut links = 0usize;
        for (a, &(x, _)) in nbrs.iter().enumerate() {
            for &(y, _) in &nbrs[a + 1..] {
                if g.has_edge(x, y) {
                    links += 1;
                }
            }
        }
        links as f64 / (deg * (deg - 1) / 2) as f64
    };
    let mean_nbr_degree = if deg == 0 {
        0.0
    } else {
        nbrs.iter().map(|&(u, _)| g.degree(u)).sum::<usize>() as f64 / deg as f64
    };
    [deg as f64, g.strength(v), clustering, mean_nbr_degree]
}

/// Attribute-free vertex descriptor: degree, weighted degree, local
/// clustering coefficient and mean neighbour degree, followed by the mean of
/// the same four statistics over the neighbours (zeros when isolated).
pub fn structural_embedding(g: &Graph, v: usize) -> [f64; STRUCTURAL_DIM] {
    let own = raw_stats(g, v);
    let nbrs = g.neighbors(v);
    let mut out = [0.0; STRUCTURAL_DIM];
    out[..4].copy_from_slice(&own);
    if !nbrs.is_empty() {
        let stats: Vec<[f64; 4]> = nbrs.iter().map(|&(u, _)| raw_stats(g, u)).collect();
        for k in 0..4 {
            let mut col: Vec<f64> = stats.iter().map(|s| s[k]).collect();
            out[4 + k] = invariant_sum(&mut col) / nbrs.len() as f64;
        }
    }
    out
}

/// [`structural_embedding`] of every vertex, one row each.
pub fn structural_matrix(g: &Graph) -> Tensor {
    let n = g.n_vertices();
    let mut out = Tensor::zeros(n, STRUCTURAL_DIM);
    for v in 0..n {
        out.row_mut(v).copy_from_slice(&structural_embedding(g, v));
    }
    out
}
