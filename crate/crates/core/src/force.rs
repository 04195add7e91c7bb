//! Attribute similarity, the λ-gated force kernel, group forces and
//! receptive fields.

use crate::autodiff::{cosine_sim_matrix, Tensor};
use crate::error::{Error, Result};
use crate::numeric::invariant_sum;
use crate::paths::PathTable;
use crate::ties::TieMatrix;

/// Rescaled cosine similarity `(1 + cos(a, b)) / 2` in `[0, 1]`; 0 when
/// either vector has zero norm.
pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "similarity of vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::invalid("similarity input contains non-finite values"));
    }
    let na2 = a.iter().map(|x| x * x).sum::<f64>();
    let nb2 = b.iter().map(|x| x * x).sum::<f64>();
    if na2 == 0.0 || nb2 == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    // sqrt of the product keeps cos(a, a) at exactly 1
    let cos = (dot / (na2 * nb2).sqrt()).clamp(-1.0, 1.0);
    Ok(0.5 * (1.0 + cos))
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("λ must lie in [0,1], got {lambda}")));
    }
    Ok(())
}

/// Which pairs interact: a path within the hop radius exists and the
/// similarity-weighted tie reaches λ.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    n: usize,
    open: Vec<bool>,
}

impl Gate {
    pub fn is_open(&self, i: usize, j: usize) -> bool {
        self.open[i * self.n + j]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    /// Gate that is closed everywhere.
    pub fn closed(n: usize) -> Self {
        Gate {
            n,
            open: vec![false; n * n],
        }
    }
}

/// Gate from a similarity matrix, plus the mask `gate ⊙ T` that turns the
/// similarity into the kernel by elementwise product.
pub(crate) fn gate_and_mask(
    sim: &Tensor,
    ties: &TieMatrix,
    paths: &PathTable,
    lambda: f64,
) -> (Gate, Tensor) {
    let n = sim.rows();
    let mut open = vec![false; n * n];
    let mut mask = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if !paths.reachable(i, j) {
                continue;
            }
            let t = ties.get(i, j);
            if sim.get(i, j) * t >= lambda {
                open[i * n + j] = true;
                mask.set(i, j, t);
            }
        }
    }
    (Gate { n, open }, mask)
}

/// Mask `gate ⊙ T` for a gate fixed in advance.
pub(crate) fn mask_for_gate(gate: &Gate, ties: &TieMatrix) -> Tensor {
    let n = gate.n;
    let mut mask = Tensor::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if gate.is_open(i, j) {
                mask.set(i, j, ties.get(i, j));
            }
        }
    }
    mask
}

/// `values(i, j) = s_ij · t_ij` where the gate is open, 0 elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct ForceKernel {
    pub values: Tensor,
    pub gate: Gate,
    pub lambda: f64,
}

/// Force kernel on the rows of `feats`, which may be raw attributes or any
/// latent signal with one row per vertex.
pub fn force_kernel(feats: &Tensor, ties: &TieMatrix, paths: &PathTable, lambda: f64) -> Result<ForceKernel> {
    check_lambda(lambda)?;
    if feats.rows() != ties.n() || paths.n_vertices() != ties.n() {
        return Err(Error::shape(format!(
            "{} feature rows, {} tie rows, {} path-table vertices",
            feats.rows(),
            ties.n(),
            paths.n_vertices()
        )));
    }
    if !feats.is_finite() {
        return Err(Error::invalid("kernel input contains non-finite values"));
    }
    let sim = cosine_sim_matrix(feats);
    let (gate, mask) = gate_and_mask(&sim, ties, paths, lambda);
    let values = sim.zip_map(&mask, |s, m| s * m);
    Ok(ForceKernel { values, gate, lambda })
}

/// Vertices whose force on `i` survives the gate.
pub fn receptive_field(k: &ForceKernel, i: usize) -> Vec<usize> {
    (0..k.gate.n).filter(|&j| k.gate.is_open(i, j)).collect()
}

/// Binary `N × K` class membership; unlabelled (or excluded) vertices get an
/// all-zero row.
pub fn membership(labels: &[Option<usize>], n_classes: usize) -> Result<Tensor> {
    let mut m = Tensor::zeros(labels.len(), n_classes);
    for (v, l) in labels.iter().enumerate() {
        if let Some(k) = *l {
            if k >= n_classes {
                return Err(Error::invalid(format!("label {k} outside 0..{n_classes}")));
            }
            m.set(v, k, 1.0);
        }
    }
    Ok(m)
}

/// Kernel aggregated per class: `values = kernel · membership`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupForce {
    pub values: Tensor,
    pub membership: Tensor,
}

pub fn group_force(k: &ForceKernel, m: &Tensor) -> Result<GroupForce> {
    let n = k.values.rows();
    if m.rows() != n {
        return Err(Error::shape(format!("membership has {} rows for {n} vertices", m.rows())));
    }
    for r in 0..m.rows() {
        let row = m.row(r);
        if row.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::invalid(format!("membership row {r} is not binary")));
        }
        if row.iter().sum::<f64>() > 1.0 {
            return Err(Error::invalid(format!("membership row {r} has several classes")));
        }
    }
    let mut values = Tensor::zeros(n, m.cols());
    let mut terms = Vec::new();
    for i in 0..n {
        for c in 0..m.cols() {
            terms.clear();
            terms.extend((0..n).filter(|&j| m.get(j, c) != 0.0).map(|j| k.values.get(i, j)));
            values.set(i, c, invariant_sum(&mut terms));
        }
    }
    Ok(GroupForce {
        values,
        membership: m.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::paths::all_pairs_paths;
    use crate::ties::tie_matrix_exact;

    fn k3() -> (Graph, TieMatrix, PathTable) {
        let g = Graph::unlabeled(
            Tensor::filled(3, 2, 1.0),
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
        )
        .unwrap();
        let p = all_pairs_paths(&g, 3).unwrap();
        let t = tie_matrix_exact(&g, &p);
        (g, t, p)
    }

    #[test]
    fn similarity_anchors() {
        assert_eq!(similarity(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(similarity(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.5);
        assert_eq!(similarity(&[1.0, -2.0], &[-1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(similarity(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(similarity(&[1.0], &[1.0, 2.0]).is_err());
        assert!(similarity(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn lambda_range() {
        let (g, t, p) = k3();
        assert!(force_kernel(g.features(), &t, &p, 1.0 + 1e-9).is_err());
        assert!(force_kernel(g.features(), &t, &p, -0.1).is_err());
    }

    #[test]
    fn identical_features_on_k3() {
        let (g, t, p) = k3();
        let k = force_kernel(g.features(), &t, &p, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.values.get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn gating_threshold() {
        // s = 0.5 (orthogonal rows) and t = 0.8 on the single pair
        let sim = Tensor::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let ties = TieMatrix::from_tensor(
            Tensor::from_rows(&[vec![0.0, 0.8], vec![0.8, 0.0]]).unwrap(),
        )
        .unwrap();
        let g = Graph::unlabeled(Tensor::filled(2, 1, 1.0), &[(0, 1, 1.0)]).unwrap();
        let p = all_pairs_paths(&g, 1).unwrap();
        let (gate, mask) = gate_and_mask(&sim, &ties, &p, 0.5);
        assert!(!gate.is_open(0, 1));
        assert_eq!(mask.get(0, 1), 0.0);
        let (gate, mask) = gate_and_mask(&sim, &ties, &p, 0.3);
        assert!(gate.is_open(0, 1));
        assert!((sim.get(0, 1) * mask.get(0, 1) - 0.4).abs() < 1e-15);

        let feats = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let k = force_kernel(&feats, &ties, &p, 0.3).unwrap();
        assert!((k.values.get(0, 1) - 0.4).abs() < 1e-15);
        let k = force_kernel(&feats, &ties, &p, 0.5).unwrap();
        assert_eq!(k.values.get(0, 1), 0.0);
    }

    #[test]
    fn full_gate_at_lambda_one() {
        let g = Graph::unlabeled(
            Tensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(),
            &[(0, 1, 1.0), (1, 2, 1.0)],
        )
        .unwrap();
        let p = all_pairs_paths(&g, 2).unwrap();
        let t = tie_matrix_exact(&g, &p);
        let k = force_kernel(g.features(), &t, &p, 1.0).unwrap();
        assert!(k.values.data().iter().all(|&x| x == 0.0));
        assert!(receptive_field(&k, 1).is_empty());
    }

    #[test]
    fn group_force_on_k3() {
        let (g, t, p) = k3();
        let k = force_kernel(g.features(), &t, &p, 0.0).unwrap();
        let m = membership(&[Some(0), Some(0), Some(1)], 2).unwrap();
        let gf = group_force(&k, &m).unwrap();
        assert_eq!(gf.values.row(0), &[1.0, 1.0]);
        assert_eq!(gf.values.row(2), &[2.0, 0.0]);

        let m = membership(&[Some(0), None, Some(1)], 2).unwrap();
        let gf = group_force(&k, &m).unwrap();
        assert_eq!(gf.values.row(0), &[0.0, 1.0]);

        let zero = ForceKernel {
            values: Tensor::zeros(3, 3),
            gate: Gate::closed(3),
            lambda: 0.0,
        };
        let gf = group_force(&zero, &m).unwrap();
        assert!(gf.values.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn group_force_rejects_bad_membership() {
        let (g, t, p) = k3();
        let k = force_kernel(g.features(), &t, &p, 0.0).unwrap();
        let bad = Tensor::from_rows(&[vec![0.5, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(group_force(&k, &bad).is_err());
        let two = Tensor::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(group_force(&k, &two).is_err());
        assert!(group_force(&k, &Tensor::zeros(2, 2)).is_err());
    }

    #[test]
    fn receptive_field_full_at_zero_lambda() {
        let (g, t, p) = k3();
        let k = force_kernel(g.features(), &t, &p, 0.0).unwrap();
        assert_eq!(receptive_field(&k, 0), vec![1, 2]);
    }
}
