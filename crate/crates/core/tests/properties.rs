use proptest::prelude::*;

use gravity::autodiff::{grad_check, softmax_rows};
use gravity::net::{silhouette_scores, SilhouetteNorm, SilhouetteOpts, SilhouetteOut};
use gravity::{
    all_pairs_paths, force_kernel, tie_matrix_exact, tie_metrics, AdamConfig, Graph, ParamStore, Tensor, TieMatrix,
};

type Edges = Vec<(usize, usize, f64)>;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = (usize, Edges)> {
    (2..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (
            Just(n),
            prop::collection::vec(prop::option::weighted(0.4, 0.1f64..5.0), pairs),
        )
            .prop_map(|(n, ws)| {
                let mut edges = Vec::new();
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        if let Some(w) = ws[k] {
                            edges.push((i, j, w));
                        }
                        k += 1;
                    }
                }
                (n, edges)
            })
    })
}

fn graph(n: usize, edges: &[(usize, usize, f64)], dim: usize, feats: &[f64]) -> Graph {
    let x = Tensor::from_vec(n, dim, feats[..n * dim].to_vec()).unwrap();
    Graph::unlabeled(x, edges).unwrap()
}

fn unit_features(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

/// Hop distances by Floyd–Warshall on unit lengths.
fn floyd(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<usize>> {
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(i, j, _) in edges {
        d[i][j] = 1;
        d[j][i] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    d
}

fn tensor(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| Tensor::from_vec(rows, cols, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hop_distance_matches_floyd((n, edges) in graph_strategy(9), h in 1usize..5) {
        let g = graph(n, &edges, 1, &unit_features(n));
        let p = all_pairs_paths(&g, h).unwrap();
        let d = floyd(n, &edges);
        for i in 0..n {
            for j in 0..n {
                let want = (i != j && d[i][j] <= h).then_some(d[i][j]);
                prop_assert_eq!(p.hop_distance(i, j).filter(|_| i != j), want);
                prop_assert_eq!(p.reachable(i, j), p.reachable(j, i));
                if let Some(path) = p.path(i, j).filter(|_| i != j) {
                    prop_assert_eq!(path.len(), d[i][j] + 1);
                    prop_assert_eq!(path[0], i);
                    prop_assert_eq!(*path.last().unwrap(), j);
                    prop_assert!(path.windows(2).all(|e| g.has_edge(e[0], e[1])));
                }
            }
        }
    }

    #[test]
    fn ties_bounded_and_supported((n, edges) in graph_strategy(9), h in 1usize..5) {
        let g = graph(n, &edges, 1, &unit_features(n));
        let p = all_pairs_paths(&g, h).unwrap();
        let t = tie_matrix_exact(&g, &p);
        for i in 0..n {
            prop_assert_eq!(t.get(i, i), 0.0);
            for j in 0..n {
                let x = t.get(i, j);
                prop_assert!((0.0..=1.0).contains(&x));
                if i != j {
                    prop_assert_eq!(x > 0.0, p.reachable(i, j));
                }
            }
        }
        // along an edge the lighter endpoint always sees a full tie
        for &(i, j, _) in &edges {
            prop_assert_eq!(t.get(i, j).max(t.get(j, i)), 1.0);
        }
    }

    #[test]
    fn weight_rescaling_leaves_ties_unchanged((n, edges) in graph_strategy(8), c in 0.01f64..100.0) {
        let g = graph(n, &edges, 1, &unit_features(n));
        let gs = g.with_scaled_weights(c).unwrap();
        let a = tie_matrix_exact(&g, &all_pairs_paths(&g, 3).unwrap());
        let b = tie_matrix_exact(&gs, &all_pairs_paths(&gs, 3).unwrap());
        prop_assert!(a.values().max_abs_diff(b.values()) <= 1e-12);
    }

    #[test]
    fn gate_shrinks_as_lambda_grows(
        (n, edges) in graph_strategy(8),
        feats in prop::collection::vec(-1.0f64..1.0, 8 * 3),
        l1 in 0.0f64..=1.0,
        l2 in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let g = graph(n, &edges, 3, &feats);
        let p = all_pairs_paths(&g, 3).unwrap();
        let t = tie_matrix_exact(&g, &p);
        let a = force_kernel(g.features(), &t, &p, lo).unwrap();
        let b = force_kernel(g.features(), &t, &p, hi).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!(!b.gate.is_open(i, j) || a.gate.is_open(i, j));
                prop_assert!(a.values.get(i, j) >= b.values.get(i, j));
            }
        }
    }

    #[test]
    fn softmax_rows_are_distributions(x in tensor(4, 5), c in -50.0f64..50.0) {
        let s = softmax_rows(&x);
        let shifted = softmax_rows(&x.map(|v| v + c));
        for r in 0..4 {
            prop_assert!((s.row(r).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(s.row(r).iter().all(|&p| p > 0.0));
        }
        prop_assert!(s.max_abs_diff(&shifted) <= 1e-12);
    }

    #[test]
    fn mae_squared_at_most_mse(
        a in prop::collection::vec(0.0f64..1.0, 36),
        b in prop::collection::vec(0.0f64..1.0, 36),
    ) {
        let zero_diag = |v: Vec<f64>| {
            let mut t = Tensor::from_vec(6, 6, v).unwrap();
            for i in 0..6 {
                t.set(i, i, 0.0);
            }
            TieMatrix::from_tensor(t).unwrap()
        };
        let m = tie_metrics(&zero_diag(a), &zero_diag(b)).unwrap();
        prop_assert!(m.mae * m.mae <= m.mse + 1e-15);
    }

    #[test]
    fn silhouette_scores_bounded(
        y in tensor(8, 3),
        labels in prop::collection::vec(0usize..3, 8),
        sum in any::<bool>(),
        nearest in any::<bool>(),
    ) {
        // every class needs a member
        let mut labels: Vec<Option<usize>> = labels.into_iter().map(Some).collect();
        for c in 0..3 {
            labels[c] = Some(c);
        }
        let opts = SilhouetteOpts {
            norm: if sum { SilhouetteNorm::Sum } else { SilhouetteNorm::Mean },
            out: if nearest { SilhouetteOut::Nearest } else { SilhouetteOut::Farthest },
        };
        let all: Vec<usize> = (0..8).collect();
        let s = silhouette_scores(&y, &labels, &all, opts).unwrap();
        prop_assert!(s.iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn first_adam_step_moves_by_lr_times_sign(
        w in tensor(3, 2),
        g in prop::collection::vec(prop_oneof![-10.0f64..-1e-3, 1e-3f64..10.0], 6),
    ) {
        let mut p = ParamStore::new();
        p.insert("w", w.clone());
        p.add_grad("w", &Tensor::from_vec(3, 2, g.clone()).unwrap()).unwrap();
        p.adam_step(&AdamConfig::new(0.01, 0.0)).unwrap();
        let after = p.value("w").unwrap();
        for k in 0..6 {
            let step = after.data()[k] - w.data()[k];
            prop_assert!((step + 0.01 * g[k].signum()).abs() <= 1e-7);
        }
        prop_assert!(p.grad("w").unwrap().data().iter().all(|&x| x == 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smooth_ops_pass_gradient_check(a in tensor(3, 4), b in tensor(4, 2), bias in tensor(1, 2), c in tensor(3, 2)) {
        let mut p = ParamStore::new();
        p.insert("a", a);
        p.insert("b", b);
        p.insert("bias", bias);
        let report = grad_check(
            |t, ps| {
                let (a, b, bias) = (t.param(ps, "a")?, t.param(ps, "b")?, t.param(ps, "bias")?);
                let c = t.constant(c.clone())?;
                let h = t.matmul(a, b)?;
                let h = t.add_row(h, bias)?;
                let u = t.tanh(h)?;
                let v = t.sigmoid(h)?;
                let w = t.softmax_rows(h)?;
                let x = t.propagate(a, b)?;
                let s = t.cosine_sim(a)?;
                let z = t.mul(u, c)?;
                let z = t.add(z, v)?;
                let z = t.sub(z, w)?;
                let z = t.mul(z, x)?;
                let z = t.sum(z)?;
                let s = t.row_sum(s)?;
                let s = t.sum(s)?;
                let s = t.scale(s, 0.5)?;
                t.add(z, s)
            },
            &p,
            1e-6,
            1e-5,
        )
        .unwrap();
        prop_assert!(report.passed, "max rel err {}", report.max_rel_err);
    }
}
