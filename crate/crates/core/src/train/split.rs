use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Disjoint vertex sets, each sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class shuffled split of the labelled vertices. Every class present
/// keeps at least one training vertex.
pub fn stratified_split(g: &Graph, fracs: [f64; 3], rng: &mut impl Rng) -> Result<Split> {
    let k = g.n_classes();
    let mut by_class = vec![Vec::new(); k];
    for (v, l) in g.labels().iter().enumerate() {
        if let Some(l) = l {
            by_class[*l].push(v);
        }
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!("class {c} has no labelled vertices")));
    }
    let mut split = Split::default();
    for mut members in by_class {
        members.shuffle(rng);
        let n = members.len();
        let take = |f: f64| (f * n as f64).round() as usize;
        let n_train = take(fracs[0]).clamp(1, n);
        let n_val = take(fracs[1]).min(n - n_train);
        let n_test = take(fracs[2]).min(n - n_train - n_val);
        split.train.extend_from_slice(&members[..n_train]);
        split.val.extend_from_slice(&members[n_train..n_train + n_val]);
        split.test.extend_from_slice(&members[n_train + n_val..n_train + n_val + n_test]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    if split.val.is_empty() {
        return Err(Error::invalid("split leaves no validation vertices"));
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn proportions_per_class() {
        let labels = (0..20).map(|v| Some(v % 2)).collect();
        let g = Graph::new(Tensor::filled(20, 1, 1.0), &[], labels, 2).unwrap();
        let s = stratified_split(&g, [0.6, 0.2, 0.2], &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (12, 4, 4));
        let count = |xs: &[usize]| xs.iter().filter(|&&v| v % 2 == 0).count();
        assert_eq!(count(&s.train), 6);
        let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn seeded() {
        let labels = (0..30).map(|v| Some(v % 3)).collect();
        let g = Graph::new(Tensor::filled(30, 1, 1.0), &[], labels, 3).unwrap();
        let a = stratified_split(&g, [0.6, 0.2, 0.2], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = stratified_split(&g, [0.6, 0.2, 0.2], &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_class_rejected() {
        let g = Graph::new(Tensor::filled(3, 1, 1.0), &[], vec![Some(0), Some(0), None], 2).unwrap();
        assert!(stratified_split(&g, [0.6, 0.2, 0.2], &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
