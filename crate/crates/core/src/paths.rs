//! Bounded-hop shortest paths between all ordered vertex pairs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;

const UNREACHED: u8 = u8::MAX;
const NO_PARENT: u32 = u32::MAX;

/// One hop-shortest path per ordered pair `(i, j)`, `i ≠ j`, within `H`
/// hops. Among equal-length paths the lexicographically smallest vertex
/// sequence `[i, …, j]` is kept.
///
/// Stored as a BFS parent forest per source: the path to `j` is the path to
/// `parent(j)` followed by `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathTable {
    n: usize,
    max_hops: usize,
    dist: Vec<u8>,
    parent: Vec<u32>,
}

impl PathTable {
    pub fn build(g: &Graph, max_hops: usize) -> Result<Self> {
        if max_hops == 0 || max_hops >= UNREACHED as usize {
            return Err(Error::invalid(format!(
                "hop radius must lie in 1..{}, got {max_hops}",
                UNREACHED
            )));
        }
        let n = g.n_vertices();
        if n > NO_PARENT as usize {
            return Err(Error::invalid("graph too large for the path table"));
        }
        let mut dist = vec![UNREACHED; n * n];
        let mut parent = vec![NO_PARENT; n * n];

        #[cfg(feature = "parallel")]
        let chunks = dist.par_chunks_mut(n.max(1)).zip(parent.par_chunks_mut(n.max(1)));
        #[cfg(not(feature = "parallel"))]
        let chunks = dist.chunks_mut(n.max(1)).zip(parent.chunks_mut(n.max(1)));

        chunks
            .enumerate()
            .for_each(|(s, (d, p))| bfs_from(g, s, max_hops, d, p));

        Ok(Self {
            n,
            max_hops,
            dist,
            parent,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn max_hops(&self) -> usize {
        self.max_hops
    }

    /// Hop distance, `Some(0)` for `i == j`, `None` beyond the radius.
    pub fn hop_distance(&self, i: usize, j: usize) -> Option<usize> {
        match self.dist[i * self.n + j] {
            UNREACHED => None,
            d => Some(d as usize),
        }
    }

    /// True when `i ≠ j` and `j` lies within the hop radius of `i`.
    pub fn reachable(&self, i: usize, j: usize) -> bool {
        i != j && self.dist[i * self.n + j] != UNREACHED
    }

    /// Predecessor of `j` on the stored path from `i`.
    pub fn parent(&self, i: usize, j: usize) -> Option<usize> {
        match self.parent[i * self.n + j] {
            NO_PARENT => None,
            p => Some(p as usize),
        }
    }

    /// Stored path `[i, …, j]`, or `None` when `i == j` or out of range.
    pub fn path(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        if !self.reachable(i, j) {
            return None;
        }
        let mut out = vec![j];
        let mut cur = j;
        while let Some(p) = self.parent(i, cur) {
            out.push(p);
            cur = p;
        }
        out.reverse();
        Some(out)
    }

    /// Number of ordered reachable pairs.
    pub fn n_pairs(&self) -> usize {
        (0..self.n)
            .map(|i| (0..self.n).filter(|&j| self.reachable(i, j)).count())
            .sum()
    }
}

/// Level-synchronous BFS. The frontier is kept ordered by the rank of each
/// vertex's stored path; expanding it in that order with sorted adjacency
/// lists makes the first discovery of every vertex the lexicographically
/// smallest one.
fn bfs_from(g: &Graph, s: usize, max_hops: usize, dist: &mut [u8], parent: &mut [u32]) {
    dist[s] = 0;
    let mut frontier = vec![s];
    let mut next = Vec::new();
    for level in 1..=max_hops {
        next.clear();
        for &u in &frontier {
            for &(v, _) in g.neighbors(u) {
                if dist[v] == UNREACHED {
                    dist[v] = level as u8;
                    parent[v] = u as u32;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        std::mem::swap(&mut frontier, &mut next);
    }
}

/// All ordered pairs' bounded-hop shortest paths.
pub fn all_pairs_paths(g: &Graph, max_hops: usize) -> Result<PathTable> {
    PathTable::build(g, max_hops)
}
