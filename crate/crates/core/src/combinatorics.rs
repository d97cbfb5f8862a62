//! Labeled graphs on small vertex sets, spanning trees, and connected-graph
//! sums such as the hard-core Ursell coefficients.
//!
//! A graph on `[k] = {0, .., k-1}` is an edge bitmask over the `k(k-1)/2`
//! vertex pairs, ordered `(0,1), (0,2), .., (0,k-1), (1,2), ..`.

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest vertex count handled by the graph enumerations.
pub const MAX_VERTICES: usize = 8;

/// Connected graphs are materialized and cached up to this many vertices;
/// larger `k` is streamed.
pub const CACHED_VERTICES: usize = 7;

/// A simple graph on `[k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Graph {
    k: u8,
    mask: u32,
}

/// Number of vertex pairs on `k` vertices.
pub fn pair_count(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Bit index of the pair `{i, j}`, `i != j`.
pub fn pair_index(k: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    a * (2 * k - a - 1) / 2 + (b - a - 1)
}

fn pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, j))).collect()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain("graphs need at least one vertex".into()));
    }
    if k > MAX_VERTICES {
        return Err(Error::capacity(
            format!("graphs on {k} vertices (2^{} edge subsets)", pair_count(k)),
            1u128 << pair_count(k).min(127),
            1u128 << pair_count(MAX_VERTICES),
        ));
    }
    Ok(())
}

// neighbor bitmask of every vertex
fn adjacency(k: usize, mask: u32) -> [u8; MAX_VERTICES] {
    let mut adj = [0u8; MAX_VERTICES];
    let mut bit = 0;
    for i in 0..k {
        for j in (i + 1)..k {
            if mask >> bit & 1 == 1 {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
            bit += 1;
        }
    }
    adj
}

fn connected_mask(k: usize, mask: u32) -> bool {
    let adj = adjacency(k, mask);
    let all: u8 = if k == 8 { u8::MAX } else { (1u8 << k) - 1 };
    let mut seen = 1u8;
    let mut frontier = 1u8;
    while frontier != 0 {
        let mut next = 0u8;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[v];
        }
        frontier = next & !seen;
        seen |= next;
    }
    seen == all
}

impl Graph {
    pub fn new(k: usize, edges: &[(usize, usize)]) -> Result<Self> {
        check_k(k)?;
        let mut mask = 0u32;
        for &(i, j) in edges {
            if i >= k || j >= k || i == j {
                return Err(Error::Domain(format!("invalid edge ({i},{j}) on {k} vertices")));
            }
            let bit = 1 << pair_index(k, i, j);
            if mask & bit != 0 {
                return Err(Error::Domain(format!("duplicate edge ({i},{j})")));
            }
            mask |= bit;
        }
        Ok(Graph { k: k as u8, mask })
    }

    pub fn from_mask(k: usize, mask: u32) -> Result<Self> {
        check_k(k)?;
        if pair_count(k) < 32 && mask >> pair_count(k) != 0 {
            return Err(Error::Domain("mask has bits beyond the pair slots".into()));
        }
        Ok(Graph { k: k as u8, mask })
    }

    pub fn vertex_count(&self) -> usize {
        self.k as usize
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn edge_count(&self) -> u32 {
        self.mask.count_ones()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        pairs(self.k as usize)
            .into_iter()
            .enumerate()
            .filter(|(b, _)| self.mask >> b & 1 == 1)
            .map(|(_, e)| e)
            .collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.mask >> pair_index(self.k as usize, i, j) & 1 == 1
    }

    pub fn is_connected(&self) -> bool {
        connected_mask(self.k as usize, self.mask)
    }

    /// Connected with `k - 1` edges.
    pub fn is_tree(&self) -> bool {
        self.edge_count() as usize + 1 == self.k as usize && self.is_connected()
    }

    /// Vertices touched by at least one edge.
    pub fn covered_vertices(&self) -> BTreeSet<usize> {
        self.edges().into_iter().flat_map(|(i, j)| [i, j]).collect()
    }
}

fn cache() -> &'static [OnceLock<Arc<Vec<u32>>>; CACHED_VERTICES] {
    static CACHE: OnceLock<[OnceLock<Arc<Vec<u32>>>; CACHED_VERTICES]> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn connected_masks(k: usize) -> Arc<Vec<u32>> {
    cache()[k - 1]
        .get_or_init(|| {
            let total = 1u64 << pair_count(k);
            Arc::new(
                (0..total)
                    .into_par_iter()
                    .map(|m| m as u32)
                    .filter(|&m| connected_mask(k, m))
                    .collect(),
            )
        })
        .clone()
}

/// All connected labeled graphs on `[k]`, each exactly once, in increasing
/// mask order.
pub struct ConnectedGraphs {
    k: usize,
    source: Source,
}

enum Source {
    Cached(Arc<Vec<u32>>, usize),
    Stream(u64, u64),
}

impl Iterator for ConnectedGraphs {
    type Item = Graph;

    fn next(&mut self) -> Option<Graph> {
        let k = self.k as u8;
        match &mut self.source {
            Source::Cached(list, pos) => {
                let m = *list.get(*pos)?;
                *pos += 1;
                Some(Graph { k, mask: m })
            }
            Source::Stream(next, end) => {
                while *next < *end {
                    let m = *next as u32;
                    *next += 1;
                    if connected_mask(self.k, m) {
                        return Some(Graph { k, mask: m });
                    }
                }
                None
            }
        }
    }
}

/// Connected labeled graphs on `k ≤ 8` vertices. Cached for
/// `k ≤` [`CACHED_VERTICES`]; `k = 8` (251 548 592 graphs) is filtered
/// lazily from the `2^28` edge subsets.
pub fn connected_graphs(k: usize) -> Result<ConnectedGraphs> {
    check_k(k)?;
    let source = if k <= CACHED_VERTICES {
        Source::Cached(connected_masks(k), 0)
    } else {
        Source::Stream(0, 1u64 << pair_count(k))
    };
    Ok(ConnectedGraphs { k, source })
}

/// `|connected_graphs(k)|` by brute-force filtering.
pub fn connected_graph_count(k: usize) -> Result<u64> {
    check_k(k)?;
    if k <= CACHED_VERTICES {
        return Ok(connected_masks(k).len() as u64);
    }
    Ok((0..1u64 << pair_count(k))
        .into_par_iter()
        .filter(|&m| connected_mask(k, m as u32))
        .count() as u64)
}

/// All labeled trees on `[k]`: the acyclic `(k-1)`-edge subsets.
pub fn spanning_trees(k: usize) -> Result<Vec<Graph>> {
    check_k(k)?;
    static CACHE: OnceLock<Vec<OnceLock<Vec<Graph>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..MAX_VERTICES).map(|_| OnceLock::new()).collect());
    Ok(cache[k - 1]
        .get_or_init(|| {
            let edges = pairs(k);
            let mut out = Vec::new();
            let mut chosen = Vec::with_capacity(k);
            choose_acyclic(k, &edges, 0, &mut chosen, &mut out);
            out.sort();
            out
        })
        .clone())
}

fn choose_acyclic(k: usize, edges: &[(usize, usize)], from: usize, chosen: &mut Vec<usize>, out: &mut Vec<Graph>) {
    if chosen.len() + 1 == k {
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut mask = 0u32;
        for &b in chosen.iter() {
            let (i, j) = edges[b];
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri == rj {
                return;
            }
            parent[ri] = rj;
            mask |= 1 << b;
        }
        out.push(Graph { k: k as u8, mask });
        return;
    }
    for b in from..edges.len() {
        chosen.push(b);
        choose_acyclic(k, edges, b + 1, chosen, out);
        chosen.pop();
    }
}

/// Row of the graph-count table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphCounts {
    pub k: usize,
    pub graphs: u64,
    pub connected: u64,
    pub trees: u64,
}

/// Counts of all, connected and tree graphs for `k = 1..=kmax`.
pub fn graph_table(kmax: usize) -> Result<Vec<GraphCounts>> {
    (1..=kmax)
        .map(|k| {
            Ok(GraphCounts {
                k,
                graphs: 1u64 << pair_count(k),
                connected: connected_graph_count(k)?,
                trees: spanning_trees(k)?.len() as u64,
            })
        })
        .collect()
}

/// `Σ_{g connected on [k]} Π_{{i,j} ∈ g} f_ij` for a symmetric row-major
/// `k × k` weight matrix with entries `≥ −1`.
///
/// Rooting at the largest vertex `v` of `U`, the rest of a connected graph
/// splits into components `B`, each joined to `v` by a nonempty edge set:
/// `C(U) = Σ_{partitions of U∖v} Π_B C(B) (Π_{u∈B}(1 + f_vu) − 1)`.
/// Every factor is formed without subtraction (the bracket via
/// `expm1(Σ ln(1 + f))`), so small weights keep full relative accuracy.
/// Cost `O(3^k)`.
pub fn connected_graph_sum(k: usize, f: &[f64]) -> f64 {
    assert_eq!(f.len(), k * k, "weight matrix must be k × k");
    assert!((1..32).contains(&k), "vertex count out of range");
    let mut conn = vec![0.0; 1usize << k];
    let mut log_link = vec![0.0; 1usize << (k - 1)];
    let mut link = vec![0.0; 1usize << (k - 1)];
    let mut rest = vec![0.0; 1usize << (k - 1)];
    for v in 0..k {
        let below = 1usize << v;
        // link[B] = Π_{u∈B}(1 + f_vu) − 1 for B ⊆ {0..v−1}
        for b in 1..below {
            let u = b.trailing_zeros() as usize;
            log_link[b] = log_link[b & (b - 1)] + f[v * k + u].ln_1p();
            link[b] = log_link[b].exp_m1();
        }
        // rest[W] = Σ over partitions of W into linked connected blocks
        rest[0] = 1.0;
        for w in 1..below {
            let low = w & w.wrapping_neg();
            let others = w ^ low;
            let mut acc = 0.0;
            let mut sub = others;
            loop {
                let blk = sub | low;
                acc += conn[blk] * link[blk] * rest[w ^ blk];
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & others;
            }
            rest[w] = acc;
        }
        for w in 0..below {
            conn[w | below] = rest[w];
        }
    }
    conn[(1usize << k) - 1]
}

/// Definitional form of [`connected_graph_sum`]: the explicit sum over
/// connected graphs (test oracle, `k ≤ 8`).
pub fn connected_graph_sum_by_definition(k: usize, f: &[f64]) -> Result<f64> {
    assert_eq!(f.len(), k * k, "weight matrix must be k × k");
    let edge_weights: Vec<f64> = pairs(k).iter().map(|&(i, j)| f[i * k + j]).collect();
    let mut total = crate::numeric::NeumaierSum::new();
    for g in connected_graphs(k)? {
        let mut p = 1.0;
        let mut m = g.mask;
        while m != 0 {
            let b = m.trailing_zeros() as usize;
            m &= m - 1;
            p *= edge_weights[b];
        }
        total.add(p);
    }
    Ok(total.value())
}

fn hardcore_weights<T: Ord>(polymers: &[BTreeSet<T>]) -> Result<Vec<f64>> {
    let k = polymers.len();
    check_k(k)?;
    if polymers.iter().any(BTreeSet::is_empty) {
        return Err(Error::Domain("polymers must be nonempty".into()));
    }
    let mut f = vec![0.0; k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            if !polymers[i].is_disjoint(&polymers[j]) {
                f[i * k + j] = -1.0;
                f[j * k + i] = -1.0;
            }
        }
    }
    Ok(f)
}

/// Hard-core Ursell coefficient `φᵀ(R_1, .., R_k)`: the sum over connected
/// graphs on `[k]` of `Π (−1)` over edges joining intersecting polymers
/// (zero if any edge joins disjoint ones).
pub fn ursell_hardcore<T: Ord>(polymers: &[BTreeSet<T>]) -> Result<f64> {
    let f = hardcore_weights(polymers)?;
    Ok(connected_graph_sum(polymers.len(), &f))
}

/// [`ursell_hardcore`] evaluated by its definition (test oracle).
pub fn ursell_hardcore_by_definition<T: Ord>(polymers: &[BTreeSet<T>]) -> Result<f64> {
    let f = hardcore_weights(polymers)?;
    connected_graph_sum_by_definition(polymers.len(), &f)
}

/// Whether the intersection graph of the polymers is connected.
pub fn intersection_connected<T: Ord>(polymers: &[BTreeSet<T>]) -> bool {
    let k = polymers.len();
    if k == 0 {
        return false;
    }
    let mut seen = vec![false; k];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..k {
            if !seen[j] && !polymers[i].is_disjoint(&polymers[j]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[i64]) -> BTreeSet<i64> {
        v.iter().copied().collect()
    }

    #[test]
    fn connected_counts() {
        let expected = [1u64, 1, 4, 38, 728, 26704];
        for (k, e) in (1..=6).zip(expected) {
            assert_eq!(connected_graph_count(k).unwrap(), e, "k={k}");
            assert_eq!(connected_graphs(k).unwrap().count() as u64, e);
        }
    }

    #[test]
    fn single_vertex_graph_is_empty() {
        let g: Vec<_> = connected_graphs(1).unwrap().collect();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].edge_count(), 0);
    }

    #[test]
    fn tree_counts() {
        assert_eq!(spanning_trees(1).unwrap().len(), 1);
        assert_eq!(spanning_trees(2).unwrap().len(), 1);
        assert_eq!(spanning_trees(3).unwrap().len(), 3);
        assert_eq!(spanning_trees(4).unwrap().len(), 16);
        for t in spanning_trees(5).unwrap() {
            assert!(t.is_tree());
        }
    }

    #[test]
    fn out_of_range_is_capacity() {
        assert!(matches!(connected_graphs(9), Err(Error::Capacity { .. })));
        assert!(matches!(spanning_trees(9), Err(Error::Capacity { .. })));
        let many: Vec<BTreeSet<i64>> = (0..9).map(|_| set(&[0])).collect();
        assert!(matches!(ursell_hardcore(&many), Err(Error::Capacity { .. })));
    }

    #[test]
    fn ursell_examples() {
        assert_eq!(ursell_hardcore(&[set(&[1, 2])]).unwrap(), 1.0);
        assert_eq!(ursell_hardcore(&[set(&[1]), set(&[2])]).unwrap(), 0.0);
        assert_eq!(ursell_hardcore(&[set(&[1, 2]), set(&[2])]).unwrap(), -1.0);
        let same = vec![set(&[0, 1]); 3];
        assert_eq!(ursell_hardcore(&same).unwrap(), 2.0);
    }

    #[test]
    fn edge_helpers() {
        let g = Graph::new(4, &[(0, 1), (2, 3), (1, 2)]).unwrap();
        assert!(g.is_tree());
        assert!(g.has_edge(2, 1));
        assert_eq!(g.edges(), vec![(0, 1), (1, 2), (2, 3)]);
        assert!(Graph::new(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(3, &[(1, 1)]).is_err());
        assert_eq!(pair_index(4, 2, 3), 5);
    }
}
