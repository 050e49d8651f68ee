//! Scenario ingredients: similarity graphs from edge lists or random
//! generation, Zipf popularity and most-popular cache placement.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use petgraph::unionfind::UnionFind;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::rng_for;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("{0}")]
    Parameter(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Degree statistics of an undirected graph, counting each edge as two arcs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub arcs: usize,
    pub mean_neighbors: f64,
    pub std_neighbors: f64,
}

/// Counts nonzero off-diagonal entries per row.
pub fn graph_stats(u: &DMatrix<f64>) -> GraphStats {
    let nodes = u.nrows();
    let degrees: Vec<usize> =
        (0..nodes).map(|i| (0..u.ncols()).filter(|&j| j != i && u[(i, j)] != 0.0).count()).collect();
    let arcs: usize = degrees.iter().sum();
    let mean = if nodes == 0 { 0.0 } else { arcs as f64 / nodes as f64 };
    let var = if nodes == 0 {
        0.0
    } else {
        degrees.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / nodes as f64
    };
    GraphStats { nodes, arcs, mean_neighbors: mean, std_neighbors: var.sqrt() }
}

/// Whether saturation happens before or after keeping the largest component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentOrder {
    #[default]
    SaturateFirst,
    ComponentFirst,
}

impl FromStr for ComponentOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "saturate-first" => Ok(ComponentOrder::SaturateFirst),
            "component-first" => Ok(ComponentOrder::ComponentFirst),
            other => Err(format!("unknown order `{other}` (saturate-first or component-first)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Weights above this become 1, the rest are dropped. Negative keeps raw
    /// weights.
    pub threshold: f64,
    pub order: ComponentOrder,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { threshold: -1.0, order: ComponentOrder::SaturateFirst }
    }
}

/// A similarity matrix over the kept nodes, with their original ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub u: DMatrix<f64>,
    /// `ids[k]` is the edge-list id of catalog item `k`.
    pub ids: Vec<u64>,
    pub stats: GraphStats,
}

/// Reads a whitespace-separated `i j [w]` edge list.
pub fn load_edgelist(path: &Path, opts: IngestOptions) -> Result<Graph, DataError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    parse_edgelist(&text, opts)
}

/// As [`load_edgelist`], from text.
///
/// Ids are remapped to `0..K` in increasing order. Self-loops are ignored and
/// repeated or reversed pairs keep the larger weight, so the result is
/// symmetric.
pub fn parse_edgelist(text: &str, opts: IngestOptions) -> Result<Graph, DataError> {
    let mut edges: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| DataError::Malformed { line: idx + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(bad(format!("expected `i j [w]`, found {} fields", fields.len())));
        }
        let id = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("bad node id `{s}`")));
        let (a, b) = (id(fields[0])?, id(fields[1])?);
        let w = match fields.get(2) {
            Some(s) => s.parse::<f64>().map_err(|_| bad(format!("bad weight `{s}`")))?,
            None => 1.0,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(bad(format!("weight {w} must be finite and nonnegative")));
        }
        if opts.threshold < 0.0 && w > 1.0 {
            return Err(bad(format!("raw weight {w} exceeds 1")));
        }
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        let entry = edges.entry(key).or_insert(0.0);
        *entry = entry.max(w);
    }

    let saturate = |edges: &mut BTreeMap<(u64, u64), f64>| {
        if opts.threshold >= 0.0 {
            edges.retain(|_, w| *w > opts.threshold);
            edges.values_mut().for_each(|w| *w = 1.0);
        }
    };
    match opts.order {
        ComponentOrder::SaturateFirst => {
            saturate(&mut edges);
            edges.retain(|_, w| *w > 0.0);
            let keep = largest_component(&edges);
            edges.retain(|(a, _), _| keep.contains_key(a));
            build_graph(keep, &edges)
        }
        ComponentOrder::ComponentFirst => {
            edges.retain(|_, w| *w > 0.0);
            let keep = largest_component(&edges);
            edges.retain(|(a, _), _| keep.contains_key(a));
            saturate(&mut edges);
            build_graph(keep, &edges)
        }
    }
}

/// Nodes of the largest connected component (lowest smallest id on ties),
/// mapped to their new indices.
fn largest_component(edges: &BTreeMap<(u64, u64), f64>) -> BTreeMap<u64, usize> {
    let nodes: Vec<u64> = {
        let mut v: Vec<u64> = edges.keys().flat_map(|&(a, b)| [a, b]).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let pos: HashMap<u64, usize> = nodes.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut uf = UnionFind::<usize>::new(nodes.len());
    for &(a, b) in edges.keys() {
        uf.union(pos[&a], pos[&b]);
    }
    let labels = uf.into_labeling();
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in &labels {
        *sizes.entry(l).or_default() += 1;
    }
    // nodes are sorted, so the first label seen at the max size holds the smallest id
    let mut best: Option<usize> = None;
    for &l in &labels {
        if best.is_none_or(|b| sizes[&l] > sizes[&b]) {
            best = Some(l);
        }
    }
    nodes
        .iter()
        .zip(&labels)
        .filter(|(_, l)| Some(**l) == best)
        .enumerate()
        .map(|(k, (&id, _))| (id, k))
        .collect()
}

fn build_graph(keep: BTreeMap<u64, usize>, edges: &BTreeMap<(u64, u64), f64>) -> Result<Graph, DataError> {
    if edges.is_empty() {
        return Err(DataError::EmptyGraph);
    }
    let k = keep.len();
    let mut u = DMatrix::zeros(k, k);
    for (&(a, b), &w) in edges {
        let (i, j) = (keep[&a], keep[&b]);
        u[(i, j)] = w;
        u[(j, i)] = w;
    }
    let stats = graph_stats(&u);
    Ok(Graph { u, ids: keep.into_keys().collect(), stats })
}

/// Erdős–Rényi graph on `k` nodes with edge probability `mean_degree/(k−1)`.
pub fn gen_poisson_graph(k: usize, mean_degree: f64, seed: u64) -> Result<(DMatrix<f64>, GraphStats), DataError> {
    if k < 2 {
        return Err(DataError::Parameter(format!("need at least 2 nodes, got {k}")));
    }
    if !(0.0..=(k - 1) as f64).contains(&mean_degree) {
        return Err(DataError::Parameter(format!("mean degree {mean_degree} outside [0, {}]", k - 1)));
    }
    let p = mean_degree / (k - 1) as f64;
    let mut rng = rng_for(seed, 0);
    let mut u = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i + 1..k {
            if rng.gen_bool(p) {
                u[(i, j)] = 1.0;
                u[(j, i)] = 1.0;
            }
        }
    }
    let stats = graph_stats(&u);
    Ok((u, stats))
}

/// Zipf popularity with exponent `s`. Item `i` gets rank `i + 1` unless
/// `ranks` is given, in which case it gets rank `ranks[i] + 1`.
pub fn zipf_popularity(k: usize, s: f64, ranks: Option<&[usize]>) -> Result<DVector<f64>, DataError> {
    if k == 0 {
        return Err(DataError::Parameter("catalog is empty".into()));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(DataError::Parameter(format!("zipf exponent {s} must be finite and nonnegative")));
    }
    let weights: Vec<f64> = (1..=k).map(|r| (r as f64).powf(-s)).collect();
    // smallest terms first
    let total: f64 = weights.iter().rev().sum();
    let by_rank: Vec<f64> = weights.iter().map(|w| w / total).collect();
    match ranks {
        None => Ok(DVector::from_vec(by_rank)),
        Some(ranks) => {
            let mut seen = vec![false; k];
            if ranks.len() != k || ranks.iter().any(|&r| r >= k || std::mem::replace(&mut seen[r], true)) {
                return Err(DataError::Parameter("ranks must be a permutation of 0..K".into()));
            }
            Ok(DVector::from_fn(k, |i, _| by_rank[ranks[i]]))
        }
    }
}

/// A uniformly random rank permutation for [`zipf_popularity`].
pub fn random_ranks(k: usize, seed: u64) -> Vec<usize> {
    let mut ranks: Vec<usize> = (0..k).collect();
    ranks.shuffle(&mut rng_for(seed, 1));
    ranks
}

/// Caches the `c` most popular items (cost 0), lowest index first on ties;
/// everything else costs 1.
pub fn place_cache(p0: &DVector<f64>, c: usize) -> Result<DVector<f64>, DataError> {
    let k = p0.len();
    if c > k {
        return Err(DataError::Parameter(format!("cache size {c} exceeds catalog size {k}")));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| p0[b].total_cmp(&p0[a]).then(a.cmp(&b)));
    let mut costs = DVector::from_element(k, 1.0);
    for &i in &order[..c] {
        costs[i] = 0.0;
    }
    Ok(costs)
}

/// Zipf click probabilities over `n` slots: `v_m ∝ m^(−exponent)`.
pub fn zipf_clicks(n: usize, exponent: f64) -> Result<Vec<f64>, DataError> {
    Ok(zipf_popularity(n, exponent, None)?.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn thresholded(t: f64) -> IngestOptions {
        IngestOptions { threshold: t, ..Default::default() }
    }

    #[test]
    fn saturation_drops_weak_edges_and_small_components() {
        let g = parse_edgelist("1 2 0.5\n2 3 0.05\n", thresholded(0.1)).unwrap();
        assert_eq!(g.ids, vec![1, 2]);
        assert_eq!(g.u, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(g.stats, GraphStats { nodes: 2, arcs: 2, mean_neighbors: 1.0, std_neighbors: 0.0 });
    }

    #[test]
    fn component_first_keeps_nodes_joined_by_weak_edges() {
        let opts = IngestOptions { threshold: 0.1, order: ComponentOrder::ComponentFirst };
        let g = parse_edgelist("1 2 0.5\n2 3 0.05\n", opts).unwrap();
        assert_eq!(g.ids, vec![1, 2, 3]);
        assert_eq!(g.stats.arcs, 2);
        let g = parse_edgelist("1 2 0.5\n2 3 0.05\n3 4 0.9\n", opts).unwrap();
        assert_eq!(g.ids, vec![1, 2, 3, 4]);
        assert_eq!(g.stats.arcs, 4);
    }

    #[test]
    fn raw_weights_pass_through_and_symmetrize_by_max() {
        let g = parse_edgelist("# header\n0 1 0.3\n1 0 0.7\n1 2\n2 2 0.9\n", IngestOptions::default()).unwrap();
        assert_eq!(g.u[(0, 1)], 0.7);
        assert_eq!(g.u[(1, 0)], 0.7);
        assert_eq!(g.u[(1, 2)], 1.0);
        assert_eq!(g.u[(2, 2)], 0.0);
    }

    #[test]
    fn largest_component_wins() {
        let g = parse_edgelist("10 11\n20 21\n21 22\n", IngestOptions::default()).unwrap();
        assert_eq!(g.ids, vec![20, 21, 22]);
        let tie = parse_edgelist("20 21\n10 11\n", IngestOptions::default()).unwrap();
        assert_eq!(tie.ids, vec![10, 11]);
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let err = parse_edgelist("0 1\n\n0 x\n", IngestOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 3, .. }), "{err}");
        assert!(matches!(parse_edgelist("0 1 2 3", IngestOptions::default()), Err(DataError::Malformed { line: 1, .. })));
        assert!(matches!(parse_edgelist("0 1 1.5", IngestOptions::default()), Err(DataError::Malformed { .. })));
        assert!(matches!(parse_edgelist("# nothing\n", IngestOptions::default()), Err(DataError::EmptyGraph)));
        assert!(matches!(parse_edgelist("0 1 0.01", thresholded(0.1)), Err(DataError::EmptyGraph)));
    }

    #[test]
    fn table_like_statistics() {
        let g = GraphStats { nodes: 757, arcs: 5964, mean_neighbors: 5964.0 / 757.0, std_neighbors: 0.0 };
        assert!((g.mean_neighbors - 7.87).abs() < 0.01);
    }

    #[test]
    fn poisson_graph_is_deterministic_and_symmetric() {
        let (a, sa) = gen_poisson_graph(200, 8.0, 4).unwrap();
        let (b, _) = gen_poisson_graph(200, 8.0, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, a.transpose());
        assert!((0..200).all(|i| a[(i, i)] == 0.0));
        assert!((sa.mean_neighbors - sa.arcs as f64 / 200.0).abs() < 1e-12);
        let (empty, s0) = gen_poisson_graph(50, 0.0, 1).unwrap();
        assert_eq!(s0.arcs, 0);
        assert!(empty.iter().all(|&x| x == 0.0));
        assert!(gen_poisson_graph(10, 9.5, 0).is_err());
    }

    #[test]
    fn zipf_examples() {
        let p = zipf_popularity(2, 1.0, None).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let flat = zipf_popularity(5, 0.0, None).unwrap();
        assert!(flat.iter().all(|&x| (x - 0.2).abs() < 1e-15));
        let permuted = zipf_popularity(3, 1.0, Some(&[2, 0, 1])).unwrap();
        let plain = zipf_popularity(3, 1.0, None).unwrap();
        assert_eq!(permuted[1], plain[0]);
        assert_eq!(permuted[0], plain[2]);
        assert!(zipf_popularity(3, 1.0, Some(&[0, 0, 1])).is_err());
        let r = random_ranks(50, 3);
        assert!(zipf_popularity(50, 0.8, Some(&r)).is_ok());
    }

    #[test]
    fn cache_placement_examples() {
        let p0 = DVector::from_vec(vec![0.5, 0.3, 0.2]);
        assert_eq!(place_cache(&p0, 1).unwrap().as_slice(), &[0.0, 1.0, 1.0]);
        assert_eq!(place_cache(&p0, 3).unwrap().as_slice(), &[0.0; 3]);
        assert_eq!(place_cache(&p0, 0).unwrap().as_slice(), &[1.0; 3]);
        let tied = DVector::from_vec(vec![0.25; 4]);
        assert_eq!(place_cache(&tied, 2).unwrap().as_slice(), &[0.0, 0.0, 1.0, 1.0]);
        assert!(place_cache(&p0, 4).is_err());
    }

    proptest! {
        #[test]
        fn zipf_is_a_positive_distribution(k in 1usize..2000, s in 0.0f64..3.0) {
            let p = zipf_popularity(k, s, None).unwrap();
            prop_assert!((p.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&x| x > 0.0));
            prop_assert!(p.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn cache_has_exactly_c_zeros(p in proptest::collection::vec(0.01f64..1.0, 1..30), frac in 0.0f64..=1.0) {
            let k = p.len();
            let c = ((k as f64) * frac) as usize;
            let costs = place_cache(&DVector::from_vec(p.clone()), c).unwrap();
            prop_assert_eq!(costs.iter().filter(|&&x| x == 0.0).count(), c);
            prop_assert!(costs.iter().all(|&x| x == 0.0 || x == 1.0));
            let min_cached = (0..k).filter(|&i| costs[i] == 0.0).map(|i| p[i]).fold(f64::INFINITY, f64::min);
            let max_missed = (0..k).filter(|&i| costs[i] == 1.0).map(|i| p[i]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min_cached >= max_missed);
        }

        #[test]
        fn ingested_graphs_are_symmetric_with_zero_diagonal(
            edges in proptest::collection::vec((0u64..15, 0u64..15, 0.0f64..1.0), 1..60),
            t in -1.0f64..0.9,
        ) {
            let text: String = edges.iter().map(|(a, b, w)| format!("{a} {b} {w}\n")).collect();
            match parse_edgelist(&text, thresholded(t)) {
                Ok(g) => {
                    let k = g.u.nrows();
                    prop_assert_eq!(&g.u, &g.u.transpose());
                    prop_assert!((0..k).all(|i| g.u[(i, i)] == 0.0));
                    prop_assert!(g.u.iter().all(|&x| (0.0..=1.0).contains(&x)));
                    prop_assert!((0..k).all(|i| g.u.row(i).iter().any(|&x| x > 0.0)));
                    prop_assert_eq!(g.stats, graph_stats(&g.u));
                }
                Err(DataError::EmptyGraph) => {}
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }
}
