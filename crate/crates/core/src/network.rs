//! Undirected social graphs, edge-list ingestion, observability masks and
//! the neighbourhood queries the seed-selection heuristics rely on.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::ops::Deref;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    /// Canonical `(min, max)` pairs in ascending order.
    edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeListFormat {
    /// Whitespace-separated pairs; `%` and `#` start comment lines.
    Plain { one_indexed: bool },
    /// Coordinate Matrix Market (`%%MatrixMarket` header, size line, 1-indexed entries).
    MatrixMarket,
}

impl Default for EdgeListFormat {
    fn default() -> Self {
        EdgeListFormat::Plain { one_indexed: true }
    }
}

impl Graph {
    /// Builds a graph from arbitrary pairs, dropping self-loops and duplicates.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges = Vec::new();
        for (u, v) in pairs {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::NodeOutOfRange { index: x, n });
                }
            }
            if u != v {
                edges.push((u.min(v), u.max(v)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { adjacency, edges })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    fn check(&self, v: usize) -> Result<()> {
        if v < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                index: v,
                n: self.node_count(),
            })
        }
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        self.check(v)?;
        Ok(self.adjacency[v].len())
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Neighbours of `v` for which `is_free` holds.
    pub fn free_degree(&self, v: usize, is_free: impl Fn(usize) -> bool) -> Result<usize> {
        self.check(v)?;
        Ok(self.adjacency[v].iter().filter(|&&w| is_free(w)).count())
    }

    /// Number of distinct nodes at hop distance `1..=d` from `v`.
    pub fn within_d_hops(&self, v: usize, d: usize) -> Result<usize> {
        self.check(v)?;
        if d == 0 {
            return Err(Error::param("d", "hop count must be at least 1"));
        }
        let mut seen = vec![false; self.node_count()];
        Ok(self.bounded_bfs(v, d, &mut seen))
    }

    fn bounded_bfs(&self, v: usize, d: usize, seen: &mut [bool]) -> usize {
        seen[v] = true;
        let mut touched = vec![v];
        let mut frontier = vec![v];
        for _ in 0..d {
            let mut next = Vec::new();
            for &x in &frontier {
                for &y in &self.adjacency[x] {
                    if !seen[y] {
                        seen[y] = true;
                        next.push(y);
                    }
                }
            }
            touched.extend_from_slice(&next);
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        let count = touched.len() - 1;
        for x in touched {
            seen[x] = false;
        }
        count
    }

    /// [`Graph::within_d_hops`] for every node.
    pub fn hop_counts(&self, d: usize) -> Vec<usize> {
        let mut seen = vec![false; self.node_count()];
        (0..self.node_count())
            .map(|v| self.bounded_bfs(v, d, &mut seen))
            .collect()
    }
}

pub fn load_edge_list<R: BufRead>(source: R, format: EdgeListFormat) -> Result<Graph> {
    let mut pairs = Vec::new();
    let mut declared: Option<usize> = None;
    let mut max_index = None::<usize>;
    let one_indexed = match format {
        EdgeListFormat::Plain { one_indexed } => one_indexed,
        EdgeListFormat::MatrixMarket => true,
    };
    let mut saw_content = false;

    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('%') || text.starts_with('#') {
            continue;
        }
        saw_content = true;
        let fields: Vec<&str> = text.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::MalformedEdgeList {
                line: lineno,
                reason: format!("`{s}` is not a non-negative integer"),
            })
        };
        if format == EdgeListFormat::MatrixMarket && declared.is_none() {
            if fields.len() < 2 {
                return Err(Error::MalformedEdgeList {
                    line: lineno,
                    reason: "expected a `rows cols nnz` size line".into(),
                });
            }
            let rows = parse(fields[0])?;
            let cols = parse(fields[1])?;
            declared = Some(rows.max(cols));
            continue;
        }
        if fields.len() < 2 {
            return Err(Error::MalformedEdgeList {
                line: lineno,
                reason: "expected two node indices".into(),
            });
        }
        let (mut u, mut v) = (parse(fields[0])?, parse(fields[1])?);
        if one_indexed {
            if u == 0 || v == 0 {
                return Err(Error::MalformedEdgeList {
                    line: lineno,
                    reason: "index 0 in a 1-indexed list".into(),
                });
            }
            u -= 1;
            v -= 1;
        }
        if let Some(n) = declared {
            if u >= n || v >= n {
                return Err(Error::NodeOutOfRange {
                    index: u.max(v) + 1,
                    n,
                });
            }
        }
        max_index = Some(max_index.map_or(u.max(v), |m| m.max(u).max(v)));
        pairs.push((u, v));
    }

    if !saw_content {
        return Err(Error::EmptyEdgeList);
    }
    let n = declared.unwrap_or_else(|| max_index.map_or(0, |m| m + 1));
    if n == 0 {
        return Err(Error::EmptyEdgeList);
    }
    Graph::from_edges(n, pairs)
}

/// Edge-masked view of a graph shared by both parties for planning.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableGraph {
    visible: Graph,
    base_edges: usize,
    p_nv: f64,
}

impl ObservableGraph {
    /// The fully observable view.
    pub fn full(g: &Graph) -> Self {
        Self {
            visible: g.clone(),
            base_edges: g.edge_count(),
            p_nv: 1.0,
        }
    }

    pub fn p_nv(&self) -> f64 {
        self.p_nv
    }

    pub fn base_edge_count(&self) -> usize {
        self.base_edges
    }

    pub fn graph(&self) -> &Graph {
        &self.visible
    }
}

impl Deref for ObservableGraph {
    type Target = Graph;

    fn deref(&self) -> &Graph {
        &self.visible
    }
}

/// Keeps each edge independently with probability `p_nv`.
pub fn mask_network(g: &Graph, p_nv: f64, rng_seed: u64) -> Result<ObservableGraph> {
    if !(0.0..=1.0).contains(&p_nv) {
        return Err(Error::param("p_nv", format!("{p_nv} outside [0, 1]")));
    }
    if p_nv >= 1.0 {
        return Ok(ObservableGraph::full(g));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let kept: Vec<_> = g
        .edges()
        .iter()
        .copied()
        .filter(|_| rng.gen_bool(p_nv))
        .collect();
    Ok(ObservableGraph {
        visible: Graph::from_edges(g.node_count(), kept)?,
        base_edges: g.edge_count(),
        p_nv,
    })
}

/// Community labels in `[0, k)` from a normalized-Laplacian spectral
/// embedding clustered with k-means.
pub fn spectral_communities(g: &Graph, k: usize, rng_seed: u64) -> Result<Vec<usize>> {
    let n = g.node_count();
    if k == 0 || k > n {
        return Err(Error::param("k", format!("{k} communities for {n} nodes")));
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }

    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| {
            let d = g.neighbors(v).len();
            if d == 0 {
                0.0
            } else {
                1.0 / (d as f64).sqrt()
            }
        })
        .collect();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for v in 0..n {
        if !g.neighbors(v).is_empty() {
            lap[(v, v)] = 1.0;
        }
        for &w in g.neighbors(v) {
            lap[(v, w)] = -inv_sqrt[v] * inv_sqrt[w];
        }
    }
    let eig = SymmetricEigen::try_new(lap, 1e-10, 0)
        .ok_or_else(|| Error::param("graph", "eigendecomposition did not converge"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));

    // rows of the k smallest eigenvectors, normalized to the unit sphere
    let mut points = vec![vec![0.0; k]; n];
    for (col, &e) in order.iter().take(k).enumerate() {
        for (v, p) in points.iter_mut().enumerate() {
            p[col] = eig.eigenvectors[(v, e)];
        }
    }
    for p in &mut points {
        let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            p.iter_mut().for_each(|x| *x /= norm);
        }
    }
    Ok(kmeans(&points, k, rng_seed))
}

const KMEANS_RESTARTS: usize = 8;
const KMEANS_MAX_ITERS: usize = 200;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding; keeps the lowest-inertia run
/// and relabels clusters by first appearance.
fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (inertia, labels) = lloyd(points, k, &mut rng);
        if best.as_ref().map_or(true, |(b, _)| inertia < *b - 1e-12) {
            best = Some((inertia, labels));
        }
    }
    let labels = best.expect("at least one restart").1;
    let mut remap = HashMap::new();
    labels
        .into_iter()
        .map(|l| {
            let next = remap.len();
            *remap.entry(l).or_insert(next)
        })
        .collect()
}

fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> (f64, Vec<usize>) {
    let n = points.len();
    let mut centers = vec![points[rng.gen_range(0..n)].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let idx = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        centers.push(points[idx].clone());
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(p, &points[idx]));
        }
    }

    let dim = points[0].len();
    let mut labels = vec![0; n];
    for iter in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (c, center) in centers.iter().enumerate() {
                let dist = sq_dist(p, center);
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            if labels[i] != best.1 {
                labels[i] = best.1;
                changed = true;
            }
        }
        if !changed && iter > 0 {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum();
    (inertia, labels)
}

type CommunityKey = (Vec<(usize, usize)>, usize, usize, u64);

/// Memoized [`spectral_communities`]; the result depends only on the edge
/// set, `k` and the seed, so repeated episodes on one graph reuse it.
pub fn cached_communities(g: &Graph, k: usize, rng_seed: u64) -> Result<Arc<Vec<usize>>> {
    static CACHE: OnceLock<Mutex<HashMap<CommunityKey, Arc<Vec<usize>>>>> = OnceLock::new();
    let key = (g.edges().to_vec(), g.node_count(), k, rng_seed);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("community cache poisoned").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let labels = Arc::new(spectral_communities(g, k, rng_seed)?);
    let mut guard = cache.lock().expect("community cache poisoned");
    // masks differ per episode under partial observability; keep the cache bounded
    if guard.len() >= 64 {
        guard.clear();
    }
    guard.insert(key, Arc::clone(&labels));
    Ok(labels)
}

/// Writes `node_id,label` rows.
pub fn write_communities<W: Write>(labels: &[usize], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_id", "label"])?;
    for (node, label) in labels.iter().enumerate() {
        w.write_record([node.to_string(), label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;

    use super::*;

    fn plain(text: &str) -> Result<Graph> {
        load_edge_list(Cursor::new(text), EdgeListFormat::default())
    }

    fn star(leaves: usize) -> Graph {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|l| (0, l))).unwrap()
    }

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn plain_edge_lists() {
        let g = plain("1 2\n2 3\n").unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (3, 2));
        let g = plain("1 1\n").unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (1, 0));
        let g = plain("% comment\n# another\n1 2\n2 1\n1 2\n").unwrap();
        assert_eq!(g.edge_count(), 1);
        let g = load_edge_list(
            Cursor::new("0 1\n1 2\n"),
            EdgeListFormat::Plain { one_indexed: false },
        )
        .unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (3, 2));
    }

    #[test]
    fn edge_list_errors() {
        assert!(matches!(plain(""), Err(Error::EmptyEdgeList)));
        assert!(matches!(plain("% only comments\n"), Err(Error::EmptyEdgeList)));
        assert!(matches!(plain("1 x\n"), Err(Error::MalformedEdgeList { line: 1, .. })));
        assert!(matches!(plain("1 2\n3\n"), Err(Error::MalformedEdgeList { line: 2, .. })));
        assert!(matches!(plain("0 2\n"), Err(Error::MalformedEdgeList { .. })));
        let mm = "%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n1 2\n2 4\n";
        assert!(matches!(
            load_edge_list(Cursor::new(mm), EdgeListFormat::MatrixMarket),
            Err(Error::NodeOutOfRange { .. })
        ));
    }

    #[test]
    fn matrix_market() {
        let mm = "%%MatrixMarket matrix coordinate pattern symmetric\n% c\n5 5 3\n2 1\n3 2\n3 3\n";
        let g = load_edge_list(Cursor::new(mm), EdgeListFormat::MatrixMarket).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (5, 2));
        assert_eq!(g.degree(4).unwrap(), 0);
    }

    #[test]
    fn degree_queries() {
        let s = star(4);
        assert_eq!(s.degree(0).unwrap(), 4);
        let isolated = Graph::from_edges(3, [(0, 1)]).unwrap();
        assert_eq!(isolated.degree(2).unwrap(), 0);
        assert_eq!(path(3).degree(1).unwrap(), 2);
        assert!(s.degree(9).is_err());
    }

    #[test]
    fn free_degree_queries() {
        let s = star(4);
        assert_eq!(s.free_degree(0, |v| v == 1 || v == 3).unwrap(), 2);
        assert_eq!(s.free_degree(1, |v| v != 0).unwrap(), 0);
        assert_eq!(s.free_degree(0, |_| true).unwrap(), s.degree(0).unwrap());
        assert!(s.free_degree(7, |_| true).is_err());
    }

    #[test]
    fn hop_neighbourhoods() {
        assert_eq!(path(4).within_d_hops(0, 2).unwrap(), 2);
        assert_eq!(star(4).within_d_hops(0, 2).unwrap(), 4);
        let cycle = Graph::from_edges(5, (0..5).map(|i| (i, (i + 1) % 5))).unwrap();
        assert_eq!(cycle.hop_counts(2), vec![4; 5]);
        assert!(path(3).within_d_hops(0, 0).is_err());
        assert!(path(3).within_d_hops(5, 1).is_err());
    }

    #[test]
    fn masking_extremes() {
        let g = path(30);
        assert_eq!(mask_network(&g, 1.0, 3).unwrap().graph(), &g);
        assert_eq!(mask_network(&g, 0.0, 3).unwrap().edge_count(), 0);
        assert_eq!(mask_network(&g, 0.5, 3).unwrap(), mask_network(&g, 0.5, 3).unwrap());
        assert!(mask_network(&g, 1.5, 3).is_err());
    }

    #[test]
    fn hidden_edges_do_not_count() {
        let g = star(6);
        let masked = mask_network(&g, 0.5, 11).unwrap();
        let visible = masked.edge_count();
        assert!(visible < 6, "seed should hide at least one edge");
        assert_eq!(masked.degree(0).unwrap(), visible);
        assert_eq!(masked.within_d_hops(0, 2).unwrap(), visible);
    }

    #[test]
    fn communities_on_disjoint_triangles() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let labels = spectral_communities(&g, 2, 1).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[1], labels[2]);
        assert_eq!(labels[3], labels[4]);
        assert_eq!(labels[4], labels[5]);
        assert_ne!(labels[0], labels[3]);
        assert_eq!(spectral_communities(&g, 1, 1).unwrap(), vec![0; 6]);
        assert!(spectral_communities(&g, 0, 1).is_err());
        assert!(spectral_communities(&g, 7, 1).is_err());
    }

    #[test]
    fn community_csv() {
        let mut buf = Vec::new();
        write_communities(&[0, 1, 1], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "node_id,label\n0,0\n1,1\n2,1\n");
    }
}
