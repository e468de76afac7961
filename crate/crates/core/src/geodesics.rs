//! Geodesic distance estimation on k-nearest-neighbor graphs.
//!
//! Pairwise geodesic distances over a sampled manifold are approximated by
//! shortest paths on a graph that links each point to its k nearest
//! neighbors, with Euclidean edge weights. New points are folded in by
//! linking them to their k nearest training points and routing through the
//! precomputed training geodesics.
//!
//! Path lengths are kept unsquared internally; squaring happens once when
//! the distance matrices are assembled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

use crate::error::CoreError;
use crate::extension::TimeSeriesSet;
use crate::par;
use crate::Result;

/// Training points, one per row.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: DMatrix<f64>,
}

impl Dataset {
    /// Wraps an n-by-d matrix whose rows are points. Requires n >= 2,
    /// d >= 1, and finite entries.
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() < 2 {
            return Err(CoreError::invalid(format!(
                "dataset needs at least 2 points, got {}",
                points.nrows()
            )));
        }
        if points.ncols() < 1 {
            return Err(CoreError::invalid("dataset needs at least 1 dimension"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("dataset contains non-finite values"));
        }
        Ok(Dataset { points })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// d-by-n copy with points as contiguous columns, for distance kernels.
    pub(crate) fn transposed(&self) -> DMatrix<f64> {
        self.points.transpose()
    }
}

/// Symmetric weighted neighborhood graph stored as adjacency lists.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    adj: Vec<Vec<(usize, f64)>>,
    /// Number of duplicate-point edges whose zero weight was replaced by
    /// machine epsilon at construction.
    zero_weight_fixups: usize,
}

impl NeighborGraph {
    /// Builds a graph from undirected edges `(i, j, weight)`. Each edge is
    /// stored in both directions; self-loops and nonpositive weights are
    /// rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i == j {
                return Err(CoreError::invalid(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(CoreError::invalid(format!(
                    "edge ({i},{j}) out of range for {n} nodes"
                )));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(CoreError::invalid(format!(
                    "edge ({i},{j}) has invalid weight {w}"
                )));
            }
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        for list in &mut adj {
            list.sort_by(|a, b| a.0.cmp(&b.0));
            list.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        }
        Ok(NeighborGraph {
            adj,
            zero_weight_fixups: 0,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    /// Weight of edge (i, j) if present.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adj[i].iter().find(|&&(t, _)| t == j).map(|&(_, w)| w)
    }

    /// All undirected edges, each reported once with i < j.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, list) in self.adj.iter().enumerate() {
            for &(j, w) in list {
                if i < j {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn zero_weight_fixups(&self) -> usize {
        self.zero_weight_fixups
    }

    pub(crate) fn scale_edge(&mut self, i: usize, j: usize, factor: f64) {
        for &mut (t, ref mut w) in &mut self.adj[i] {
            if t == j {
                *w *= factor;
            }
        }
        for &mut (t, ref mut w) in &mut self.adj[j] {
            if t == i {
                *w *= factor;
            }
        }
    }

    pub(crate) fn set_edge(&mut self, i: usize, j: usize, w: f64) {
        debug_assert!(i != j && w > 0.0);
        let mut found = false;
        for &mut (t, ref mut cur) in &mut self.adj[i] {
            if t == j {
                *cur = w;
                found = true;
            }
        }
        if found {
            for &mut (t, ref mut cur) in &mut self.adj[j] {
                if t == i {
                    *cur = w;
                }
            }
        } else {
            self.adj[i].push((j, w));
            self.adj[j].push((i, w));
        }
    }

    /// Sizes of connected components, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut sizes = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut size = 0;
            while let Some(u) = stack.pop() {
                size += 1;
                for &(v, _) in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn is_connected(&self) -> bool {
        self.component_sizes().len() == 1
    }
}

/// Squared geodesic distance matrices: `delta_n` among training points,
/// `delta_x` (when present) from training points to extension points.
#[derive(Debug, Clone)]
pub struct GeodesicField {
    pub delta_n: DMatrix<f64>,
    pub delta_x: Option<DMatrix<f64>>,
}

impl GeodesicField {
    pub fn new(delta_n: DMatrix<f64>) -> Self {
        GeodesicField {
            delta_n,
            delta_x: None,
        }
    }

    pub fn with_extension(mut self, delta_x: DMatrix<f64>) -> Self {
        self.delta_x = Some(delta_x);
        self
    }
}

/// Euclidean distance between two column slices.
#[inline]
pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Squared Euclidean distance between two column slices.
#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// The k nearest other points for every point, as `(index, distance)` in
/// ascending order. Ties broken toward the lower index.
pub(crate) fn directed_knn(data: &Dataset, k: usize) -> Vec<Vec<(usize, f64)>> {
    let n = data.n();
    let cols = data.transposed();
    par::map_collect(n, |i| {
        let ci = cols.column(i);
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (euclid(ci.as_slice(), cols.column(j).as_slice()), j))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dists.truncate(k);
        dists.into_iter().map(|(d, j)| (j, d)).collect()
    })
}

/// Links every point to its k nearest neighbors with Euclidean weights.
/// The neighbor relation is symmetrized by union: edge (i, j) exists when
/// either point selects the other. Duplicate points would produce
/// zero-weight edges; those weights are replaced by machine epsilon and a
/// warning is logged.
pub fn build_knn_graph(data: &Dataset, k: usize) -> Result<NeighborGraph> {
    let n = data.n();
    if k < 1 || k >= n {
        return Err(CoreError::invalid(format!(
            "k must satisfy 1 <= k < n (k={k}, n={n})"
        )));
    }
    let knn = directed_knn(data, k);
    let mut adj = vec![Vec::new(); n];
    let mut fixups = 0usize;
    for (i, list) in knn.iter().enumerate() {
        for &(j, d) in list {
            let w = if d > 0.0 {
                d
            } else {
                fixups += 1;
                f64::EPSILON
            };
            // Union symmetrization: insert both directions, skip if the
            // reverse selection already added this edge.
            if !adj[i].iter().any(|&(t, _)| t == j) {
                adj[i].push((j, w));
            }
            if !adj[j].iter().any(|&(t, _)| t == i) {
                adj[j].push((i, w));
            }
        }
    }
    if fixups > 0 {
        log::warn!("replaced {fixups} zero-weight duplicate-point edges with machine epsilon");
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0));
    }
    Ok(NeighborGraph {
        adj,
        zero_weight_fixups: fixups,
    })
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the nearest node.
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Unsquared shortest-path lengths from `source` to every node;
/// unreachable nodes keep `f64::INFINITY`.
pub(crate) fn dijkstra(graph: &NeighborGraph, source: usize) -> Vec<f64> {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in graph.neighbors(u) {
            let cand = d + w;
            if cand < dist[v] {
                dist[v] = cand;
                heap.push(HeapEntry {
                    dist: cand,
                    node: v,
                });
            }
        }
    }
    dist
}

fn assemble_delta_n(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let mut delta = DMatrix::zeros(n, n);
    for i in 0..n {
        // The reverse run can differ in the last ulp (sums accumulate in a
        // different order), so both triangles take the lower-index source;
        // this keeps the matrix exactly symmetric.
        for j in i..n {
            let len = rows[i][j];
            debug_assert!(len.is_finite(), "connectivity checked before assembly");
            let sq = len * len;
            delta[(i, j)] = sq;
            delta[(j, i)] = sq;
        }
    }
    Ok(delta)
}

fn check_connected(graph: &NeighborGraph) -> Result<()> {
    let sizes = graph.component_sizes();
    if sizes.len() > 1 {
        return Err(CoreError::DisconnectedGraph { sizes });
    }
    Ok(())
}

/// All-pairs squared geodesic distances via per-source Dijkstra runs.
/// Fails with the component sizes if the graph is disconnected.
pub fn shortest_path_distances(graph: &NeighborGraph) -> Result<DMatrix<f64>> {
    check_connected(graph)?;
    let rows = par::map_collect(graph.node_count(), |i| dijkstra(graph, i));
    assemble_delta_n(rows)
}

/// Sequential twin of [`shortest_path_distances`], kept for benchmarks and
/// determinism checks.
#[doc(hidden)]
pub fn shortest_path_distances_seq(graph: &NeighborGraph) -> Result<DMatrix<f64>> {
    check_connected(graph)?;
    let rows = par::map_collect_seq(graph.node_count(), |i| dijkstra(graph, i));
    assemble_delta_n(rows)
}

fn extend_column(
    cols: &DMatrix<f64>,
    delta_n: &DMatrix<f64>,
    y: &[f64],
    k: usize,
) -> Vec<f64> {
    let n = cols.ncols();
    let mut links: Vec<(f64, usize)> = (0..n)
        .map(|t| (euclid(y, cols.column(t).as_slice()), t))
        .collect();
    links.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    links.truncate(k);
    // A zero-length link means the point coincides with u_t; every other
    // link is then an edge of u_t, so by the graph triangle inequality the
    // point's squared geodesics are exactly u_t's column. Taking it
    // directly also avoids last-ulp rounding in tied path sums.
    if links[0].0 == 0.0 {
        let t = links[0].1;
        return (0..n).map(|i| delta_n[(i, t)]).collect();
    }
    (0..n)
        .map(|i| {
            let mut best = f64::INFINITY;
            for &(len, t) in &links {
                let d = len + delta_n[(i, t)].sqrt();
                let cand = d * d;
                if cand < best {
                    best = cand;
                }
            }
            best
        })
        .collect()
}

fn validate_extension_inputs(
    data: &Dataset,
    graph: &NeighborGraph,
    delta_n: &DMatrix<f64>,
    oos: &TimeSeriesSet,
    k: usize,
) -> Result<()> {
    let n = data.n();
    if graph.node_count() != n || delta_n.nrows() != n || delta_n.ncols() != n {
        return Err(CoreError::invalid(
            "graph/delta_n shape does not match the training data",
        ));
    }
    if oos.dim() != data.dim() {
        return Err(CoreError::invalid(format!(
            "out-of-sample dimension {} does not match training dimension {}",
            oos.dim(),
            data.dim()
        )));
    }
    if k < 1 || k >= n {
        return Err(CoreError::invalid(format!(
            "k must satisfy 1 <= k < n (k={k}, n={n})"
        )));
    }
    Ok(())
}

/// Squared geodesic distances from every training point to every
/// out-of-sample point (n-by-N). Each out-of-sample point is linked only to
/// its k nearest training points; paths route through those links and the
/// precomputed training geodesics. Out-of-sample points never link to each
/// other.
pub fn extend_distances(
    data: &Dataset,
    graph: &NeighborGraph,
    delta_n: &DMatrix<f64>,
    oos: &TimeSeriesSet,
    k: usize,
) -> Result<DMatrix<f64>> {
    validate_extension_inputs(data, graph, delta_n, oos, k)?;
    let cols = data.transposed();
    let oos_cols = oos.points().transpose();
    let columns = par::map_collect(oos.len(), |j| {
        extend_column(&cols, delta_n, oos_cols.column(j).as_slice(), k)
    });
    Ok(DMatrix::from_fn(data.n(), oos.len(), |i, j| columns[j][i]))
}

/// Sequential twin of [`extend_distances`].
#[doc(hidden)]
pub fn extend_distances_seq(
    data: &Dataset,
    graph: &NeighborGraph,
    delta_n: &DMatrix<f64>,
    oos: &TimeSeriesSet,
    k: usize,
) -> Result<DMatrix<f64>> {
    validate_extension_inputs(data, graph, delta_n, oos, k)?;
    let cols = data.transposed();
    let oos_cols = oos.points().transpose();
    let columns = par::map_collect_seq(oos.len(), |j| {
        extend_column(&cols, delta_n, oos_cols.column(j).as_slice(), k)
    });
    Ok(DMatrix::from_fn(data.n(), oos.len(), |i, j| columns[j][i]))
}
