//! Shared helpers and independent oracles for the integration suites.
#![allow(dead_code)] // each test binary uses a different subset

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mets_core::extension::{
    temporal_laplacian, TemporalLaplacian, TemporalWeighting, TimeSeriesSet,
};
use mets_core::geodesics::{
    build_knn_graph, extend_distances, shortest_path_distances, Dataset, NeighborGraph,
};
use mets_core::isomap::{isomap_embed, TrainedEmbedding};

/// A fully prepared random extension problem.
pub struct Instance {
    pub data: Dataset,
    pub graph: NeighborGraph,
    pub emb: TrainedEmbedding,
    pub delta_n: DMatrix<f64>,
    pub delta_x: DMatrix<f64>,
    pub oos: TimeSeriesSet,
    pub lap: TemporalLaplacian,
    pub m: usize,
    pub k: usize,
}

/// Random point-cloud instance with a connected graph, an m-dimensional
/// embedding, and a temporal Laplacian over the extension sequence.
pub fn random_instance(seed: u64, n: usize, big_n: usize, m: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 6;
    let pts = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let data = Dataset::new(pts).unwrap();
    let mut k = (n / 10).clamp(4, n - 1);
    let graph = loop {
        let g = build_knn_graph(&data, k).unwrap();
        if g.is_connected() {
            break g;
        }
        k = (k + 3).min(n - 1);
    };
    let delta_n = shortest_path_distances(&graph).unwrap();
    let emb = isomap_embed(&delta_n, m).unwrap();
    let oos_pts = DMatrix::from_fn(big_n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let oos = TimeSeriesSet::with_unit_timestamps(oos_pts).unwrap();
    let delta_x = extend_distances(&data, &graph, &delta_n, &oos, k).unwrap();
    let weighting = TemporalWeighting::exponential(4, 0.3).unwrap();
    let lap = temporal_laplacian(oos.timestamps(), &weighting).unwrap();
    Instance {
        data,
        graph,
        emb,
        delta_n,
        delta_x,
        oos,
        lap,
        m,
        k,
    }
}

/// Array-based single-source shortest paths (no heap), independent of the
/// library's implementation. Used for augmented-graph oracles.
pub fn dijkstra_oracle(graph: &NeighborGraph, source: usize) -> Vec<f64> {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[source] = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        let mut best = f64::INFINITY;
        for v in 0..n {
            if !done[v] && dist[v] < best {
                best = dist[v];
                u = v;
            }
        }
        if u == usize::MAX {
            break;
        }
        done[u] = true;
        for &(v, w) in graph.neighbors(u) {
            let cand = dist[u] + w;
            if cand < dist[v] {
                dist[v] = cand;
            }
        }
    }
    dist
}

/// Exhaustive min-plus shortest paths; the independent oracle for the
/// per-source Dijkstra sweep.
pub fn floyd_warshall(graph: &NeighborGraph) -> Vec<Vec<f64>> {
    let n = graph.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
        for &(j, w) in graph.neighbors(i) {
            if w < d[i][j] {
                d[i][j] = w;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Random connected graph with dyadic-rational weights, so path sums are
/// exact in floating point and shortest-path algorithms agree bitwise.
pub fn random_dyadic_graph(seed: u64, n: usize) -> NeighborGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight = |rng: &mut ChaCha8Rng| (rng.random_range(1..=2048) as f64) / 1024.0;
    let mut edges = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        let w = weight(&mut rng);
        edges.push((j, i, w));
    }
    let extra = n;
    for _ in 0..extra {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j && !edges.iter().any(|&(a, b, _)| (a, b) == (i.min(j), i.max(j))) {
            edges.push((i.min(j), i.max(j), weight(&mut rng)));
        }
    }
    NeighborGraph::from_edges(n, &edges).unwrap()
}

