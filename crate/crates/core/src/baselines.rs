//! Comparison baselines: ST-Isomap graph surgery with an out-of-sample
//! adaptation, and manifold blurring mean shift (MBMS) denoising.

use nalgebra::{DMatrix, DVector};

use crate::error::CoreError;
use crate::extension::{isomap_oose, TimeSeriesSet};
use crate::geodesics::{
    build_knn_graph, directed_knn, extend_distances, shortest_path_distances, Dataset,
    NeighborGraph,
};
use crate::isomap::{isomap_embed, TrainedEmbedding};
use crate::par;
use crate::Result;

/// ST-Isomap graph parameters. Scaling constants are >= 1 so edge weights
/// are only ever reduced.
#[derive(Debug, Clone, Copy)]
pub struct StIsomapParams {
    /// Divisor for edges between adjacent temporal neighbors.
    pub c_atn: f64,
    /// Divisor for edges to common temporal neighbors.
    pub c_ctn: f64,
    /// Half-width (in sequence positions) of the trivial-match window.
    pub epsilon: usize,
    /// Spatial neighbor count.
    pub k: usize,
}

impl StIsomapParams {
    pub fn new(c_atn: f64, c_ctn: f64, epsilon: usize, k: usize) -> Result<Self> {
        if !(c_atn >= 1.0) || !(c_ctn >= 1.0) {
            return Err(CoreError::invalid(
                "scaling factors c_atn and c_ctn must be >= 1",
            ));
        }
        if epsilon < 1 {
            return Err(CoreError::invalid("trivial-match window epsilon must be >= 1"));
        }
        if k < 1 {
            return Err(CoreError::invalid("k must be >= 1"));
        }
        Ok(StIsomapParams {
            c_atn,
            c_ctn,
            epsilon,
            k,
        })
    }
}

/// Builds the ST-Isomap neighborhood graph: the plain k-NN graph, with
/// edges appended between adjacent temporal neighbors (timestamp gap of
/// exactly 1) at weight distance/c_atn, and weights of common temporal
/// neighbors divided by c_ctn.
///
/// A point's trivial matches are the other points within `epsilon`
/// sequence positions; its common temporal neighbors are the k-NN entries
/// at least as close as the nearest trivial match. An edge marked CTN from
/// either endpoint is scaled once.
pub fn st_isomap_graph(
    data: &Dataset,
    timestamps: &[i64],
    p: &StIsomapParams,
) -> Result<NeighborGraph> {
    let n = data.n();
    if timestamps.len() != n {
        return Err(CoreError::invalid(format!(
            "{} timestamps for {n} points",
            timestamps.len()
        )));
    }
    if timestamps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::invalid(
            "timestamps must be strictly increasing",
        ));
    }
    let mut graph = build_knn_graph(data, p.k)?;
    let knn = directed_knn(data, p.k);
    let cols = data.transposed();
    let dist = |i: usize, j: usize| {
        crate::geodesics::euclid(cols.column(i).as_slice(), cols.column(j).as_slice())
    };

    // Adjacent temporal neighbors: timestamp gap exactly 1.
    for i in 0..n.saturating_sub(1) {
        let j = i + 1;
        if timestamps[j] - timestamps[i] == 1 {
            let d = dist(i, j).max(f64::EPSILON);
            graph.set_edge(i, j, d / p.c_atn);
        }
    }

    // Common temporal neighbors, collected as undirected pairs so a doubly
    // marked edge is scaled once.
    let mut ctn_pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        let lo = i.saturating_sub(p.epsilon);
        let hi = (i + p.epsilon).min(n - 1);
        let mut nearest_trivial = f64::INFINITY;
        for j in lo..=hi {
            if j != i {
                nearest_trivial = nearest_trivial.min(dist(i, j));
            }
        }
        if !nearest_trivial.is_finite() {
            continue;
        }
        for &(j, d) in &knn[i] {
            if d <= nearest_trivial {
                ctn_pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    ctn_pairs.sort_unstable();
    ctn_pairs.dedup();
    for (i, j) in ctn_pairs {
        graph.scale_edge(i, j, 1.0 / p.c_ctn);
    }
    Ok(graph)
}

/// Full ST-Isomap out-of-sample pipeline: temporal graph surgery on the
/// training set, geodesics and MDS on the modified graph, then the plain
/// extension formula. Out-of-sample points link to training points exactly
/// as in the plain extension; temporal scaling only affects the training
/// graph.
///
/// Returns the training embedding and the m-by-N extension.
pub fn st_isomap_oose(
    data: &Dataset,
    timestamps: &[i64],
    oos: &TimeSeriesSet,
    p: &StIsomapParams,
    m: usize,
) -> Result<(TrainedEmbedding, DMatrix<f64>)> {
    let graph = st_isomap_graph(data, timestamps, p)?;
    let delta_n = shortest_path_distances(&graph)?;
    let emb = isomap_embed(&delta_n, m)?;
    let delta_x = extend_distances(data, &graph, &delta_n, oos, p.k)?;
    let x = isomap_oose(&emb, &delta_n, &delta_x);
    Ok((emb, x))
}

/// MBMS parameters.
#[derive(Debug, Clone, Copy)]
pub struct MbmsParams {
    /// Gaussian kernel width for the mean-shift average.
    pub sigma: f64,
    /// Assumed local manifold dimension; displacement along the top-L
    /// local PCA directions is discarded.
    pub local_dim: usize,
    /// Neighbor count for both the kernel average and the local PCA.
    pub k: usize,
    pub iterations: usize,
}

impl MbmsParams {
    pub fn new(sigma: f64, local_dim: usize, k: usize, iterations: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(CoreError::invalid("sigma must be > 0"));
        }
        if local_dim < 1 {
            return Err(CoreError::invalid("local PCA dimension must be >= 1"));
        }
        if k < 1 {
            return Err(CoreError::invalid("k must be >= 1"));
        }
        if iterations < 1 {
            return Err(CoreError::invalid("iterations must be >= 1"));
        }
        Ok(MbmsParams {
            sigma,
            local_dim,
            k,
            iterations,
        })
    }
}

/// One denoising step for one point. Returns the new position.
fn mbms_step(prev: &DMatrix<f64>, i: usize, p: &MbmsParams) -> (DVector<f64>, bool) {
    let n = prev.ncols();
    let d = prev.nrows();
    let xi = prev.column(i);

    let mut dists: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != i)
        .map(|j| ((prev.column(j) - xi).norm_squared(), j))
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dists.truncate(p.k);

    // Kernel average over the neighborhood, the point itself included.
    let two_sigma2 = 2.0 * p.sigma * p.sigma;
    let mut avg = xi.clone_owned();
    let mut total_w = 1.0;
    for &(d2, j) in &dists {
        let w = (-d2 / two_sigma2).exp();
        avg += w * prev.column(j);
        total_w += w;
    }
    avg /= total_w;
    let shift = &avg - &xi;

    // Local PCA of the same neighborhood, centered at its mean. The Gram
    // trick keeps the decomposition at neighborhood size instead of
    // ambient dimension.
    let count = dists.len() + 1;
    let mut centered = DMatrix::zeros(count, d);
    centered.row_mut(0).copy_from(&xi.transpose());
    for (r, &(_, j)) in dists.iter().enumerate() {
        centered.row_mut(r + 1).copy_from(&prev.column(j).transpose());
    }
    let mean = centered.row_sum() / count as f64;
    for r in 0..count {
        let diff = centered.row(r) - &mean;
        centered.row_mut(r).copy_from(&diff);
    }
    let gram = &centered * centered.transpose();
    let eig = nalgebra::linalg::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let max_eig = eig.eigenvalues[order[0]].max(0.0);
    let rank_tol = 1e-12 * max_eig.max(1e-300);
    let rank = order
        .iter()
        .filter(|&&c| eig.eigenvalues[c] > rank_tol)
        .count();
    if rank < p.local_dim {
        // Degenerate neighborhood: no reliable tangent estimate, apply the
        // plain mean-shift update.
        return (xi + shift, true);
    }

    // Remove the tangential part of the shift so the point only moves
    // orthogonally to the estimated local manifold.
    let mut orthogonal = shift.clone();
    for &c in order.iter().take(p.local_dim) {
        let u = eig.eigenvectors.column(c);
        let mut v = centered.transpose() * u;
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        v /= norm;
        let t = v.dot(&shift);
        orthogonal -= t * v;
    }
    (xi + orthogonal, false)
}

fn mbms_round(prev: &DMatrix<f64>, p: &MbmsParams, parallel: bool) -> (DMatrix<f64>, usize) {
    let n = prev.ncols();
    let results = if parallel {
        par::map_collect(n, |i| mbms_step(prev, i, p))
    } else {
        par::map_collect_seq(n, |i| mbms_step(prev, i, p))
    };
    let mut next = DMatrix::zeros(prev.nrows(), n);
    let mut degenerate = 0;
    for (i, (col, skipped)) in results.into_iter().enumerate() {
        next.set_column(i, &col);
        if skipped {
            degenerate += 1;
        }
    }
    (next, degenerate)
}

fn mbms_denoise_impl(points: &DMatrix<f64>, p: &MbmsParams, parallel: bool) -> Result<DMatrix<f64>> {
    let n = points.nrows();
    if p.k >= n {
        return Err(CoreError::invalid(format!(
            "MBMS needs k < point count (k={}, points={n})",
            p.k
        )));
    }
    if p.local_dim >= points.ncols() {
        return Err(CoreError::invalid(format!(
            "local PCA dimension {} must be below ambient dimension {}",
            p.local_dim,
            points.ncols()
        )));
    }
    // Points as columns internally; each round reads the previous iterate
    // only, so per-point updates are order-independent.
    let mut current = points.transpose();
    for round in 0..p.iterations {
        let (next, degenerate) = mbms_round(&current, p, parallel);
        if degenerate > 0 {
            log::warn!(
                "MBMS round {round}: {degenerate} neighborhoods below PCA rank {}, projection skipped",
                p.local_dim
            );
        }
        current = next;
    }
    Ok(current.transpose())
}

/// Blurring mean-shift denoising constrained to move points orthogonally
/// to their estimated local manifold. Input and output are row-per-point
/// matrices of identical shape.
pub fn mbms_denoise(points: &DMatrix<f64>, p: &MbmsParams) -> Result<DMatrix<f64>> {
    mbms_denoise_impl(points, p, true)
}

/// Sequential twin of [`mbms_denoise`].
#[doc(hidden)]
pub fn mbms_denoise_seq(points: &DMatrix<f64>, p: &MbmsParams) -> Result<DMatrix<f64>> {
    mbms_denoise_impl(points, p, false)
}
