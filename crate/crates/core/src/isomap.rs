//! Classical MDS on squared geodesic distances.
//!
//! Double-centering the squared distance matrix gives a Gram matrix whose
//! top eigenpairs yield coordinates that best reproduce the distances. The
//! eigenpairs are kept alongside the embedding because the out-of-sample
//! solvers need the pseudo-inverse transpose built from them.

use nalgebra::DMatrix;

use crate::error::CoreError;
use crate::Result;

/// Training embedding: the m-by-n coordinate matrix (columns are embedded
/// points) together with the eigenpairs it was built from.
#[derive(Debug, Clone)]
pub struct TrainedEmbedding {
    l_matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    /// n-by-m; column i is the unit eigenvector paired with `eigenvalues[i]`.
    eigenvectors: DMatrix<f64>,
}

impl TrainedEmbedding {
    /// Row i of the embedding is sqrt(eigenvalue_i) times eigenvector_i.
    pub fn l_matrix(&self) -> &DMatrix<f64> {
        &self.l_matrix
    }

    /// Eigenvalues in descending order, all strictly positive.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, matching `eigenvalues`.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Embedding dimension m.
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of embedded points n.
    pub fn len(&self) -> usize {
        self.l_matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.l_matrix.ncols() == 0
    }
}

/// Double-centers a squared distance matrix: -1/2 H D H with
/// H = I - (1/n) 1 1^T. Rows and columns of the result sum to zero.
pub fn center_squared_distances(delta_n: &DMatrix<f64>) -> DMatrix<f64> {
    let n = delta_n.nrows();
    debug_assert_eq!(n, delta_n.ncols());
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| delta_n.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| delta_n.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (delta_n[(i, j)] - row_means[i] - col_means[j] + grand)
    })
}

/// Flips each eigenvector so its first clearly nonzero entry is positive.
fn canonical_sign(vectors: &mut DMatrix<f64>) {
    let n = vectors.nrows();
    for c in 0..vectors.ncols() {
        let max_abs = vectors.column(c).amax();
        if max_abs == 0.0 {
            continue;
        }
        let tol = 1e-12 * max_abs;
        for r in 0..n {
            let v = vectors[(r, c)];
            if v.abs() > tol {
                if v < 0.0 {
                    for r2 in 0..n {
                        vectors[(r2, c)] = -vectors[(r2, c)];
                    }
                }
                break;
            }
        }
    }
}

/// Embeds the training points in m dimensions from their squared geodesic
/// distances. Negative eigenvalues of the centered matrix (non-Euclidean
/// geodesics) are discarded; it is an error to ask for more dimensions
/// than the positive spectrum provides.
pub fn isomap_embed(delta_n: &DMatrix<f64>, m: usize) -> Result<TrainedEmbedding> {
    let n = delta_n.nrows();
    if delta_n.ncols() != n {
        return Err(CoreError::invalid("delta_n must be square"));
    }
    if m < 1 {
        return Err(CoreError::invalid("embedding dimension m must be >= 1"));
    }
    let centered = center_squared_distances(delta_n);
    let eig = nalgebra::linalg::SymmetricEigen::new(centered);
    // Sort descending; ties keep the solver's deterministic order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let max_eig = eig.eigenvalues[order[0]].max(0.0);
    let positive_tol = 1e-9 * max_eig;
    let available = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > positive_tol)
        .count();
    if m > available {
        return Err(CoreError::InsufficientSpectrum {
            requested: m,
            available,
        });
    }
    let mut eigenvalues = Vec::with_capacity(m);
    let mut vectors = DMatrix::zeros(n, m);
    for (c, &idx) in order.iter().take(m).enumerate() {
        eigenvalues.push(eig.eigenvalues[idx]);
        vectors.set_column(c, &eig.eigenvectors.column(idx));
    }
    canonical_sign(&mut vectors);
    let l_matrix = DMatrix::from_fn(m, n, |r, c| eigenvalues[r].sqrt() * vectors[(c, r)]);
    Ok(TrainedEmbedding {
        l_matrix,
        eigenvalues,
        eigenvectors: vectors,
    })
}

/// Pseudo-inverse transpose of the embedding matrix: row i is
/// eigenvector_i^T / sqrt(eigenvalue_i), so that the product with L^T is
/// the m-by-m identity.
pub fn pseudo_inverse_transpose(emb: &TrainedEmbedding) -> DMatrix<f64> {
    let m = emb.dim();
    let n = emb.len();
    DMatrix::from_fn(m, n, |r, c| {
        emb.eigenvectors[(c, r)] / emb.eigenvalues[r].sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_delta() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 4.0, 1.0, 0.0, 1.0, 4.0, 1.0, 0.0])
    }

    #[test]
    fn centering_line_example() {
        let c = center_squared_distances(&line_delta());
        let expect =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0]);
        assert_relative_eq!(c, expect, epsilon = 1e-12);
    }

    #[test]
    fn centering_zero_matrix() {
        let c = center_squared_distances(&DMatrix::zeros(4, 4));
        assert_eq!(c, DMatrix::zeros(4, 4));
    }

    #[test]
    fn centering_row_sums_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut d = DMatrix::zeros(6, 6);
        for i in 0..6 {
            for j in (i + 1)..6 {
                let v = rng.random::<f64>() * 10.0;
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        let c = center_squared_distances(&d);
        for i in 0..6 {
            assert!(c.row(i).sum().abs() < 1e-10);
            assert!(c.column(i).sum().abs() < 1e-10);
        }
    }

    #[test]
    fn line_embedding_up_to_sign() {
        let emb = isomap_embed(&line_delta(), 1).unwrap();
        let l = emb.l_matrix();
        let got = [l[(0, 0)], l[(0, 1)], l[(0, 2)]];
        let matches = |sign: f64| {
            (got[0] - sign * -1.0).abs() < 1e-10
                && got[1].abs() < 1e-10
                && (got[2] - sign * 1.0).abs() < 1e-10
        };
        assert!(matches(1.0) || matches(-1.0), "embedding {got:?}");
    }

    #[test]
    fn insufficient_spectrum_reports_size() {
        match isomap_embed(&line_delta(), 2) {
            Err(CoreError::InsufficientSpectrum {
                requested,
                available,
            }) => {
                assert_eq!(requested, 2);
                assert_eq!(available, 1);
            }
            other => panic!("expected InsufficientSpectrum, got {other:?}"),
        }
    }

    fn circle_delta(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            let ai = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
            let aj = 2.0 * std::f64::consts::PI * (j as f64) / (n as f64);
            (ai.cos() - aj.cos()).powi(2) + (ai.sin() - aj.sin()).powi(2)
        })
    }

    #[test]
    fn circle_embedding_reproduces_chordal_distances() {
        let delta = circle_delta(10);
        let emb = isomap_embed(&delta, 2).unwrap();
        let l = emb.l_matrix();
        for i in 0..10 {
            for j in 0..10 {
                let d2 = (l.column(i) - l.column(j)).norm_squared();
                assert_relative_eq!(d2, delta[(i, j)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let delta = circle_delta(12);
        let emb = isomap_embed(&delta, 2).unwrap();
        let v = emb.eigenvectors();
        let gram = v.transpose() * v;
        assert_relative_eq!(gram, DMatrix::identity(2, 2), epsilon = 1e-10);
    }

    #[test]
    fn embedding_columns_are_centered() {
        let delta = circle_delta(9);
        let emb = isomap_embed(&delta, 2).unwrap();
        let sums = emb.l_matrix() * DVector::from_element(9, 1.0);
        assert!(sums.norm() < 1e-9);
    }

    #[test]
    fn top_eigenspace_reconstructs_centered_matrix() {
        // Full-spectrum reconstruction residual equals the discarded tail.
        let delta = circle_delta(8);
        let centered = center_squared_distances(&delta);
        let emb = isomap_embed(&delta, 2).unwrap();
        let mut approx_c = DMatrix::zeros(8, 8);
        for i in 0..2 {
            let v = emb.eigenvectors().column(i);
            approx_c += emb.eigenvalues()[i] * v * v.transpose();
        }
        // Points on a circle are exactly two-dimensional, so the tail
        // spectrum is numerically zero.
        assert_relative_eq!(approx_c, centered, epsilon = 1e-8);
    }

    #[test]
    fn pseudo_inverse_identity() {
        let delta = circle_delta(10);
        let emb = isomap_embed(&delta, 2).unwrap();
        let li = pseudo_inverse_transpose(&emb);
        let prod = &li * emb.l_matrix().transpose();
        assert_relative_eq!(prod, DMatrix::identity(2, 2), epsilon = 1e-10);
    }

    #[test]
    fn pseudo_inverse_direct_formula() {
        let mut vectors = DMatrix::zeros(3, 1);
        vectors[(0, 0)] = 1.0;
        let emb = TrainedEmbedding {
            l_matrix: DMatrix::from_row_slice(1, 3, &[2.0, 0.0, 0.0]),
            eigenvalues: vec![4.0],
            eigenvectors: vectors,
        };
        let li = pseudo_inverse_transpose(&emb);
        assert_eq!(li, DMatrix::from_row_slice(1, 3, &[0.5, 0.0, 0.0]));
    }

    /// SVD-based pseudoinverse oracle for L^T.
    #[test]
    fn pseudo_inverse_matches_svd_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let pts = DMatrix::from_fn(20, 4, |_, _| rng.random::<f64>());
        let delta = DMatrix::from_fn(20, 20, |i, j| (pts.row(i) - pts.row(j)).norm_squared());
        let emb = isomap_embed(&delta, 3).unwrap();
        let li = pseudo_inverse_transpose(&emb);
        let svd = emb.l_matrix().transpose().svd(true, true);
        let oracle = svd.pseudo_inverse(1e-12).unwrap();
        assert_relative_eq!(li, oracle, epsilon = 1e-10);
    }
}
