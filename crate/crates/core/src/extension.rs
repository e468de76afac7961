//! Out-of-sample extension solvers.
//!
//! `isomap_oose` embeds new points by the closed-form least-squares fit to
//! the extended geodesic distances. `mets_solve` adds a quadratic penalty
//! built from the Laplacian of the sequence's temporal neighborhood graph,
//! which pulls temporally adjacent points together in the embedding. The
//! penalized problem stays a linear system; it is solved either by
//! materializing the Kronecker-product normal matrix (`KroneckerDirect`,
//! exact but cubic in m*N) or column-wise in the eigenbasis of the
//! Laplacian (`SylvesterEigen`, the default).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::isomap::{pseudo_inverse_transpose, TrainedEmbedding};
use crate::Result;

/// Temporally ordered out-of-sample points: one point per row plus a
/// strictly increasing integer timestamp per point.
#[derive(Debug, Clone)]
pub struct TimeSeriesSet {
    points: DMatrix<f64>,
    timestamps: Vec<i64>,
}

impl TimeSeriesSet {
    pub fn new(points: DMatrix<f64>, timestamps: Vec<i64>) -> Result<Self> {
        if points.nrows() < 2 {
            return Err(CoreError::invalid(format!(
                "time series needs at least 2 points, got {}",
                points.nrows()
            )));
        }
        if timestamps.len() != points.nrows() {
            return Err(CoreError::invalid(format!(
                "{} timestamps for {} points",
                timestamps.len(),
                points.nrows()
            )));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::invalid(
                "timestamps must be strictly increasing",
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::invalid("time series contains non-finite values"));
        }
        Ok(TimeSeriesSet { points, timestamps })
    }

    /// Unit-step timestamps 0..N-1.
    pub fn with_unit_timestamps(points: DMatrix<f64>) -> Result<Self> {
        let n = points.nrows() as i64;
        TimeSeriesSet::new(points, (0..n).collect())
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Same timestamps, different coordinates (e.g. after corruption).
    pub fn with_points(&self, points: DMatrix<f64>) -> Result<Self> {
        TimeSeriesSet::new(points, self.timestamps.clone())
    }
}

/// Shape of the temporal weighting function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    /// exp(-alpha * tau)
    ExponentialDecay,
    /// exp(-alpha * tau^2)
    GaussianKernel,
}

/// Weighting of temporal neighbors: window size K (neighbors up to
/// floor(K/2) indices away on each side) and a decay over the timestamp
/// gap. Weight 1 at gap zero, nonincreasing in the gap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TemporalWeighting {
    pub kind: WeightKind,
    pub alpha: f64,
    /// Window size K; each point is paired with neighbors up to
    /// floor(K/2) positions away.
    pub window: usize,
}

impl TemporalWeighting {
    pub fn exponential(window: usize, alpha: f64) -> Result<Self> {
        TemporalWeighting::new(WeightKind::ExponentialDecay, window, alpha)
    }

    pub fn new(kind: WeightKind, window: usize, alpha: f64) -> Result<Self> {
        if window < 1 {
            return Err(CoreError::invalid("temporal window K must be >= 1"));
        }
        if !(alpha >= 0.0) {
            return Err(CoreError::invalid("decay parameter alpha must be >= 0"));
        }
        Ok(TemporalWeighting {
            kind,
            alpha,
            window,
        })
    }

    /// Weight for a timestamp gap tau.
    pub fn weight(&self, tau: u64) -> f64 {
        let t = tau as f64;
        match self.kind {
            WeightKind::ExponentialDecay => (-self.alpha * t).exp(),
            WeightKind::GaussianKernel => (-self.alpha * t * t).exp(),
        }
    }
}

/// Weighted Laplacian of the temporal neighborhood graph (N-by-N,
/// symmetric, positive semidefinite, zero row sums).
#[derive(Debug, Clone)]
pub struct TemporalLaplacian {
    matrix: DMatrix<f64>,
}

impl TemporalLaplacian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }
}

/// Assembles the weighted temporal Laplacian. For every point i and every
/// other point j within floor(K/2) index positions, the pair contributes
/// weight(|t_i - t_j|) to the Laplacian stencil (+w on both diagonals, -w
/// on both off-diagonals). The loop visits each unordered pair from both
/// sides, so every pair is counted twice; this doubles the matrix relative
/// to a one-sided sum and only rescales the regularization parameter.
pub fn temporal_laplacian(timestamps: &[i64], w: &TemporalWeighting) -> Result<TemporalLaplacian> {
    let n = timestamps.len();
    if n < 2 {
        return Err(CoreError::invalid("need at least 2 timestamps"));
    }
    if timestamps.windows(2).any(|p| p[1] <= p[0]) {
        return Err(CoreError::invalid(
            "timestamps must be strictly increasing",
        ));
    }
    let half = w.window / 2;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        for j in lo..=hi {
            if j == i {
                continue;
            }
            let tau = timestamps[i].abs_diff(timestamps[j]);
            let wij = w.weight(tau);
            a[(i, i)] += wij;
            a[(j, j)] += wij;
            a[(i, j)] -= wij;
            a[(j, i)] -= wij;
        }
    }
    Ok(TemporalLaplacian { matrix: a })
}

/// Laplacian quadratic form Tr(A X^T X). Evaluated as the weighted sum of
/// squared distances between embedded pairs, which keeps the value
/// nonnegative by construction (requires zero row sums, which the
/// temporal Laplacian guarantees).
pub fn compactness(x: &DMatrix<f64>, a: &TemporalLaplacian) -> f64 {
    let m = a.matrix();
    let n = m.nrows();
    debug_assert_eq!(x.ncols(), n);
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let w = -m[(i, j)];
            if w != 0.0 {
                total += w * (x.column(i) - x.column(j)).norm_squared();
            }
        }
    }
    total
}

/// Column mean of delta_n.
fn column_mean(delta_n: &DMatrix<f64>) -> DVector<f64> {
    let n = delta_n.nrows() as f64;
    DVector::from_fn(delta_n.nrows(), |i, _| delta_n.row(i).sum() / n)
}

/// Right-hand side Q = 1/2 (mean(delta_n) 1^T - delta_x), an n-by-N matrix.
fn fit_target(delta_n: &DMatrix<f64>, delta_x: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = column_mean(delta_n);
    DMatrix::from_fn(delta_x.nrows(), delta_x.ncols(), |i, j| {
        0.5 * (mean[i] - delta_x[(i, j)])
    })
}

/// Plain out-of-sample extension: X = 1/2 L# (mean(delta_n) 1^T - delta_x).
/// This is the least-squares minimizer of the distance-fit objective.
pub fn isomap_oose(
    emb: &TrainedEmbedding,
    delta_n: &DMatrix<f64>,
    delta_x: &DMatrix<f64>,
) -> DMatrix<f64> {
    pseudo_inverse_transpose(emb) * fit_target(delta_n, delta_x)
}

/// Solver used for the regularized system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Materializes (I (x) D) + lambda (A^T (x) I) and solves the
    /// m*N-dimensional system directly. Exact mirror of the closed form;
    /// kept as the cross-check oracle.
    KroneckerDirect,
    /// Eigendecomposes the Laplacian and solves an m-by-m system per
    /// rotated column. Default; avoids the m*N-sized matrix.
    SylvesterEigen,
}

/// Result of a regularized extension solve.
#[derive(Debug, Clone)]
pub struct ExtensionResult {
    /// m-by-N embedded out-of-sample points (columns).
    pub x_matrix: DMatrix<f64>,
    /// Regularization value used.
    pub lambda: f64,
    /// Squared Frobenius distance-fit residual |Q - L^T X|_F^2.
    pub fit_residual: f64,
    /// Temporal compactness Tr(A X^T X) at the solution.
    pub compactness: f64,
}

struct SystemParts {
    l: DMatrix<f64>,
    q: DMatrix<f64>,
    /// D = L L^T
    d: DMatrix<f64>,
    /// C = -2 L Q
    c: DMatrix<f64>,
}

fn system_parts(
    emb: &TrainedEmbedding,
    delta_n: &DMatrix<f64>,
    delta_x: &DMatrix<f64>,
) -> SystemParts {
    let l = emb.l_matrix().clone();
    let q = fit_target(delta_n, delta_x);
    let d = &l * l.transpose();
    let c = -2.0 * (&l * &q);
    SystemParts { l, q, d, c }
}

fn solve_kronecker(
    parts: &SystemParts,
    a: &TemporalLaplacian,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    let m = parts.d.nrows();
    let n = a.len();
    let system = DMatrix::identity(n, n).kronecker(&parts.d)
        + a.matrix().transpose().kronecker(&DMatrix::identity(m, m)) * lambda;
    // vect(X) stacks columns, which matches the column-major storage.
    let rhs = DVector::from_column_slice(parts.c.as_slice()) * -0.5;
    let lu = system.lu();
    let x = lu.solve(&rhs).ok_or_else(|| {
        CoreError::SingularSystem(format!(
            "{}x{} regularized system has no unique solution (lambda = {lambda})",
            m * n,
            m * n
        ))
    })?;
    Ok(DMatrix::from_column_slice(m, n, x.as_slice()))
}

fn solve_sylvester(
    parts: &SystemParts,
    a: &TemporalLaplacian,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    let m = parts.d.nrows();
    let n = a.len();
    let eig = nalgebra::linalg::SymmetricEigen::new(a.matrix().clone());
    // D X + lambda X A = L Q; with A = V S V^T and X~ = X V the columns
    // decouple: (D + lambda s_j I) x~_j = (L Q V)_j.
    let rhs = &parts.l * &parts.q * &eig.eigenvectors;
    let mut xt = DMatrix::zeros(m, n);
    for j in 0..n {
        let shifted = &parts.d + DMatrix::from_diagonal(&DVector::from_element(m, 1.0))
            * (lambda * eig.eigenvalues[j]);
        let lu = shifted.lu();
        let col = lu.solve(&rhs.column(j).clone_owned()).ok_or_else(|| {
            CoreError::SingularSystem(format!(
                "shifted system singular at rotated column {j} (lambda = {lambda})"
            ))
        })?;
        xt.set_column(j, &col);
    }
    Ok(xt * eig.eigenvectors.transpose())
}

/// Solves the temporally regularized extension: the m-by-N matrix X with
/// D X + lambda X A = L Q, where D = L L^T and Q is the distance-fit
/// target. With lambda = 0 this reduces to [`isomap_oose`].
pub fn mets_solve(
    emb: &TrainedEmbedding,
    delta_n: &DMatrix<f64>,
    delta_x: &DMatrix<f64>,
    a: &TemporalLaplacian,
    lambda: f64,
    solver: Solver,
) -> Result<ExtensionResult> {
    if !(lambda >= 0.0) {
        return Err(CoreError::invalid("lambda must be >= 0"));
    }
    if delta_x.ncols() != a.len() {
        return Err(CoreError::invalid(format!(
            "delta_x has {} columns but the temporal Laplacian is {}x{}",
            delta_x.ncols(),
            a.len(),
            a.len()
        )));
    }
    if delta_x.nrows() != emb.len() || delta_n.nrows() != emb.len() {
        return Err(CoreError::invalid(
            "distance matrices do not match the embedding size",
        ));
    }
    let parts = system_parts(emb, delta_n, delta_x);
    let x = match solver {
        Solver::KroneckerDirect => solve_kronecker(&parts, a, lambda)?,
        Solver::SylvesterEigen => solve_sylvester(&parts, a, lambda)?,
    };
    let fit_residual = (&parts.q - parts.l.transpose() * &x).norm_squared();
    let compactness = compactness(&x, a);
    Ok(ExtensionResult {
        x_matrix: x,
        lambda,
        fit_residual,
        compactness,
    })
}

/// Frobenius norm of the objective gradient C + 2 D X + 2 lambda X A at a
/// candidate solution; the universal optimality check.
pub fn gradient_residual(
    emb: &TrainedEmbedding,
    delta_n: &DMatrix<f64>,
    delta_x: &DMatrix<f64>,
    a: &TemporalLaplacian,
    lambda: f64,
    x: &DMatrix<f64>,
) -> f64 {
    let parts = system_parts(emb, delta_n, delta_x);
    (&parts.c + 2.0 * &parts.d * x + 2.0 * lambda * x * a.matrix()).norm()
}

/// Frobenius norm of C = -2 L Q, used to scale gradient tolerances.
pub fn gradient_scale(
    emb: &TrainedEmbedding,
    delta_n: &DMatrix<f64>,
    delta_x: &DMatrix<f64>,
) -> f64 {
    system_parts(emb, delta_n, delta_x).c.norm()
}
