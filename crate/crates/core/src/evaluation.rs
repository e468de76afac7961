//! Evaluation harness: Procrustes alignment, the mean embedding error,
//! parameter tuning, and the full noise-sweep experiment runner.
//!
//! Protocol per noise level: generate six corrupted instances of the test
//! sequence from derived seeds, tune each method's parameter on the first
//! instance, evaluate the tuned method on the remaining five, and report
//! mean error and its standard error. Embeddings are aligned to the
//! clean-data reference with a full similarity transform before the error
//! is measured.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{mbms_denoise, st_isomap_graph, MbmsParams, StIsomapParams};
use crate::config::{DatasetSource, ExperimentConfig, MethodConfig};
use crate::corruption::{corrupt_series, derive_seed, NoiseKind, NoiseSpec};
use crate::error::CoreError;
use crate::extension::{
    isomap_oose, mets_solve, temporal_laplacian, Solver, TemporalLaplacian, TemporalWeighting,
    TimeSeriesSet,
};
use crate::geodesics::{
    build_knn_graph, extend_distances, shortest_path_distances, Dataset, NeighborGraph,
};
use crate::isomap::{isomap_embed, TrainedEmbedding};
use crate::par;
use crate::synth::generate_synthetic;
use crate::Result;

/// Similarity transform mapping a target point set onto a reference:
/// scale * rotation * W + translation.
#[derive(Debug, Clone)]
pub struct AlignmentTransform {
    pub rotation: DMatrix<f64>,
    pub scale: f64,
    pub translation: DVector<f64>,
}

impl AlignmentTransform {
    pub fn apply(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.scale * &self.rotation * w;
        for mut col in out.column_iter_mut() {
            col += &self.translation;
        }
        out
    }
}

/// Finds the similarity transform (full orthogonal group, reflections
/// allowed) minimizing the Frobenius distance between the transformed
/// target and the reference, and returns it with the transformed target.
/// MDS embeddings are only determined up to such a transform, so this is
/// the canonical way to compare them.
pub fn procrustes_align(
    reference: &DMatrix<f64>,
    target: &DMatrix<f64>,
) -> Result<(AlignmentTransform, DMatrix<f64>)> {
    if reference.shape() != target.shape() {
        return Err(CoreError::invalid(format!(
            "shape mismatch: reference {:?} vs target {:?}",
            reference.shape(),
            target.shape()
        )));
    }
    let (m, n) = reference.shape();
    if n < m {
        return Err(CoreError::invalid(format!(
            "need at least as many points ({n}) as dimensions ({m})"
        )));
    }
    let z_bar = reference.column_mean();
    let w_bar = target.column_mean();
    let mut z_c = reference.clone();
    let mut w_c = target.clone();
    for mut col in z_c.column_iter_mut() {
        col -= &z_bar;
    }
    for mut col in w_c.column_iter_mut() {
        col -= &w_bar;
    }
    let w_norm2 = w_c.norm_squared();
    if w_norm2 == 0.0 {
        return Err(CoreError::Degenerate(
            "all target points are identical".into(),
        ));
    }
    if z_c.norm_squared() == 0.0 {
        return Err(CoreError::Degenerate(
            "all reference points are identical".into(),
        ));
    }
    let cross = &z_c * w_c.transpose();
    let svd = cross.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let rotation = u * v_t;
    let scale = svd.singular_values.iter().sum::<f64>() / w_norm2;
    let translation = z_bar - scale * &rotation * w_bar;
    let transform = AlignmentTransform {
        rotation,
        scale,
        translation,
    };
    let aligned = transform.apply(target);
    Ok((transform, aligned))
}

/// Mean Euclidean distance between matching columns.
pub fn oose_error(z: &DMatrix<f64>, w_aligned: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(z.shape(), w_aligned.shape());
    let n = z.ncols();
    (0..n)
        .map(|j| (z.column(j) - w_aligned.column(j)).norm())
        .sum::<f64>()
        / n as f64
}

/// Aligns `x` to the reference and measures the error.
pub fn align_error(reference: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let (_, aligned) = procrustes_align(reference, x)?;
    Ok(oose_error(reference, &aligned))
}

/// Result of a grid search.
#[derive(Debug, Clone)]
pub struct Tuned<P> {
    pub value: P,
    pub errors: Vec<f64>,
}

/// Runs `eval` at every grid value and returns the argmin. Ties go to the
/// smallest parameter value.
pub fn tune_parameter<F>(grid: &[f64], mut eval: F) -> Result<Tuned<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(CoreError::invalid("empty tuning grid"));
    }
    let mut errors = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &value in grid {
        let err = eval(value)?;
        errors.push(err);
        let better = match best {
            None => true,
            Some((be, bv)) => err < be || (err == be && value < bv),
        };
        if better {
            best = Some((err, value));
        }
    }
    let (_, value) = best.expect("grid nonempty");
    Ok(Tuned { value, errors })
}

fn mean_sem(errors: &[f64]) -> (f64, f64) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    if errors.len() < 2 {
        return (mean, 0.0);
    }
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt() / n.sqrt())
}

/// One method-by-noise-level cell of the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: String,
    pub noise_kind: NoiseKind,
    pub noise_level: f64,
    /// Mean error over the evaluation instances; absent if the cell failed.
    pub mean_error: Option<f64>,
    /// Standard error of the mean, s / sqrt(instance count).
    pub sem: Option<f64>,
    pub per_instance_errors: Vec<f64>,
    pub tuned_params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Shared training-side state, computed once per experiment.
struct Pipeline {
    data: Dataset,
    test_clean: TimeSeriesSet,
    shape: (usize, usize),
    graph: NeighborGraph,
    delta_n: DMatrix<f64>,
    emb: TrainedEmbedding,
    /// Clean-data extension; the reference every method is scored against.
    reference: DMatrix<f64>,
    laplacian: TemporalLaplacian,
    train_timestamps: Vec<i64>,
    k: usize,
    m: usize,
    solver: Solver,
}

fn load_dataset(config: &ExperimentConfig) -> Result<(Dataset, TimeSeriesSet, (usize, usize))> {
    match &config.dataset {
        DatasetSource::Synthetic(spec) => {
            let data = generate_synthetic(spec)?;
            Ok((data.training, data.test, (spec.height, spec.width)))
        }
        DatasetSource::Files {
            train,
            test,
            timestamps,
            height,
            width,
        } => {
            let train_m = crate::dataio::read_matrix(train)
                .map_err(|e| CoreError::invalid(format!("{}: {e}", train.display())))?;
            let test_m = crate::dataio::read_matrix(test)
                .map_err(|e| CoreError::invalid(format!("{}: {e}", test.display())))?;
            if train_m.ncols() != height * width || test_m.ncols() != height * width {
                return Err(CoreError::invalid(format!(
                    "rows of length {} are not {height}x{width} images",
                    train_m.ncols()
                )));
            }
            let data = Dataset::new(train_m)?;
            let series = match timestamps {
                Some(path) => {
                    let ts_m = crate::dataio::read_matrix(path)
                        .map_err(|e| CoreError::invalid(format!("{}: {e}", path.display())))?;
                    let ts: Vec<i64> = ts_m.iter().map(|&v| v as i64).collect();
                    TimeSeriesSet::new(test_m, ts)?
                }
                None => TimeSeriesSet::with_unit_timestamps(test_m)?,
            };
            Ok((data, series, (*height, *width)))
        }
    }
}

fn build_pipeline(config: &ExperimentConfig) -> Result<Pipeline> {
    let (data, test_clean, shape) = load_dataset(config)?;
    if config.k >= data.n() {
        return Err(CoreError::invalid(format!(
            "k = {} must be below the training size {}",
            config.k,
            data.n()
        )));
    }
    let graph = build_knn_graph(&data, config.k)?;
    let delta_n = shortest_path_distances(&graph)?;
    let emb = isomap_embed(&delta_n, config.m)?;
    let delta_x_clean = extend_distances(&data, &graph, &delta_n, &test_clean, config.k)?;
    let reference = isomap_oose(&emb, &delta_n, &delta_x_clean);
    let weighting = TemporalWeighting::new(
        config.temporal.kind,
        config.temporal.window,
        config.temporal.alpha,
    )?;
    let laplacian = temporal_laplacian(test_clean.timestamps(), &weighting)?;
    let train_timestamps: Vec<i64> = (0..data.n() as i64).collect();
    Ok(Pipeline {
        data,
        test_clean,
        shape,
        graph,
        delta_n,
        emb,
        reference,
        laplacian,
        train_timestamps,
        k: config.k,
        m: config.m,
        solver: config.solver,
    })
}

impl Pipeline {
    /// Plain extension of a corrupted point set.
    fn plain_extension(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let series = self.test_clean.with_points(points.clone())?;
        let delta_x = extend_distances(&self.data, &self.graph, &self.delta_n, &series, self.k)?;
        Ok(isomap_oose(&self.emb, &self.delta_n, &delta_x))
    }

    /// Regularized extension of a corrupted point set.
    fn mets_extension(&self, points: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
        let series = self.test_clean.with_points(points.clone())?;
        let delta_x = extend_distances(&self.data, &self.graph, &self.delta_n, &series, self.k)?;
        Ok(mets_solve(
            &self.emb,
            &self.delta_n,
            &delta_x,
            &self.laplacian,
            lambda,
            self.solver,
        )?
        .x_matrix)
    }
}

/// Training-side state for one ST-Isomap parameter combination, including
/// its own clean-data reference aligned onto the plain one.
struct StPipeline {
    graph: NeighborGraph,
    delta_n: DMatrix<f64>,
    emb: TrainedEmbedding,
    reference: DMatrix<f64>,
}

fn build_st_pipeline(base: &Pipeline, params: &StIsomapParams) -> Result<StPipeline> {
    let graph = st_isomap_graph(&base.data, &base.train_timestamps, params)?;
    let delta_n = shortest_path_distances(&graph)?;
    let emb = isomap_embed(&delta_n, base.m)?;
    let delta_x = extend_distances(&base.data, &graph, &delta_n, &base.test_clean, params.k)?;
    let clean_x = isomap_oose(&emb, &delta_n, &delta_x);
    // The ST graph differs from the plain one even on clean data, so its
    // clean extension is aligned onto the plain reference first.
    let (_, reference) = procrustes_align(&base.reference, &clean_x)?;
    Ok(StPipeline {
        graph,
        delta_n,
        emb,
        reference,
    })
}

fn st_extension_error(
    base: &Pipeline,
    stp: &StPipeline,
    k: usize,
    points: &DMatrix<f64>,
) -> Result<f64> {
    let series = base.test_clean.with_points(points.clone())?;
    let delta_x = extend_distances(&base.data, &stp.graph, &stp.delta_n, &series, k)?;
    let x = isomap_oose(&stp.emb, &stp.delta_n, &delta_x);
    align_error(&stp.reference, &x)
}

/// Denoise the union of training and corrupted test points, rebuild the
/// training-side graph from the denoised training points, and extend the
/// denoised test points against the original clean embedding.
fn mbms_extension_error(
    base: &Pipeline,
    params: &MbmsParams,
    points: &DMatrix<f64>,
) -> Result<f64> {
    let n = base.data.n();
    let big_n = points.nrows();
    let d = base.data.dim();
    let mut union = DMatrix::zeros(n + big_n, d);
    union.view_mut((0, 0), (n, d)).copy_from(base.data.points());
    union.view_mut((n, 0), (big_n, d)).copy_from(points);
    let denoised = mbms_denoise(&union, params)?;
    let train_dn = Dataset::new(denoised.view((0, 0), (n, d)).into_owned())?;
    let oos_dn = base
        .test_clean
        .with_points(denoised.view((n, 0), (big_n, d)).into_owned())?;
    let graph = build_knn_graph(&train_dn, base.k)?;
    let delta_n = shortest_path_distances(&graph)?;
    let delta_x = extend_distances(&train_dn, &graph, &delta_n, &oos_dn, base.k)?;
    let x = isomap_oose(&base.emb, &delta_n, &delta_x);
    align_error(&base.reference, &x)
}

fn params_map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

/// Runs one method over one noise cell: tune on the first instance,
/// evaluate on the rest.
fn run_method_cell(
    base: &Pipeline,
    method: &MethodConfig,
    instances: &[DMatrix<f64>],
) -> Result<(Vec<f64>, BTreeMap<String, f64>)> {
    let tuning = &instances[0];
    let eval_set = &instances[1..];
    match method {
        MethodConfig::Isomap => {
            let errors = eval_set
                .iter()
                .map(|pts| align_error(&base.reference, &base.plain_extension(pts)?))
                .collect::<Result<Vec<f64>>>()?;
            Ok((errors, BTreeMap::new()))
        }
        MethodConfig::Mets { lambda_grid } => {
            let tuned = tune_parameter(lambda_grid, |lambda| {
                align_error(&base.reference, &base.mets_extension(tuning, lambda)?)
            })?;
            let errors = eval_set
                .iter()
                .map(|pts| align_error(&base.reference, &base.mets_extension(pts, tuned.value)?))
                .collect::<Result<Vec<f64>>>()?;
            Ok((errors, params_map(&[("lambda", tuned.value)])))
        }
        MethodConfig::StIsomap {
            epsilon_grid,
            c_ctn_grid,
            c_atn,
        } => {
            let mut eps_sorted = epsilon_grid.clone();
            eps_sorted.sort_unstable();
            let mut ctn_sorted = c_ctn_grid.clone();
            ctn_sorted.sort_by(f64::total_cmp);
            let mut best: Option<(f64, usize, f64, StPipeline)> = None;
            for &eps in &eps_sorted {
                for &c_ctn in &ctn_sorted {
                    let params = StIsomapParams::new(*c_atn, c_ctn, eps, base.k)?;
                    let stp = build_st_pipeline(base, &params)?;
                    let err = st_extension_error(base, &stp, base.k, tuning)?;
                    if best.as_ref().map_or(true, |(be, ..)| err < *be) {
                        best = Some((err, eps, c_ctn, stp));
                    }
                }
            }
            let (_, eps, c_ctn, stp) = best.expect("grids validated nonempty");
            let errors = eval_set
                .iter()
                .map(|pts| st_extension_error(base, &stp, base.k, pts))
                .collect::<Result<Vec<f64>>>()?;
            Ok((
                errors,
                params_map(&[
                    ("epsilon", eps as f64),
                    ("c_ctn", c_ctn),
                    ("c_atn", *c_atn),
                ]),
            ))
        }
        MethodConfig::Mbms {
            sigma_grid,
            local_dim,
            iterations,
            k,
        } => {
            let k = k.unwrap_or(base.k);
            let tuned = tune_parameter(sigma_grid, |sigma| {
                let params = MbmsParams::new(sigma, *local_dim, k, *iterations)?;
                mbms_extension_error(base, &params, tuning)
            })?;
            let params = MbmsParams::new(tuned.value, *local_dim, k, *iterations)?;
            let errors = eval_set
                .iter()
                .map(|pts| mbms_extension_error(base, &params, pts))
                .collect::<Result<Vec<f64>>>()?;
            Ok((errors, params_map(&[("sigma", tuned.value)])))
        }
    }
}

/// Number of corrupted instances per noise level: one for tuning, the
/// rest for evaluation.
pub const INSTANCES_PER_LEVEL: usize = 6;

/// Runs the full sweep. Cells run in parallel; per-instance seeds are
/// derived from the master seed, the noise grid position, and the
/// instance index, so results are independent of scheduling. Reports come
/// back in (method, noise grid, level) order. A failing cell is recorded
/// in its report and does not abort the others.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    config.validate()?;
    let pipeline = build_pipeline(config)?;
    let cells: Vec<(usize, usize)> = config
        .noise
        .iter()
        .enumerate()
        .flat_map(|(gi, grid)| (0..grid.levels.len()).map(move |li| (gi, li)))
        .collect();

    let per_cell: Vec<Vec<ExperimentReport>> = par::map_collect(cells.len(), |ci| {
        let (gi, li) = cells[ci];
        let grid = &config.noise[gi];
        let level = grid.levels[li];
        let cell_seed = derive_seed(config.seed, ((gi as u64) << 32) | li as u64);
        let (h, w) = pipeline.shape;
        let mut reports = Vec::with_capacity(config.methods.len());
        let instances: Result<Vec<DMatrix<f64>>> = NoiseSpec::new(grid.kind, level)
            .and_then(|spec| {
                (0..INSTANCES_PER_LEVEL)
                    .map(|i| {
                        corrupt_series(
                            pipeline.test_clean.points(),
                            h,
                            w,
                            &spec,
                            derive_seed(cell_seed, i as u64),
                        )
                    })
                    .collect()
            });
        for method in &config.methods {
            let mut report = ExperimentReport {
                method: method.name().to_string(),
                noise_kind: grid.kind,
                noise_level: level,
                mean_error: None,
                sem: None,
                per_instance_errors: Vec::new(),
                tuned_params: BTreeMap::new(),
                error: None,
            };
            match &instances {
                Ok(instances) => match run_method_cell(&pipeline, method, instances) {
                    Ok((errors, tuned)) => {
                        let (mean, sem) = mean_sem(&errors);
                        report.mean_error = Some(mean);
                        report.sem = Some(sem);
                        report.per_instance_errors = errors;
                        report.tuned_params = tuned;
                    }
                    Err(e) => report.error = Some(e.to_string()),
                },
                Err(e) => report.error = Some(e.to_string()),
            }
            reports.push(report);
        }
        reports
    });

    // Reorder method-major with noise cells in configuration order.
    let mut out = Vec::with_capacity(cells.len() * config.methods.len());
    for mi in 0..config.methods.len() {
        for (ci, _) in cells.iter().enumerate() {
            out.push(per_cell[ci][mi].clone());
        }
    }
    Ok(out)
}

/// JSON-lines serialization, one report per line.
pub fn reports_to_jsonl(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    for report in reports {
        out.push_str(&serde_json::to_string(report).expect("report serializes"));
        out.push('\n');
    }
    out
}

/// Flat CSV serialization for plotting.
pub fn reports_to_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("method,noise_kind,noise_level,mean_error,sem,tuned_params\n");
    for r in reports {
        let mean = r.mean_error.map(|v| v.to_string()).unwrap_or_default();
        let sem = r.sem.map(|v| v.to_string()).unwrap_or_default();
        let tuned = r
            .tuned_params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method,
            r.noise_kind.name(),
            r.noise_level,
            mean,
            sem,
            tuned
        ));
    }
    out
}

pub fn write_reports(dir: &Path, reports: &[ExperimentReport]) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CoreError::invalid(format!("cannot create {}: {e}", dir.display())))?;
    let jsonl = dir.join("reports.jsonl");
    let csv = dir.join("reports.csv");
    std::fs::write(&jsonl, reports_to_jsonl(reports))
        .map_err(|e| CoreError::invalid(format!("cannot write {}: {e}", jsonl.display())))?;
    std::fs::write(&csv, reports_to_csv(reports))
        .map_err(|e| CoreError::invalid(format!("cannot write {}: {e}", csv.display())))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rotation2(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    fn random_cloud(seed: u64, m: usize, n: usize) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| rng.random::<f64>() * 4.0 - 2.0)
    }

    #[test]
    fn aligning_identical_sets_is_identity() {
        let z = random_cloud(1, 2, 12);
        let (t, aligned) = procrustes_align(&z, &z).unwrap();
        assert_relative_eq!(aligned, z, epsilon = 1e-10);
        assert_relative_eq!(t.scale, 1.0, epsilon = 1e-12);
        assert_relative_eq!(t.rotation, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert!(t.translation.norm() < 1e-12);
    }

    #[test]
    fn similarity_transform_recovered() {
        let z = random_cloud(2, 2, 15);
        let r = rotation2(30f64.to_radians());
        let mut w = 2.0 * &r * &z;
        for mut col in w.column_iter_mut() {
            col[0] += 3.5;
            col[1] -= 1.25;
        }
        let (_, aligned) = procrustes_align(&z, &w).unwrap();
        assert_relative_eq!(aligned, z, epsilon = 1e-10);
        assert!(align_error(&z, &w).unwrap() < 1e-10);
    }

    #[test]
    fn reflection_recovered() {
        let z = random_cloud(3, 2, 15);
        let mut refl = rotation2(110f64.to_radians());
        refl[(0, 1)] = -refl[(0, 1)];
        refl[(1, 1)] = -refl[(1, 1)]; // determinant -1
        let w = 0.5 * &refl * &z;
        let (t, aligned) = procrustes_align(&z, &w).unwrap();
        assert!(t.rotation.determinant() < 0.0);
        assert_relative_eq!(aligned, z, epsilon = 1e-10);
    }

    #[test]
    fn alignment_idempotent() {
        let z = random_cloud(4, 2, 20);
        let w = random_cloud(5, 2, 20);
        let (_, aligned) = procrustes_align(&z, &w).unwrap();
        let (t2, aligned2) = procrustes_align(&z, &aligned).unwrap();
        assert_relative_eq!(t2.scale, 1.0, epsilon = 1e-10);
        assert_relative_eq!(t2.rotation, DMatrix::identity(2, 2), epsilon = 1e-8);
        assert!(t2.translation.norm() < 1e-10);
        assert_relative_eq!(aligned2, aligned, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_target_rejected() {
        let z = random_cloud(6, 2, 8);
        let w = DMatrix::from_element(2, 8, 1.5);
        assert!(matches!(
            procrustes_align(&z, &w),
            Err(CoreError::Degenerate(_))
        ));
    }

    /// Exhaustive rotation-grid oracle (1 degree steps, both reflection
    /// classes) with closed-form scale and translation per candidate.
    #[test]
    fn alignment_beats_rotation_grid_oracle() {
        let z = random_cloud(7, 2, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noisy = {
            let r = rotation2(73f64.to_radians());
            let mut w = 1.7 * &r * &z;
            for v in w.iter_mut() {
                *v += 0.01 * (rng.random::<f64>() - 0.5);
            }
            w
        };
        let ours = align_error(&z, &noisy).unwrap();
        let mut oracle = f64::INFINITY;
        for deg in 0..360 {
            for reflect in [false, true] {
                let mut r = rotation2((deg as f64).to_radians());
                if reflect {
                    r[(0, 1)] = -r[(0, 1)];
                    r[(1, 1)] = -r[(1, 1)];
                }
                // Closed-form scale/translation for this rotation.
                let z_bar = z.column_mean();
                let w_bar = noisy.column_mean();
                let mut z_c = z.clone();
                let mut w_c = noisy.clone();
                for mut col in z_c.column_iter_mut() {
                    col -= &z_bar;
                }
                for mut col in w_c.column_iter_mut() {
                    col -= &w_bar;
                }
                let rw = &r * &w_c;
                let scale = (z_c.transpose() * &rw).trace() / w_c.norm_squared();
                let mut cand = scale * rw;
                for mut col in cand.column_iter_mut() {
                    col += &z_bar;
                }
                oracle = oracle.min(oose_error(&z, &cand));
            }
        }
        assert!(ours <= oracle + 1e-4, "ours {ours} vs oracle {oracle}");
    }

    #[test]
    fn error_metric_direct_cases() {
        let z = random_cloud(9, 2, 10);
        assert_eq!(oose_error(&z, &z), 0.0);
        // Uniform column offset of norm c gives error exactly c.
        let mut w = z.clone();
        for mut col in w.column_iter_mut() {
            col[0] += 3.0;
            col[1] += 4.0;
        }
        assert_relative_eq!(oose_error(&z, &w), 5.0, epsilon = 1e-12);
        // Hand summation oracle.
        let w2 = random_cloud(10, 2, 10);
        let mut hand = 0.0;
        for j in 0..10 {
            hand += ((z[(0, j)] - w2[(0, j)]).powi(2) + (z[(1, j)] - w2[(1, j)]).powi(2)).sqrt();
        }
        assert_relative_eq!(oose_error(&z, &w2), hand / 10.0, epsilon = 1e-12);
    }

    #[test]
    fn alignment_error_not_worse_than_random_transforms() {
        let z = random_cloud(11, 2, 25);
        let w = random_cloud(12, 2, 25);
        let best = align_error(&z, &w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let r = rotation2(rng.random::<f64>() * std::f64::consts::TAU);
            let s = 0.2 + rng.random::<f64>() * 3.0;
            let mut cand = s * &r * &w;
            for mut col in cand.column_iter_mut() {
                col[0] += rng.random::<f64>() * 2.0 - 1.0;
                col[1] += rng.random::<f64>() * 2.0 - 1.0;
            }
            assert!(best <= oose_error(&z, &cand) + 1e-12);
        }
    }

    #[test]
    fn tuning_picks_argmin_and_breaks_ties_low() {
        let grid = [10.0, 20.0, 30.0];
        let errs = [3.0, 1.0, 2.0];
        let tuned = tune_parameter(&grid, |v| {
            Ok(errs[grid.iter().position(|&g| g == v).unwrap()])
        })
        .unwrap();
        assert_eq!(tuned.value, 20.0);
        let tie = tune_parameter(&grid, |v| Ok(if v < 25.0 { 1.0 } else { 2.0 })).unwrap();
        assert_eq!(tie.value, 10.0);
    }

    #[test]
    fn sem_is_sample_std_over_sqrt_n() {
        let errors = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (mean, sem) = mean_sem(&errors);
        assert_relative_eq!(mean, 3.0);
        let s = (10.0f64 / 4.0).sqrt();
        assert_relative_eq!(sem, s / 5.0f64.sqrt(), epsilon = 1e-12);
    }
}
