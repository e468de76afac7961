//! Synthetic image-manifold generator.
//!
//! Each data point is an image of one Gaussian blob; the blob center is
//! the point's two-dimensional latent parameter. Training images sample a
//! jittered uniform grid over the parameter square, test images follow a
//! smooth closed curve sampled at unit time steps, so the generated data
//! has exactly the structure the embedding pipeline assumes: a
//! two-parameter image manifold plus a temporally ordered trajectory.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corruption::Image;
use crate::error::CoreError;
use crate::extension::TimeSeriesSet;
use crate::geodesics::Dataset;
use crate::Result;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub height: usize,
    pub width: usize,
    /// Standard deviation of the Gaussian blob, in pixels.
    pub blob_width: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            height: 28,
            width: 28,
            blob_width: 2.0,
            n_train: 900,
            n_test: 100,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_train < 2 || self.n_test < 2 {
            return Err(CoreError::invalid("need at least 2 training and 2 test points"));
        }
        if !(self.blob_width > 0.0) {
            return Err(CoreError::invalid("blob width must be positive"));
        }
        let margin = self.margin();
        if 2.0 * margin + 1.0 >= self.width.min(self.height) as f64 {
            return Err(CoreError::invalid(format!(
                "blob of width {} does not fit a {}x{} image",
                self.blob_width, self.height, self.width
            )));
        }
        Ok(())
    }

    /// Border kept clear so the blob never clips at the image edge.
    fn margin(&self) -> f64 {
        3.0 * self.blob_width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }
}

/// Generated dataset bundle. The latent blob centers are kept for
/// diagnostics; `test_params` is the ground truth for the extension
/// trajectory.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub training: Dataset,
    pub test: TimeSeriesSet,
    /// n_test-by-2 latent parameters of the test trajectory.
    pub test_params: DMatrix<f64>,
    /// n_train-by-2 latent parameters of the training grid.
    pub train_params: DMatrix<f64>,
}

/// Renders the blob image for a latent center, row-major peak-1 Gaussian.
pub fn blob_image(spec: &SyntheticSpec, cx: f64, cy: f64) -> Image {
    let denom = 2.0 * spec.blob_width * spec.blob_width;
    let pixels = DMatrix::from_fn(spec.height, spec.width, |r, c| {
        let dx = c as f64 - cx;
        let dy = r as f64 - cy;
        (-(dx * dx + dy * dy) / denom).exp()
    });
    Image::new(pixels).expect("blob values lie in (0, 1]")
}

fn flatten_images(spec: &SyntheticSpec, params: &DMatrix<f64>) -> DMatrix<f64> {
    let d = spec.pixel_count();
    let mut out = DMatrix::zeros(params.nrows(), d);
    for i in 0..params.nrows() {
        let flat = blob_image(spec, params[(i, 0)], params[(i, 1)]).to_flat();
        for (j, v) in flat.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

/// Generates the training grid, the test trajectory, and their latent
/// parameters. Pure function of the spec: the seed only drives the grid
/// jitter that breaks exact symmetry ties.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let margin = spec.margin();
    let (x0, x1) = (margin, spec.width as f64 - 1.0 - margin);
    let (y0, y1) = (margin, spec.height as f64 - 1.0 - margin);

    // Training grid with mild jitter.
    let g = (spec.n_train as f64).sqrt().ceil() as usize;
    let step_x = (x1 - x0) / (g.max(2) - 1) as f64;
    let step_y = (y1 - y0) / (g.max(2) - 1) as f64;
    let mut train_params = DMatrix::zeros(spec.n_train, 2);
    let mut idx = 0;
    'grid: for gy in 0..g {
        for gx in 0..g {
            if idx >= spec.n_train {
                break 'grid;
            }
            let jx = 0.15 * step_x * (2.0 * rng.random::<f64>() - 1.0);
            let jy = 0.15 * step_y * (2.0 * rng.random::<f64>() - 1.0);
            train_params[(idx, 0)] = (x0 + gx as f64 * step_x + jx).clamp(x0, x1);
            train_params[(idx, 1)] = (y0 + gy as f64 * step_y + jy).clamp(y0, y1);
            idx += 1;
        }
    }

    // Smooth closed Lissajous trajectory for the test sequence.
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let (ax, ay) = (0.85 * (x1 - x0) / 2.0, 0.85 * (y1 - y0) / 2.0);
    let mut test_params = DMatrix::zeros(spec.n_test, 2);
    for i in 0..spec.n_test {
        let t = 2.0 * std::f64::consts::PI * i as f64 / spec.n_test as f64;
        test_params[(i, 0)] = cx + ax * t.cos();
        test_params[(i, 1)] = cy + ay * (2.0 * t).sin();
    }

    let training = Dataset::new(flatten_images(spec, &train_params))?;
    let test = TimeSeriesSet::with_unit_timestamps(flatten_images(spec, &test_params))?;
    Ok(SyntheticData {
        training,
        test,
        test_params,
        train_params,
    })
}
