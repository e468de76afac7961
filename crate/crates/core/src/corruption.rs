//! Synthetic image corruption: salt-and-pepper flips, additive Gaussian
//! noise, and linear motion blur with randomized length and angle. All
//! operations are pure functions of (input, parameters, seed) and keep
//! pixel intensities in [0, 1].

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::par;
use crate::Result;

/// Grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: DMatrix<f64>,
}

impl Image {
    pub fn new(pixels: DMatrix<f64>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(CoreError::invalid("image must be non-empty"));
        }
        if pixels.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(CoreError::invalid("pixel intensities must lie in [0, 1]"));
        }
        Ok(Image { pixels })
    }

    /// Reassembles an image from a row-major flattened slice.
    pub fn from_flat(flat: &[f64], height: usize, width: usize) -> Result<Self> {
        if flat.len() != height * width {
            return Err(CoreError::invalid(format!(
                "{} values cannot fill a {height}x{width} image",
                flat.len()
            )));
        }
        Image::new(DMatrix::from_row_slice(height, width, flat))
    }

    /// Row-major flattened pixels.
    pub fn to_flat(&self) -> Vec<f64> {
        let (h, w) = self.shape();
        let mut out = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                out.push(self.pixels[(r, c)]);
            }
        }
        out
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.pixels.nrows(), self.pixels.ncols())
    }

    pub fn pixels(&self) -> &DMatrix<f64> {
        &self.pixels
    }
}

/// Family of corruption models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    SaltPepper,
    Gaussian,
    MotionBlur,
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::SaltPepper => "salt-pepper",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::MotionBlur => "motion-blur",
        }
    }
}

/// One corruption setting: the model plus its strength (flip probability
/// p, noise level sigma, or blur scale beta, depending on the kind).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub level: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, level: f64) -> Result<Self> {
        match kind {
            NoiseKind::SaltPepper => {
                if !(0.0..=1.0).contains(&level) {
                    return Err(CoreError::invalid("flip probability must be in [0, 1]"));
                }
            }
            NoiseKind::Gaussian => {
                if !(level >= 0.0) {
                    return Err(CoreError::invalid("noise level sigma must be >= 0"));
                }
            }
            NoiseKind::MotionBlur => {
                if !(level > 0.0) {
                    return Err(CoreError::invalid("blur scale beta must be > 0"));
                }
            }
        }
        Ok(NoiseSpec { kind, level })
    }

    /// Applies this corruption to one image, deterministically in the seed.
    pub fn apply(&self, img: &Image, seed: u64) -> Image {
        match self.kind {
            NoiseKind::SaltPepper => salt_pepper(img, self.level, seed),
            NoiseKind::Gaussian => gaussian_noise(img, self.level, seed),
            NoiseKind::MotionBlur => motion_blur(img, self.level, seed),
        }
    }
}

/// Splitmix-style seed mixer used to derive independent per-image and
/// per-instance streams from one master seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Flips each pixel independently with probability p: half of the flips
/// to 0, half to 1.
pub fn salt_pepper(img: &Image, p: f64, seed: u64) -> Image {
    debug_assert!((0.0..=1.0).contains(&p));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = img.pixels.clone();
    for v in pixels.iter_mut() {
        let u = rng.random::<f64>();
        if u < p / 2.0 {
            *v = 0.0;
        } else if u < p {
            *v = 1.0;
        }
    }
    Image { pixels }
}

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation sigma and
/// clips back to [0, 1].
pub fn gaussian_noise(img: &Image, sigma: f64, seed: u64) -> Image {
    debug_assert!(sigma >= 0.0);
    if sigma == 0.0 {
        return img.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma checked nonnegative");
    let mut pixels = img.pixels.clone();
    for v in pixels.iter_mut() {
        *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
    }
    Image { pixels }
}

fn point_segment_distance(px: f64, py: f64, hx: f64, hy: f64) -> f64 {
    // Segment from (-hx,-hy) to (hx,hy).
    let len2 = 4.0 * (hx * hx + hy * hy);
    if len2 == 0.0 {
        return (px * px + py * py).sqrt();
    }
    let t = (((px + hx) * 2.0 * hx + (py + hy) * 2.0 * hy) / len2).clamp(0.0, 1.0);
    let cx = -hx + t * 2.0 * hx;
    let cy = -hy + t * 2.0 * hy;
    ((px - cx) * (px - cx) + (py - cy) * (py - cy)).sqrt()
}

/// Normalized kernel approximating linear camera motion over `eta` pixels
/// at `theta` degrees counterclockwise. Pixels within unit distance of the
/// centered motion segment get anti-aliased weights 1 - distance; the
/// kernel is cropped to its support and always sums to 1.
pub fn motion_blur_kernel(eta: f64, theta_deg: f64) -> DMatrix<f64> {
    let eta = eta.max(1.0);
    let theta = theta_deg.to_radians();
    let half = (eta - 1.0) / 2.0;
    let hx = half * theta.cos();
    let hy = half * theta.sin();
    let radius = (half + 1.0).ceil() as i64;
    let size = (2 * radius + 1) as usize;
    let mut grid = DMatrix::zeros(size, size);
    for row in 0..size {
        for col in 0..size {
            // x to the right, y upward, so theta turns counterclockwise.
            let px = col as f64 - radius as f64;
            let py = radius as f64 - row as f64;
            let w = 1.0 - point_segment_distance(px, py, hx, hy);
            if w > 1e-9 {
                grid[(row, col)] = w;
            }
        }
    }
    // Crop zero rows/columns.
    let rows: Vec<usize> = (0..size).filter(|&r| grid.row(r).sum() > 0.0).collect();
    let cols: Vec<usize> = (0..size).filter(|&c| grid.column(c).sum() > 0.0).collect();
    let mut kernel = DMatrix::zeros(rows.len(), cols.len());
    for (ri, &r) in rows.iter().enumerate() {
        for (ci, &c) in cols.iter().enumerate() {
            kernel[(ri, ci)] = grid[(r, c)];
        }
    }
    let total: f64 = kernel.sum();
    kernel / total
}

/// Randomized blur parameters: angle uniform on [0, 360) degrees, length
/// exponential with mean `beta` (a Gamma draw with unit shape). The raw
/// length is reported; the kernel clamps it below at one pixel.
#[derive(Debug, Clone, Copy)]
pub struct MotionParams {
    pub eta: f64,
    pub theta_deg: f64,
}

pub fn draw_motion_params<R: Rng>(beta: f64, rng: &mut R) -> MotionParams {
    debug_assert!(beta > 0.0);
    let theta_deg = rng.random_range(0.0..360.0);
    let eta = Exp::new(1.0 / beta).expect("beta checked positive").sample(rng);
    MotionParams { eta, theta_deg }
}

/// Convolves with replicate-border handling and clips to [0, 1].
fn convolve_replicate(img: &Image, kernel: &DMatrix<f64>) -> Image {
    let (h, w) = img.shape();
    let (kh, kw) = (kernel.nrows() as i64, kernel.ncols() as i64);
    let (ch, cw) = (kh / 2, kw / 2);
    let src = &img.pixels;
    let pixels = DMatrix::from_fn(h, w, |r, c| {
        let mut acc = 0.0;
        for kr in 0..kh {
            let sr = (r as i64 + kr - ch).clamp(0, h as i64 - 1) as usize;
            for kc in 0..kw {
                let sc = (c as i64 + kc - cw).clamp(0, w as i64 - 1) as usize;
                acc += kernel[(kr as usize, kc as usize)] * src[(sr, sc)];
            }
        }
        acc.clamp(0.0, 1.0)
    });
    Image { pixels }
}

/// Applies a randomized linear motion blur: one (length, angle) draw per
/// image, replicate borders, output clipped to [0, 1].
pub fn motion_blur(img: &Image, beta: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = draw_motion_params(beta, &mut rng);
    let kernel = motion_blur_kernel(params.eta, params.theta_deg);
    convolve_replicate(img, &kernel)
}

fn corrupt_series_impl(
    points: &DMatrix<f64>,
    height: usize,
    width: usize,
    spec: &NoiseSpec,
    base_seed: u64,
    parallel: bool,
) -> Result<DMatrix<f64>> {
    if points.ncols() != height * width {
        return Err(CoreError::invalid(format!(
            "rows of length {} cannot be {height}x{width} images",
            points.ncols()
        )));
    }
    let n = points.nrows();
    let run = |i: usize| -> Result<Vec<f64>> {
        let row: Vec<f64> = points.row(i).iter().copied().collect();
        let img = Image::from_flat(&row, height, width)?;
        Ok(spec.apply(&img, derive_seed(base_seed, i as u64)).to_flat())
    };
    let rows = if parallel {
        par::map_collect(n, run)
    } else {
        par::map_collect_seq(n, run)
    };
    let mut out = DMatrix::zeros(n, height * width);
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        for (j, v) in row.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Corrupts every row of a flattened-image matrix, with an independent
/// seed derived per image.
pub fn corrupt_series(
    points: &DMatrix<f64>,
    height: usize,
    width: usize,
    spec: &NoiseSpec,
    base_seed: u64,
) -> Result<DMatrix<f64>> {
    corrupt_series_impl(points, height, width, spec, base_seed, true)
}

/// Sequential twin of [`corrupt_series`].
#[doc(hidden)]
pub fn corrupt_series_seq(
    points: &DMatrix<f64>,
    height: usize,
    width: usize,
    spec: &NoiseSpec,
    base_seed: u64,
) -> Result<DMatrix<f64>> {
    corrupt_series_impl(points, height, width, spec, base_seed, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gray(h: usize, w: usize, v: f64) -> Image {
        Image::new(DMatrix::from_element(h, w, v)).unwrap()
    }

    #[test]
    fn salt_pepper_zero_probability_is_identity() {
        let img = gray(8, 8, 0.37);
        assert_eq!(salt_pepper(&img, 0.0, 1).pixels(), img.pixels());
    }

    #[test]
    fn salt_pepper_full_probability_binarizes() {
        let img = gray(16, 16, 0.5);
        let out = salt_pepper(&img, 1.0, 2);
        assert!(out.pixels().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn salt_pepper_flip_fraction_near_nominal() {
        let p = 0.4;
        let img = gray(100, 100, 0.5);
        let out = salt_pepper(&img, p, 3);
        let flips = out.pixels().iter().filter(|&&v| v != 0.5).count() as f64;
        let frac = flips / 1e4;
        let bound = 3.0 * (p * (1.0 - p) / 1e4f64).sqrt();
        assert!((frac - p).abs() <= bound, "fraction {frac} vs p={p}");
    }

    #[test]
    fn salt_pepper_deterministic_per_seed() {
        let img = gray(10, 10, 0.2);
        assert_eq!(salt_pepper(&img, 0.3, 9).pixels(), salt_pepper(&img, 0.3, 9).pixels());
        assert_ne!(salt_pepper(&img, 0.3, 9).pixels(), salt_pepper(&img, 0.3, 10).pixels());
    }

    #[test]
    fn gaussian_zero_sigma_is_identity() {
        let img = gray(5, 5, 0.8);
        assert_eq!(gaussian_noise(&img, 0.0, 4).pixels(), img.pixels());
    }

    #[test]
    fn gaussian_residual_std_near_sigma() {
        // Mid-gray keeps clipping negligible.
        let sigma = 0.1;
        let img = gray(100, 100, 0.5);
        let out = gaussian_noise(&img, sigma, 5);
        let residuals: Vec<f64> = out.pixels().iter().map(|&v| v - 0.5).collect();
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
            / (residuals.len() - 1) as f64;
        let std = var.sqrt();
        assert!((std - sigma).abs() / sigma < 0.05, "std {std} vs sigma {sigma}");
    }

    #[test]
    fn gaussian_output_stays_in_range() {
        let img = gray(20, 20, 0.95);
        let out = gaussian_noise(&img, 0.5, 6);
        assert!(out.pixels().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn unit_length_kernel_is_identity() {
        for theta in [0.0, 33.0, 90.0, 215.0] {
            let k = motion_blur_kernel(1.0, theta);
            assert_eq!(k.shape(), (1, 1));
            assert_eq!(k[(0, 0)], 1.0);
        }
    }

    #[test]
    fn horizontal_kernel_is_uniform() {
        let k = motion_blur_kernel(5.0, 0.0);
        assert_eq!(k.shape(), (1, 5));
        for c in 0..5 {
            assert_relative_eq!(k[(0, c)], 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotated_kernel_is_transpose() {
        let k0 = motion_blur_kernel(5.0, 0.0);
        let k90 = motion_blur_kernel(5.0, 90.0);
        assert_eq!(k90.shape(), (5, 1));
        assert_relative_eq!(k90, k0.transpose(), epsilon = 1e-12);
    }

    #[test]
    fn kernels_sum_to_one() {
        for (eta, theta) in [(1.0, 12.0), (3.7, 45.0), (8.2, 120.5), (20.0, 303.0)] {
            let k = motion_blur_kernel(eta, theta);
            assert!((k.sum() - 1.0).abs() < 1e-12, "eta={eta} theta={theta}");
        }
    }

    #[test]
    fn blur_preserves_constant_images() {
        let img = gray(12, 15, 0.42);
        let out = motion_blur(&img, 20.0, 7);
        for v in out.pixels().iter() {
            assert_relative_eq!(*v, 0.42, epsilon = 1e-12);
        }
    }

    #[test]
    fn exponential_length_mean_matches_beta() {
        let beta = 10.0;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| draw_motion_params(beta, &mut rng).eta)
            .sum::<f64>()
            / n as f64;
        assert!((mean - beta).abs() / beta < 0.02, "mean {mean}");
    }

    #[test]
    fn series_corruption_is_deterministic_and_per_image() {
        let points = DMatrix::from_fn(6, 16, |i, j| ((i * 16 + j) % 7) as f64 / 7.0);
        let spec = NoiseSpec::new(NoiseKind::SaltPepper, 0.5).unwrap();
        let a = corrupt_series(&points, 4, 4, &spec, 99).unwrap();
        let b = corrupt_series(&points, 4, 4, &spec, 99).unwrap();
        assert_eq!(a, b);
        let seq = corrupt_series_seq(&points, 4, 4, &spec, 99).unwrap();
        assert_eq!(a, seq);
        // Identical rows get different seeds, so they corrupt differently.
        let points2 = DMatrix::from_fn(2, 16, |_, _| 0.5);
        let c = corrupt_series(&points2, 4, 4, &spec, 1).unwrap();
        assert_ne!(c.row(0), c.row(1));
    }

    #[test]
    fn noise_spec_validation() {
        assert!(NoiseSpec::new(NoiseKind::SaltPepper, 1.2).is_err());
        assert!(NoiseSpec::new(NoiseKind::Gaussian, -0.1).is_err());
        assert!(NoiseSpec::new(NoiseKind::MotionBlur, 0.0).is_err());
        assert!(NoiseSpec::new(NoiseKind::MotionBlur, 10.0).is_ok());
    }
}
