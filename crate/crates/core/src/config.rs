//! Experiment configuration.
//!
//! A single JSON document drives the evaluation harness: dataset source,
//! method list with their tuning grids, noise grids, pipeline parameters,
//! and the master seed. Unknown keys are rejected so grid typos cannot
//! silently fall back to defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corruption::NoiseKind;
use crate::error::CoreError;
use crate::extension::{Solver, WeightKind};
use crate::synth::SyntheticSpec;
use crate::Result;

/// Where the training/test data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Files {
        train: PathBuf,
        test: PathBuf,
        #[serde(default)]
        timestamps: Option<PathBuf>,
        /// Image shape of the flattened rows, required for corruption.
        height: usize,
        width: usize,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalConfig {
    /// Temporal window size K.
    pub window: usize,
    /// Decay parameter alpha.
    pub alpha: f64,
    pub kind: WeightKind,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig {
            window: 10,
            alpha: 0.0,
            kind: WeightKind::ExponentialDecay,
        }
    }
}

/// A method to evaluate, with its tuning grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodConfig {
    /// Plain extension; no tunable parameter.
    Isomap,
    /// Temporally regularized extension with a lambda grid.
    Mets {
        #[serde(default = "default_lambda_grid")]
        lambda_grid: Vec<f64>,
    },
    /// ST-Isomap extension with epsilon and c_ctn grids.
    StIsomap {
        #[serde(default = "default_epsilon_grid")]
        epsilon_grid: Vec<usize>,
        #[serde(default = "default_c_ctn_grid")]
        c_ctn_grid: Vec<f64>,
        #[serde(default = "default_c_atn")]
        c_atn: f64,
    },
    /// MBMS denoising followed by plain extension, with a sigma grid.
    Mbms {
        #[serde(default = "default_sigma_grid")]
        sigma_grid: Vec<f64>,
        #[serde(default = "default_local_dim")]
        local_dim: usize,
        #[serde(default = "default_mbms_iterations")]
        iterations: usize,
        /// Neighbor count; defaults to the pipeline k.
        #[serde(default)]
        k: Option<usize>,
    },
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Isomap => "isomap",
            MethodConfig::Mets { .. } => "mets",
            MethodConfig::StIsomap { .. } => "st-isomap",
            MethodConfig::Mbms { .. } => "mbms",
        }
    }
}

/// One noise family with the strength levels to sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseGrid {
    pub kind: NoiseKind,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Spatial neighbor count.
    pub k: usize,
    /// Embedding dimension.
    pub m: usize,
    pub temporal: TemporalConfig,
    pub solver: Solver,
    pub methods: Vec<MethodConfig>,
    pub noise: Vec<NoiseGrid>,
    /// Master seed; every instance seed is derived from it.
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic(SyntheticSpec::default()),
            k: 20,
            m: 2,
            temporal: TemporalConfig::default(),
            solver: Solver::SylvesterEigen,
            methods: vec![
                MethodConfig::Isomap,
                MethodConfig::Mets {
                    lambda_grid: default_lambda_grid(),
                },
            ],
            noise: default_noise_grids(),
            seed: 42,
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CoreError::invalid(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::invalid(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(CoreError::invalid("k must be >= 1"));
        }
        if self.m < 1 {
            return Err(CoreError::invalid("m must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(CoreError::invalid("at least one method required"));
        }
        if self.noise.is_empty() {
            return Err(CoreError::invalid("at least one noise grid required"));
        }
        for grid in &self.noise {
            if grid.levels.is_empty() {
                return Err(CoreError::invalid(format!(
                    "noise grid for {} has no levels",
                    grid.kind.name()
                )));
            }
        }
        for method in &self.methods {
            match method {
                MethodConfig::Mets { lambda_grid } if lambda_grid.is_empty() => {
                    return Err(CoreError::invalid("mets lambda grid is empty"));
                }
                MethodConfig::StIsomap {
                    epsilon_grid,
                    c_ctn_grid,
                    ..
                } if epsilon_grid.is_empty() || c_ctn_grid.is_empty() => {
                    return Err(CoreError::invalid("st-isomap grids must be nonempty"));
                }
                MethodConfig::Mbms { sigma_grid, .. } if sigma_grid.is_empty() => {
                    return Err(CoreError::invalid("mbms sigma grid is empty"));
                }
                _ => {}
            }
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Lambda tuning grid spanning six decades plus the unregularized point.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    for e in -2..=6 {
        let base = 10f64.powi(e);
        grid.push(base);
        grid.push(3.0 * base);
    }
    grid.pop(); // keep the top at 1e6
    grid
}

fn default_epsilon_grid() -> Vec<usize> {
    vec![1, 2, 3, 5]
}

fn default_c_ctn_grid() -> Vec<f64> {
    vec![1.0, 2.0, 5.0, 10.0]
}

fn default_c_atn() -> f64 {
    1.0
}

/// MBMS kernel-width grid: integers 1 through 20.
fn default_sigma_grid() -> Vec<f64> {
    (1..=20).map(|v| v as f64).collect()
}

fn default_local_dim() -> usize {
    2
}

fn default_mbms_iterations() -> usize {
    3
}

/// The default noise sweeps: flip probability 0.2..0.6, noise level
/// 0.1..0.5, blur scale 10..50.
pub fn default_noise_grids() -> Vec<NoiseGrid> {
    vec![
        NoiseGrid {
            kind: NoiseKind::SaltPepper,
            levels: vec![0.2, 0.3, 0.4, 0.5, 0.6],
        },
        NoiseGrid {
            kind: NoiseKind::Gaussian,
            levels: vec![0.1, 0.2, 0.3, 0.4, 0.5],
        },
        NoiseGrid {
            kind: NoiseKind::MotionBlur,
            levels: vec![10.0, 20.0, 30.0, 40.0, 50.0],
        },
    ]
}

/// Tuned lambda presets for the reference image-sequence datasets, indexed
/// by the corresponding default noise levels.
pub mod presets {
    /// 111x112 eye-capture sequences, salt-and-pepper p = 0.2..0.6.
    pub const EYEGLASSES_SALT_PEPPER_LAMBDAS: [f64; 5] =
        [0.02e5, 0.14e5, 0.2e5, 0.53e5, 9.0e5];
    /// 111x112 eye-capture sequences, additive noise sigma = 0.1..0.5.
    pub const EYEGLASSES_GAUSSIAN_LAMBDAS: [f64; 5] =
        [0.25e4, 1.25e4, 1.75e4, 2.0e4, 4.5e4];
    /// 111x112 eye-capture sequences, blur scale beta = 10..50.
    pub const EYEGLASSES_MOTION_BLUR_LAMBDAS: [f64; 5] =
        [0.2e4, 1.0e4, 1.3e4, 1.6e4, 2.4e4];
    /// 128x128 turntable captures, salt-and-pepper p = 0.2..0.6.
    pub const STATUE_SALT_PEPPER_LAMBDAS: [f64; 5] = [0.5e6, 1.5e6, 3.0e6, 9.5e6, 12.0e6];
    /// 128x128 turntable captures, additive noise sigma = 0.1..0.5.
    pub const STATUE_GAUSSIAN_LAMBDAS: [f64; 5] = [0.1e6, 1.3e6, 2.3e6, 4.4e6, 7.0e6];
    /// 128x128 turntable captures, blur scale beta = 10..50.
    pub const STATUE_MOTION_BLUR_LAMBDAS: [f64; 5] = [0.3e6, 9.0e6, 11.0e6, 15.0e6, 100.0e6];
}
