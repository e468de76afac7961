//! Out-of-sample extension of Isomap embeddings for noisy time series.
//!
//! Given a clean training set and its Isomap embedding, this crate embeds
//! a temporally ordered sequence of new (possibly corrupted) points by
//! solving a least-squares problem regularized with the Laplacian of the
//! sequence's temporal neighborhood graph. The crate also ships the
//! comparison baselines (plain Isomap extension, ST-Isomap extension,
//! manifold blurring mean shift denoising), image corruption models, and
//! the Procrustes-aligned evaluation harness used to compare them.
//!
//! Pipeline sketch:
//!
//! 1. [`geodesics`] — k-NN graph over the training set, all-pairs squared
//!    geodesic distances, and their extension to new points.
//! 2. [`isomap`] — classical MDS on the squared geodesics, producing the
//!    training embedding `L` and its eigenpairs.
//! 3. [`extension`] — the extension solvers: unregularized (`isomap_oose`)
//!    and temporally regularized (`mets_solve`).
//! 4. [`baselines`], [`corruption`], [`evaluation`] — comparison methods,
//!    noise models, and the grid-search/alignment experiment runner.
//!
//! With the default `parallel` feature the heavy inner loops run on rayon;
//! disabling it yields a dependency-light sequential build with identical
//! results.

pub mod baselines;
pub mod config;
pub mod corruption;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod extension;
pub mod geodesics;
pub mod isomap;
pub mod synth;

pub(crate) mod par;

pub use error::CoreError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
