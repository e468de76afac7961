use thiserror::Error;

/// Errors produced by the embedding and evaluation pipeline.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The training neighbor graph splits into several components, so
    /// geodesic distances are undefined between them. Raising `k` usually
    /// reconnects the graph.
    #[error("neighbor graph is disconnected (component sizes {sizes:?}); consider raising k")]
    DisconnectedGraph { sizes: Vec<usize> },

    /// The centered distance matrix has too few positive eigenvalues to
    /// support the requested embedding dimension.
    #[error("requested embedding dimension {requested} but only {available} positive eigenvalues")]
    InsufficientSpectrum { requested: usize, available: usize },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("degenerate point set: {0}")]
    Degenerate(String),
}

impl CoreError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidInput(msg.into())
    }
}
