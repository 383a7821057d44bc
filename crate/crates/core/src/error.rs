use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Every weight is zero (or the weight sequence is empty).
    #[error("degenerate weights: {0}")]
    DegenerateWeights(&'static str),

    #[error("invalid noise schedule: {0}")]
    Schedule(String),

    /// The rejection loop of the restricted Gaussian oracle ran out of attempts.
    #[error("RGO rejection sampler stuck after {rejections} rejections")]
    RgoStuck { rejections: u64 },

    /// A sample's k-th within-set neighbour sits at distance zero.
    #[error(
        "degenerate geometry: sample {index} has a zero-distance {k}-th neighbour ({set} set)"
    )]
    DegenerateGeometry {
        index: usize,
        k: usize,
        set: &'static str,
    },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                iteration,
                source: Box::new(e),
            },
        }
    }

    /// Strips any iteration context and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            e => e,
        }
    }
}
