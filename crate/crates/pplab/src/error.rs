//! Crate-wide error type.

/// Errors surfaced by the solver and its supporting machinery.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("radius must be positive, got {0}")]
    NonpositiveRadius(f64),

    #[error("unsupported Bessel order nu = {0}; supported orders are -1/2, 0, 1/2, 1, 3/2")]
    UnsupportedOrder(f64),

    #[error("dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),

    #[error("grid has {points} points, exceeding the cap of {cap}")]
    GridTooLarge { points: usize, cap: usize },

    #[error("quadrature backend refused: {points} grid points exceed 2^14 (force to override)")]
    QuadratureCostGuard { points: usize },

    #[error(
        "sigma = {sigma} is outside the convergent regime: the exponential series is only \
         summable for potential growth exponents sigma < 1, and the construction fails at \
         sigma = 1"
    )]
    UnsupportedRegime { sigma: f64 },

    #[error(
        "envelope series failed the ratio test within {max_terms} terms \
         (sigma = {sigma}, l = {l}); sigma is too close to 1 for this l"
    )]
    EnvelopeDivergence { sigma: f64, l: f64, max_terms: usize },

    #[error("weight exponent rho must lie in {range}, got {rho}")]
    BadRho { rho: f64, range: &'static str },

    #[error("time history is empty")]
    EmptyHistory,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("annulus too thin: only {shells} radial shells, need at least 8")]
    AnnulusTooThin { shells: usize },

    #[error("{0}")]
    Precondition(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
