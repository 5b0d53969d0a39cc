use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cost is not elliptic: Hessian eigenvalue {eigenvalue:e} at sphere point {point:?}")]
    NotElliptic { eigenvalue: f64, point: Vec<f64> },

    #[error("cost is not even: h(-x) != h(x) at {point:?}")]
    NotEven { point: Vec<f64> },

    #[error("averaged Hessian is not symmetric (asymmetry {asymmetry:e})")]
    Asymmetric { asymmetry: f64 },

    #[error("quadrature did not converge: estimated error {est_error:e} exceeds {tolerance:e}")]
    NonConvergence { est_error: f64, tolerance: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("graph has {size} points, above the limit of {limit}")]
    GraphTooLarge { size: usize, limit: usize },

    #[error("map is multivalued at {point:?}")]
    Multivalued { point: Vec<f64> },

    #[error("chart base point is singular: mixed Hessian is not invertible at index {index}")]
    SingularBase { index: usize },

    #[error("neighbourhood too large: eps * |A0^-1| = {product:.6} >= {limit} (shrink the radius)")]
    EpsilonTooLarge { product: f64, limit: f64 },

    #[error("Lipschitz bound violated by {count} pair(s); worst ratio {worst_ratio:.6} > {lip:.6}")]
    LipschitzViolation {
        count: usize,
        worst_ratio: f64,
        lip: f64,
        witnesses: Vec<(usize, usize)>,
    },

    #[error("epsilon estimate violated by {count} pair(s); worst excess {worst_excess:e}")]
    EstimateViolation {
        count: usize,
        worst_excess: f64,
        witnesses: Vec<(usize, usize)>,
    },

    #[error("epsilon is under-resolved: refined sample gives {refined:e} against {reported:e}")]
    UnderResolved { reported: f64, refined: f64 },

    #[error("set is not c-monotone: {count} violating pair(s), worst gap {worst_gap:e}")]
    NotMonotone { count: usize, worst_gap: f64 },

    #[error("size mismatch: {sources} sources against {targets} targets")]
    SizeMismatch { sources: usize, targets: usize },

    #[error("problem size {size} exceeds the cap of {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("cell sets overlap at cell {cell}")]
    NotDisjoint { cell: usize },
}
