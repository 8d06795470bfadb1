use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("path step {at} joins non-adjacent nodes {from} -> {to}")]
    NonAdjacentPath { at: usize, from: usize, to: usize },

    #[error("loop is not closed (starts at node {start}, ends at node {end})")]
    OpenLoop { start: usize, end: usize },

    #[error("differential has rank < {dim} at node {node} (smallest metric eigenvalue {eigenvalue:.3e})")]
    RankDeficient {
        node: usize,
        dim: usize,
        eigenvalue: f64,
    },

    #[error("no global normal pivot subset is valid on all nodes (worst node {worst_node}, singular value {sigma:.3e})")]
    NoPivot { worst_node: usize, sigma: f64 },

    #[error("field is not an infinitesimal bending: residual {residual:.3e} > tolerance {tol:.3e}")]
    NotABending { residual: f64, tol: f64 },

    #[error("pair does not satisfy the fundamental system: {0}")]
    SystemViolated(String),

    #[error("endomorphism field is not skew: residual {residual:.3e} > tolerance {tol:.3e}")]
    NotSkew { residual: f64, tol: f64 },

    #[error("periodic axis {axis} carries holonomy {holonomy:.3e} > tolerance {tol:.3e}; domain is not simply connected")]
    PeriodicHolonomy { axis: usize, holonomy: f64, tol: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("first normal space is not full at node {node} (rank {rank} < codimension {codim}); any normal section orthogonal to it bends the immersion, so the tensor is not determined")]
    FirstNormalNotFull {
        node: usize,
        rank: usize,
        codim: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),

    #[error("bad parameter: {0}")]
    BadParam(String),

    #[error("malformed scene file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
