use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("newick syntax error at byte {pos}: {msg}")]
    NewickSyntax { pos: usize, msg: String },

    #[error("missing branch length on node {node:?} (byte {pos})")]
    MissingBranchLength { node: String, pos: usize },

    #[error("duplicate leaf label {0:?}")]
    DuplicateLabel(String),

    #[error("empty leaf label at byte {0}")]
    EmptyLabel(usize),

    #[error("tree is not ultrametric: leaf {label:?} has depth {depth} but height is {height} (tolerance {tol})")]
    NotUltrametric {
        label: String,
        depth: f64,
        height: f64,
        tol: f64,
    },

    #[error("covariance is numerically singular at alpha = {alpha}; try a larger selection strength")]
    SingularCovariance { alpha: f64 },

    #[error("Cholesky factorisation failed after jitter")]
    Cholesky,

    #[error("scaled lasso noise estimate collapsed to {sigma:e} (base rate {lambda0:e} too small)")]
    ScaleCollapse { sigma: f64, lambda0: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label {0:?} is not a leaf of the tree")]
    UnknownLabel(String),

    #[error("tree leaf {0:?} has no p-value")]
    MissingLabel(String),

    #[error("every (alpha, lambda) grid cell failed; last error: {0}")]
    AllCellsFailed(String),
}
