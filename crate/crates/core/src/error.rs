use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension cap exceeded: {what} needs {needed} > cap {cap}")]
    Cap {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error("weight sequence is not admissible: {0}")]
    NotAdmissible(String),

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:e} ({context})")]
    NotPsd { min_eig: f64, context: String },

    #[error("point is not strictly inside the domain: Phi norm {phi_norm}")]
    OutsideDomain { phi_norm: f64 },

    #[error("tuple does not commute: max commutator norm {0:e}")]
    NotCommuting(f64),

    #[error("purity not certified: ||Phi^n(I)|| = {last:e} after {iterations} iterations")]
    NotPure { last: f64, iterations: usize },

    #[error("Phi_T(I) exceeds I: ||Phi_T(I)|| = {0}")]
    NotContractive(f64),

    #[error("subspace is not invariant: witness norm {0:e}")]
    NotInvariant(f64),

    #[error("rank loss: {0}")]
    RankLoss(String),

    #[error("kernel series did not converge: {0}")]
    Divergent(String),

    #[error("degenerate joint kernel: dimension {0}")]
    Degenerate(usize),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
