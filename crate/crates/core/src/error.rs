use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical parameter is outside its allowed domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Two atoms closer than the coincidence threshold.
    #[error("atoms {i} and {j} are coincident (distance {distance:e})")]
    DegenerateInput { i: usize, j: usize, distance: f64 },

    #[error(
        "truncated basis exceeds the budget of {budget} states (N = {atoms}, E_C = {cutoff}); \
         lower E_C or raise max_states"
    )]
    Capacity {
        atoms: usize,
        cutoff: f64,
        budget: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Time step violates the RK4 stability guard `dt * max|H_kk| <= 0.1`.
    #[error(
        "time step {dt:e} with max diagonal energy {max_diag:e} violates the stability guard \
         (dt * max|H_kk| = {product:.3} > 0.1); use a smaller dt or a lower E_C"
    )]
    Stability { dt: f64, max_diag: f64, product: f64 },

    #[error("pair correlation is undefined when the Rydberg fraction vanishes")]
    UndefinedCorrelation,

    #[error("blockade radius diverges for a vanishing Rydberg fraction")]
    DivergentRadius,

    #[error("root solver failed: {0}")]
    Solver(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("malformed record: {0}")]
    Record(String),
}
