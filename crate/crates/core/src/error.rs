use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lattice vectors are degenerate (|det| = {det:e})")]
    DegenerateLattice { det: f64 },

    #[error("k-path has no vertices")]
    EmptyPath,

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("ambiguous geometry: vertices {a:?} and {b:?} are {distance:e} apart")]
    AmbiguousGeometry {
        a: [f64; 2],
        b: [f64; 2],
        distance: f64,
    },

    #[error("grid of {grid} points per side is too coarse (need at least {required})")]
    Undersampled { grid: usize, required: usize },

    #[error("Fourier table cutoff {table} is smaller than basis cutoff {basis}")]
    TableTooSmall { table: usize, basis: usize },

    #[error("eigensolver did not reach tolerance (achieved relative residual {residual:e})")]
    SolverDiverged { residual: f64 },

    #[error("band has zero frequency (kappa^2 = {kappa2:e}); E is undefined")]
    ZeroFrequency { kappa2: f64 },

    #[error("Bloch parameters of the operands differ")]
    ParamMismatch,

    #[error("corner opening angle is pi: the interface is flat")]
    FlatInterface,

    #[error("both sides of the corner have the same permittivity")]
    NoInterface,

    #[error("exponent {lambda} has a {nullity}-dimensional angular null space")]
    DegenerateExponent { lambda: f64, nullity: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
