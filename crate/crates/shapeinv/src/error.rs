use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("A(x) = {value} is not positive at interior point x = {x}")]
    NonPositiveA { x: f64, value: f64 },
    #[error("A*W does not vanish at the {endpoint} endpoint")]
    WeightNotVanishing { endpoint: String },
    #[error("(AW)'/W is not of degree <= 1 (relative residual {residual:e})")]
    DegreeViolation { residual: f64 },
    #[error("parameter out of range: {0}")]
    ParameterRange(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("specification rejected: {0}")]
    InvalidSpec(String),
    #[error("degenerate interval ({a}, {b})")]
    IntervalDegenerate { a: f64, b: f64 },
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("norm diverges for n = {n}")]
    NormDiverges { n: usize },
    #[error("bad quantum numbers n = {n}, m = {m}")]
    BadQuantumNumbers { n: usize, m: usize },
    #[error("coordinate map is not monotone near x = {x}")]
    MapNotMonotone { x: f64 },
    #[error("x = {x} lies outside the interval")]
    OutOfInterval { x: f64 },
    #[error("truncation nmax = {nmax} too small for m = {m}")]
    TruncationTooSmall { nmax: usize, m: usize },
    #[error("non-oscillatory motion: eta1 = {eta1} >= 0")]
    NonOscillatory { eta1: f64 },
    #[error("recursion diverges: tail mass {tail_mass:e} at n_trunc = {n_trunc}")]
    DivergentRecursion { tail_mass: f64, n_trunc: usize },
    #[error("series diverges: tail mass {tail_mass:e} at n_trunc = {n_trunc}")]
    DivergentSeries { tail_mass: f64, n_trunc: usize },
    #[error("zero denominator in recursion at n = {n}")]
    ZeroDenominator { n: usize },
    #[error("zero lowering amplitude at n = {n}")]
    ZeroEnergyDivision { n: usize },
    #[error("parity states need an even master function, even weight and symmetric interval")]
    ParityUnavailable,
    #[error("state expansions live on different bases")]
    BasisMismatch,
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. }
            | Error::DivergentRecursion { .. }
            | Error::DivergentSeries { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
