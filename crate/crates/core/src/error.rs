use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: subsystem dimensions must be at least 2")]
    InvalidDimension { dim: usize },

    #[error("invalid level {level} for a {dims}-level subsystem")]
    InvalidLevel { level: usize, dims: usize },

    #[error("cannot embed a {op_dim}-dimensional operator into slot {slot} of dimension {slot_dim}")]
    InvalidEmbedding {
        op_dim: usize,
        slot: &'static str,
        slot_dim: usize,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("parameter `{name}` is invalid: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("pulse schedule is invalid: {0}")]
    InvalidSchedule(String),

    #[error("state norm grew to {norm_sqr} at t = {time} us; integrator is unstable, reduce dt")]
    NormGrowth { time: f64, norm_sqr: f64 },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("dimension {dim} exceeds the dense-solver cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("steady state is not unique: null space has dimension {}", basis.len())]
    DegenerateSteadyState { basis: Vec<Vec<num_complex::Complex64>> },

    #[error("steady-state residual {residual:e} exceeds tolerance")]
    SteadyStateResidual { residual: f64 },

    #[error("Poisson tail mass {tail:e} beyond n_max = {n_max} is too large; increase n_max")]
    NonConvergentTail { n_max: usize, tail: f64 },

    #[error("qubit population ratio is undefined for gamma = 0")]
    UndefinedRatio,

    #[error("data shows no decay; decay time is unbounded")]
    NoDecay,

    #[error("exponential fit did not converge after {iterations} iterations (rss = {rss:e})")]
    FitNonConvergence { iterations: usize, rss: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("record of {duration} us is shorter than the minimum dwell of {min_dwell} us")]
    RecordTooShort { duration: f64, min_dwell: f64 },
}
