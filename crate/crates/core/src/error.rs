use thiserror::Error;

/// Errors surfaced by grid construction, operator assembly and pricing.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("stability condition violated: {0}")]
    Stability(String),

    #[error("matrix function failure: {0}")]
    MatrixFunction(String),

    #[error("Picard iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    PicardDiverged { iterations: usize, residual: f64 },

    #[error("FFT pricer: {0}")]
    Fft(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
