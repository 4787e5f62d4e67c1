use thiserror::Error;

/// Errors surfaced by the market, agent, environment and theory layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("infeasible instance spec: no admissible valuation profile found in {draws} draws")]
    InfeasibleSpec { draws: u64 },

    #[error("configuration invalid:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
