use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("boundary guard tripped: {mass:.3e} of the total mass sits in the outer {shell_fraction:.0}% shell (limit {limit:.1e})")]
    BoundaryGuard {
        mass: f64,
        shell_fraction: f64,
        limit: f64,
    },

    #[error("frame coverage violated: {0}")]
    Coverage(String),

    #[error("no bound state: lowest discrete eigenvalue {lowest:.6e} is not negative")]
    NoBoundState { lowest: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot format error: {0}")]
    Format(String),
}

impl CoreError {
    /// Process exit code class for the CLI: 2 usage/config, 3 guard, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::Config(_) | CoreError::Precondition(_) => 2,
            CoreError::BoundaryGuard { .. } | CoreError::Coverage(_) => 3,
            _ => 1,
        }
    }

    /// Short machine-readable kind tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            CoreError::Grid(_) => "grid",
            CoreError::Precondition(_) => "precondition",
            CoreError::BoundaryGuard { .. } => "boundary_guard",
            CoreError::Coverage(_) => "coverage",
            CoreError::NoBoundState { .. } => "no_bound_state",
            CoreError::Config(_) => "config",
            CoreError::Io(_) => "io",
            CoreError::Format(_) => "format",
        }
    }
}
