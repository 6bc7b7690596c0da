use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Invalid or inconsistent configuration (exit code 2).
    #[error("config error: {0}")]
    Config(String),

    /// A backend failed while computing (exit code 3).
    #[error("numerical failure in {backend}: {source}")]
    Numerical {
        backend: String,
        #[source]
        source: spindyn_core::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn numerical(backend: impl ToString) -> impl FnOnce(spindyn_core::Error) -> HarnessError {
        let backend = backend.to_string();
        move |source| HarnessError::Numerical { backend, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical { .. } => 3,
            HarnessError::Io { .. } => 1,
        }
    }
}
