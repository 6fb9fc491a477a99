use std::path::Path;

use weakval_core::ErrorKind;

/// Exit statuses of the command line.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const PRECONDITION: i32 = 3;
    pub const NUMERIC_GUARD: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("invalid field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: weakval_core::Error,
    },

    #[error("{trials} trials exceed the cap of {cap}")]
    TrialCap { trials: u64, cap: u64 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl AppError {
    pub fn parse(path: &str, message: String) -> Self {
        AppError::Parse {
            path: path.to_string(),
            message,
        }
    }

    pub fn field(field: &str, message: String) -> Self {
        AppError::Field {
            field: field.to_string(),
            message,
        }
    }

    pub fn core(context: impl Into<String>, source: weakval_core::Error) -> Self {
        AppError::Core {
            context: context.into(),
            source,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Parse { .. } | AppError::Field { .. } => exit::PARSE,
            AppError::Core { source, .. } => match source.kind() {
                ErrorKind::Precondition => exit::PRECONDITION,
                ErrorKind::NumericGuard => exit::NUMERIC_GUARD,
            },
            AppError::TrialCap { .. } => exit::NUMERIC_GUARD,
            AppError::Io { .. } | AppError::Csv(_) => exit::IO,
        }
    }
}
