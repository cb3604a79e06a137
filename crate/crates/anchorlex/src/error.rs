use std::path::PathBuf;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] anchorlex_core::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<AppError>,
        manifest: Option<PathBuf>,
    },
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        AppError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Io { .. } => "io",
            AppError::Parse { .. } => "parse",
            AppError::Core(_) => "core",
            AppError::Config(_) => "config",
            AppError::Stage { .. } => "stage",
        }
    }

    /// Machine-readable form printed by the CLI on failure.
    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": self.body() })
    }

    fn body(&self) -> serde_json::Value {
        let mut body = json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        match self {
            AppError::Io { path, .. } => body["path"] = json!(path),
            AppError::Parse { path, line, .. } => {
                body["path"] = json!(path);
                body["line"] = json!(line);
            }
            AppError::Stage {
                stage,
                source,
                manifest,
            } => {
                body["stage"] = json!(stage);
                body["cause"] = source.body();
                if let Some(m) = manifest {
                    body["manifest"] = json!(m);
                }
            }
            _ => {}
        }
        body
    }
}
