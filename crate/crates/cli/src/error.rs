use thiserror::Error;

/// Failure of one `ema` run, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{message}")]
    Config { field: Option<String>, message: String },

    #[error("{0}")]
    Numerical(#[from] ema_threshold::Error),

    #[error("{message}")]
    AssertionFailed { message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: Some(field.into()),
            message: message.into(),
        }
    }

    /// Library errors raised while validating configuration input.
    pub fn from_params(section: &str, err: ema_threshold::Error) -> Self {
        let field = match &err {
            ema_threshold::Error::InvalidParameter { field, .. } => format!("{section}.{field}"),
            _ => section.to_string(),
        };
        CliError::Config {
            field: Some(field),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::AssertionFailed { .. } => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Numerical(_) => "numerical",
            CliError::AssertionFailed { .. } => "assertion",
            CliError::Io { .. } => "io",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::json!({
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Config { field: Some(f), .. } = self {
            obj["field"] = serde_json::Value::String(f.clone());
        }
        serde_json::json!({ "error": obj })
    }
}
