use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("kind=config key={key} reason={reason}")]
    Config { key: String, reason: String },

    #[error("kind={} stage={stage} reason={source}", core_kind(.source))]
    Core {
        stage: String,
        #[source]
        source: wearsar::Error,
    },

    #[error("kind=manifest file={file} reason={reason}")]
    Manifest { file: String, reason: String },

    #[error("kind=io path={} reason={source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("kind=sweep failed={failed} of={total}")]
    Sweep { failed: usize, total: usize, code: i32 },
}

fn core_kind(e: &wearsar::Error) -> &'static str {
    use wearsar::Error as E;
    match e {
        E::Instability { .. } => "instability",
        E::Convergence { .. } => "convergence",
        E::Mass(_) | E::Classification(_) | E::ComplianceInput(_) => "compliance-input",
        E::Geometry(_) | E::Placement(_) => "geometry",
        E::Io(_) => "io",
        _ => "config",
    }
}

impl CliError {
    pub fn core(stage: impl Into<String>, source: wearsar::Error) -> Self {
        CliError::Core { stage: stage.into(), source }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core { source, .. } => match core_kind(source) {
                "instability" | "convergence" => 3,
                "compliance-input" => 4,
                "io" => 1,
                _ => 2,
            },
            CliError::Manifest { .. } => 4,
            CliError::Io { .. } => 1,
            CliError::Sweep { code, .. } => *code,
        }
    }

    /// Single line, no embedded newlines.
    pub fn line(&self) -> String {
        let s = self.to_string().replace(['\n', '\r'], " ");
        format!("error code={} {s}", self.exit_code())
    }
}
