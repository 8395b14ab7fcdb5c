use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", bullet(.0))]
    Config(Vec<String>),
    #[error("missing input files:\n{}", bullet(&.0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()))]
    MissingInputs(Vec<PathBuf>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] depthfuse::Error),
    #[error("{0}")]
    Usage(String),
}

fn bullet(items: &[String]) -> String {
    items.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n")
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
