use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] bpre_core::Error),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "CONFIG_PARSE",
            CliError::Io(_) => "IO_ERROR",
            CliError::Core(e) => e.code(),
        }
    }

    pub fn envelope(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            code: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            schema_version: u32,
            error: Body<'a>,
        }
        serde_json::to_string(&Envelope {
            schema_version: bpre_core::SCHEMA_VERSION,
            error: Body {
                code: self.code(),
                message: self.to_string(),
            },
        })
        .expect("envelope serializes")
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
