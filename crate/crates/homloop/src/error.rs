use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    ConfigParse(String),
    #[error("config field `{field}`: {msg}")]
    Invalid { field: String, msg: String },
    #[error(transparent)]
    Core(#[from] homloop_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    /// A band, bound or consistency check failed; the artifacts were still written.
    #[error("contract violation: {0}")]
    Contract(String),
}

impl CliError {
    /// 2 for contract violations, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Contract(_) => 2,
            CliError::Core(e) if e.is_contract_violation() => 2,
            _ => 1,
        }
    }
}
