use persuasion_core::Error;

/// A failure reported as a single `error[category]: message` line.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub category: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(category: &'static str, message: impl Into<String>) -> Self {
        CliError {
            category,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let category = match &e {
            Error::InvalidAlpha(_) => "alpha",
            Error::InvalidConfig(_) | Error::EpsilonOutOfRange(_) => "config",
            Error::ShapeMismatch(_) => "shape",
            Error::BudgetExceeded { .. } => "budget",
            Error::InvalidRational(_) => "parse",
            _ => "scenario",
        };
        CliError::new(category, e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}
