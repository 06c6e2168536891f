use std::fmt;

use cpasim::clements::ClementsError;
use cpasim::dilation::DilationError;
use cpasim::experiment::ExperimentError;
use cpasim::hardware::HardwareError;
use cpasim::lossybs::LossyBsError;
use cpasim::metrology::MetrologyError;
use serde_json::json;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }

    fn kind(&self) -> &'static str {
        if self.code == EXIT_NUMERIC {
            "numeric_failure"
        } else {
            "invalid_input"
        }
    }

    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.code,
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<LossyBsError> for CliError {
    fn from(e: LossyBsError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<DilationError> for CliError {
    fn from(e: DilationError) -> Self {
        match e {
            DilationError::GainUnsupported(_) => Self::input(e.to_string()),
            DilationError::Numerics(_) => Self::numeric(e.to_string()),
        }
    }
}

impl From<ClementsError> for CliError {
    fn from(e: ClementsError) -> Self {
        match e {
            ClementsError::NotUnitary(_) => Self::numeric(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        if e.is_input_error() {
            Self::input(e.to_string())
        } else {
            Self::numeric(e.to_string())
        }
    }
}

impl From<HardwareError> for CliError {
    fn from(e: HardwareError) -> Self {
        match e {
            HardwareError::Fit(_) => Self::numeric(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<MetrologyError> for CliError {
    fn from(e: MetrologyError) -> Self {
        match e {
            MetrologyError::Degenerate(_) => Self::numeric(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::input(format!("invalid JSON: {e}"))
    }
}
