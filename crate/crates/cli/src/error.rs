use std::fmt;

use temporal_im::Error as EngineError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Config,
    Numerical,
    Resource,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Config => 2,
            Self::Numerical => 3,
            Self::Resource => 4,
            Self::Io => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Config => "config",
            Self::Numerical => "numerical",
            Self::Resource => "resource",
            Self::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { category: Category::Config, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error category={} message={:?}", self.category.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        let category = match e {
            EngineError::Argument(_) => Category::Config,
            EngineError::NumericalInstability(_) | EngineError::Dimension(_) => Category::Numerical,
            EngineError::Resource(_) => Category::Resource,
            EngineError::Format(_) | EngineError::Io(_) => Category::Io,
        };
        Self { category, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self { category: Category::Io, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
