use std::fmt;

/// Diagnostic category of a failed run; each maps to its own exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    /// `--help` / `--version`: printed to stdout, exit 0.
    Info,
    Config,
    IntegratorAbort,
    Numerical,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Info => 0,
            Category::Config => 2,
            Category::IntegratorAbort => 3,
            Category::Numerical => 4,
            Category::Io => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::Info => "info",
            Category::Config => "config error",
            Category::IntegratorAbort => "integrator abort",
            Category::Numerical => "numerical error",
            Category::Io => "io error",
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
        Self {
            category: Category::Config,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            category: Category::Io,
            message: message.into(),
        }
    }

    pub fn from_clap(e: clap::Error) -> Self {
        use clap::error::ErrorKind;
        let category = match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Category::Info,
            _ => Category::Config,
        };
        Self {
            category,
            message: e.render().to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.category == Category::Info {
            write!(f, "{}", self.message)
        } else {
            write!(f, "btc: {}: {}", self.category.label(), self.message)
        }
    }
}

impl std::error::Error for CliError {}

impl From<btc_core::Error> for CliError {
    fn from(e: btc_core::Error) -> Self {
        let category = match e {
            btc_core::Error::IntegratorAbort { .. } => Category::IntegratorAbort,
            btc_core::Error::InvalidParams(_) => Category::Config,
            _ => Category::Numerical,
        };
        Self {
            category,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}
