use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use lattice_fusion::Error;

pub const EXIT_MALFORMED: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn infeasible(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            code: EXIT_INFEASIBLE,
        }
    }

    pub fn malformed(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            code: EXIT_MALFORMED,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_infeasible() {
            EXIT_INFEASIBLE
        } else {
            EXIT_MALFORMED
        };
        CliError {
            kind: e.kind(),
            message: e.to_string(),
            code,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

fn is_std(path: &Path) -> bool {
    path.as_os_str() == "-"
}

/// Reads a whole file, or stdin for `-`. Errors name the path.
pub fn read_text(path: &Path) -> CliResult<String> {
    let mut text = String::new();
    let res = if is_std(path) {
        io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| CliError::malformed("io", format!("{}: {e}", path.display())))?;
    Ok(text)
}

pub fn parse_file<T>(path: &Path, parse: impl Fn(&str) -> lattice_fusion::Result<T>) -> CliResult<T> {
    let text = read_text(path)?;
    parse(&text).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

/// Where data and the human-readable report go. The report moves to stderr
/// when data is written to stdout.
pub struct Sink {
    output: Option<PathBuf>,
}

impl Sink {
    pub fn new(output: Option<PathBuf>) -> Self {
        Sink { output }
    }

    fn data_on_stdout(&self) -> bool {
        self.output.as_deref().is_some_and(is_std)
    }

    pub fn write(&self, text: &str) -> CliResult {
        let Some(path) = &self.output else {
            return Ok(());
        };
        let res = if is_std(path) {
            io::stdout().write_all(text.as_bytes())
        } else {
            fs::write(path, text)
        };
        res.map_err(|e| CliError::malformed("io", format!("{}: {e}", path.display())))
    }

    pub fn report(&self, line: &str) {
        if self.data_on_stdout() {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
}

/// Writes `text` to an optional side-output path.
pub fn write_optional(path: Option<&Path>, text: &str) -> CliResult {
    Sink::new(path.map(Path::to_path_buf)).write(text)
}
