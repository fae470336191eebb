//! Command implementations behind the `spiano` binary. Each command returns a
//! [`CommandResult`] instead of exiting, so pipelines and tests can call them
//! directly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spectral_piano::audio::{read_wav, resample, write_wav, AudioBuffer, BitDepth, MODEL_RATE};
use spectral_piano::Error;

mod analyze;
mod bench;
mod fit;
mod loss;
mod render;
mod trichord;

pub use analyze::{cmd_analyze, AnalyzeArgs};
pub use bench::{bench_render, cmd_bench, BenchArgs, BenchReport};
pub use fit::{cmd_fit, FitArgs};
pub use loss::{cmd_loss, LossArgs, WindowPreset};
pub use render::{cmd_render, RenderArgs};
pub use trichord::{cmd_trichord, TrichordArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable naming the worker thread count.
pub const THREADS_ENV: &str = "SPIANO_THREADS";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub log: String,
}

impl CommandResult {
    pub fn is_success(&self) -> bool {
        self.exit_code == EXIT_OK
    }
}

/// A command failure with the exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    /// Prefixes the message with `context`, keeping the code.
    pub fn context(self, context: impl std::fmt::Display) -> Self {
        Self {
            code: self.code,
            message: format!("{context}: {}", self.message),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::MissingPartial { .. }
            | Error::EstimationFailed(_)
            | Error::Divergence { .. } => EXIT_NUMERICAL,
            Error::InvalidArgument(_)
            | Error::Format { .. }
            | Error::Io { .. }
            | Error::Load { .. } => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Log lines collected while a command runs.
#[derive(Debug, Default)]
pub(crate) struct Log(String);

impl Log {
    pub fn line(&mut self, text: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{text}");
    }
}

/// Runs `body`, turning its outcome into a [`CommandResult`].
pub(crate) fn run(body: impl FnOnce(&mut Log) -> Result<Vec<PathBuf>, Failure>) -> CommandResult {
    let mut log = Log::default();
    match body(&mut log) {
        Ok(artifacts) => CommandResult {
            exit_code: EXIT_OK,
            artifacts,
            log: log.0,
        },
        Err(f) => {
            log.line(format!("error: {}", f.message));
            CommandResult {
                exit_code: f.code,
                artifacts: Vec::new(),
                log: log.0,
            }
        }
    }
}

/// Reads a WAV file and converts it to the model rate.
pub fn load_audio(path: &Path) -> Result<AudioBuffer, Failure> {
    let (buffer, _) = read_wav(path)?;
    if buffer.sample_rate() == MODEL_RATE {
        Ok(buffer)
    } else {
        Ok(resample(&buffer, MODEL_RATE)?)
    }
}

pub(crate) fn write_float_wav(path: &Path, buffer: &AudioBuffer) -> Result<PathBuf, Failure> {
    write_wav(path, buffer, BitDepth::Float32)?;
    Ok(path.to_path_buf())
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<PathBuf, Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::data(format!("cannot create {}: {e}", dir.display())))
}

pub(crate) fn check_velocity(velocity: u8) -> Result<(), Failure> {
    if (1..=127).contains(&velocity) {
        Ok(())
    } else {
        Err(Failure::usage(format!(
            "velocity {velocity} outside 1..=127"
        )))
    }
}

pub(crate) fn duration_samples(seconds: f64) -> Result<usize, Failure> {
    if seconds > 0.0 && seconds.is_finite() {
        Ok((seconds * MODEL_RATE as f64).round() as usize)
    } else {
        Err(Failure::usage(format!(
            "duration {seconds} s must be positive"
        )))
    }
}
