//! Scenario-driven front end for `backflow-core`: scenario files, run manifests, CSV and JSON
//! artifacts, and the subcommands behind the `backflow-lab` binary.
use std::fmt;

pub mod commands;
pub mod io;
pub mod manifest;
pub mod scenario;

/// A failed command, split by exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable or malformed input. Exit status 1.
    Usage(anyhow::Error),
    /// The numerics could not produce a trustworthy answer. Exit status 2.
    Numeric(anyhow::Error),
}

pub type CliResult<T> = std::result::Result<T, Failure>;

impl Failure {
    pub fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure::Usage(e.into())
    }

    pub fn numeric(e: impl Into<anyhow::Error>) -> Self {
        Failure::Numeric(e.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numeric(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Numeric(e) => e,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error())
    }
}

/// Attaches context to a core result and sorts its error into usage or numeric failure.
pub trait CoreContext<T> {
    fn in_context(self, context: impl fmt::Display) -> CliResult<T>;
}

impl<T> CoreContext<T> for backflow_core::Result<T> {
    fn in_context(self, context: impl fmt::Display) -> CliResult<T> {
        use backflow_core::Error as E;
        self.map_err(|e| {
            let input_problem = matches!(
                e,
                E::InvalidInput(_) | E::LengthMismatch { .. } | E::InfeasibleMarginals(_) | E::MarginalMismatch(_)
            );
            let err = anyhow::Error::new(e).context(context.to_string());
            if input_problem {
                Failure::Usage(err)
            } else {
                Failure::Numeric(err)
            }
        })
    }
}

/// Caps rayon's global pool from `BACKFLOW_THREADS` when set.
pub fn configure_threads(value: Option<&str>) -> CliResult<()> {
    let Some(raw) = value else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::usage(anyhow::anyhow!("BACKFLOW_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::usage(anyhow::anyhow!("cannot configure {n} worker threads: {e}")))
}
