use netrec_core::amc::AmcError;
use netrec_core::config::ConfigError;
use netrec_core::data::DataError;
use netrec_core::lp_solve::LpError;
use netrec_core::model::ModelError;
use netrec_core::policies::PolicyError;
use netrec_core::sim::SimError;
use thiserror::Error;

/// Everything a subcommand can fail with, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    /// 1 for invalid input, 2 infeasible, 3 solver failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Short status word used in sweep output.
    pub fn status(&self) -> &'static str {
        match self {
            CliError::Invalid(_) => "invalid",
            CliError::Infeasible(_) => "infeasible",
            CliError::Solver(_) => "solver-error",
            CliError::Io(_) => "io-error",
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<AmcError> for CliError {
    fn from(e: AmcError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            ConfigError::Data(d) => d.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<LpError> for CliError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Io(_) => CliError::Io(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
            PolicyError::Lp(lp) => lp.into(),
            PolicyError::SolverStatus(_) | PolicyError::Build(_) => CliError::Solver(e.to_string()),
            PolicyError::Model(_) | PolicyError::Amc(_) => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Infeasible(_) => CliError::Infeasible(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}
