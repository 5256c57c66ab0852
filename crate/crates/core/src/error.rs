use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {}", format_violations(.0))]
    InvalidTopology(Vec<Violation>),

    #[error("negative segment length {0} km")]
    NegativeLength(f64),

    #[error("pantograph voltage collapse for train `{train}` (discriminant {discriminant:.3e} < 0)")]
    VoltageCollapse { train: String, discriminant: f64 },

    #[error("zero pantograph voltage")]
    ZeroVoltage,

    #[error("cannot aggregate an empty set of branches")]
    EmptyAggregate,

    #[error("branches belong to different station sides")]
    MixedSides,

    #[error("track lengths differ: up {up} km, down {down} km")]
    MismatchedTracks { up: f64, down: f64 },

    #[error("{what} did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        best_x: f64,
    },

    #[error("inconsistent circulation branch tests for {what}: {detail}")]
    InconsistentBranch { what: &'static str, detail: String },

    #[error("power distribution ratio undefined: denominator {denominator:.3e} p.u.")]
    UndefinedRatio { denominator: f64 },

    #[error("feasible phase-angle domain is empty")]
    EmptyFpad,

    #[error("disconnected network: node `{0}` has no path to a station")]
    Disconnected(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("{}: {}", v.field, v.rule))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidTopology(_) => "invalid_topology",
            Error::NegativeLength(_) => "negative_length",
            Error::VoltageCollapse { .. } => "voltage_collapse",
            Error::ZeroVoltage => "zero_voltage",
            Error::EmptyAggregate => "empty_aggregate",
            Error::MixedSides => "mixed_sides",
            Error::MismatchedTracks { .. } => "mismatched_tracks",
            Error::NoConvergence { .. } => "no_convergence",
            Error::InconsistentBranch { .. } => "inconsistent_branch",
            Error::UndefinedRatio { .. } => "undefined_ratio",
            Error::EmptyFpad => "empty_fpad",
            Error::Disconnected(_) => "disconnected",
            Error::Schedule(_) => "schedule",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}
