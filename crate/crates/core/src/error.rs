use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("infeasible skew: block of rank {rank} needs {hits} hit records but holds only {records}")]
    InfeasibleSkew { rank: usize, hits: u64, records: u64 },

    #[error("frequency {ghz} GHz is outside the power table range [{min}, {max}] GHz")]
    OutOfRange { ghz: f64, min: f64, max: f64 },

    #[error("degenerate baseline: {0}")]
    DegenerateBaseline(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
