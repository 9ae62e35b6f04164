use thiserror::Error;

use crate::qstate::Sector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{op} requires the {expected:?} sector, got {found:?}")]
    WrongSector {
        op: &'static str,
        expected: Sector,
        found: Sector,
    },

    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("density operator invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{op}: state has weight {leak:e} outside the allowed subspace")]
    SupportViolation { op: &'static str, leak: f64 },

    #[error("frequency {freq:?} does not belong to photon {photon:?}")]
    FrequencyMismatch {
        photon: crate::qstate::Photon,
        freq: crate::qstate::FrequencyLabel,
    },

    #[error("pure state spans several port blocks; use a density operator")]
    MixedPortSupport,

    #[error("{0}: no amplitude survives the post-selection")]
    NothingKept(&'static str),

    #[error("{0} is not a valid input class here")]
    InvalidClass(String),

    #[error("monte carlo run needs at least one trial")]
    ZeroTrials,
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}
