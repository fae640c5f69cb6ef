//! Protocol state machine.
//!
//! Events are bound to actions (`E0` prepare, `E1` friend measures and
//! resets, `E2` emission plus the external observer's measurement, `E3`
//! Alice's measurement) and executed in the order of the chosen frame. The
//! same branch walker drives exact enumeration ([`run_exact`]) and sampled
//! trials ([`run_trial`]), so the two cannot disagree on protocol semantics.

mod config;
mod montecarlo;
mod protocol;
mod schedule;
mod walk;

pub use config::{Geometry, InterpretationMode, MeasurementScheme, ProtocolConfig, ResetState};
pub use montecarlo::{run_monte_carlo, run_monte_carlo_with, Estimate, Execution, SummaryStats, STREAM_DERIVATION};
pub use protocol::{declare_record, friend_send_qubits, Emission, RECORD_PURITY, MIXED_PURITY};
pub use schedule::{build_schedule, Action, Schedule};
pub use walk::{run_exact, run_trial, ExactResults, FriendRecord, ProjectiveExact, RecordBasis, RunRecord, WOutcome};

use thiserror::Error;

use crate::qmath::QmathError;
use crate::registers::RegisterError;
use crate::relativity::KinematicsError;
use crate::weakmeas::WeakError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("protocol-order error: {0}")]
    ProtocolOrder(String),
    #[error("friend's record is undefined: reduced environment is mixed (purity {0})")]
    RecordUndefined(f64),
    #[error("friend's record matches none of ε±, ε±x")]
    Undeclarable,
    #[error("environment purity {0} is neither a definite record nor an entangled lab")]
    AmbiguousRecord(f64),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Register(#[from] RegisterError),
    #[error(transparent)]
    Weak(#[from] WeakError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Qmath(#[from] QmathError),
}

impl EngineError {
    /// `true` for errors caused by the caller's configuration rather than a
    /// broken invariant inside the simulator.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            EngineError::Configuration(_)
                | EngineError::Kinematics(_)
                | EngineError::Weak(WeakError::Parameter(_))
                | EngineError::Register(RegisterError::Normalization(_))
        )
    }
}

pub type Result<T> = std::result::Result<T, EngineError>;
