use super::config::{Reference, Source};
use super::message::SequencedMessage;
use crate::channel::ChannelName;
use crate::estimator::{ClusterAssignment, DistanceEstimate, OverlapEstimate};
use crate::quantum::{MeasBasis, Outcome};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Alice's private record of one prepared control qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub pair_index: usize,
    pub prepared_outcome: Outcome,
    pub basis: MeasBasis,
}

/// Record of one remote state preparation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepRecord {
    pub pair_index: usize,
    pub source: Source,
    pub outcome: Outcome,
    pub correction_requested: bool,
}

/// Classification of a completed trial. Computational controls are pure
/// security checks (the swap leaves them invariant); diagonal controls
/// carry the swap-test statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialKind {
    SecurityPass,
    SecurityFail,
    Same,
    Flip,
}

impl TrialKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialKind::SecurityPass => "SecurityPass",
            TrialKind::SecurityFail => "SecurityFail",
            TrialKind::Same => "Same",
            TrialKind::Flip => "Flip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub pair_index: usize,
    pub kind: TrialKind,
    pub reference: Reference,
}

impl TrialOutcome {
    /// The control basis is implied by the outcome kind.
    pub fn control_basis(&self) -> MeasBasis {
        match self.kind {
            TrialKind::SecurityPass | TrialKind::SecurityFail => MeasBasis::Computational,
            TrialKind::Same | TrialKind::Flip => MeasBasis::Diagonal,
        }
    }
}

/// A trial attempt whose pair-triple was discarded because a photon was
/// lost in transit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscardedTrial {
    pub pair_index: usize,
    pub reference: Reference,
    /// Present when the control had already been prepared before the loss
    /// (i.e. the return leg dropped the photon).
    pub control_basis: Option<MeasBasis>,
}

/// Eavesdrop-check tally for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub channel: ChannelName,
    pub checked: usize,
    pub mismatches: usize,
}

impl CheckReport {
    pub fn mismatch_rate(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.mismatches as f64 / self.checked as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AbortReason {
    EavesdropperSuspected { channel: ChannelName },
    SecurityFailRateExceeded,
    InsufficientTrials,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbortReason::EavesdropperSuspected { channel } => {
                write!(f, "eavesdropper-suspected ({channel})")
            }
            AbortReason::SecurityFailRateExceeded => {
                f.write_str("step5-security-fail-rate-exceeded")
            }
            AbortReason::InsufficientTrials => f.write_str("insufficient-trials"),
        }
    }
}

/// Estimates for one reference vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEstimate {
    pub overlap: OverlapEstimate,
    pub distance: DistanceEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEstimates {
    pub reference_a: ReferenceEstimate,
    pub reference_b: ReferenceEstimate,
    pub assignment: ClusterAssignment,
}

/// Everything one session produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionResult {
    pub check_reports: Vec<CheckReport>,
    pub trials: Vec<TrialOutcome>,
    pub discarded: Vec<DiscardedTrial>,
    pub aborted: Option<AbortReason>,
    pub estimates: Option<SessionEstimates>,
    /// Classical exchange, populated only when transcript recording was on.
    pub transcript: Vec<SequencedMessage>,
}

impl SessionResult {
    pub fn is_aborted(&self) -> bool {
        self.aborted.is_some()
    }

    pub fn security_fail_count(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| t.kind == TrialKind::SecurityFail)
            .count()
    }

    pub fn computational_trials(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| t.control_basis() == MeasBasis::Computational)
            .count()
    }

    pub fn diagonal_trials(&self, reference: Reference) -> usize {
        self.trials
            .iter()
            .filter(|t| t.reference == reference && t.control_basis() == MeasBasis::Diagonal)
            .count()
    }
}

/// Counts from the returned-reference honesty check. Only trials whose
/// post-swap state is a product (computational controls) are scored;
/// diagonal-control targets are returned but carry no deterministic
/// prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HonestyReport {
    /// Target qubits Bob was asked to return.
    pub requested: usize,
    /// Target qubits Alice could score against a known basis.
    pub measured: usize,
    /// Scored qubits that landed on the orthogonal state.
    pub suspicious: usize,
    /// Returned qubits lost in the channel.
    pub lost: usize,
}

impl HonestyReport {
    pub fn suspicion_rate(&self) -> f64 {
        if self.measured == 0 {
            0.0
        } else {
            self.suspicious as f64 / self.measured as f64
        }
    }
}
