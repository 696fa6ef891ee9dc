use crate::quantum::{MeasBasis, Outcome};
use serde::{Deserialize, Serialize};

/// Typed classical messages exchanged by the parties. Quantum channels
/// never carry these; the classical channel is assumed authenticated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ProtocolMessage {
    BasisAnnouncement {
        index: usize,
        basis: MeasBasis,
    },
    ResultAnnouncement {
        index: usize,
        outcome: Outcome,
    },
    CorrectionRequest {
        index: usize,
        apply_x: bool,
        apply_z: bool,
    },
    FredkinRequest {
        control_index: usize,
        target_indices: [usize; 2],
    },
    ReturnRequest {
        indices: Vec<usize>,
    },
    AbortNotice {
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sender {
    Alice,
    Bob,
}

/// A message stamped with its monotone sequence number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencedMessage {
    pub seq: u64,
    pub sender: Sender,
    pub message: ProtocolMessage,
}

/// Ordered record of the classical exchange. Sequence numbers always
/// advance; storing the message bodies is optional so large sessions can
/// skip the memory cost.
#[derive(Debug, Clone)]
pub struct Transcript {
    next_seq: u64,
    recording: bool,
    messages: Vec<SequencedMessage>,
}

impl Transcript {
    pub fn new(recording: bool) -> Self {
        Transcript {
            next_seq: 0,
            recording,
            messages: Vec::new(),
        }
    }

    pub fn record(&mut self, sender: Sender, message: ProtocolMessage) {
        let seq = self.next_seq;
        self.next_seq += 1;
        if self.recording {
            self.messages.push(SequencedMessage {
                seq,
                sender,
                message,
            });
        }
    }

    /// Total number of messages sent so far (independent of recording).
    pub fn seq_count(&self) -> u64 {
        self.next_seq
    }

    pub fn messages(&self) -> &[SequencedMessage] {
        &self.messages
    }
}
