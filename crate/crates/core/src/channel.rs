//! Quantum channels between the parties, with pluggable adversary
//! strategies and photon loss acting on in-flight qubits of the joint
//! state.

use crate::error::{Error, Result};
use crate::quantum::{MeasBasis, Outcome, QubitId, StateVector, Unitary2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Basis Eve uses for an intercept-resend measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisPolicy {
    RandomUniform,
    FixedComputational,
    FixedDiagonal,
}

/// Adversary behavior attached to a channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttackStrategy {
    NoAttack,
    /// Eve measures the in-flight qubit; the collapsed eigenstate is the
    /// resent photon.
    InterceptResend {
        basis_policy: BasisPolicy,
    },
    /// Eve keeps the in-flight qubit (capturing it in the computational
    /// basis) and substitutes a fresh unentangled photon.
    FakePhoton {
        replacement: Outcome,
    },
    /// With probability p, one of X, Y, Z is applied uniformly at random.
    Depolarize {
        p: f64,
    },
}

impl AttackStrategy {
    pub fn validate(&self) -> Result<()> {
        if let AttackStrategy::Depolarize { p } = self {
            if !p.is_finite() || !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "depolarizing probability {p} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// The four quantum channels of the protocol layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelName {
    #[serde(rename = "C_a1b1")]
    Ca1b1,
    #[serde(rename = "C_a2b2")]
    Ca2b2,
    #[serde(rename = "C_a3b3")]
    Ca3b3,
    #[serde(rename = "C_a4b4")]
    Ca4b4,
}

impl ChannelName {
    pub const ALL: [ChannelName; 4] = [
        ChannelName::Ca1b1,
        ChannelName::Ca2b2,
        ChannelName::Ca3b3,
        ChannelName::Ca4b4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelName::Ca1b1 => "C_a1b1",
            ChannelName::Ca2b2 => "C_a2b2",
            ChannelName::Ca3b3 => "C_a3b3",
            ChannelName::Ca4b4 => "C_a4b4",
        }
    }

    /// Position in [`ChannelName::ALL`].
    pub fn index(self) -> usize {
        match self {
            ChannelName::Ca1b1 => 0,
            ChannelName::Ca2b2 => 1,
            ChannelName::Ca3b3 => 2,
            ChannelName::Ca4b4 => 3,
        }
    }
}

impl fmt::Display for ChannelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ChannelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown channel name {s:?}")))
    }
}

/// One-qubit Pauli label recorded by the depolarizing channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// A quantum channel with one attack strategy and a loss probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub name: ChannelName,
    pub attack: AttackStrategy,
    pub loss_p: f64,
}

impl ChannelModel {
    pub fn honest(name: ChannelName) -> Self {
        ChannelModel {
            name,
            attack: AttackStrategy::NoAttack,
            loss_p: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        if !self.loss_p.is_finite() || !(0.0..=1.0).contains(&self.loss_p) {
            return Err(Error::InvalidArgument(format!(
                "loss probability {} outside [0, 1]",
                self.loss_p
            )));
        }
        Ok(())
    }

    /// True when a transmission can neither disturb nor lose the qubit, so
    /// the channel is the exact identity and consumes no randomness.
    pub fn is_passive(&self) -> bool {
        self.attack == AttackStrategy::NoAttack && self.loss_p == 0.0
    }

    /// Send qubit `q` of `state` through this channel. Returns a log entry
    /// when the adversary or loss acted (identity transmissions through an
    /// attack-free lossless channel produce none).
    pub fn transmit<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        q: QubitId,
        pair_index: usize,
        rng: &mut R,
    ) -> Result<Option<LogEntry>> {
        if !state.contains(q) {
            return Err(Error::UnknownQubit(q));
        }
        let mut entry = LogEntry::new(self.name, pair_index);

        if self.loss_p > 0.0 && rng.gen_bool(self.loss_p) {
            entry.lost = true;
            return Ok(Some(entry));
        }

        match self.attack {
            AttackStrategy::NoAttack => Ok(None),
            AttackStrategy::InterceptResend { basis_policy } => {
                let basis = match basis_policy {
                    BasisPolicy::RandomUniform => {
                        if rng.gen_bool(0.5) {
                            MeasBasis::Computational
                        } else {
                            MeasBasis::Diagonal
                        }
                    }
                    BasisPolicy::FixedComputational => MeasBasis::Computational,
                    BasisPolicy::FixedDiagonal => MeasBasis::Diagonal,
                };
                // The collapsed eigenstate doubles as the resent photon.
                let outcome = state.measure(q, basis, rng)?;
                entry.eve_basis = Some(basis);
                entry.eve_outcome = Some(outcome);
                Ok(Some(entry))
            }
            AttackStrategy::FakePhoton { replacement } => {
                let captured = state.measure(q, MeasBasis::Computational, rng)?;
                if captured == Outcome::V {
                    state.apply_single_qubit(q, &Unitary2::pauli_x())?;
                }
                // q now holds |H>; steer it to the replacement eigenstate.
                match replacement {
                    Outcome::H => {}
                    Outcome::V => state.apply_single_qubit(q, &Unitary2::pauli_x())?,
                    Outcome::Plus => state.apply_single_qubit(q, &Unitary2::hwp())?,
                    Outcome::Minus => {
                        state.apply_single_qubit(q, &Unitary2::pauli_x())?;
                        state.apply_single_qubit(q, &Unitary2::hwp())?;
                    }
                }
                entry.eve_basis = Some(MeasBasis::Computational);
                entry.eve_outcome = Some(captured);
                entry.replaced = true;
                Ok(Some(entry))
            }
            AttackStrategy::Depolarize { p } => {
                let pauli = if p > 0.0 && rng.gen_bool(p) {
                    match rng.gen_range(0..3u8) {
                        0 => Pauli::X,
                        1 => Pauli::Y,
                        _ => Pauli::Z,
                    }
                } else {
                    Pauli::I
                };
                match pauli {
                    Pauli::I => {}
                    Pauli::X => state.apply_single_qubit(q, &Unitary2::pauli_x())?,
                    Pauli::Y => state.apply_single_qubit(q, &Unitary2::pauli_y())?,
                    Pauli::Z => state.apply_single_qubit(q, &Unitary2::pauli_z())?,
                }
                entry.pauli_applied = Some(pauli);
                Ok(Some(entry))
            }
        }
    }
}

/// Per-transmission record of adversary/noise activity, Eve's private
/// ledger for test oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub channel: ChannelName,
    pub pair_index: usize,
    pub eve_basis: Option<MeasBasis>,
    pub eve_outcome: Option<Outcome>,
    pub replaced: bool,
    pub pauli_applied: Option<Pauli>,
    pub lost: bool,
}

impl LogEntry {
    fn new(channel: ChannelName, pair_index: usize) -> Self {
        LogEntry {
            channel,
            pair_index,
            eve_basis: None,
            eve_outcome: None,
            replaced: false,
            pauli_applied: None,
            lost: false,
        }
    }
}

/// Accumulated log entries for one session.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InterceptionLog {
    entries: Vec<LogEntry>,
}

impl InterceptionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, entry: Option<LogEntry>) {
        if let Some(e) = entry {
            self.entries.push(e);
        }
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }
}

/// Exact per-checked-pair mismatch probability of the checking procedure
/// under the given attack, by enumerating Eve's basis, her outcome, and the
/// check basis with Born weights. No sampling, and no state-vector
/// machinery: plain real 2-vector arithmetic.
pub fn detection_probability_oracle(attack: &AttackStrategy) -> Result<f64> {
    // Eigenvectors as real 2-vectors over (H, V).
    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;
    fn eig(outcome: Outcome) -> [f64; 2] {
        match outcome {
            Outcome::H => [1.0, 0.0],
            Outcome::V => [0.0, 1.0],
            Outcome::Plus => [R, R],
            Outcome::Minus => [R, -R],
        }
    }
    fn prob_first(state: [f64; 2], basis: MeasBasis) -> f64 {
        let first = match basis {
            MeasBasis::Computational => eig(Outcome::H),
            MeasBasis::Diagonal => eig(Outcome::Plus),
        };
        let dot = first[0] * state[0] + first[1] * state[1];
        dot * dot
    }
    // Alice's and Bob's qubits are in a product state after Eve acts, so
    // the check outcomes are independent Born draws.
    fn mismatch(alice: [f64; 2], bob: [f64; 2], basis: MeasBasis) -> f64 {
        let pa = prob_first(alice, basis);
        let pb = prob_first(bob, basis);
        pa * (1.0 - pb) + (1.0 - pa) * pb
    }

    let check_bases = [MeasBasis::Computational, MeasBasis::Diagonal];
    match attack {
        AttackStrategy::InterceptResend { basis_policy } => {
            let eve_bases: &[MeasBasis] = match basis_policy {
                BasisPolicy::RandomUniform => &check_bases,
                BasisPolicy::FixedComputational => &[MeasBasis::Computational],
                BasisPolicy::FixedDiagonal => &[MeasBasis::Diagonal],
            };
            let mut total = 0.0;
            for &eve_basis in eve_bases {
                let outcomes = match eve_basis {
                    MeasBasis::Computational => [Outcome::H, Outcome::V],
                    MeasBasis::Diagonal => [Outcome::Plus, Outcome::Minus],
                };
                // Measuring either half of the Bell pair collapses both
                // qubits to the same eigenstate, each outcome weight 1/2.
                for outcome in outcomes {
                    let collapsed = eig(outcome);
                    for check in check_bases {
                        total += 0.5 * 0.5 * mismatch(collapsed, collapsed, check)
                            / eve_bases.len() as f64;
                    }
                }
            }
            Ok(total)
        }
        AttackStrategy::FakePhoton { replacement } => {
            let alice = eig(*replacement);
            let mut total = 0.0;
            // Eve's computational capture leaves Bob's half in |H> or |V>.
            for captured in [Outcome::H, Outcome::V] {
                let bob = eig(captured);
                for check in check_bases {
                    total += 0.5 * 0.5 * mismatch(alice, bob, check);
                }
            }
            Ok(total)
        }
        other => Err(Error::InvalidArgument(format!(
            "detection probability oracle supports intercept-resend and fake-photon attacks, got {other:?}"
        ))),
    }
}
