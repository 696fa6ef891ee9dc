//! Alice (client) and Bob (server) as explicit state machines executing
//! the delegated swap-test protocol over adversary-pluggable channels:
//! pair distribution, eavesdrop checking, private control preparation,
//! remote state preparation with Pauli corrections, the delegated
//! controlled swap, and the returned-control measurement.

mod config;
mod message;
mod record;

pub use config::{PolarizationVector, Reference, SessionConfig, SessionOptions, Source};
pub use message::{ProtocolMessage, Sender, SequencedMessage, Transcript};
pub use record::{
    AbortReason, CheckReport, ControlRecord, DiscardedTrial, HonestyReport, PrepRecord,
    ReferenceEstimate, SessionEstimates, SessionResult, TrialKind, TrialOutcome,
};

use crate::channel::{ChannelModel, ChannelName, InterceptionLog};
use crate::error::{Error, Result};
use crate::estimator;
use crate::quantum::{MeasBasis, Outcome, QubitId, StateVector, Unitary2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::mem;

const STREAM_ALICE: u64 = 1;
const STREAM_BOB: u64 = 2;
const STREAM_CHANNEL_BASE: u64 = 3;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The four channels of one session, addressable by name.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ChannelSet {
    models: [ChannelModel; 4],
}

impl ChannelSet {
    pub fn honest() -> Self {
        ChannelSet {
            models: ChannelName::ALL.map(ChannelModel::honest),
        }
    }

    /// Replace one channel's model, keyed by the model's own name.
    pub fn set(&mut self, model: ChannelModel) {
        let index = model.name.index();
        self.models[index] = model;
    }

    /// Builder-style variant of [`ChannelSet::set`].
    pub fn with(mut self, model: ChannelModel) -> Self {
        self.set(model);
        self
    }

    pub fn get(&self, name: ChannelName) -> &ChannelModel {
        &self.models[name.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.models {
            m.validate()?;
        }
        Ok(())
    }
}

impl Default for ChannelSet {
    fn default() -> Self {
        Self::honest()
    }
}

#[derive(Debug, Clone)]
enum PairQuantum {
    /// Undisturbed Bell pair; materialized on demand. Identity channels
    /// cannot change it, so the amplitudes are not stored per pair.
    PhiPlus,
    State(StateVector),
    Lost,
    /// Moved into a joint state by the swap step.
    Taken,
}

#[derive(Debug, Clone)]
struct PairSlot {
    alice: QubitId,
    bob: QubitId,
    quantum: PairQuantum,
    consumed_by: Option<&'static str>,
}

impl PairSlot {
    fn consume(&mut self, consumer: &'static str, source: Source, index: usize) -> Result<()> {
        if let Some(existing) = self.consumed_by {
            return Err(Error::PairConsumed {
                origin: source,
                index,
                consumer: existing,
            });
        }
        self.consumed_by = Some(consumer);
        Ok(())
    }

    fn materialize(&mut self) -> Result<&mut StateVector> {
        if matches!(self.quantum, PairQuantum::PhiPlus) {
            self.quantum = PairQuantum::State(StateVector::bell_phi_plus(self.alice, self.bob)?);
        }
        match &mut self.quantum {
            PairQuantum::State(s) => Ok(s),
            PairQuantum::Lost => Err(Error::Protocol("pair was lost in transit".into())),
            PairQuantum::Taken => Err(Error::Protocol("pair state already moved".into())),
            PairQuantum::PhiPlus => unreachable!(),
        }
    }

    fn take_state(&mut self) -> Result<StateVector> {
        self.materialize()?;
        match mem::replace(&mut self.quantum, PairQuantum::Taken) {
            PairQuantum::State(s) => Ok(s),
            _ => unreachable!(),
        }
    }

    fn is_lost(&self) -> bool {
        matches!(self.quantum, PairQuantum::Lost)
    }
}

#[derive(Debug, Default)]
struct PairStore {
    per_source: [Vec<PairSlot>; 3],
}

impl PairStore {
    fn slot_mut(&mut self, source: Source, index: usize) -> Result<&mut PairSlot> {
        self.per_source[source.index()]
            .get_mut(index)
            .ok_or_else(|| Error::Protocol(format!("no pair {index} for source {source}")))
    }

    fn slot(&self, source: Source, index: usize) -> Option<&PairSlot> {
        self.per_source[source.index()].get(index)
    }
}

/// Alice's side: her random stream and private knowledge.
#[derive(Debug)]
struct ClientState {
    rng: ChaCha8Rng,
    controls: HashMap<usize, ControlRecord>,
    preps: Vec<PrepRecord>,
}

/// Bob's side: only a random stream; his quantum holdings live in the
/// session's pair store.
#[derive(Debug)]
struct ServerState {
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, Default)]
struct CheckTotals {
    checked: usize,
    mismatches: usize,
}

/// The control qubit on its way back to Alice, still embedded in the
/// post-swap joint state.
#[derive(Debug)]
pub struct ReturnedControl {
    pub pair_index: usize,
    pub lost: bool,
    joint: StateVector,
    control_qubit: QubitId,
    u_qubit: QubitId,
    v_qubit: QubitId,
}

impl ReturnedControl {
    pub fn joint(&self) -> &StateVector {
        &self.joint
    }

    pub fn control_qubit(&self) -> QubitId {
        self.control_qubit
    }

    /// Wire that carried the classified vector into the swap.
    pub fn u_qubit(&self) -> QubitId {
        self.u_qubit
    }

    /// Wire that carried the reference vector into the swap.
    pub fn v_qubit(&self) -> QubitId {
        self.v_qubit
    }
}

#[derive(Debug)]
struct RetainedTrial {
    pair_index: usize,
    reference: Reference,
    control_outcome: Outcome,
    state: StateVector,
    u_qubit: QubitId,
    v_qubit: QubitId,
}

/// How Bob treats target qubits when asked to send them back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnBehavior {
    Honest,
    /// The dishonesty model: Bob measures every target in the
    /// computational basis before returning it.
    MeasureTargetsBeforeReturn,
}

/// Counters from the distribution phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistributionSummary {
    /// Total transmissions, one per pair per source.
    pub transmitted: usize,
    /// Pairs whose Alice-bound half was lost.
    pub lost: usize,
}

/// One protocol session: both parties, the shared quantum state, the
/// channels, and everything recorded along the way.
#[derive(Debug)]
pub struct Session {
    config: SessionConfig,
    options: SessionOptions,
    channels: ChannelSet,
    client: ClientState,
    server: ServerState,
    channel_rngs: [ChaCha8Rng; 4],
    pairs: PairStore,
    transcript: Transcript,
    interception: InterceptionLog,
    check_totals: [CheckTotals; 3],
    trials: Vec<TrialOutcome>,
    discarded: Vec<DiscardedTrial>,
    retained: Vec<RetainedTrial>,
    aborted: Option<AbortReason>,
    distributed: bool,
    ran: bool,
}

impl Session {
    pub fn new(config: SessionConfig, channels: ChannelSet) -> Result<Self> {
        Self::with_options(config, channels, SessionOptions::default())
    }

    pub fn with_options(
        config: SessionConfig,
        channels: ChannelSet,
        options: SessionOptions,
    ) -> Result<Self> {
        config.validate()?;
        channels.validate()?;
        if !(options.ci_level > 0.0 && options.ci_level < 1.0) {
            return Err(Error::Config(format!(
                "ci_level {} outside (0, 1)",
                options.ci_level
            )));
        }
        let seed = config.seed;
        let channel_rngs = [0, 1, 2, 3].map(|i| stream_rng(seed, STREAM_CHANNEL_BASE + i));
        Ok(Session {
            config,
            options,
            channels,
            client: ClientState {
                rng: stream_rng(seed, STREAM_ALICE),
                controls: HashMap::new(),
                preps: Vec::new(),
            },
            server: ServerState {
                rng: stream_rng(seed, STREAM_BOB),
            },
            channel_rngs,
            pairs: PairStore::default(),
            transcript: Transcript::new(false),
            interception: InterceptionLog::new(),
            check_totals: [CheckTotals::default(); 3],
            trials: Vec::new(),
            discarded: Vec::new(),
            retained: Vec::new(),
            aborted: None,
            distributed: false,
            ran: false,
        })
        .map(|mut s| {
            s.transcript = Transcript::new(s.options.record_transcript);
            s
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn interception_log(&self) -> &InterceptionLog {
        &self.interception
    }

    pub fn check_report(&self, source: Source) -> CheckReport {
        let totals = self.check_totals[source.index()];
        CheckReport {
            channel: source.channel(),
            checked: totals.checked,
            mismatches: totals.mismatches,
        }
    }

    /// Read access to a pair's materialized quantum state, for audits and
    /// tests. The register order is [Alice's half, Bob's half]. `None` when
    /// the pair is still a pristine Bell pair, lost, or already folded into
    /// a joint state.
    pub fn pair_state(&self, source: Source, index: usize) -> Option<&StateVector> {
        match &self.pairs.slot(source, index)?.quantum {
            PairQuantum::State(s) => Some(s),
            _ => None,
        }
    }

    fn ensure_active(&self) -> Result<()> {
        match &self.aborted {
            Some(reason) => Err(Error::Protocol(format!("session aborted: {reason}"))),
            None => Ok(()),
        }
    }

    fn ensure_distributed(&self) -> Result<()> {
        if self.distributed {
            Ok(())
        } else {
            Err(Error::Protocol("pairs have not been distributed".into()))
        }
    }

    fn ensure_message_pair(&self, index: usize) -> Result<()> {
        let n_check = self.config.checking_pairs();
        if index < n_check || index >= self.config.n_pairs_per_source {
            return Err(Error::Protocol(format!(
                "pair {index} is not in the message group ({n_check}..{})",
                self.config.n_pairs_per_source
            )));
        }
        Ok(())
    }

    fn abort(&mut self, reason: AbortReason) {
        if self.aborted.is_none() {
            self.transcript.record(
                Sender::Alice,
                ProtocolMessage::AbortNotice {
                    reason: reason.to_string(),
                },
            );
            self.aborted = Some(reason);
        }
    }

    /// Bob creates every pair of every source and sends the Alice-bound
    /// half through the corresponding channel, in pair order. Attacks and
    /// loss act here.
    pub fn distribute_pairs(&mut self) -> Result<DistributionSummary> {
        self.ensure_active()?;
        if self.distributed {
            return Err(Error::Protocol("pairs already distributed".into()));
        }
        let n = self.config.n_pairs_per_source;
        let mut lost = 0usize;
        for source in Source::ALL {
            let channel = self.channels.get(source.channel()).clone();
            let rng_index = source.channel().index();
            let slots = &mut self.pairs.per_source[source.index()];
            slots.reserve(n);
            for index in 0..n {
                let base = 2 * (source.index() * n + index) as u32;
                let (aq, bq) = (QubitId::new(base), QubitId::new(base + 1));
                let quantum = if channel.is_passive() {
                    PairQuantum::PhiPlus
                } else {
                    let mut state = StateVector::bell_phi_plus(aq, bq)?;
                    let entry = channel.transmit(
                        &mut state,
                        aq,
                        index,
                        &mut self.channel_rngs[rng_index],
                    )?;
                    let was_lost = entry.as_ref().is_some_and(|e| e.lost);
                    self.interception.record(entry);
                    if was_lost {
                        lost += 1;
                        PairQuantum::Lost
                    } else {
                        PairQuantum::State(state)
                    }
                };
                slots.push(PairSlot {
                    alice: aq,
                    bob: bq,
                    quantum,
                    consumed_by: None,
                });
            }
        }
        self.distributed = true;
        Ok(DistributionSummary {
            transmitted: 3 * n,
            lost,
        })
    }

    /// One eavesdrop-checking round over checking-group pairs of `source`:
    /// Bob measures each pair's half in a random basis and announces basis
    /// and result; Alice measures hers in the same basis and counts
    /// mismatches. A mismatch rate above the configured threshold aborts
    /// the session. Lost pairs are skipped and not counted.
    pub fn eavesdrop_check(&mut self, source: Source, indices: &[usize]) -> Result<CheckReport> {
        self.ensure_active()?;
        self.ensure_distributed()?;
        let n_check = self.config.checking_pairs();
        let mut checked = 0usize;
        let mut mismatches = 0usize;
        for &index in indices {
            if index >= n_check {
                return Err(Error::Protocol(format!(
                    "pair {index} of {source} is not in the checking group (0..{n_check})"
                )));
            }
            let slot = self.pairs.slot_mut(source, index)?;
            slot.consume("eavesdrop-check", source, index)?;
            if slot.is_lost() {
                continue;
            }
            let bob_qubit = slot.bob;
            let alice_qubit = slot.alice;
            let state = slot.materialize()?;
            let basis = if self.server.rng.gen_bool(0.5) {
                MeasBasis::Computational
            } else {
                MeasBasis::Diagonal
            };
            let bob_outcome = state.measure(bob_qubit, basis, &mut self.server.rng)?;
            self.transcript.record(
                Sender::Bob,
                ProtocolMessage::BasisAnnouncement { index, basis },
            );
            self.transcript.record(
                Sender::Bob,
                ProtocolMessage::ResultAnnouncement {
                    index,
                    outcome: bob_outcome,
                },
            );
            let alice_outcome = state.measure(alice_qubit, basis, &mut self.client.rng)?;
            checked += 1;
            if alice_outcome != bob_outcome {
                mismatches += 1;
            }
        }
        let totals = &mut self.check_totals[source.index()];
        totals.checked += checked;
        totals.mismatches += mismatches;
        let report = CheckReport {
            channel: source.channel(),
            checked,
            mismatches,
        };
        if report.mismatch_rate() > self.config.check_threshold {
            self.abort(AbortReason::EavesdropperSuspected {
                channel: source.channel(),
            });
        }
        Ok(report)
    }

    /// Alice measures her half of an S1 message pair in a uniformly random
    /// basis, collapsing Bob's half to the same eigenstate. No classical
    /// message is sent; the outcome is her private knowledge.
    pub fn prepare_control(&mut self, pair_index: usize) -> Result<ControlRecord> {
        self.ensure_active()?;
        self.ensure_distributed()?;
        self.ensure_message_pair(pair_index)?;
        let slot = self.pairs.slot_mut(Source::S1, pair_index)?;
        slot.consume("prepare-control", Source::S1, pair_index)?;
        let alice_qubit = slot.alice;
        let state = slot.materialize()?;
        let basis = if self.client.rng.gen_bool(0.5) {
            MeasBasis::Computational
        } else {
            MeasBasis::Diagonal
        };
        let outcome = state.measure(alice_qubit, basis, &mut self.client.rng)?;
        let record = ControlRecord {
            pair_index,
            prepared_outcome: outcome,
            basis,
        };
        self.client.controls.insert(pair_index, record);
        Ok(record)
    }

    /// Remote state preparation on an S2/S3 message pair: Alice rotates
    /// her half by the target rotation and measures in the computational
    /// basis. Outcome H leaves Bob's half in the target state; outcome V
    /// triggers a correction request, after which Bob's half equals the
    /// target up to a global phase.
    pub fn remote_prepare(
        &mut self,
        target: &PolarizationVector,
        source: Source,
        pair_index: usize,
    ) -> Result<PrepRecord> {
        self.ensure_active()?;
        self.ensure_distributed()?;
        if source == Source::S1 {
            return Err(Error::Protocol(
                "S1 pairs carry controls, not remotely prepared targets".into(),
            ));
        }
        self.ensure_message_pair(pair_index)?;
        let rotation = target.rotation()?;
        let slot = self.pairs.slot_mut(source, pair_index)?;
        slot.consume("remote-prepare", source, pair_index)?;
        let alice_qubit = slot.alice;
        let bob_qubit = slot.bob;
        let state = slot.materialize()?;
        state.apply_single_qubit(alice_qubit, &rotation)?;
        let outcome = state.measure(alice_qubit, MeasBasis::Computational, &mut self.client.rng)?;
        let correction = outcome == Outcome::V;
        if correction {
            self.transcript.record(
                Sender::Alice,
                ProtocolMessage::CorrectionRequest {
                    index: pair_index,
                    apply_x: true,
                    apply_z: true,
                },
            );
            // Bit flip then phase flip turns beta|H> - alpha|V> into
            // -(alpha|H> + beta|V>); the global phase is unobservable.
            let state = self.pairs.slot_mut(source, pair_index)?.materialize()?;
            state.apply_single_qubit(bob_qubit, &Unitary2::pauli_x())?;
            state.apply_single_qubit(bob_qubit, &Unitary2::pauli_z())?;
        }
        let record = PrepRecord {
            pair_index,
            source,
            outcome,
            correction_requested: correction,
        };
        self.client.preps.push(record);
        Ok(record)
    }

    /// Bob applies the controlled swap (control: S1 half, targets: S2 and
    /// S3 halves) and sends the control back through the return channel.
    pub fn server_fredkin_and_return(&mut self, pair_index: usize) -> Result<ReturnedControl> {
        self.ensure_active()?;
        self.ensure_distributed()?;
        if !self.client.controls.contains_key(&pair_index) {
            return Err(Error::Protocol(format!(
                "control for pair {pair_index} was never prepared"
            )));
        }
        for source in [Source::S2, Source::S3] {
            let slot = self.pairs.slot_mut(source, pair_index)?;
            if slot.consumed_by != Some("remote-prepare") {
                return Err(Error::Protocol(format!(
                    "target on {source} for pair {pair_index} was never prepared"
                )));
            }
        }
        self.transcript.record(
            Sender::Alice,
            ProtocolMessage::FredkinRequest {
                control_index: pair_index,
                target_indices: [pair_index, pair_index],
            },
        );
        let s1 = self.pairs.slot_mut(Source::S1, pair_index)?.take_state()?;
        let s2 = self.pairs.slot_mut(Source::S2, pair_index)?.take_state()?;
        let s3 = self.pairs.slot_mut(Source::S3, pair_index)?.take_state()?;
        let control_qubit = self.pairs.slot(Source::S1, pair_index).unwrap().bob;
        let u_qubit = self.pairs.slot(Source::S2, pair_index).unwrap().bob;
        let v_qubit = self.pairs.slot(Source::S3, pair_index).unwrap().bob;
        let mut joint = s1.tensor(&s2)?.tensor(&s3)?;
        joint.apply_fredkin(control_qubit, &[u_qubit], &[v_qubit])?;
        let channel = self.channels.get(ChannelName::Ca4b4).clone();
        let entry = channel.transmit(
            &mut joint,
            control_qubit,
            pair_index,
            &mut self.channel_rngs[ChannelName::Ca4b4.index()],
        )?;
        let lost = entry.as_ref().is_some_and(|e| e.lost);
        self.interception.record(entry);
        Ok(ReturnedControl {
            pair_index,
            lost,
            joint,
            control_qubit,
            u_qubit,
            v_qubit,
        })
    }

    /// Alice measures the returned control in the basis of her private
    /// record. Computational controls score the trial as a security check;
    /// diagonal controls score it as a swap-test sample.
    pub fn client_measure_control(
        &mut self,
        returned: ReturnedControl,
        reference: Reference,
    ) -> Result<TrialOutcome> {
        self.ensure_active()?;
        if returned.lost {
            return Err(Error::Protocol(
                "returned control was lost; the trial must be discarded".into(),
            ));
        }
        let record = *self
            .client
            .controls
            .get(&returned.pair_index)
            .ok_or_else(|| {
                Error::Protocol(format!(
                    "no control record for pair {}",
                    returned.pair_index
                ))
            })?;
        let mut joint = returned.joint;
        let outcome = joint.measure(returned.control_qubit, record.basis, &mut self.client.rng)?;
        let matched = outcome == record.prepared_outcome;
        let kind = match record.basis {
            MeasBasis::Computational => {
                if matched {
                    TrialKind::SecurityPass
                } else {
                    TrialKind::SecurityFail
                }
            }
            MeasBasis::Diagonal => {
                if matched {
                    TrialKind::Same
                } else {
                    TrialKind::Flip
                }
            }
        };
        let trial = TrialOutcome {
            pair_index: returned.pair_index,
            kind,
            reference,
        };
        self.trials.push(trial);
        if self.options.retain_targets {
            self.retained.push(RetainedTrial {
                pair_index: returned.pair_index,
                reference,
                control_outcome: record.prepared_outcome,
                state: joint,
                u_qubit: returned.u_qubit,
                v_qubit: returned.v_qubit,
            });
        }
        Ok(trial)
    }

    fn triple_lost(&self, pair_index: usize) -> bool {
        Source::ALL.iter().any(|&s| {
            self.pairs
                .slot(s, pair_index)
                .is_some_and(|slot| slot.is_lost())
        })
    }

    fn consume_triple_as_lost(&mut self, pair_index: usize) -> Result<()> {
        for source in Source::ALL {
            self.pairs
                .slot_mut(source, pair_index)?
                .consume("loss-discard", source, pair_index)?;
        }
        Ok(())
    }

    /// Execute the whole protocol: distribution, both checking rounds,
    /// then the alternating-reference trial loop, finishing with the
    /// overlap/distance/assignment estimates.
    pub fn run(&mut self) -> Result<SessionResult> {
        if self.ran {
            return Err(Error::Protocol("session already ran".into()));
        }
        self.ran = true;
        self.distribute_pairs()?;

        // The checking group is verified in two rounds, bracketing the
        // message-group consumption the way the two transmissions do.
        let n_check = self.config.checking_pairs();
        let split = n_check.div_ceil(2);
        for (lo, hi) in [(0, split), (split, n_check)] {
            if lo >= hi {
                continue;
            }
            let indices: Vec<usize> = (lo..hi).collect();
            for source in Source::ALL {
                self.eavesdrop_check(source, &indices)?;
                if self.aborted.is_some() {
                    return Ok(self.finish());
                }
            }
        }

        let base = n_check;
        let mut computational = 0usize;
        let mut failures = 0usize;
        for t in 0..self.config.shots {
            let pair_index = base + t;
            let reference = if t % 2 == 0 {
                Reference::A
            } else {
                Reference::B
            };
            if self.triple_lost(pair_index) {
                self.consume_triple_as_lost(pair_index)?;
                self.discarded.push(DiscardedTrial {
                    pair_index,
                    reference,
                    control_basis: None,
                });
                continue;
            }
            let control = self.prepare_control(pair_index)?;
            let u = self.config.u;
            let v = self.config.reference_vector(reference);
            self.remote_prepare(&u, Source::S2, pair_index)?;
            self.remote_prepare(&v, Source::S3, pair_index)?;
            let returned = self.server_fredkin_and_return(pair_index)?;
            if returned.lost {
                self.discarded.push(DiscardedTrial {
                    pair_index,
                    reference,
                    control_basis: Some(control.basis),
                });
                continue;
            }
            let trial = self.client_measure_control(returned, reference)?;
            match trial.kind {
                TrialKind::SecurityPass => computational += 1,
                TrialKind::SecurityFail => {
                    computational += 1;
                    failures += 1;
                }
                TrialKind::Same | TrialKind::Flip => {}
            }
            if failures as f64 > self.config.check_threshold * computational as f64 {
                self.abort(AbortReason::SecurityFailRateExceeded);
                return Ok(self.finish());
            }
        }
        self.finish_with_estimates()
    }

    fn compute_estimates(&self) -> Result<SessionEstimates> {
        let level = self.options.ci_level;
        let overlap_a = estimator::estimate_flip_probability(&self.trials, Reference::A, level)?;
        let overlap_b = estimator::estimate_flip_probability(&self.trials, Reference::B, level)?;
        let d_a = estimator::distance(
            self.config.u.magnitude,
            self.config.v_a.magnitude,
            overlap_a.overlap_mag,
        )?;
        let d_b = estimator::distance(
            self.config.u.magnitude,
            self.config.v_b.magnitude,
            overlap_b.overlap_mag,
        )?;
        let assignment = estimator::assign_cluster(&d_a, &d_b, self.options.tie_epsilon);
        Ok(SessionEstimates {
            reference_a: ReferenceEstimate {
                overlap: overlap_a,
                distance: d_a,
            },
            reference_b: ReferenceEstimate {
                overlap: overlap_b,
                distance: d_b,
            },
            assignment,
        })
    }

    fn finish_with_estimates(&mut self) -> Result<SessionResult> {
        match self.compute_estimates() {
            Ok(estimates) => {
                let mut result = self.finish();
                result.estimates = Some(estimates);
                Ok(result)
            }
            Err(Error::InsufficientData(_)) => {
                self.abort(AbortReason::InsufficientTrials);
                Ok(self.finish())
            }
            Err(e) => Err(e),
        }
    }

    fn finish(&mut self) -> SessionResult {
        SessionResult {
            check_reports: Source::ALL.iter().map(|&s| self.check_report(s)).collect(),
            trials: mem::take(&mut self.trials),
            discarded: mem::take(&mut self.discarded),
            aborted: self.aborted.clone(),
            estimates: None,
            transcript: self.transcript.messages().to_vec(),
        }
    }

    /// After a completed session, Alice asks for the target qubits back
    /// and measures each returned qubit whose state she can predict (the
    /// computational-control trials, where the post-swap state is a
    /// product and she knows which vector sits on which wire) in the
    /// {target, target-orthogonal} basis.
    pub fn verify_returned_reference(&mut self, behavior: ReturnBehavior) -> Result<HonestyReport> {
        if !self.ran {
            return Err(Error::Protocol("session has not run yet".into()));
        }
        self.ensure_active()?;
        let retained = mem::take(&mut self.retained);
        let mut report = HonestyReport::default();
        if retained.is_empty() {
            return Ok(report);
        }
        self.transcript.record(
            Sender::Alice,
            ProtocolMessage::ReturnRequest {
                indices: retained.iter().map(|t| t.pair_index).collect(),
            },
        );
        let channel = self.channels.get(ChannelName::Ca4b4).clone();
        let rng_index = ChannelName::Ca4b4.index();
        for trial in retained {
            let u = self.config.u;
            let v = self.config.reference_vector(trial.reference);
            // An H control left the wires alone; a V control swapped them.
            let (target_on_u_wire, target_on_v_wire) = match trial.control_outcome {
                Outcome::H => (Some(u), Some(v)),
                Outcome::V => (Some(v), Some(u)),
                Outcome::Plus | Outcome::Minus => (None, None),
            };
            let mut state = trial.state;
            for (wire, target) in [
                (trial.u_qubit, target_on_u_wire),
                (trial.v_qubit, target_on_v_wire),
            ] {
                if behavior == ReturnBehavior::MeasureTargetsBeforeReturn {
                    state.measure(wire, MeasBasis::Computational, &mut self.server.rng)?;
                }
                report.requested += 1;
                let entry = channel.transmit(
                    &mut state,
                    wire,
                    trial.pair_index,
                    &mut self.channel_rngs[rng_index],
                )?;
                let lost = entry.as_ref().is_some_and(|e| e.lost);
                self.interception.record(entry);
                if lost {
                    report.lost += 1;
                    continue;
                }
                if let Some(target) = target {
                    // The rotation is self-inverse: it maps the target to
                    // |H> and the orthogonal state to |V>.
                    state.apply_single_qubit(wire, &target.rotation()?)?;
                    let outcome =
                        state.measure(wire, MeasBasis::Computational, &mut self.client.rng)?;
                    report.measured += 1;
                    if outcome == Outcome::V {
                        report.suspicious += 1;
                    }
                }
            }
        }
        Ok(report)
    }
}

/// Run one full session to completion.
///
/// ```
/// use bqml_core::estimator::ClusterChoice;
/// use bqml_core::protocol::{run_session, ChannelSet, PolarizationVector, SessionConfig};
///
/// let config = SessionConfig {
///     n_pairs_per_source: 4_000,
///     check_fraction: 0.5,
///     u: PolarizationVector::unit(0.6, 0.8).unwrap(),
///     v_a: PolarizationVector::unit(0.6, 0.8).unwrap(),
///     v_b: PolarizationVector::unit(1.0, 0.0).unwrap(),
///     shots: 2_000,
///     check_threshold: 0.0,
///     seed: 7,
/// };
/// let result = run_session(config, ChannelSet::honest()).unwrap();
/// let estimates = result.estimates.expect("honest run completes");
/// assert_eq!(estimates.assignment.chosen, ClusterChoice::A);
/// ```
pub fn run_session(config: SessionConfig, channels: ChannelSet) -> Result<SessionResult> {
    Session::new(config, channels)?.run_owned()
}

impl Session {
    fn run_owned(mut self) -> Result<SessionResult> {
        self.run()
    }
}
