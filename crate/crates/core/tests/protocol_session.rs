//! End-to-end session behavior: honest-run statistics, determinism,
//! per-step contracts, attack-triggered aborts, loss discards, and the
//! returned-reference honesty check.

use bqml_core::channel::{AttackStrategy, BasisPolicy, ChannelModel, ChannelName};
use bqml_core::protocol::{
    AbortReason, ChannelSet, PolarizationVector, Reference, ReturnBehavior, Session, SessionConfig,
    SessionOptions, Source, TrialKind,
};
use bqml_core::quantum::Outcome;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

fn config(shots: usize, seed: u64) -> SessionConfig {
    SessionConfig {
        n_pairs_per_source: 2 * shots,
        check_fraction: 0.5,
        u: PolarizationVector::unit(0.6, 0.8).unwrap(),
        v_a: PolarizationVector::unit(0.6, 0.8).unwrap(),
        v_b: PolarizationVector::unit(1.0, 0.0).unwrap(),
        shots,
        check_threshold: 0.0,
        seed,
    }
}

fn attacked(name: ChannelName, attack: AttackStrategy) -> ChannelSet {
    ChannelSet::honest().with(ChannelModel {
        name,
        attack,
        loss_p: 0.0,
    })
}

fn lossy(name: ChannelName, loss_p: f64) -> ChannelSet {
    ChannelSet::honest().with(ChannelModel {
        name,
        attack: AttackStrategy::NoAttack,
        loss_p,
    })
}

#[test]
fn honest_run_statistics_and_estimates() {
    let mut session = Session::new(config(4_000, 7), ChannelSet::honest()).unwrap();
    let result = session.run().unwrap();

    assert!(!result.is_aborted());
    assert!(result.discarded.is_empty());
    for report in &result.check_reports {
        assert!(report.checked > 0);
        assert_eq!(report.mismatches, 0, "honest checking must be exact");
    }
    assert_eq!(result.security_fail_count(), 0);

    let estimates = result.estimates.as_ref().expect("completed run estimates");
    // u equals v_a: the flip amplitude vanishes identically.
    assert_eq!(estimates.reference_a.overlap.p_minus_hat, 0.0);
    assert_eq!(estimates.reference_a.overlap.overlap_mag, 1.0);
    assert_eq!(estimates.reference_a.distance.d, 0.0);
    // |<u|v_b>| = 0.6, so the B flip rate converges to 0.32.
    let n_b = estimates.reference_b.overlap.n_diag as f64;
    let sigma = (0.32f64 * 0.68 / n_b).sqrt();
    assert!(
        (estimates.reference_b.overlap.p_minus_hat - 0.32).abs() < 4.0 * sigma,
        "B flip rate {} at n {}",
        estimates.reference_b.overlap.p_minus_hat,
        n_b
    );
    assert!((estimates.reference_b.overlap.overlap_mag - 0.6).abs() < 0.1);
    assert!((estimates.reference_b.distance.d - (0.8f64).sqrt()).abs() < 0.1);
    assert!(matches!(
        estimates.assignment.chosen,
        bqml_core::estimator::ClusterChoice::A
    ));

    // No pair index is consumed by more than one trial.
    let mut seen = HashSet::new();
    for t in &result.trials {
        assert!(seen.insert(t.pair_index));
    }
}

#[test]
fn identical_seeds_give_identical_results() {
    let options = SessionOptions {
        record_transcript: true,
        ..SessionOptions::default()
    };
    let run = || {
        let mut session =
            Session::with_options(config(200, 99), ChannelSet::honest(), options).unwrap();
        serde_json::to_string(&session.run().unwrap()).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn transcript_contains_expected_message_flow() {
    let options = SessionOptions {
        record_transcript: true,
        ..SessionOptions::default()
    };
    let mut session = Session::with_options(config(100, 5), ChannelSet::honest(), options).unwrap();
    let result = session.run().unwrap();
    let messages = &result.transcript;
    assert!(!messages.is_empty());
    // Sequence numbers are dense and monotone.
    for (i, m) in messages.iter().enumerate() {
        assert_eq!(m.seq, i as u64);
    }
    let fredkin_requests = messages
        .iter()
        .filter(|m| {
            matches!(
                m.message,
                bqml_core::protocol::ProtocolMessage::FredkinRequest { .. }
            )
        })
        .count();
    assert_eq!(fredkin_requests, result.trials.len());
}

#[test]
fn prepare_control_is_silent_and_collapses_partner() {
    let mut cfg = config(100, 13);
    cfg.n_pairs_per_source = 20_000;
    cfg.shots = 10_000;
    let mut session = Session::new(cfg, ChannelSet::honest()).unwrap();
    session.distribute_pairs().unwrap();
    let base = session.config().checking_pairs();
    let before = session.transcript().seq_count();
    let mut computational = 0usize;
    let n = 10_000;
    for i in 0..n {
        let record = session.prepare_control(base + i).unwrap();
        if record.basis == bqml_core::quantum::MeasBasis::Computational {
            computational += 1;
        }
        let state = session.pair_state(Source::S1, base + i).unwrap();
        let bob_qubit = state.qubits()[1];
        let (h, v) = record.prepared_outcome.eigenstate();
        let fidelity = state.qubit_fidelity(bob_qubit, h, v).unwrap();
        assert!(
            (fidelity - 1.0).abs() < 1e-10,
            "partner fidelity {fidelity}"
        );
    }
    assert_eq!(session.transcript().seq_count(), before);
    let frac = computational as f64 / n as f64;
    assert!((frac - 0.5).abs() < 0.02, "computational fraction {frac}");
}

#[test]
fn remote_preparation_reaches_target_for_both_outcomes() {
    let mut cfg = config(100, 29);
    cfg.n_pairs_per_source = 5_000;
    cfg.shots = 2_000;
    let mut session = Session::new(cfg, ChannelSet::honest()).unwrap();
    session.distribute_pairs().unwrap();
    let base = session.config().checking_pairs();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut corrected = 0usize;
    let n = 2_000;
    for i in 0..n {
        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
        let target = PolarizationVector::unit(theta.cos(), theta.sin()).unwrap();
        let record = session
            .remote_prepare(&target, Source::S2, base + i)
            .unwrap();
        if record.correction_requested {
            corrected += 1;
            assert_eq!(record.outcome, Outcome::V);
        } else {
            assert_eq!(record.outcome, Outcome::H);
        }
        let state = session.pair_state(Source::S2, base + i).unwrap();
        let bob_qubit = state.qubits()[1];
        let fidelity = state
            .qubit_fidelity(
                bob_qubit,
                bqml_core::quantum::Amplitude::new(target.alpha, 0.0),
                bqml_core::quantum::Amplitude::new(target.beta, 0.0),
            )
            .unwrap();
        assert!(
            (fidelity - 1.0).abs() < 1e-10,
            "post-correction fidelity {fidelity}"
        );
    }
    let frac = corrected as f64 / n as f64;
    assert!((frac - 0.5).abs() < 0.03, "correction fraction {frac}");
}

#[test]
fn intercept_resend_on_distribution_channel_aborts() {
    let channels = attacked(
        ChannelName::Ca1b1,
        AttackStrategy::InterceptResend {
            basis_policy: BasisPolicy::RandomUniform,
        },
    );
    let mut session = Session::new(config(200, 3), channels).unwrap();
    let result = session.run().unwrap();
    assert!(matches!(
        result.aborted,
        Some(AbortReason::EavesdropperSuspected {
            channel: ChannelName::Ca1b1
        })
    ));
    assert!(result.trials.is_empty());
    assert!(result.estimates.is_none());
    // Eve's ledger has one entry per transmission on the attacked channel.
    let entries = session.interception_log().entries();
    assert_eq!(entries.len(), 400);
    assert!(entries.iter().all(|e| e.channel == ChannelName::Ca1b1));
}

#[test]
fn attacked_return_channel_trips_step5_security() {
    let channels = attacked(
        ChannelName::Ca4b4,
        AttackStrategy::InterceptResend {
            basis_policy: BasisPolicy::FixedDiagonal,
        },
    );
    let mut session = Session::new(config(400, 8), channels).unwrap();
    let result = session.run().unwrap();
    assert!(matches!(
        result.aborted,
        Some(AbortReason::SecurityFailRateExceeded)
    ));
    assert!(result.security_fail_count() >= 1);
}

#[test]
fn total_loss_on_a_target_channel_discards_every_trial() {
    let mut session = Session::new(config(150, 21), lossy(ChannelName::Ca2b2, 1.0)).unwrap();
    let result = session.run().unwrap();
    assert!(matches!(
        result.aborted,
        Some(AbortReason::InsufficientTrials)
    ));
    assert!(result.trials.is_empty());
    assert_eq!(result.discarded.len(), 150);
    assert!(result.discarded.iter().all(|d| d.control_basis.is_none()));
    // The lost channel simply contributes no checked pairs.
    let s2 = &result.check_reports[Source::S2.index()];
    assert_eq!((s2.checked, s2.mismatches), (0, 0));
}

#[test]
fn return_leg_loss_discards_after_control_preparation() {
    let mut session = Session::new(config(150, 22), lossy(ChannelName::Ca4b4, 1.0)).unwrap();
    let result = session.run().unwrap();
    assert!(matches!(
        result.aborted,
        Some(AbortReason::InsufficientTrials)
    ));
    assert_eq!(result.discarded.len(), 150);
    assert!(result.discarded.iter().all(|d| d.control_basis.is_some()));
}

#[test]
fn partial_loss_keeps_statistics_clean() {
    let mut session = Session::new(config(2_000, 23), lossy(ChannelName::Ca3b3, 0.2)).unwrap();
    let result = session.run().unwrap();
    assert!(!result.is_aborted());
    let discarded = result.discarded.len();
    assert!(discarded > 0, "20% loss must discard some trials");
    assert_eq!(result.trials.len() + discarded, 2_000);
    // Surviving trials keep exact honest statistics.
    assert_eq!(result.security_fail_count(), 0);
    let est = result.estimates.unwrap();
    assert_eq!(est.reference_a.overlap.p_minus_hat, 0.0);
}

#[test]
fn honest_return_verification_raises_no_suspicion() {
    let options = SessionOptions {
        retain_targets: true,
        ..SessionOptions::default()
    };
    let mut session =
        Session::with_options(config(2_000, 31), ChannelSet::honest(), options).unwrap();
    let result = session.run().unwrap();
    assert!(!result.is_aborted());
    let report = session
        .verify_returned_reference(ReturnBehavior::Honest)
        .unwrap();
    assert_eq!(report.requested, 2 * result.trials.len());
    let computational = result.computational_trials();
    assert_eq!(report.measured, 2 * computational);
    assert_eq!(report.suspicious, 0);
    assert_eq!(report.lost, 0);
}

#[test]
fn measuring_server_is_caught_at_the_predicted_rate() {
    // Both wires carry (0.6, 0.8): a computational pre-measurement leaves
    // the target basis check suspicious with probability 2 * 0.36 * 0.64.
    let mut cfg = config(20_000, 37);
    cfg.v_b = cfg.v_a;
    let options = SessionOptions {
        retain_targets: true,
        ..SessionOptions::default()
    };
    let mut session = Session::with_options(cfg, ChannelSet::honest(), options).unwrap();
    session.run().unwrap();
    let report = session
        .verify_returned_reference(ReturnBehavior::MeasureTargetsBeforeReturn)
        .unwrap();
    assert!(report.measured > 15_000, "measured {}", report.measured);
    let rate = report.suspicion_rate();
    assert!(
        (rate - 0.4608).abs() < 0.015,
        "suspicion rate {rate} (measured {})",
        report.measured
    );
}

#[test]
fn verification_without_retention_is_vacuous() {
    let mut session = Session::new(config(100, 41), ChannelSet::honest()).unwrap();
    session.run().unwrap();
    let report = session
        .verify_returned_reference(ReturnBehavior::Honest)
        .unwrap();
    assert_eq!(report, Default::default());
}

#[test]
fn delegated_swap_behaves_per_control_polarization() {
    // u and v differ, so a V control visibly exchanges the target wires.
    let mut cfg = config(400, 61);
    cfg.u = PolarizationVector::unit(0.6, 0.8).unwrap();
    cfg.v_a = PolarizationVector::unit(1.0, 0.0).unwrap();
    cfg.v_b = PolarizationVector::unit(1.0, 0.0).unwrap();
    let u = cfg.u;
    let v = cfg.v_a;
    let mut session = Session::new(cfg, ChannelSet::honest()).unwrap();
    session.distribute_pairs().unwrap();
    let base = session.config().checking_pairs();

    let amp = |x: f64| bqml_core::quantum::Amplitude::new(x, 0.0);
    let mut seen_h = false;
    let mut seen_v = false;
    let mut seen_plus = false;
    for i in 0..400 {
        let index = base + i;
        let record = session.prepare_control(index).unwrap();
        session.remote_prepare(&u, Source::S2, index).unwrap();
        session.remote_prepare(&v, Source::S3, index).unwrap();
        let returned = session.server_fredkin_and_return(index).unwrap();
        let joint = returned.joint();
        match record.prepared_outcome {
            Outcome::H => {
                // Control invariant in the computational basis, wires untouched.
                seen_h = true;
                let p = joint
                    .outcome_probability(returned.control_qubit(), Outcome::H)
                    .unwrap();
                assert!((p - 1.0).abs() < 1e-10);
                let fu = joint
                    .qubit_fidelity(returned.u_qubit(), amp(u.alpha), amp(u.beta))
                    .unwrap();
                let fv = joint
                    .qubit_fidelity(returned.v_qubit(), amp(v.alpha), amp(v.beta))
                    .unwrap();
                assert!((fu - 1.0).abs() < 1e-10 && (fv - 1.0).abs() < 1e-10);
            }
            Outcome::V => {
                seen_v = true;
                let p = joint
                    .outcome_probability(returned.control_qubit(), Outcome::V)
                    .unwrap();
                assert!((p - 1.0).abs() < 1e-10);
                // Targets exchanged: the u wire now carries v and vice versa.
                let fu = joint
                    .qubit_fidelity(returned.u_qubit(), amp(v.alpha), amp(v.beta))
                    .unwrap();
                let fv = joint
                    .qubit_fidelity(returned.v_qubit(), amp(u.alpha), amp(u.beta))
                    .unwrap();
                assert!((fu - 1.0).abs() < 1e-10 && (fv - 1.0).abs() < 1e-10);
            }
            Outcome::Plus | Outcome::Minus => {
                seen_plus = true;
            }
        }
        session
            .client_measure_control(returned, Reference::A)
            .unwrap();
    }
    assert!(seen_h && seen_v && seen_plus);
}

#[test]
fn identical_targets_leave_diagonal_controls_unflipped() {
    // With u = v the antisymmetric branch has zero amplitude, so a |+>
    // control can never emerge as |->.
    let mut cfg = config(200, 67);
    cfg.v_a = cfg.u;
    cfg.v_b = cfg.u;
    let u = cfg.u;
    let mut session = Session::new(cfg, ChannelSet::honest()).unwrap();
    session.distribute_pairs().unwrap();
    let base = session.config().checking_pairs();
    let mut checked = 0usize;
    for i in 0..200 {
        let index = base + i;
        let record = session.prepare_control(index).unwrap();
        session.remote_prepare(&u, Source::S2, index).unwrap();
        session.remote_prepare(&u, Source::S3, index).unwrap();
        let returned = session.server_fredkin_and_return(index).unwrap();
        if record.prepared_outcome == Outcome::Plus {
            let p_minus = returned
                .joint()
                .outcome_probability(returned.control_qubit(), Outcome::Minus)
                .unwrap();
            assert!(
                p_minus.abs() < 1e-10,
                "minus branch amplitude survived: {p_minus}"
            );
            checked += 1;
        }
        session
            .client_measure_control(returned, Reference::A)
            .unwrap();
    }
    assert!(checked > 0);
}

#[test]
fn diagonal_trials_split_between_same_and_flip_for_orthogonal_vectors() {
    let mut cfg = config(4_000, 53);
    cfg.u = PolarizationVector::unit(1.0, 0.0).unwrap();
    cfg.v_a = PolarizationVector::unit(0.0, 1.0).unwrap();
    cfg.v_b = PolarizationVector::unit(0.0, 1.0).unwrap();
    let mut session = Session::new(cfg, ChannelSet::honest()).unwrap();
    let result = session.run().unwrap();
    let est = result.estimates.as_ref().unwrap();
    // Orthogonal vectors flip with probability 1/2.
    let n = est.reference_a.overlap.n_diag as f64;
    let sigma = (0.25 / n).sqrt();
    assert!((est.reference_a.overlap.p_minus_hat - 0.5).abs() < 4.0 * sigma);
    // Security checks stay exact even with orthogonal targets.
    assert_eq!(result.security_fail_count(), 0);
    let flips = result
        .trials
        .iter()
        .filter(|t| t.kind == TrialKind::Flip && t.reference == Reference::A)
        .count();
    assert!(flips > 0);
}
