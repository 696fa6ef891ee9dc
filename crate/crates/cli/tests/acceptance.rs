//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line. Tolerances are pinned in the assertions.

use bqml_core::channel::{
    detection_probability_oracle, AttackStrategy, BasisPolicy, ChannelModel, ChannelName,
};
use bqml_core::protocol::{ChannelSet, PolarizationVector, Session, SessionConfig, Source};
use bqml_core::quantum::{Amplitude, MeasBasis, Outcome, QubitId, StateVector, Unitary2};
use bqml_sim::config::ExperimentConfig;
use bqml_sim::run_experiment;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

fn criterion<F: FnOnce() + UnwindSafe>(number: u32, title: &str, body: F) {
    match catch_unwind(body) {
        Ok(()) => println!("acceptance {number:>2} PASS: {title}"),
        Err(cause) => {
            println!("acceptance {number:>2} FAIL: {title}");
            resume_unwind(cause);
        }
    }
}

fn session_config(
    shots: usize,
    check_fraction: f64,
    u: (f64, f64),
    v_a: (f64, f64),
    v_b: (f64, f64),
    seed: u64,
) -> SessionConfig {
    let mut n = ((shots as f64 / (1.0 - check_fraction)).ceil() as usize).max(1);
    while n - ((check_fraction * n as f64).ceil() as usize).min(n) < shots {
        n += 1;
    }
    SessionConfig {
        n_pairs_per_source: n,
        check_fraction,
        u: PolarizationVector::unit(u.0, u.1).unwrap(),
        v_a: PolarizationVector::unit(v_a.0, v_a.1).unwrap(),
        v_b: PolarizationVector::unit(v_b.0, v_b.1).unwrap(),
        shots,
        check_threshold: 0.0,
        seed,
    }
}

fn experiment(session: SessionConfig, repetitions: usize, output_dir: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        session,
        channels: ChannelSet::honest(),
        repetitions,
        ci_level: 0.95,
        output_dir,
        emit_transcript: false,
    }
}

#[test]
fn criterion_01_swap_test_identity() {
    criterion(
        1,
        "identical vectors give zero flip rate and zero distance",
        || {
            let started = Instant::now();
            let config = session_config(40_000, 0.5, (0.6, 0.8), (0.6, 0.8), (1.0, 0.0), 7);
            let mut session = Session::new(config, ChannelSet::honest()).unwrap();
            let result = session.run().unwrap();
            let elapsed = started.elapsed();

            let est = result.estimates.as_ref().expect("honest run completes");
            assert!(
                est.reference_a.overlap.n_diag >= 10_000,
                "need 1e4 diagonal trials, got {}",
                est.reference_a.overlap.n_diag
            );
            assert!(
                est.reference_a.overlap.p_minus_hat <= 0.005,
                "flip rate {}",
                est.reference_a.overlap.p_minus_hat
            );
            assert!(
                est.reference_a.distance.d <= 0.1,
                "distance {}",
                est.reference_a.distance.d
            );
            assert!(
                elapsed.as_secs_f64() < 5.0,
                "runtime {:.2}s exceeds 5s",
                elapsed.as_secs_f64()
            );
        },
    );
}

#[test]
fn criterion_02_swap_test_orthogonal() {
    criterion(
        2,
        "orthogonal vectors give flip rate 1/2 and distance sqrt(2)",
        || {
            let config = session_config(40_000, 0.5, (1.0, 0.0), (0.0, 1.0), (0.0, 1.0), 2);
            let mut session = Session::new(config, ChannelSet::honest()).unwrap();
            let result = session.run().unwrap();
            let est = result.estimates.as_ref().unwrap();
            let overlap = &est.reference_a.overlap;
            assert!(
                overlap.n_diag >= 9_800,
                "diagonal trials {}",
                overlap.n_diag
            );
            assert!(
                (overlap.p_minus_hat - 0.5).abs() <= 0.015,
                "flip rate {}",
                overlap.p_minus_hat
            );
            let d = est.reference_a.distance.d;
            assert!((d - std::f64::consts::SQRT_2).abs() <= 0.05, "distance {d}");
        },
    );
}

#[test]
#[allow(clippy::approx_constant)] // 0.7071 is the pinned tolerance center
fn criterion_03_intermediate_overlap() {
    criterion(
        3,
        "overlap 1/sqrt(2) recovered from 1e5 diagonal trials",
        || {
            let config = session_config(
                420_000,
                0.05,
                (
                    std::f64::consts::FRAC_1_SQRT_2,
                    std::f64::consts::FRAC_1_SQRT_2,
                ),
                (1.0, 0.0),
                (1.0, 0.0),
                1,
            );
            let mut session = Session::new(config, ChannelSet::honest()).unwrap();
            let result = session.run().unwrap();
            let est = result.estimates.as_ref().unwrap();
            let overlap = &est.reference_a.overlap;
            assert!(
                overlap.n_diag >= 100_000,
                "diagonal trials {}",
                overlap.n_diag
            );
            assert!(
                (overlap.p_minus_hat - 0.25).abs() <= 0.005,
                "flip rate {}",
                overlap.p_minus_hat
            );
            assert!(
                (overlap.overlap_mag - 0.7071).abs() <= 0.01,
                "overlap {}",
                overlap.overlap_mag
            );
            assert!(
                (est.reference_a.distance.d - 0.7654).abs() <= 0.02,
                "distance {}",
                est.reference_a.distance.d
            );
        },
    );
}

#[test]
fn criterion_04_classification() {
    criterion(
        4,
        "overlap gap 0.9 vs 0.1 assigns cluster A in >= 99 of 100 runs",
        || {
            // Flip probabilities are 0.05 vs 0.45 at ~1000 diagonal trials per
            // reference; a Hoeffding bound on P(p_a >= p_b) certifies that a
            // misassignment is essentially impossible.
            let n = 900.0f64; // conservative lower bound on the trial counts
            let gap = 0.45 - 0.05;
            let misassign_bound = (-2.0 * gap * gap / (2.0 / n)).exp();
            assert!(misassign_bound * 100.0 < 1e-6);

            let root = (0.9f64.sqrt(), 0.1f64.sqrt());
            let swapped = (0.1f64.sqrt(), 0.9f64.sqrt());
            let config = session_config(4_000, 0.5, (1.0, 0.0), root, swapped, 11);
            let out = tempfile::tempdir().unwrap();
            let report = run_experiment(&experiment(config, 100, out.path().into())).unwrap();
            assert_eq!(report.summary.aborted_count, 0);
            assert!(
                report.summary.assignment_histogram.a >= 99,
                "A assigned {} of 100",
                report.summary.assignment_histogram.a
            );
            // Each repetition carries the stated per-reference sample size.
            for session in &report.sessions {
                let est = session.estimates.as_ref().unwrap();
                assert!(est.reference_a.overlap.n_diag >= 900);
                assert!(est.reference_b.overlap.n_diag >= 900);
            }
        },
    );
}

#[test]
fn criterion_05_eavesdrop_detection_rates() {
    criterion(
        5,
        "sampled mismatch rates match the enumeration oracle",
        || {
            let checked = 100_000usize;
            let indices: Vec<usize> = (0..checked).collect();
            let base = || {
                let mut config = session_config(10, 0.8, (0.6, 0.8), (0.6, 0.8), (1.0, 0.0), 17);
                config.n_pairs_per_source = 125_000;
                config.check_threshold = 1.0;
                config
            };

            // Honest channels: exactly zero mismatches on every source.
            let mut session = Session::new(base(), ChannelSet::honest()).unwrap();
            session.distribute_pairs().unwrap();
            for source in Source::ALL {
                let report = session.eavesdrop_check(source, &indices).unwrap();
                assert_eq!(report.checked, checked);
                assert_eq!(report.mismatches, 0, "{source} mismatched");
            }

            for (attack, seed) in [
                (
                    AttackStrategy::InterceptResend {
                        basis_policy: BasisPolicy::RandomUniform,
                    },
                    31,
                ),
                (
                    AttackStrategy::FakePhoton {
                        replacement: Outcome::H,
                    },
                    32,
                ),
            ] {
                let oracle = detection_probability_oracle(&attack).unwrap();
                let channels = ChannelSet::honest().with(ChannelModel {
                    name: ChannelName::Ca1b1,
                    attack,
                    loss_p: 0.0,
                });
                let mut config = base();
                config.seed = seed;
                let mut session = Session::new(config, channels).unwrap();
                session.distribute_pairs().unwrap();
                let report = session.eavesdrop_check(Source::S1, &indices).unwrap();
                assert_eq!(report.checked, checked);
                let rate = report.mismatch_rate();
                assert!(
                    (rate - oracle).abs() <= 0.01,
                    "{attack:?}: sampled {rate} vs oracle {oracle}"
                );
            }
        },
    );
}

#[test]
fn criterion_06_abort_behavior() {
    criterion(
        6,
        "intercept-resend aborts essentially every repetition",
        || {
            // Closed form: 50 checked pairs on the attacked channel survive
            // undetected with probability 0.75^50 < 6e-7.
            let survive = 0.75f64.powi(50);
            assert!(1.0 - survive > 0.9999);

            let config = session_config(50, 0.5, (0.6, 0.8), (0.6, 0.8), (1.0, 0.0), 5);
            assert_eq!(config.checking_pairs(), 50);
            let out = tempfile::tempdir().unwrap();
            let mut experiment = experiment(config, 1_000, out.path().into());
            experiment.channels = ChannelSet::honest().with(ChannelModel {
                name: ChannelName::Ca1b1,
                attack: AttackStrategy::InterceptResend {
                    basis_policy: BasisPolicy::RandomUniform,
                },
                loss_p: 0.0,
            });
            let report = run_experiment(&experiment).unwrap();
            let aborted = report.summary.aborted_count;
            assert!(
                aborted as f64 >= 0.9999 * 1_000.0,
                "only {aborted} of 1000 aborted"
            );
        },
    );
}

#[test]
fn criterion_07_step5_security_invariance() {
    criterion(
        7,
        "honest runs never fail a computational-control check",
        || {
            let config = session_config(204_000, 0.05, (0.6, 0.8), (0.28, 0.96), (1.0, 0.0), 23);
            let mut session = Session::new(config, ChannelSet::honest()).unwrap();
            let result = session.run().unwrap();
            assert!(!result.is_aborted());
            let computational = result.computational_trials();
            assert!(
                computational >= 100_000,
                "computational trials {computational}"
            );
            assert_eq!(result.security_fail_count(), 0);
        },
    );
}

#[test]
fn criterion_08_remote_preparation_fidelity() {
    criterion(
        8,
        "remote preparation reaches the target exactly for both outcomes",
        || {
            let mut config = session_config(100, 0.05, (0.6, 0.8), (0.6, 0.8), (1.0, 0.0), 37);
            config.n_pairs_per_source = 10_600;
            let mut session = Session::new(config, ChannelSet::honest()).unwrap();
            session.distribute_pairs().unwrap();
            let base = session.config().checking_pairs();
            let mut rng = ChaCha8Rng::seed_from_u64(4096);
            let mut outcome_counts = [0usize; 2];
            for i in 0..10_000 {
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                let target = PolarizationVector::unit(theta.cos(), theta.sin()).unwrap();
                let record = session
                    .remote_prepare(&target, Source::S2, base + i)
                    .unwrap();
                outcome_counts[record.correction_requested as usize] += 1;
                let state = session.pair_state(Source::S2, base + i).unwrap();
                let bob_qubit = state.qubits()[1];
                let fidelity = state
                    .qubit_fidelity(
                        bob_qubit,
                        Amplitude::new(target.alpha, 0.0),
                        Amplitude::new(target.beta, 0.0),
                    )
                    .unwrap();
                assert!(
                    (fidelity - 1.0).abs() <= 1e-10,
                    "preparation {i}: fidelity {fidelity}"
                );
            }
            assert!(outcome_counts[0] > 0 && outcome_counts[1] > 0);
        },
    );
}

#[test]
fn criterion_09_numerical_invariants() {
    criterion(
        9,
        "norm preservation, swap involution, and register-swap overlap",
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(53);
            let qubits: Vec<QubitId> = (0..5).map(QubitId::new).collect();

            let random_state = |rng: &mut ChaCha8Rng, ids: &[QubitId]| {
                let len = 1usize << ids.len();
                let mut amps: Vec<Amplitude> = (0..len)
                    .map(|_| Amplitude::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    .collect();
                let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                for a in &mut amps {
                    *a /= norm;
                }
                StateVector::from_amplitudes(ids.to_vec(), amps).unwrap()
            };

            // Norm preservation across 1e4 random gates.
            let mut state = random_state(&mut rng, &qubits);
            for _ in 0..10_000 {
                if rng.gen_bool(0.25) {
                    let mut picks = qubits.clone();
                    for i in 0..3 {
                        let j = rng.gen_range(i..picks.len());
                        picks.swap(i, j);
                    }
                    state
                        .apply_fredkin(picks[0], &[picks[1]], &[picks[2]])
                        .unwrap();
                } else {
                    let target = qubits[rng.gen_range(0..qubits.len())];
                    let gate = match rng.gen_range(0..5u8) {
                        0 => Unitary2::hwp(),
                        1 => Unitary2::pauli_x(),
                        2 => Unitary2::pauli_y(),
                        3 => Unitary2::pauli_z(),
                        _ => {
                            let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                            Unitary2::rotation(theta.cos(), theta.sin()).unwrap()
                        }
                    };
                    state.apply_single_qubit(target, &gate).unwrap();
                }
                assert!((state.norm_sqr() - 1.0).abs() <= 1e-10);
            }

            // Controlled-swap involution.
            for _ in 0..100 {
                let n = rng.gen_range(3..=5usize);
                let ids: Vec<QubitId> = (0..n as u32).map(QubitId::new).collect();
                let original = random_state(&mut rng, &ids);
                let mut state = original.clone();
                let mut picks = ids.clone();
                for i in 0..3 {
                    let j = rng.gen_range(i..picks.len());
                    picks.swap(i, j);
                }
                state
                    .apply_fredkin(picks[0], &[picks[1]], &[picks[2]])
                    .unwrap();
                state
                    .apply_fredkin(picks[0], &[picks[1]], &[picks[2]])
                    .unwrap();
                for (a, b) in state.amplitudes().iter().zip(original.amplitudes()) {
                    assert!((a - b).norm() <= 1e-12);
                }
            }

            // Two-qubit-register swap test reproduces |<u|v>|^2.
            let reg_u: Vec<QubitId> = vec![QubitId::new(1), QubitId::new(2)];
            let reg_v: Vec<QubitId> = vec![QubitId::new(3), QubitId::new(4)];
            let u = random_state(&mut rng, &reg_u);
            let v = random_state(&mut rng, &reg_v);
            let overlap: Amplitude = u
                .amplitudes()
                .iter()
                .zip(v.amplitudes())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let expected = overlap.norm_sqr();
            let shots = 100_000;
            let mut flips = 0usize;
            for _ in 0..shots {
                let control = StateVector::basis_state(QubitId::new(0), Outcome::Plus);
                let mut joint = control.tensor(&u).unwrap().tensor(&v).unwrap();
                joint
                    .apply_fredkin(QubitId::new(0), &reg_u, &reg_v)
                    .unwrap();
                if joint
                    .measure(QubitId::new(0), MeasBasis::Diagonal, &mut rng)
                    .unwrap()
                    == Outcome::Minus
                {
                    flips += 1;
                }
            }
            let estimated = 1.0 - 2.0 * (flips as f64 / shots as f64);
            assert!(
                (estimated - expected).abs() <= 0.01,
                "register swap test: {estimated} vs {expected}"
            );
        },
    );
}

#[test]
fn criterion_10_determinism() {
    criterion(
        10,
        "identical config and seed reproduce the reports byte for byte",
        || {
            let strip_wall_clock = |text: &str| -> String {
                text.lines()
                    .filter(|line| !line.trim_start().starts_with("\"wall_clock_s\""))
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            let run = |dir: &std::path::Path| {
                let config = session_config(2_000, 0.5, (0.6, 0.8), (0.28, 0.96), (1.0, 0.0), 13);
                run_experiment(&experiment(config, 3, dir.into())).unwrap();
                (
                    strip_wall_clock(&std::fs::read_to_string(dir.join("summary.json")).unwrap()),
                    std::fs::read_to_string(dir.join("trials.csv")).unwrap(),
                )
            };
            let first_dir = tempfile::tempdir().unwrap();
            let second_dir = tempfile::tempdir().unwrap();
            let (summary_one, trials_one) = run(first_dir.path());
            let (summary_two, trials_two) = run(second_dir.path());
            assert_eq!(
                summary_one, summary_two,
                "summary.json must be reproducible"
            );
            assert_eq!(trials_one, trials_two, "trials.csv must be reproducible");
            assert!(!trials_one.is_empty());
        },
    );
}
