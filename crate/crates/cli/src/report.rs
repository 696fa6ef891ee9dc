//! Seeded experiment orchestration and report emission: runs repetitions
//! (in parallel, aggregated in repetition order), then writes
//! `summary.json`, `trials.csv`, and optionally `transcript.jsonl`.

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use bqml_core::channel::ChannelName;
use bqml_core::estimator::ClusterChoice;
use bqml_core::protocol::{Reference, SequencedMessage, Session, SessionOptions, SessionResult};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceAggregate {
    pub p_minus_hat_mean: Option<f64>,
    pub p_minus_hat_std: Option<f64>,
    pub overlap_mag_mean: Option<f64>,
    pub distance_mean: Option<f64>,
    pub ci_level: f64,
    pub ci_low_mean: Option<f64>,
    pub ci_high_mean: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerReference {
    #[serde(rename = "A")]
    pub a: ReferenceAggregate,
    #[serde(rename = "B")]
    pub b: ReferenceAggregate,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssignmentHistogram {
    #[serde(rename = "A")]
    pub a: usize,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "Tie")]
    pub tie: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelSecurity {
    pub checked: usize,
    pub mismatches: usize,
    pub security_fail_count: usize,
}

/// The `summary.json` payload; field order is the file's key order.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config_hash: String,
    pub repetitions: usize,
    pub aborted_count: usize,
    pub per_reference: PerReference,
    pub assignment_histogram: AssignmentHistogram,
    pub security: BTreeMap<String, ChannelSecurity>,
    pub wall_clock_s: f64,
}

#[derive(Debug)]
pub struct RunReport {
    pub summary: Summary,
    pub sessions: Vec<SessionResult>,
}

/// Run every repetition (seed + index), aggregate in repetition order,
/// and write the report files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    let options = SessionOptions {
        ci_level: config.ci_level,
        record_transcript: config.emit_transcript,
        ..SessionOptions::default()
    };
    let sessions: Vec<SessionResult> = (0..config.repetitions)
        .into_par_iter()
        .map(|repetition| {
            let mut session_config = config.session.clone();
            session_config.seed = config.session.seed.wrapping_add(repetition as u64);
            let mut session =
                Session::with_options(session_config, config.channels.clone(), options)?;
            session.run()
        })
        .collect::<bqml_core::Result<_>>()?;

    let summary = aggregate(config, &sessions, started.elapsed().as_secs_f64());
    let report = RunReport { summary, sessions };
    emit_report(&report, config, &config.output_dir)?;
    Ok(report)
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Population standard deviation; a single repetition reports 0.
fn std_dev(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(var.sqrt())
}

fn reference_aggregate(
    sessions: &[SessionResult],
    reference: Reference,
    ci_level: f64,
) -> ReferenceAggregate {
    let mut p_hats = Vec::new();
    let mut overlaps = Vec::new();
    let mut distances = Vec::new();
    let mut ci_lows = Vec::new();
    let mut ci_highs = Vec::new();
    for session in sessions {
        if let Some(est) = &session.estimates {
            let r = match reference {
                Reference::A => &est.reference_a,
                Reference::B => &est.reference_b,
            };
            p_hats.push(r.overlap.p_minus_hat);
            overlaps.push(r.overlap.overlap_mag);
            distances.push(r.distance.d);
            ci_lows.push(r.overlap.ci_low);
            ci_highs.push(r.overlap.ci_high);
        }
    }
    ReferenceAggregate {
        p_minus_hat_mean: mean(&p_hats),
        p_minus_hat_std: std_dev(&p_hats),
        overlap_mag_mean: mean(&overlaps),
        distance_mean: mean(&distances),
        ci_level,
        ci_low_mean: mean(&ci_lows),
        ci_high_mean: mean(&ci_highs),
    }
}

fn aggregate(config: &ExperimentConfig, sessions: &[SessionResult], wall_clock_s: f64) -> Summary {
    let aborted_count = sessions.iter().filter(|s| s.is_aborted()).count();

    let mut histogram = AssignmentHistogram { a: 0, b: 0, tie: 0 };
    for session in sessions {
        if let Some(est) = &session.estimates {
            match est.assignment.chosen {
                ClusterChoice::A => histogram.a += 1,
                ClusterChoice::B => histogram.b += 1,
                ClusterChoice::Tie => histogram.tie += 1,
            }
        }
    }

    let mut security = BTreeMap::new();
    for name in ChannelName::ALL {
        security.insert(
            name.to_string(),
            ChannelSecurity {
                checked: 0,
                mismatches: 0,
                security_fail_count: 0,
            },
        );
    }
    for session in sessions {
        for report in &session.check_reports {
            let entry = security.get_mut(report.channel.as_str()).unwrap();
            entry.checked += report.checked;
            entry.mismatches += report.mismatches;
        }
        // Step-5 failures surface on the return channel.
        security
            .get_mut(ChannelName::Ca4b4.as_str())
            .unwrap()
            .security_fail_count += session.security_fail_count();
    }

    Summary {
        config_hash: config.config_hash(),
        repetitions: sessions.len(),
        aborted_count,
        per_reference: PerReference {
            a: reference_aggregate(sessions, Reference::A, config.ci_level),
            b: reference_aggregate(sessions, Reference::B, config.ci_level),
        },
        assignment_histogram: histogram,
        security,
        wall_clock_s,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `summary.json` and `trials.csv` (plus `transcript.jsonl` when
/// transcripts were recorded) into `dir`, returning the files written.
pub fn emit_report(
    report: &RunReport,
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let summary_path = dir.join("summary.json");
    let mut payload =
        serde_json::to_string_pretty(&report.summary).expect("summary serialization cannot fail");
    payload.push('\n');
    std::fs::write(&summary_path, payload).map_err(io_err(&summary_path))?;
    written.push(summary_path);

    let trials_path = dir.join("trials.csv");
    write_trials_csv(report, &trials_path)?;
    written.push(trials_path);

    if config.emit_transcript {
        let transcript_path = dir.join("transcript.jsonl");
        write_transcript(report, &transcript_path)?;
        written.push(transcript_path);
    }
    Ok(written)
}

fn write_trials_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Config(format!("csv: {other:?}")),
    })?;
    writer
        .write_record([
            "repetition",
            "pair_index",
            "reference",
            "control_basis",
            "outcome_kind",
            "discarded_loss",
        ])
        .map_err(|e| csv_io(path, e))?;

    for (repetition, session) in report.sessions.iter().enumerate() {
        // Completed and discarded attempts, in pair order.
        let mut rows: Vec<(usize, [String; 6])> =
            Vec::with_capacity(session.trials.len() + session.discarded.len());
        for trial in &session.trials {
            rows.push((
                trial.pair_index,
                [
                    repetition.to_string(),
                    trial.pair_index.to_string(),
                    trial.reference.to_string(),
                    basis_label(trial.control_basis()).to_string(),
                    trial.kind.as_str().to_string(),
                    "false".to_string(),
                ],
            ));
        }
        for discard in &session.discarded {
            rows.push((
                discard.pair_index,
                [
                    repetition.to_string(),
                    discard.pair_index.to_string(),
                    discard.reference.to_string(),
                    discard
                        .control_basis
                        .map(|b| basis_label(b).to_string())
                        .unwrap_or_default(),
                    "Discarded".to_string(),
                    "true".to_string(),
                ],
            ));
        }
        rows.sort_by_key(|(pair_index, _)| *pair_index);
        for (_, row) in rows {
            writer.write_record(&row).map_err(|e| csv_io(path, e))?;
        }
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

fn basis_label(basis: bqml_core::quantum::MeasBasis) -> &'static str {
    match basis {
        bqml_core::quantum::MeasBasis::Computational => "Computational",
        bqml_core::quantum::MeasBasis::Diagonal => "Diagonal",
    }
}

fn csv_io(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Config(format!("csv: {other:?}")),
    }
}

#[derive(Serialize)]
struct TranscriptRow<'a> {
    repetition: usize,
    #[serde(flatten)]
    message: &'a SequencedMessage,
}

fn write_transcript(report: &RunReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut out = std::io::BufWriter::new(file);
    for (repetition, session) in report.sessions.iter().enumerate() {
        for message in &session.transcript {
            let line = serde_json::to_string(&TranscriptRow {
                repetition,
                message,
            })
            .expect("transcript serialization cannot fail");
            writeln!(out, "{line}").map_err(io_err(path))?;
        }
    }
    out.flush().map_err(io_err(path))?;
    Ok(())
}
