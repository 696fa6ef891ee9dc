//! Experiment configuration: TOML schema, validation (reporting every
//! violation at once), defaults, and the canonical config hash.

use crate::error::{CliError, Result};
use bqml_core::channel::{AttackStrategy, BasisPolicy, ChannelModel, ChannelName};
use bqml_core::protocol::{ChannelSet, PolarizationVector, SessionConfig};
use bqml_core::quantum::Outcome;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const DEFAULT_CHECK_FRACTION: f64 = 0.5;
pub const DEFAULT_CI_LEVEL: f64 = 0.95;

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub session: SessionConfig,
    pub channels: ChannelSet,
    pub repetitions: usize,
    pub ci_level: f64,
    /// Where reports land; set from the command line, not the config file.
    pub output_dir: PathBuf,
    pub emit_transcript: bool,
}

impl ExperimentConfig {
    /// Hash of the run-defining content (session, channels, repetitions,
    /// confidence level). Output location and transcript emission do not
    /// change the science, so they are excluded.
    pub fn config_hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            session: &'a SessionConfig,
            channels: &'a ChannelSet,
            repetitions: usize,
            ci_level: f64,
        }
        let canonical = serde_json::to_vec(&Hashed {
            session: &self.session,
            channels: &self.channels,
            repetitions: self.repetitions,
            ci_level: self.ci_level,
        })
        .expect("config serialization cannot fail");
        let digest = Sha256::digest(&canonical);
        let mut hex = String::with_capacity(64);
        for byte in digest {
            write!(hex, "{byte:02x}").unwrap();
        }
        hex
    }
}

// --- raw TOML schema -------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    session: RawSession,
    vectors: RawVectors,
    #[serde(default)]
    channels: BTreeMap<String, RawChannel>,
    #[serde(default)]
    report: RawReport,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSession {
    shots: u64,
    n_pairs_per_source: Option<u64>,
    check_fraction: Option<f64>,
    check_threshold: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVectors {
    u: RawVector,
    v_a: RawVector,
    v_b: RawVector,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVector {
    alpha: f64,
    beta: f64,
    magnitude: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    attack: String,
    basis_policy: Option<String>,
    replacement: Option<String>,
    p: Option<f64>,
    loss_p: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReport {
    ci_level: Option<f64>,
    repetitions: Option<u64>,
}

// --- parsing and validation ------------------------------------------------

/// Read and validate a config file, filling documented defaults. Every
/// validation violation is reported, not just the first.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let mut violations = Vec::new();

    let check_fraction = raw.session.check_fraction.unwrap_or(DEFAULT_CHECK_FRACTION);
    if !(check_fraction > 0.0 && check_fraction <= 1.0) {
        violations.push(format!(
            "session.check_fraction: {check_fraction} outside (0, 1]"
        ));
    }
    let check_threshold = raw.session.check_threshold.unwrap_or(0.0);
    if !(0.0..=1.0).contains(&check_threshold) {
        violations.push(format!(
            "session.check_threshold: {check_threshold} outside [0, 1]"
        ));
    }
    let shots = raw.session.shots as usize;
    if shots == 0 {
        violations.push("session.shots: must be positive".into());
    }

    let n_pairs_per_source = match raw.session.n_pairs_per_source {
        Some(n) => n as usize,
        None => match derive_pair_count(shots, check_fraction) {
            Some(n) => n,
            None => {
                violations.push(
                    "session.n_pairs_per_source: cannot be derived because check_fraction \
                     leaves no message pairs; set it explicitly"
                        .into(),
                );
                0
            }
        },
    };

    let u = resolve_vector(&raw.vectors.u, "vectors.u", &mut violations);
    let v_a = resolve_vector(&raw.vectors.v_a, "vectors.v_a", &mut violations);
    let v_b = resolve_vector(&raw.vectors.v_b, "vectors.v_b", &mut violations);

    let mut channels = ChannelSet::honest();
    for (name, raw_channel) in &raw.channels {
        let Ok(channel_name) = name.parse::<ChannelName>() else {
            violations.push(format!(
                "channels.{name}: unknown channel (expected one of C_a1b1, C_a2b2, C_a3b3, C_a4b4)"
            ));
            continue;
        };
        if let Some(model) = resolve_channel(channel_name, raw_channel, &mut violations) {
            channels.set(model);
        }
    }

    let ci_level = raw.report.ci_level.unwrap_or(DEFAULT_CI_LEVEL);
    if !(ci_level > 0.0 && ci_level < 1.0) {
        violations.push(format!("report.ci_level: {ci_level} outside (0, 1)"));
    }
    let repetitions = raw.report.repetitions.unwrap_or(1) as usize;
    if repetitions == 0 {
        violations.push("report.repetitions: must be positive".into());
    }

    let session = SessionConfig {
        n_pairs_per_source,
        check_fraction,
        u,
        v_a,
        v_b,
        shots,
        check_threshold,
        seed: raw.session.seed.unwrap_or(0),
    };
    if violations.is_empty() {
        // Cross-field checks the core performs (e.g. shots vs message pairs).
        if let Err(e) = session.validate() {
            violations.push(format!("session: {e}"));
        }
    }
    if !violations.is_empty() {
        return Err(CliError::Validation(violations));
    }

    Ok(ExperimentConfig {
        session,
        channels,
        repetitions,
        ci_level,
        output_dir: PathBuf::from("bqml-report"),
        emit_transcript: false,
    })
}

/// Smallest per-source pair count whose message group covers `shots`.
fn derive_pair_count(shots: usize, check_fraction: f64) -> Option<usize> {
    if !(check_fraction > 0.0 && check_fraction < 1.0) || shots == 0 {
        return if check_fraction == 1.0 { None } else { Some(1) };
    }
    let mut candidate = ((shots as f64 / (1.0 - check_fraction)).ceil() as usize).max(1);
    loop {
        let checking = ((check_fraction * candidate as f64).ceil() as usize).min(candidate);
        if candidate - checking >= shots {
            return Some(candidate);
        }
        candidate += 1;
    }
}

fn resolve_vector(raw: &RawVector, key: &str, violations: &mut Vec<String>) -> PolarizationVector {
    let magnitude = raw.magnitude.unwrap_or(1.0);
    match PolarizationVector::new(raw.alpha, raw.beta, magnitude) {
        Ok(v) => v,
        Err(e) => {
            violations.push(format!("{key}: {e}"));
            PolarizationVector {
                alpha: 1.0,
                beta: 0.0,
                magnitude: 1.0,
            }
        }
    }
}

fn resolve_channel(
    name: ChannelName,
    raw: &RawChannel,
    violations: &mut Vec<String>,
) -> Option<ChannelModel> {
    let mut complain_unused = |field: &str, used_by: &str| {
        violations.push(format!(
            "channels.{name}.{field}: only applies to {used_by} attacks"
        ));
    };
    let attack = match raw.attack.as_str() {
        "none" => {
            if raw.basis_policy.is_some() {
                complain_unused("basis_policy", "intercept_resend");
            }
            if raw.replacement.is_some() {
                complain_unused("replacement", "fake_photon");
            }
            if raw.p.is_some() {
                complain_unused("p", "depolarize");
            }
            AttackStrategy::NoAttack
        }
        "intercept_resend" => {
            if raw.replacement.is_some() {
                complain_unused("replacement", "fake_photon");
            }
            if raw.p.is_some() {
                complain_unused("p", "depolarize");
            }
            let policy = match raw.basis_policy.as_deref() {
                None | Some("random_uniform") => BasisPolicy::RandomUniform,
                Some("fixed_computational") => BasisPolicy::FixedComputational,
                Some("fixed_diagonal") => BasisPolicy::FixedDiagonal,
                Some(other) => {
                    violations.push(format!(
                        "channels.{name}.basis_policy: unknown policy {other:?}"
                    ));
                    BasisPolicy::RandomUniform
                }
            };
            AttackStrategy::InterceptResend {
                basis_policy: policy,
            }
        }
        "fake_photon" => {
            if raw.basis_policy.is_some() {
                complain_unused("basis_policy", "intercept_resend");
            }
            if raw.p.is_some() {
                complain_unused("p", "depolarize");
            }
            let replacement = match raw.replacement.as_deref() {
                None | Some("H") => Outcome::H,
                Some("V") => Outcome::V,
                Some("Plus") => Outcome::Plus,
                Some("Minus") => Outcome::Minus,
                Some(other) => {
                    violations.push(format!(
                        "channels.{name}.replacement: unknown state {other:?} (expected H, V, Plus, or Minus)"
                    ));
                    Outcome::H
                }
            };
            AttackStrategy::FakePhoton { replacement }
        }
        "depolarize" => {
            if raw.basis_policy.is_some() {
                complain_unused("basis_policy", "intercept_resend");
            }
            if raw.replacement.is_some() {
                complain_unused("replacement", "fake_photon");
            }
            match raw.p {
                Some(p) if p.is_finite() && (0.0..=1.0).contains(&p) => {
                    AttackStrategy::Depolarize { p }
                }
                Some(p) => {
                    violations.push(format!("channels.{name}.p: {p} outside [0, 1]"));
                    return None;
                }
                None => {
                    violations.push(format!(
                        "channels.{name}.p: required for the depolarize attack"
                    ));
                    return None;
                }
            }
        }
        other => {
            violations.push(format!(
                "channels.{name}.attack: unknown attack {other:?} (expected none, intercept_resend, fake_photon, or depolarize)"
            ));
            return None;
        }
    };
    let loss_p = raw.loss_p.unwrap_or(0.0);
    if !loss_p.is_finite() || !(0.0..=1.0).contains(&loss_p) {
        violations.push(format!("channels.{name}.loss_p: {loss_p} outside [0, 1]"));
        return None;
    }
    Some(ChannelModel {
        name,
        attack,
        loss_p,
    })
}
