use crate::channel::ChannelName;
use crate::error::{Error, Result};
use crate::quantum::{Amplitude, QubitId, StateVector, Unitary2, NORM_TOLERANCE};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Classical description of a vector to be encoded as a polarization
/// qubit: direction amplitudes (alpha, beta) plus the classical length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationVector {
    pub alpha: f64,
    pub beta: f64,
    pub magnitude: f64,
}

impl PolarizationVector {
    pub fn new(alpha: f64, beta: f64, magnitude: f64) -> Result<Self> {
        let v = PolarizationVector {
            alpha,
            beta,
            magnitude,
        };
        v.validate()?;
        Ok(v)
    }

    /// Unit-length vector (magnitude 1).
    pub fn unit(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(alpha, beta, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.alpha * self.alpha + self.beta * self.beta;
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Config(format!(
                "vector amplitudes not normalized: alpha^2 + beta^2 = {norm}"
            )));
        }
        if !self.magnitude.is_finite() || self.magnitude < 0.0 {
            return Err(Error::Config(format!(
                "vector magnitude {} must be finite and nonnegative",
                self.magnitude
            )));
        }
        Ok(())
    }

    /// The rotation taking |H> to this vector's qubit state.
    pub fn rotation(&self) -> Result<Unitary2> {
        Unitary2::rotation(self.alpha, self.beta)
    }

    /// The encoded single-qubit state alpha|H> + beta|V> on qubit `q`.
    pub fn state_on(&self, q: QubitId) -> Result<StateVector> {
        StateVector::single(
            q,
            Amplitude::new(self.alpha, 0.0),
            Amplitude::new(self.beta, 0.0),
        )
    }
}

/// The two entanglement sources feeding the protocol channels plus the
/// target-state source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    S1,
    S2,
    S3,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::S1, Source::S2, Source::S3];

    pub fn index(self) -> usize {
        match self {
            Source::S1 => 0,
            Source::S2 => 1,
            Source::S3 => 2,
        }
    }

    /// The channel carrying this source's Alice-bound halves.
    pub fn channel(self) -> ChannelName {
        match self {
            Source::S1 => ChannelName::Ca1b1,
            Source::S2 => ChannelName::Ca2b2,
            Source::S3 => ChannelName::Ca3b3,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Source::S1 => "S1",
            Source::S2 => "S2",
            Source::S3 => "S3",
        };
        f.write_str(s)
    }
}

/// Which reference vector a trial compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reference {
    A,
    B,
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reference::A => "A",
            Reference::B => "B",
        })
    }
}

/// Per-session parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Pairs prepared per source (the protocol's 2N), split between the
    /// checking group and the message group.
    pub n_pairs_per_source: usize,
    /// Fraction of each source's pairs sacrificed to eavesdrop checking.
    pub check_fraction: f64,
    /// The vector to classify.
    pub u: PolarizationVector,
    /// Reference vector of cluster A.
    pub v_a: PolarizationVector,
    /// Reference vector of cluster B.
    pub v_b: PolarizationVector,
    /// Total number of controlled-swap trials; references alternate, so
    /// each receives shots/2.
    pub shots: usize,
    /// Maximum tolerated mismatch (or step-5 failure) rate before abort.
    pub check_threshold: f64,
    pub seed: u64,
}

impl SessionConfig {
    /// Pairs per source consumed by eavesdrop checking.
    pub fn checking_pairs(&self) -> usize {
        ((self.check_fraction * self.n_pairs_per_source as f64).ceil() as usize)
            .min(self.n_pairs_per_source)
    }

    /// Pairs per source left for the protocol proper.
    pub fn message_pairs(&self) -> usize {
        self.n_pairs_per_source - self.checking_pairs()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pairs_per_source == 0 {
            return Err(Error::Config("n_pairs_per_source must be positive".into()));
        }
        if !(self.check_fraction > 0.0 && self.check_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "check_fraction {} outside (0, 1]",
                self.check_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.check_threshold) || !self.check_threshold.is_finite() {
            return Err(Error::Config(format!(
                "check_threshold {} outside [0, 1]",
                self.check_threshold
            )));
        }
        if self.shots == 0 {
            return Err(Error::Config("shots must be positive".into()));
        }
        if self.shots > self.message_pairs() {
            return Err(Error::Config(format!(
                "shots {} exceed the {} message pairs left after checking-group consumption",
                self.shots,
                self.message_pairs()
            )));
        }
        self.u.validate()?;
        self.v_a.validate()?;
        self.v_b.validate()?;
        Ok(())
    }

    pub fn reference_vector(&self, reference: Reference) -> PolarizationVector {
        match reference {
            Reference::A => self.v_a,
            Reference::B => self.v_b,
        }
    }
}

/// Knobs that are not part of the protocol contract: estimation level,
/// transcript recording, and whether the server keeps post-swap target
/// qubits around for the returned-reference honesty check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionOptions {
    pub ci_level: f64,
    pub tie_epsilon: f64,
    pub record_transcript: bool,
    pub retain_targets: bool,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            ci_level: 0.95,
            tie_epsilon: crate::estimator::DEFAULT_TIE_EPSILON,
            record_transcript: false,
            retain_targets: false,
        }
    }
}
