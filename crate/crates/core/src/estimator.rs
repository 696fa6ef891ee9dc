//! Turns trial statistics into overlap, distance, and cluster assignment,
//! with binomial score intervals on the flip frequency.

use crate::error::{Error, Result};
use crate::protocol::{Reference, TrialKind, TrialOutcome};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Default width below which two distances count as a tie.
pub const DEFAULT_TIE_EPSILON: f64 = 1e-9;

/// Flip-frequency estimate for one reference, with the overlap magnitude
/// it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapEstimate {
    /// Observed flip frequency among diagonal-control trials.
    pub p_minus_hat: f64,
    /// Number of diagonal-control trials behind the estimate.
    pub n_diag: u64,
    /// sqrt(max(0, 1 - 2 p_minus_hat)), the estimated |<u|v>|.
    pub overlap_mag: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Distance reconstructed from classical magnitudes and the overlap
/// estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub d: f64,
    pub components: DistanceComponents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceComponents {
    pub mag_u: f64,
    pub mag_v: f64,
    pub overlap_mag: f64,
    /// Set when rounding produced a negative radicand that was clamped to 0.
    pub radicand_clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterChoice {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub chosen: ClusterChoice,
    pub d_a: DistanceEstimate,
    pub d_b: DistanceEstimate,
    pub margin: f64,
}

/// Wilson score interval for a binomial proportion. Stays inside [0, 1]
/// and behaves at observed frequencies of exactly 0 or 1.
pub fn score_interval(successes: u64, n: u64, level: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("interval needs n >= 1".into()));
    }
    if successes > n {
        return Err(Error::InvalidArgument(format!(
            "successes {successes} exceed trials {n}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z = normal.inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let nf = n as f64;
    let p_hat = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p_hat + z2 / (2.0 * nf)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // The exact endpoints at the boundaries; rounding must not move them.
    let low = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let high = if successes == n {
        1.0
    } else {
        (center + half).min(1.0)
    };
    Ok((low, high))
}

/// Flip-frequency and overlap estimate over the diagonal-control trials of
/// one reference. Security-check trials in the list are ignored.
pub fn estimate_flip_probability(
    trials: &[TrialOutcome],
    reference: Reference,
    level: f64,
) -> Result<OverlapEstimate> {
    let mut flips = 0u64;
    let mut n = 0u64;
    for t in trials {
        if t.reference != reference {
            continue;
        }
        match t.kind {
            TrialKind::Flip => {
                flips += 1;
                n += 1;
            }
            TrialKind::Same => n += 1,
            TrialKind::SecurityPass | TrialKind::SecurityFail => {}
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData(reference));
    }
    let p_minus_hat = flips as f64 / n as f64;
    let (ci_low, ci_high) = score_interval(flips, n, level)?;
    Ok(OverlapEstimate {
        p_minus_hat,
        n_diag: n,
        overlap_mag: overlap_from_flip_probability(p_minus_hat),
        ci_low,
        ci_high,
    })
}

/// sqrt(1 - 2 P-), clamped into [0, 1] when sampling noise pushes the flip
/// frequency past 1/2.
pub fn overlap_from_flip_probability(p_minus: f64) -> f64 {
    (1.0 - 2.0 * p_minus).max(0.0).sqrt().min(1.0)
}

/// Distance between the classical vectors from their magnitudes and the
/// overlap magnitude: d^2 = |u|^2 + |v|^2 - 2|u||v| * overlap.
pub fn distance(mag_u: f64, mag_v: f64, overlap_mag: f64) -> Result<DistanceEstimate> {
    if !(mag_u.is_finite() && mag_v.is_finite()) || mag_u < 0.0 || mag_v < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "magnitudes must be finite and nonnegative, got ({mag_u}, {mag_v})"
        )));
    }
    if !overlap_mag.is_finite() || !(0.0..=1.0).contains(&overlap_mag) {
        return Err(Error::InvalidArgument(format!(
            "overlap magnitude {overlap_mag} outside [0, 1]"
        )));
    }
    let radicand = mag_u * mag_u + mag_v * mag_v - 2.0 * mag_u * mag_v * overlap_mag;
    let clamped = radicand < 0.0;
    let d = radicand.max(0.0).sqrt();
    Ok(DistanceEstimate {
        d,
        components: DistanceComponents {
            mag_u,
            mag_v,
            overlap_mag,
            radicand_clamped: clamped,
        },
    })
}

/// Assign to the cluster with the smaller distance; distances within
/// `tie_epsilon` of each other are a tie.
pub fn assign_cluster(
    d_a: &DistanceEstimate,
    d_b: &DistanceEstimate,
    tie_epsilon: f64,
) -> ClusterAssignment {
    let margin = (d_a.d - d_b.d).abs();
    let chosen = if margin <= tie_epsilon {
        ClusterChoice::Tie
    } else if d_a.d < d_b.d {
        ClusterChoice::A
    } else {
        ClusterChoice::B
    };
    ClusterAssignment {
        chosen,
        d_a: *d_a,
        d_b: *d_b,
        margin,
    }
}
