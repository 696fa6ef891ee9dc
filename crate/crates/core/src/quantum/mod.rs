//! Pure-state quantum simulation: labeled qubit registers, 2x2 unitaries,
//! a generalized controlled-SWAP, and projective measurement with Born-rule
//! collapse.
//!
//! Basis convention, fixed for bit-exact transcripts: |H> is 0, |V> is 1,
//! and the first qubit listed in a register is the most significant bit of
//! the amplitude index.

mod gate;
mod state;

pub use gate::Unitary2;
pub use state::{Amplitude, StateVector};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Numerical tolerance for normalization and unitarity invariants.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Opaque qubit label, unique within a register (and within a session).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubitId(u32);

impl QubitId {
    pub const fn new(raw: u32) -> Self {
        QubitId(raw)
    }

    pub const fn raw(self) -> u32 {
        self.0
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Measurement basis for a single polarization qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasBasis {
    /// {|H>, |V>}
    Computational,
    /// {|+>, |->} with |+-> = (|H> +- |V>)/sqrt(2)
    Diagonal,
}

/// Result of a single-qubit projective measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    H,
    V,
    Plus,
    Minus,
}

impl Outcome {
    /// The basis this outcome belongs to.
    pub fn basis(self) -> MeasBasis {
        match self {
            Outcome::H | Outcome::V => MeasBasis::Computational,
            Outcome::Plus | Outcome::Minus => MeasBasis::Diagonal,
        }
    }

    /// Eigenstate amplitudes (a_H, a_V) of the outcome's projector.
    pub fn eigenstate(self) -> (Amplitude, Amplitude) {
        use std::f64::consts::FRAC_1_SQRT_2;
        let one = Amplitude::new(1.0, 0.0);
        let zero = Amplitude::new(0.0, 0.0);
        let r = Amplitude::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Outcome::H => (one, zero),
            Outcome::V => (zero, one),
            Outcome::Plus => (r, r),
            Outcome::Minus => (r, -r),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::H => "H",
            Outcome::V => "V",
            Outcome::Plus => "+",
            Outcome::Minus => "-",
        };
        f.write_str(s)
    }
}
