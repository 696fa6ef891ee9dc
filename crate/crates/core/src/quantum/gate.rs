use super::{Amplitude, NORM_TOLERANCE};
use crate::error::{Error, Result};

/// A 2x2 unitary acting on one polarization qubit, verified at construction.
///
/// Entry `m[r][c]` is the coefficient of basis state `r` in the image of
/// basis state `c`, so the first column is the image of |H> and the second
/// the image of |V>.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    m: [[Amplitude; 2]; 2],
}

impl Unitary2 {
    /// Build a unitary from row-major entries, rejecting matrices whose
    /// U†U deviates from the identity by more than the norm tolerance.
    pub fn new(m00: Amplitude, m01: Amplitude, m10: Amplitude, m11: Amplitude) -> Result<Self> {
        let u = Unitary2 {
            m: [[m00, m01], [m10, m11]],
        };
        let dev = u.unitarity_deviation();
        if !dev.is_finite() || dev > NORM_TOLERANCE {
            return Err(Error::NotUnitary { deviation: dev });
        }
        Ok(u)
    }

    /// Max-entry deviation of U†U from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                // (U†U)[r][c] = sum_k conj(m[k][r]) * m[k][c]
                let mut e = Amplitude::new(0.0, 0.0);
                for k in 0..2 {
                    e += self.m[k][r].conj() * self.m[k][c];
                }
                let target = if r == c { 1.0 } else { 0.0 };
                dev = dev.max((e - target).norm());
            }
        }
        dev
    }

    pub fn identity() -> Self {
        let o = Amplitude::new(1.0, 0.0);
        let z = Amplitude::new(0.0, 0.0);
        Unitary2 {
            m: [[o, z], [z, o]],
        }
    }

    /// Half-wave plate: |H> -> (|H>+|V>)/sqrt(2), |V> -> (|H>-|V>)/sqrt(2).
    pub fn hwp() -> Self {
        let r = Amplitude::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Unitary2 {
            m: [[r, r], [r, -r]],
        }
    }

    /// Bit flip: |H><V| + |V><H|.
    pub fn pauli_x() -> Self {
        let o = Amplitude::new(1.0, 0.0);
        let z = Amplitude::new(0.0, 0.0);
        Unitary2 {
            m: [[z, o], [o, z]],
        }
    }

    pub fn pauli_y() -> Self {
        let i = Amplitude::new(0.0, 1.0);
        let z = Amplitude::new(0.0, 0.0);
        Unitary2 {
            m: [[z, -i], [i, z]],
        }
    }

    /// Phase flip: |H><H| - |V><V|.
    pub fn pauli_z() -> Self {
        let o = Amplitude::new(1.0, 0.0);
        let z = Amplitude::new(0.0, 0.0);
        Unitary2 {
            m: [[o, z], [z, -o]],
        }
    }

    /// Polarization rotation mapping |H> -> alpha|H> + beta|V> and
    /// |V> -> beta|H> - alpha|V>, for real parameters with
    /// alpha^2 + beta^2 = 1. The matrix is symmetric and self-inverse.
    pub fn rotation(alpha: f64, beta: f64) -> Result<Self> {
        let norm = alpha * alpha + beta * beta;
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::BadRotation { norm });
        }
        let a = Amplitude::new(alpha, 0.0);
        let b = Amplitude::new(beta, 0.0);
        Ok(Unitary2 {
            m: [[a, b], [b, -a]],
        })
    }

    /// Image of the single-qubit state (a_H, a_V).
    pub fn apply(&self, amp_h: Amplitude, amp_v: Amplitude) -> (Amplitude, Amplitude) {
        (
            self.m[0][0] * amp_h + self.m[0][1] * amp_v,
            self.m[1][0] * amp_h + self.m[1][1] * amp_v,
        )
    }

    pub fn entries(&self) -> [[Amplitude; 2]; 2] {
        self.m
    }
}
