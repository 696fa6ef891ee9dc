use super::{MeasBasis, Outcome, QubitId, Unitary2, NORM_TOLERANCE};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;

/// Complex amplitude of a basis state.
pub type Amplitude = Complex64;

/// Normalized pure state over an ordered register of labeled qubits.
///
/// Amplitude index bits follow the register order: the first qubit in
/// `qubits` is the most significant bit, |H> is 0 and |V> is 1.
#[derive(Debug, Clone)]
pub struct StateVector {
    qubits: Vec<QubitId>,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// Single-qubit state amp_h|H> + amp_v|V>.
    pub fn single(q: QubitId, amp_h: Amplitude, amp_v: Amplitude) -> Result<Self> {
        Self::from_amplitudes(vec![q], vec![amp_h, amp_v])
    }

    /// Single-qubit eigenstate of the given measurement outcome.
    pub fn basis_state(q: QubitId, outcome: Outcome) -> Self {
        let (h, v) = outcome.eigenstate();
        // Eigenstates are normalized by construction.
        StateVector {
            qubits: vec![q],
            amps: vec![h, v],
        }
    }

    /// The Bell state (|HH> + |VV>)/sqrt(2) over two fresh qubits.
    pub fn bell_phi_plus(id_a: QubitId, id_b: QubitId) -> Result<Self> {
        if id_a == id_b {
            return Err(Error::DuplicateQubit(id_a));
        }
        let r = Amplitude::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = Amplitude::new(0.0, 0.0);
        Ok(StateVector {
            qubits: vec![id_a, id_b],
            amps: vec![r, z, z, r],
        })
    }

    /// Build a state from explicit amplitudes, checking register sanity and
    /// normalization, then renormalizing exactly to absorb rounding.
    pub fn from_amplitudes(qubits: Vec<QubitId>, amps: Vec<Amplitude>) -> Result<Self> {
        for (i, q) in qubits.iter().enumerate() {
            if qubits[..i].contains(q) {
                return Err(Error::DuplicateQubit(*q));
            }
        }
        if amps.len() != 1usize << qubits.len() {
            return Err(Error::BadAmplitudeCount {
                got: amps.len(),
                qubits: qubits.len(),
            });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm });
        }
        let mut state = StateVector { qubits, amps };
        state.renormalize();
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn qubits(&self) -> &[QubitId] {
        &self.qubits
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    /// Amplitude of the basis state whose bits (H=0, V=1, first qubit most
    /// significant) form `index`.
    pub fn amplitude(&self, index: usize) -> Amplitude {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn contains(&self, q: QubitId) -> bool {
        self.qubits.contains(&q)
    }

    fn position_of(&self, q: QubitId) -> Result<usize> {
        self.qubits
            .iter()
            .position(|&x| x == q)
            .ok_or(Error::UnknownQubit(q))
    }

    /// Bit shift (from the least significant end) of qubit `q`.
    fn shift_of(&self, q: QubitId) -> Result<usize> {
        Ok(self.qubits.len() - 1 - self.position_of(q)?)
    }

    fn renormalize(&mut self) {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            let scale = Amplitude::new(1.0 / norm, 0.0);
            for a in &mut self.amps {
                *a *= scale;
            }
        }
    }

    /// Kronecker product; the result's register is `self`'s qubits followed
    /// by `other`'s. Label sets must be disjoint.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        for q in &other.qubits {
            if self.qubits.contains(q) {
                return Err(Error::DuplicateQubit(*q));
            }
        }
        let mut qubits = Vec::with_capacity(self.qubits.len() + other.qubits.len());
        qubits.extend_from_slice(&self.qubits);
        qubits.extend_from_slice(&other.qubits);
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector { qubits, amps })
    }

    /// Apply a single-qubit unitary to qubit `q` in place.
    pub fn apply_single_qubit(&mut self, q: QubitId, u: &Unitary2) -> Result<()> {
        let shift = self.shift_of(q)?;
        let stride = 1usize << shift;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let j = i | stride;
                let (a0, a1) = u.apply(self.amps[i], self.amps[j]);
                self.amps[i] = a0;
                self.amps[j] = a1;
            }
            base += 2 * stride;
        }
        Ok(())
    }

    /// Controlled register swap: basis states whose control bit is |V>
    /// have the `reg_a` and `reg_b` bit blocks exchanged; |H> components
    /// are untouched. Registers of equal length > 1 realize the
    /// higher-dimensional generalization.
    pub fn apply_fredkin(
        &mut self,
        control: QubitId,
        reg_a: &[QubitId],
        reg_b: &[QubitId],
    ) -> Result<()> {
        if reg_a.is_empty() || reg_a.len() != reg_b.len() {
            return Err(Error::RegisterLengthMismatch {
                len_a: reg_a.len(),
                len_b: reg_b.len(),
            });
        }
        let mut seen = vec![control];
        for &q in reg_a.iter().chain(reg_b) {
            if seen.contains(&q) {
                return Err(Error::OverlappingRegisters);
            }
            seen.push(q);
        }
        let control_shift = self.shift_of(control)?;
        let shifts_a: Vec<usize> = reg_a
            .iter()
            .map(|&q| self.shift_of(q))
            .collect::<Result<_>>()?;
        let shifts_b: Vec<usize> = reg_b
            .iter()
            .map(|&q| self.shift_of(q))
            .collect::<Result<_>>()?;

        for i in 0..self.amps.len() {
            if (i >> control_shift) & 1 == 0 {
                continue;
            }
            let mut j = i;
            for (&sa, &sb) in shifts_a.iter().zip(&shifts_b) {
                if (i >> sa) & 1 != (i >> sb) & 1 {
                    j ^= (1 << sa) | (1 << sb);
                }
            }
            if j > i {
                self.amps.swap(i, j);
            }
        }
        Ok(())
    }

    /// Probability that measuring `q` in the basis containing `target`
    /// (given as amplitudes of the target eigenstate) yields the target.
    /// Equals <t|rho_q|t> of the reduced state, i.e. the fidelity of the
    /// qubit's marginal with a pure single-qubit target.
    pub fn qubit_fidelity(
        &self,
        q: QubitId,
        target_h: Amplitude,
        target_v: Amplitude,
    ) -> Result<f64> {
        let shift = self.shift_of(q)?;
        let stride = 1usize << shift;
        let len = self.amps.len();
        let mut p = 0.0;
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let j = i | stride;
                let overlap = target_h.conj() * self.amps[i] + target_v.conj() * self.amps[j];
                p += overlap.norm_sqr();
            }
            base += 2 * stride;
        }
        Ok(p)
    }

    /// Born probability of `outcome` when measuring `q` in the outcome's
    /// own basis, without collapsing.
    pub fn outcome_probability(&self, q: QubitId, outcome: Outcome) -> Result<f64> {
        let (h, v) = outcome.eigenstate();
        self.qubit_fidelity(q, h, v)
    }

    /// Projectively measure qubit `q`. The outcome is sampled with Born
    /// probabilities from `rng`; the state collapses to the renormalized
    /// projection and the measured qubit stays in the register.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        q: QubitId,
        basis: MeasBasis,
        rng: &mut R,
    ) -> Result<Outcome> {
        if basis == MeasBasis::Diagonal {
            // Rotate {|+>,|->} onto {|H>,|V>}; hwp is self-inverse.
            self.apply_single_qubit(q, &Unitary2::hwp())?;
        }
        let shift = self.shift_of(q)?;
        let (mut p0, mut p1) = (0.0f64, 0.0f64);
        for (i, a) in self.amps.iter().enumerate() {
            if (i >> shift) & 1 == 0 {
                p0 += a.norm_sqr();
            } else {
                p1 += a.norm_sqr();
            }
        }
        let mut picked_v = rng.gen::<f64>() >= p0;
        // Rounding in p0 must never select a branch of exactly zero weight.
        if picked_v && p1 == 0.0 {
            picked_v = false;
        } else if !picked_v && p0 == 0.0 {
            picked_v = true;
        }
        for (i, a) in self.amps.iter_mut().enumerate() {
            if ((i >> shift) & 1 == 1) != picked_v {
                *a = Amplitude::new(0.0, 0.0);
            }
        }
        self.renormalize();
        if basis == MeasBasis::Diagonal {
            self.apply_single_qubit(q, &Unitary2::hwp())?;
            Ok(if picked_v {
                Outcome::Minus
            } else {
                Outcome::Plus
            })
        } else {
            Ok(if picked_v { Outcome::V } else { Outcome::H })
        }
    }

    /// <self|other> with conjugation on `self`; registers must carry the
    /// same labels in the same order.
    pub fn inner_product(&self, other: &StateVector) -> Result<Amplitude> {
        if self.qubits != other.qubits {
            return Err(Error::RegisterMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |<self|other>|^2; state equality up to global phase is fidelity 1.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner_product(other)?.norm_sqr())
    }

    /// Singular values (descending) of the amplitude array reshaped across
    /// the cut {q} | {rest}. A product state across the cut has the second
    /// value 0; entanglement makes it strictly positive.
    pub fn schmidt_values(&self, q: QubitId) -> Result<(f64, f64)> {
        let shift = self.shift_of(q)?;
        let stride = 1usize << shift;
        let len = self.amps.len();
        let (mut g00, mut g11) = (0.0f64, 0.0f64);
        let mut g01 = Amplitude::new(0.0, 0.0);
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let j = i | stride;
                g00 += self.amps[i].norm_sqr();
                g11 += self.amps[j].norm_sqr();
                g01 += self.amps[i] * self.amps[j].conj();
            }
            base += 2 * stride;
        }
        // Eigenvalues of the 2x2 Gram matrix [[g00, g01], [conj(g01), g11]].
        let trace = g00 + g11;
        let det = g00 * g11 - g01.norm_sqr();
        let disc = (trace * trace - 4.0 * det).max(0.0).sqrt();
        let l1 = ((trace + disc) / 2.0).max(0.0);
        let l2 = ((trace - disc) / 2.0).max(0.0);
        Ok((l1.sqrt(), l2.sqrt()))
    }
}
