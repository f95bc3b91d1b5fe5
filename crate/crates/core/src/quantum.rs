//! Dense pure-state simulation of small qubit registers.
//!
//! Qubit 0 is the leftmost tensor factor and the most significant bit of a
//! computational basis label, so `|q0 q1 q2⟩` lives at index `q0·4 + q1·2 + q2`.

use num_complex::Complex64;
use thiserror::Error;

/// Complex amplitude of a computational basis state.
pub type Amplitude = Complex64;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 4;

/// Tolerance for algebraic identities (norms, unitarity, orthonormality).
pub const ALGEBRAIC_TOL: f64 = 1e-12;

/// Outcomes with probability below this are never selected when sampling.
pub const IMPOSSIBLE_PROB: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("degenerate state: amplitudes have zero norm")]
    DegenerateState,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("register too large: {0} qubits exceeds the limit of {MAX_QUBITS}")]
    RegisterTooLarge(usize),
    #[error("qubit index {index} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { index: usize, num_qubits: usize },
    #[error("measured qubits must be distinct, got ({0}, {0})")]
    QubitCollision(usize),
    #[error("amplitude is not finite")]
    NonFinite,
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("basis is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("impossible outcome {outcome}: probability {probability:e}")]
    ImpossibleOutcome { outcome: usize, probability: f64 },
}

pub type Result<T> = std::result::Result<T, QuantumError>;

/// Normalized pure state of a register of one to four qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Amplitude>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, dividing by their norm.
    pub fn new(num_qubits: usize, amplitudes: Vec<Amplitude>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(QuantumError::RegisterTooLarge(num_qubits));
        }
        let expected = 1usize << num_qubits;
        if amplitudes.len() != expected {
            return Err(QuantumError::DimensionMismatch {
                expected,
                got: amplitudes.len(),
            });
        }
        if amplitudes
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(QuantumError::NonFinite);
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QuantumError::DegenerateState);
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / norm).collect();
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Convenience constructor for real amplitudes.
    pub fn from_real(num_qubits: usize, amplitudes: &[f64]) -> Result<Self> {
        Self::new(
            num_qubits,
            amplitudes.iter().map(|&a| Amplitude::new(a, 0.0)).collect(),
        )
    }

    /// Computational basis state `|label⟩`.
    pub fn basis(num_qubits: usize, label: usize) -> Result<Self> {
        let dim = 1usize << num_qubits.min(MAX_QUBITS + 1);
        let mut amps = vec![Amplitude::new(0.0, 0.0); dim];
        if label < dim {
            amps[label] = Amplitude::new(1.0, 0.0);
        }
        Self::new(num_qubits, amps)
    }

    /// `|+⟩` for `bit = 0`, `|−⟩` for `bit = 1`.
    pub fn x_eigenstate(bit: u8) -> Self {
        let s = if bit == 0 { 1.0 } else { -1.0 };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            num_qubits: 1,
            amplitudes: vec![Amplitude::new(h, 0.0), Amplitude::new(s * h, 0.0)],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = Amplitude::from_polar(1.0, theta);
        Self {
            num_qubits: self.num_qubits,
            amplitudes: self.amplitudes.iter().map(|a| a * phase).collect(),
        }
    }

    /// Kronecker product with `self` in the leading positions.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let n = self.num_qubits + other.num_qubits;
        if n > MAX_QUBITS {
            return Err(QuantumError::RegisterTooLarge(n));
        }
        let mut amplitudes = Vec::with_capacity(1 << n);
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ok(StateVector {
            num_qubits: n,
            amplitudes,
        })
    }

    /// Applies `u` to qubit `qubit`.
    pub fn apply_single_qubit(&self, qubit: usize, u: &SingleQubitUnitary) -> Result<StateVector> {
        self.check_qubit(qubit)?;
        let shift = self.num_qubits - 1 - qubit;
        let mask = 1usize << shift;
        let m = &u.matrix;
        let mut out = self.amplitudes.clone();
        for idx in 0..self.dim() {
            if idx & mask != 0 {
                continue;
            }
            let a0 = self.amplitudes[idx];
            let a1 = self.amplitudes[idx | mask];
            out[idx] = m[0][0] * a0 + m[0][1] * a1;
            out[idx | mask] = m[1][0] * a0 + m[1][1] * a1;
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amplitudes: out,
        })
    }

    /// Born probabilities of projecting qubits `(i, j)` onto each element of `basis`.
    pub fn outcome_probabilities(&self, i: usize, j: usize, basis: &BasisFour) -> Result<[f64; 4]> {
        self.check_pair(i, j)?;
        let mut probs = [0.0; 4];
        for (k, p) in probs.iter_mut().enumerate() {
            *p = self
                .pair_overlap(i, j, &basis.elements[k])
                .iter()
                .map(|a| a.norm_sqr())
                .sum();
        }
        Ok(probs)
    }

    /// Samples a projective measurement of qubits `(i, j)` in `basis`.
    ///
    /// `draw` is compared against the cumulative distribution in basis order,
    /// skipping outcomes below [`IMPOSSIBLE_PROB`].
    pub fn project_pair(
        &self,
        i: usize,
        j: usize,
        basis: &BasisFour,
        draw: f64,
    ) -> Result<PairMeasurement> {
        let probs = self.outcome_probabilities(i, j, basis)?;
        let outcome = sample_index(&probs, draw);
        let collapsed = self.collapse_pair(i, j, basis, outcome)?;
        Ok(PairMeasurement {
            outcome,
            collapsed,
            probability: probs[outcome],
        })
    }

    /// Post-measurement state after projecting `(i, j)` onto `basis[outcome]`.
    pub fn collapse_pair(
        &self,
        i: usize,
        j: usize,
        basis: &BasisFour,
        outcome: usize,
    ) -> Result<StateVector> {
        self.check_pair(i, j)?;
        let element = &basis.elements[outcome.min(3)];
        let overlap = self.pair_overlap(i, j, element);
        let p: f64 = overlap.iter().map(|a| a.norm_sqr()).sum();
        if p < IMPOSSIBLE_PROB {
            return Err(QuantumError::ImpossibleOutcome {
                outcome,
                probability: p,
            });
        }
        let scale = 1.0 / p.sqrt();
        let (si, sj) = self.shifts(i, j);
        let mut amplitudes = vec![Amplitude::new(0.0, 0.0); self.dim()];
        for (idx, amp) in amplitudes.iter_mut().enumerate() {
            let ab = (((idx >> si) & 1) << 1) | ((idx >> sj) & 1);
            let rest = compress(idx, si, sj, self.num_qubits);
            *amp = element.amplitudes[ab] * overlap[rest] * scale;
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amplitudes,
        })
    }

    /// State of the remaining qubits after `(i, j)` were found in `element`.
    ///
    /// The remaining qubits keep their relative order. Fails on a two-qubit
    /// register since nothing would remain.
    pub fn residual_after_pair(
        &self,
        i: usize,
        j: usize,
        element: &StateVector,
    ) -> Result<StateVector> {
        self.check_pair(i, j)?;
        if element.num_qubits != 2 {
            return Err(QuantumError::DimensionMismatch {
                expected: 4,
                got: element.dim(),
            });
        }
        if self.num_qubits < 3 {
            return Err(QuantumError::RegisterTooLarge(self.num_qubits - 2));
        }
        let overlap = self.pair_overlap(i, j, element);
        let p: f64 = overlap.iter().map(|a| a.norm_sqr()).sum();
        if p < IMPOSSIBLE_PROB {
            return Err(QuantumError::ImpossibleOutcome {
                outcome: 0,
                probability: p,
            });
        }
        StateVector::new(self.num_qubits - 2, overlap)
    }

    /// Probabilities of `|+⟩` (index 0) and `|−⟩` (index 1) on `qubit`.
    pub fn x_probabilities(&self, qubit: usize) -> Result<[f64; 2]> {
        self.check_qubit(qubit)?;
        let mask = 1usize << (self.num_qubits - 1 - qubit);
        let (mut plus, mut minus) = (0.0, 0.0);
        // Group amplitudes by the value of the remaining qubits.
        for idx in 0..self.dim() {
            if idx & mask != 0 {
                continue;
            }
            let a0 = self.amplitudes[idx];
            let a1 = self.amplitudes[idx | mask];
            plus += (a0 + a1).norm_sqr() / 2.0;
            minus += (a0 - a1).norm_sqr() / 2.0;
        }
        Ok([plus, minus])
    }

    /// Measures `qubit` in the X basis; bit 0 is `|+⟩`, bit 1 is `|−⟩`.
    pub fn measure_x(&self, qubit: usize, draw: f64) -> Result<(u8, StateVector)> {
        let probs = self.x_probabilities(qubit)?;
        let bit = sample_index(&probs, draw) as u8;
        let mask = 1usize << (self.num_qubits - 1 - qubit);
        let sign = if bit == 0 { 1.0 } else { -1.0 };
        let mut amplitudes = vec![Amplitude::new(0.0, 0.0); self.dim()];
        for idx in 0..self.dim() {
            if idx & mask != 0 {
                continue;
            }
            let proj = (self.amplitudes[idx] + sign * self.amplitudes[idx | mask]) / 2.0;
            amplitudes[idx] = proj;
            amplitudes[idx | mask] = sign * proj;
        }
        Ok((bit, StateVector::new(self.num_qubits, amplitudes)?))
    }

    /// `|⟨a|b⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        if self.num_qubits != other.num_qubits {
            return Err(QuantumError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.inner(other).norm_sqr().min(1.0))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Amplitude {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn check_qubit(&self, index: usize) -> Result<()> {
        if index >= self.num_qubits {
            return Err(QuantumError::QubitOutOfRange {
                index,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(QuantumError::QubitCollision(i));
        }
        Ok(())
    }

    fn shifts(&self, i: usize, j: usize) -> (usize, usize) {
        (self.num_qubits - 1 - i, self.num_qubits - 1 - j)
    }

    /// Contracts qubits `(i, j)` with `⟨element|`, leaving an unnormalized
    /// vector over the other qubits.
    fn pair_overlap(&self, i: usize, j: usize, element: &StateVector) -> Vec<Amplitude> {
        let (si, sj) = self.shifts(i, j);
        let mut out = vec![Amplitude::new(0.0, 0.0); self.dim() >> 2];
        for (idx, amp) in self.amplitudes.iter().enumerate() {
            let ab = (((idx >> si) & 1) << 1) | ((idx >> sj) & 1);
            out[compress(idx, si, sj, self.num_qubits)] += element.amplitudes[ab].conj() * amp;
        }
        out
    }
}

/// Drops the bits at shifts `si` and `sj` from `idx`, preserving the order
/// of the others.
fn compress(idx: usize, si: usize, sj: usize, num_qubits: usize) -> usize {
    let mut out = 0;
    for shift in (0..num_qubits).rev() {
        if shift == si || shift == sj {
            continue;
        }
        out = (out << 1) | ((idx >> shift) & 1);
    }
    out
}

/// Walks the cumulative distribution in index order, skipping impossible
/// outcomes. A draw past the accumulated total lands on the last possible
/// outcome.
pub fn sample_index(probs: &[f64], draw: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p < IMPOSSIBLE_PROB {
            continue;
        }
        last = k;
        cumulative += p;
        if draw < cumulative {
            return k;
        }
    }
    last
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairMeasurement {
    pub outcome: usize,
    pub collapsed: StateVector,
    pub probability: f64,
}

/// 2×2 unitary acting on one qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitUnitary {
    matrix: [[Amplitude; 2]; 2],
}

impl SingleQubitUnitary {
    pub fn new(matrix: [[Amplitude; 2]; 2]) -> Result<Self> {
        let u = Self { matrix };
        let product = u.adjoint().mul(&u);
        let identity = Self::identity();
        let mut dev: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                dev = dev.max((product.matrix[r][c] - identity.matrix[r][c]).norm());
            }
        }
        if !dev.is_finite() || dev > ALGEBRAIC_TOL {
            return Err(QuantumError::NotUnitary(dev));
        }
        Ok(u)
    }

    fn real(m: [[f64; 2]; 2]) -> Self {
        let c = |x: f64| Amplitude::new(x, 0.0);
        Self {
            matrix: [[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]],
        }
    }

    pub fn identity() -> Self {
        Self::real([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn pauli_x() -> Self {
        Self::real([[0.0, 1.0], [1.0, 0.0]])
    }

    pub fn pauli_z() -> Self {
        Self::real([[1.0, 0.0], [0.0, -1.0]])
    }

    pub fn matrix(&self) -> &[[Amplitude; 2]; 2] {
        &self.matrix
    }

    /// Matrix product `self · rhs` (apply `rhs` first).
    pub fn mul(&self, rhs: &SingleQubitUnitary) -> SingleQubitUnitary {
        let a = &self.matrix;
        let b = &rhs.matrix;
        let mut m = [[Amplitude::new(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        SingleQubitUnitary { matrix: m }
    }

    pub fn adjoint(&self) -> SingleQubitUnitary {
        let a = &self.matrix;
        SingleQubitUnitary {
            matrix: [
                [a[0][0].conj(), a[1][0].conj()],
                [a[0][1].conj(), a[1][1].conj()],
            ],
        }
    }
}

/// Orthonormal basis of a two-qubit space.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFour {
    elements: [StateVector; 4],
}

impl BasisFour {
    pub fn new(elements: [StateVector; 4]) -> Result<Self> {
        for e in &elements {
            if e.num_qubits != 2 {
                return Err(QuantumError::DimensionMismatch {
                    expected: 4,
                    got: e.dim(),
                });
            }
        }
        let basis = Self { elements };
        let dev = basis.gram_deviation();
        if dev > ALGEBRAIC_TOL {
            return Err(QuantumError::NotOrthonormal(dev));
        }
        Ok(basis)
    }

    pub fn elements(&self) -> &[StateVector; 4] {
        &self.elements
    }

    /// Largest entry of `|G − I|` for the Gram matrix `G`.
    pub fn gram_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for (r, a) in self.elements.iter().enumerate() {
            for (c, b) in self.elements.iter().enumerate() {
                let target = if r == c { 1.0 } else { 0.0 };
                dev = dev.max((a.inner(b) - target).norm());
            }
        }
        dev
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Amplitude {
        Amplitude::new(re, 0.0)
    }

    fn bell_basis() -> BasisFour {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        BasisFour::new([
            StateVector::from_real(2, &[h, 0.0, 0.0, h]).unwrap(),
            StateVector::from_real(2, &[h, 0.0, 0.0, -h]).unwrap(),
            StateVector::from_real(2, &[0.0, h, h, 0.0]).unwrap(),
            StateVector::from_real(2, &[0.0, h, -h, 0.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn make_state_normalizes() {
        let zero = StateVector::from_real(1, &[1.0, 0.0]).unwrap();
        assert_eq!(zero.amplitudes(), &[c(1.0), c(0.0)]);

        let plus = StateVector::from_real(1, &[1.0, 1.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((plus.amplitudes()[0].re - h).abs() < 1e-15);
        assert!((plus.amplitudes()[1].re - h).abs() < 1e-15);

        let phi = StateVector::from_real(2, &[1.0, 0.0, 0.0, 0.5]).unwrap();
        assert!((phi.amplitudes()[0].re - 1.0 / 1.25f64.sqrt()).abs() < 1e-15);
        assert!((phi.amplitudes()[3].re - 0.5 / 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn make_state_errors() {
        assert_eq!(
            StateVector::from_real(1, &[0.0, 0.0]),
            Err(QuantumError::DegenerateState)
        );
        assert_eq!(
            StateVector::from_real(2, &[1.0, 0.0]),
            Err(QuantumError::DimensionMismatch {
                expected: 4,
                got: 2
            })
        );
        assert_eq!(
            StateVector::from_real(1, &[f64::NAN, 1.0]),
            Err(QuantumError::NonFinite)
        );
        assert!(matches!(
            StateVector::basis(5, 0),
            Err(QuantumError::RegisterTooLarge(5))
        ));
    }

    #[test]
    fn tensor_orders_left_operand_first() {
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        let t = zero.tensor(&one).unwrap();
        assert_eq!(t, StateVector::basis(2, 0b01).unwrap());

        let plus = StateVector::x_eigenstate(0);
        let phi = StateVector::from_real(2, &[1.0, 0.0, 0.0, 0.5]).unwrap();
        let t = plus.tensor(&phi).unwrap();
        let k = 1.0 / (2.5f64).sqrt();
        let expected = [k, 0.0, 0.0, 0.5 * k, k, 0.0, 0.0, 0.5 * k];
        for (a, e) in t.amplitudes().iter().zip(expected) {
            assert!((a.re - e).abs() < 1e-15 && a.im == 0.0);
        }
        assert!((t.norm_sqr() - 1.0).abs() < ALGEBRAIC_TOL);

        let three = StateVector::basis(3, 0).unwrap();
        assert_eq!(three.tensor(&phi), Err(QuantumError::RegisterTooLarge(5)));
    }

    #[test]
    fn paulis_act_on_the_named_qubit() {
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        let x = SingleQubitUnitary::pauli_x();
        let z = SingleQubitUnitary::pauli_z();
        assert_eq!(zero.apply_single_qubit(0, &x).unwrap(), one);
        let flipped = one.apply_single_qubit(0, &z).unwrap();
        assert_eq!(flipped.amplitudes(), &[c(0.0), c(-1.0)]);
        let id = SingleQubitUnitary::identity();
        let plus = StateVector::x_eigenstate(0);
        assert_eq!(plus.apply_single_qubit(0, &id).unwrap(), plus);

        // X on qubit 2 of |000⟩ gives |001⟩.
        let s = StateVector::basis(3, 0).unwrap();
        assert_eq!(
            s.apply_single_qubit(2, &x).unwrap(),
            StateVector::basis(3, 1).unwrap()
        );
        assert_eq!(
            s.apply_single_qubit(3, &x),
            Err(QuantumError::QubitOutOfRange {
                index: 3,
                num_qubits: 3
            })
        );
    }

    #[test]
    fn non_unitary_rejected() {
        let m = [[c(1.0), c(1.0)], [c(0.0), c(1.0)]];
        assert!(matches!(
            SingleQubitUnitary::new(m),
            Err(QuantumError::NotUnitary(_))
        ));
        let zx = SingleQubitUnitary::pauli_z().mul(&SingleQubitUnitary::pauli_x());
        assert!(SingleQubitUnitary::new(*zx.matrix()).is_ok());
    }

    #[test]
    fn bell_statistics_of_zero_zero() {
        let s = StateVector::basis(2, 0).unwrap();
        let p = s.outcome_probabilities(0, 1, &bell_basis()).unwrap();
        let expected = [0.5, 0.5, 0.0, 0.0];
        for (a, e) in p.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        assert_eq!(
            s.outcome_probabilities(1, 1, &bell_basis()),
            Err(QuantumError::QubitCollision(1))
        );
    }

    #[test]
    fn self_projection_is_deterministic() {
        let basis = bell_basis();
        let s = basis.elements()[0].clone();
        for draw in [0.0, 0.5, 0.999_999] {
            let m = s.project_pair(0, 1, &basis, draw).unwrap();
            assert_eq!(m.outcome, 0);
            assert!((m.probability - 1.0).abs() < 1e-12);
            assert!((m.collapsed.fidelity(&s).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_probability_outcomes_are_never_sampled() {
        // |00⟩ in the Bell basis: Ψ± have probability 0, so the top of the
        // draw range must still land on Φ⁻.
        let s = StateVector::basis(2, 0).unwrap();
        let m = s.project_pair(0, 1, &bell_basis(), 0.999_999_999).unwrap();
        assert_eq!(m.outcome, 1);
        assert!(matches!(
            s.collapse_pair(0, 1, &bell_basis(), 2),
            Err(QuantumError::ImpossibleOutcome { outcome: 2, .. })
        ));
    }

    #[test]
    fn residual_extracts_remaining_qubit() {
        // |+⟩ ⊗ |Φ⁺⟩ projected on qubits (0, 1) onto Φ⁺ leaves |+⟩ on qubit 2.
        let plus = StateVector::x_eigenstate(0);
        let bell = bell_basis();
        let s = plus.tensor(&bell.elements()[0]).unwrap();
        let r = s.residual_after_pair(0, 1, &bell.elements()[0]).unwrap();
        assert!((r.fidelity(&plus).unwrap() - 1.0).abs() < 1e-12);

        // Pair (0, 2) of |0⟩|1⟩|0⟩ in the computational basis leaves |1⟩.
        let s = StateVector::basis(3, 0b010).unwrap();
        let e00 = StateVector::basis(2, 0).unwrap();
        let r = s.residual_after_pair(0, 2, &e00).unwrap();
        assert_eq!(r, StateVector::basis(1, 1).unwrap());
    }

    #[test]
    fn x_measurement() {
        let plus = StateVector::x_eigenstate(0);
        assert_eq!(plus.measure_x(0, 0.999).unwrap().0, 0);
        let zero = StateVector::basis(1, 0).unwrap();
        let p = zero.x_probabilities(0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        let (bit, collapsed) = zero.measure_x(0, 0.75).unwrap();
        assert_eq!(bit, 1);
        assert!((collapsed.fidelity(&StateVector::x_eigenstate(1)).unwrap() - 1.0).abs() < 1e-12);

        // (0.9|0⟩ + 0.5|1⟩)/√1.06 reads "−" with probability 0.16/2.12.
        let s = StateVector::from_real(1, &[0.9, 0.5]).unwrap();
        let p = s.x_probabilities(0).unwrap();
        assert!((p[1] - 0.16 / 2.12).abs() < 1e-12);
        assert!((p[1] - 0.075472).abs() < 1e-6);
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert!((zero.fidelity(&zero).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(zero.fidelity(&one).unwrap(), 0.0);
        let s = StateVector::from_real(1, &[0.9, 0.5]).unwrap();
        let f = StateVector::x_eigenstate(0).fidelity(&s).unwrap();
        assert!((f - 1.96 / 2.12).abs() < 1e-12);
        assert!((f - 0.924528).abs() < 1e-6);
        assert!(zero.fidelity(&StateVector::basis(2, 0).unwrap()).is_err());
    }
}
