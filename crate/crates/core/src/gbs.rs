//! Generalized Bell basis, partially entangled channels and probabilistic
//! teleportation.
//!
//! All channel and basis parameters are real. A channel `|Φ⁺_n⟩ ∝ |00⟩ + n|11⟩`
//! teleports perfectly only when the measuring basis matches (`m = n`) and
//! the outcome is `Φ⁻` or `Ψ⁺`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{
    Amplitude, BasisFour, QuantumError, SingleQubitUnitary, StateVector, ALGEBRAIC_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GbsError {
    #[error("channel parameter {0} outside (0, 1]")]
    ParamOutOfRange(f64),
    #[error("input amplitudes not normalized: |α|² + |β|² = {0}")]
    Unnormalized(f64),
    #[error("outcome {0} has zero probability for these parameters")]
    ZeroProbability(GbsOutcome),
    #[error("empty parameter list")]
    EmptyParams,
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

pub type Result<T> = std::result::Result<T, GbsError>;

/// Real entanglement parameter in `(0, 1]`.
///
/// `1` is the maximally entangled limit, allowed for repeater links and
/// degenerate checks.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ChannelParam(f64);

impl ChannelParam {
    pub fn new(n: f64) -> Result<Self> {
        if n.is_finite() && n > 0.0 && n <= 1.0 {
            Ok(Self(n))
        } else {
            Err(GbsError::ParamOutOfRange(n))
        }
    }

    /// Maximally entangled link parameter.
    pub fn unit() -> Self {
        Self(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_unit(self) -> bool {
        self.0 >= 1.0 - ALGEBRAIC_TOL
    }

    /// `N = 1/√(1 + n²)`.
    pub fn normalization(self) -> f64 {
        1.0 / (1.0 + self.0 * self.0).sqrt()
    }
}

impl TryFrom<f64> for ChannelParam {
    type Error = GbsError;
    fn try_from(n: f64) -> Result<Self> {
        Self::new(n)
    }
}

impl From<ChannelParam> for f64 {
    fn from(p: ChannelParam) -> f64 {
        p.0
    }
}

impl fmt::Display for ChannelParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Generalized Bell measurement outcome, in canonical basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GbsOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl GbsOutcome {
    pub const ALL: [GbsOutcome; 4] = [
        GbsOutcome::PhiPlus,
        GbsOutcome::PhiMinus,
        GbsOutcome::PsiPlus,
        GbsOutcome::PsiMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Outcomes after which a matched channel teleports perfectly.
    pub fn is_success(self) -> bool {
        matches!(self, GbsOutcome::PhiMinus | GbsOutcome::PsiPlus)
    }

    pub fn label(self) -> &'static str {
        match self {
            GbsOutcome::PhiPlus => "PhiPlus",
            GbsOutcome::PhiMinus => "PhiMinus",
            GbsOutcome::PsiPlus => "PsiPlus",
            GbsOutcome::PsiMinus => "PsiMinus",
        }
    }
}

impl fmt::Display for GbsOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GbsOutcome {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|o| o.label() == s)
            .ok_or_else(|| format!("unknown outcome label {s:?}"))
    }
}

/// A key bit, carried by `|+⟩` (0) or `|−⟩` (1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeyBit {
    Zero,
    One,
}

impl KeyBit {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(KeyBit::Zero),
            1 => Some(KeyBit::One),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn state(self) -> StateVector {
        StateVector::x_eigenstate(self.as_u8())
    }
}

/// `[Φ⁺_m, Φ⁻_m, Ψ⁺_m, Ψ⁻_m]`.
pub fn gbs_basis(m: ChannelParam) -> BasisFour {
    let m = m.value();
    let k = 1.0 / (1.0 + m * m).sqrt();
    let v = |a: [f64; 4]| {
        StateVector::from_real(2, &a.map(|x| x * k)).expect("basis element has nonzero norm")
    };
    BasisFour::new([
        v([1.0, 0.0, 0.0, m]),
        v([m, 0.0, 0.0, -1.0]),
        v([0.0, 1.0, m, 0.0]),
        v([0.0, m, -1.0, 0.0]),
    ])
    .expect("generalized Bell states are orthonormal for real m")
}

/// `(|00⟩ + n|11⟩)/√(1 + n²)`.
pub fn channel_state(n: ChannelParam) -> StateVector {
    let k = n.normalization();
    StateVector::from_real(2, &[k, 0.0, 0.0, n.value() * k])
        .expect("channel state has nonzero norm")
}

fn check_normalized(alpha: Amplitude, beta: Amplitude) -> Result<()> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > ALGEBRAIC_TOL {
        return Err(GbsError::Unnormalized(norm));
    }
    Ok(())
}

/// Closed-form GBM outcome probabilities for input `α|0⟩ + β|1⟩` over
/// channel `n` measured with basis parameter `m`.
pub fn gbm_probabilities(
    alpha: Amplitude,
    beta: Amplitude,
    n: ChannelParam,
    m: ChannelParam,
) -> Result<[f64; 4]> {
    check_normalized(alpha, beta)?;
    let (n, m) = (n.value(), m.value());
    let a = alpha.norm_sqr();
    let b = beta.norm_sqr();
    let denom = (1.0 + m * m) * (1.0 + n * n);
    let (mm, nn) = (m * m, n * n);
    Ok([
        (a + mm * nn * b) / denom,
        (mm * a + nn * b) / denom,
        (nn * a + mm * b) / denom,
        (mm * nn * a + b) / denom,
    ])
}

/// Bob's correction for each announced outcome.
pub fn correction_for(outcome: GbsOutcome) -> SingleQubitUnitary {
    match outcome {
        GbsOutcome::PhiPlus => SingleQubitUnitary::identity(),
        GbsOutcome::PhiMinus => SingleQubitUnitary::pauli_z(),
        GbsOutcome::PsiPlus => SingleQubitUnitary::pauli_x(),
        GbsOutcome::PsiMinus => SingleQubitUnitary::pauli_z().mul(&SingleQubitUnitary::pauli_x()),
    }
}

/// Closed-form post-correction state of the receiving qubit.
pub fn bob_conditional_state(
    alpha: Amplitude,
    beta: Amplitude,
    n: ChannelParam,
    m: ChannelParam,
    outcome: GbsOutcome,
) -> Result<StateVector> {
    check_normalized(alpha, beta)?;
    let (n, m) = (n.value(), m.value());
    let (c0, c1) = match outcome {
        GbsOutcome::PhiPlus => (alpha, n * m * beta),
        GbsOutcome::PhiMinus => (m * alpha, n * beta),
        GbsOutcome::PsiPlus => (n * alpha, m * beta),
        GbsOutcome::PsiMinus => (m * n * alpha, beta),
    };
    StateVector::new(1, vec![c0, c1]).map_err(|e| match e {
        QuantumError::DegenerateState => GbsError::ZeroProbability(outcome),
        other => other.into(),
    })
}

/// Result of a GBM on `(input, Alice's half of pair)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmResult {
    pub outcome: GbsOutcome,
    pub probability: f64,
    /// Uncorrected state of the pair's other qubit.
    pub partner: StateVector,
}

/// Measures `input ⊗ pair` on qubits (0, 1) in `gbs_basis(m)` and returns
/// the uncorrected state left on the pair's second qubit.
pub fn gbm_teleport(
    input: &StateVector,
    pair: &StateVector,
    m: ChannelParam,
    draw: f64,
) -> Result<GbmResult> {
    let joint = input.tensor(pair)?;
    let basis = gbs_basis(m);
    let measured = joint.project_pair(0, 1, &basis, draw)?;
    let outcome = GbsOutcome::from_index(measured.outcome).expect("four outcomes");
    let partner = joint.residual_after_pair(0, 1, &basis.elements()[measured.outcome])?;
    Ok(GbmResult {
        outcome,
        probability: measured.probability,
        partner,
    })
}

/// One probabilistic teleportation of a key bit.
#[derive(Debug, Clone, PartialEq)]
pub struct PqtRecord {
    pub n: ChannelParam,
    pub m: ChannelParam,
    pub outcome: GbsOutcome,
    pub bob_state: StateVector,
    pub succeeded: bool,
}

/// Teleports `key` over `channel_state(n)` using `gbs_basis(m)` and applies
/// the receiver's correction.
pub fn simulate_pqt<R: Rng + ?Sized>(
    key: KeyBit,
    n: ChannelParam,
    m: ChannelParam,
    rng: &mut R,
) -> Result<PqtRecord> {
    let gbm = gbm_teleport(&key.state(), &channel_state(n), m, rng.random())?;
    let bob_state = gbm
        .partner
        .apply_single_qubit(0, &correction_for(gbm.outcome))?;
    Ok(PqtRecord {
        n,
        m,
        outcome: gbm.outcome,
        bob_state,
        succeeded: n == m && gbm.outcome.is_success(),
    })
}

/// `2n²/(1 + n²)²`.
pub fn p_suc(n: ChannelParam) -> f64 {
    let n2 = n.value() * n.value();
    2.0 * n2 / ((1.0 + n2) * (1.0 + n2))
}

/// Final key rate for equiprobable channels: `Σ_j p_suc(n_j) / (2N)`.
///
/// For two channels this is `n₁²/(2(1+n₁²)²) + n₂²/(2(1+n₂²)²)`.
pub fn p_final_rate(params: &[ChannelParam]) -> Result<f64> {
    if params.is_empty() {
        return Err(GbsError::EmptyParams);
    }
    let n = params.len() as f64;
    Ok(params.iter().map(|&p| p_suc(p)).sum::<f64>() / (2.0 * n))
}

/// Probability that a qubit teleported with basis `m` over channel `n` reads
/// the wrong X-basis bit: `1/2 − mn/(m² + n²)`.
pub fn p_wrong(m: ChannelParam, n: ChannelParam) -> f64 {
    let (m, n) = (m.value(), n.value());
    (m - n) * (m - n) / (2.0 * (m * m + n * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64) -> ChannelParam {
        ChannelParam::new(x).unwrap()
    }

    fn h() -> Amplitude {
        Amplitude::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn param_range() {
        assert!(ChannelParam::new(0.0).is_err());
        assert!(ChannelParam::new(1.0 + 1e-9).is_err());
        assert!(ChannelParam::new(f64::NAN).is_err());
        assert!(ChannelParam::new(1.0).unwrap().is_unit());
    }

    #[test]
    fn unit_basis_is_standard_bell() {
        let b = gbs_basis(ChannelParam::unit());
        let k = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [
            [k, 0.0, 0.0, k],
            [k, 0.0, 0.0, -k],
            [0.0, k, k, 0.0],
            [0.0, k, -k, 0.0],
        ];
        for (e, x) in b.elements().iter().zip(expected) {
            let re: Vec<f64> = e.amplitudes().iter().map(|a| a.re).collect();
            assert!(close(&re, &x, 1e-15));
        }
    }

    #[test]
    fn channel_state_examples() {
        let s = channel_state(p(0.5));
        let re: Vec<f64> = s.amplitudes().iter().map(|a| a.re).collect();
        assert!(close(&re, &[0.894427, 0.0, 0.0, 0.447214], 1e-6));
        assert_eq!(s, gbs_basis(p(0.5)).elements()[0]);
    }

    #[test]
    fn gbm_probability_examples() {
        let pr = gbm_probabilities(h(), h(), p(0.5), p(0.5)).unwrap();
        assert!(close(&pr, &[0.34, 0.16, 0.16, 0.34], 1e-12));

        // (1 + 0.2025)/2 / (1.81·1.25) etc.
        let pr = gbm_probabilities(h(), h(), p(0.5), p(0.9)).unwrap();
        assert!(close(&pr, &[0.265746, 0.234254, 0.234254, 0.265746], 1e-6));

        let one = Amplitude::new(1.0, 0.0);
        let zero = Amplitude::new(0.0, 0.0);
        let pr = gbm_probabilities(one, zero, ChannelParam::unit(), ChannelParam::unit()).unwrap();
        assert!(close(&pr, &[0.25; 4], 1e-15));

        assert!(matches!(
            gbm_probabilities(one, one, p(0.5), p(0.5)),
            Err(GbsError::Unnormalized(_))
        ));
    }

    #[test]
    fn corrections() {
        assert_eq!(
            correction_for(GbsOutcome::PhiPlus),
            SingleQubitUnitary::identity()
        );
        assert_eq!(
            correction_for(GbsOutcome::PhiMinus),
            SingleQubitUnitary::pauli_z()
        );
        assert_eq!(
            correction_for(GbsOutcome::PsiPlus),
            SingleQubitUnitary::pauli_x()
        );
        // σ_zσ_x |0⟩ = σ_z |1⟩ = −|1⟩
        let out = StateVector::basis(1, 0)
            .unwrap()
            .apply_single_qubit(0, &correction_for(GbsOutcome::PsiMinus))
            .unwrap();
        assert_eq!(out.amplitudes()[1], Amplitude::new(-1.0, 0.0));
    }

    #[test]
    fn conditional_states() {
        let alpha = Amplitude::new(0.6, 0.0);
        let beta = Amplitude::new(0.0, 0.8);
        let input = StateVector::new(1, vec![alpha, beta]).unwrap();
        for o in [GbsOutcome::PhiMinus, GbsOutcome::PsiPlus] {
            let s = bob_conditional_state(alpha, beta, p(0.3), p(0.3), o).unwrap();
            assert!((s.fidelity(&input).unwrap() - 1.0).abs() < 1e-12);
        }
        let s = bob_conditional_state(h(), h(), p(0.5), p(0.9), GbsOutcome::PhiMinus).unwrap();
        let expected = StateVector::from_real(1, &[0.9, 0.5]).unwrap();
        assert!((s.fidelity(&expected).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simulated_matches_closed_form_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let key = if rng.random::<bool>() {
                KeyBit::One
            } else {
                KeyBit::Zero
            };
            let n = p(rng.random_range(0.05..1.0));
            let m = if rng.random::<bool>() {
                n
            } else {
                p(rng.random_range(0.05..1.0))
            };
            let rec = simulate_pqt(key, n, m, &mut rng).unwrap();
            let a = key.state();
            let cf = bob_conditional_state(a.amplitudes()[0], a.amplitudes()[1], n, m, rec.outcome)
                .unwrap();
            assert!((rec.bob_state.fidelity(&cf).unwrap() - 1.0).abs() < 1e-12);
            if rec.succeeded {
                assert!((rec.bob_state.fidelity(&a).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_never_succeeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let rec = simulate_pqt(KeyBit::Zero, p(0.5), p(0.9), &mut rng).unwrap();
            assert!(!rec.succeeded);
        }
    }

    #[test]
    fn success_frequency_at_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 100_000;
        let n = p(0.5);
        let hits = (0..trials)
            .filter(|i| {
                let key = if i % 2 == 0 {
                    KeyBit::Zero
                } else {
                    KeyBit::One
                };
                simulate_pqt(key, n, n, &mut rng).unwrap().succeeded
            })
            .count();
        let freq = hits as f64 / trials as f64;
        let sigma = (0.32f64 * 0.68 / trials as f64).sqrt();
        assert!((freq - 0.32).abs() < 3.0 * sigma, "freq {freq}");
    }

    #[test]
    fn closed_form_values() {
        assert!((p_suc(p(0.5)) - 0.32).abs() < 1e-15);
        assert!((p_suc(ChannelParam::unit()) - 0.5).abs() < 1e-15);
        assert!((p_suc(p(0.9)) - 1.62 / 3.2761).abs() < 1e-15);
        assert!((p_suc(p(0.9)) - 0.494490).abs() < 1e-6);

        let r = p_final_rate(&[p(0.5), p(0.9)]).unwrap();
        assert!((r - 0.203622).abs() < 1e-6 && r > 0.20);
        let r = p_final_rate(&[p(0.55), p(0.55)]).unwrap();
        assert!((r - 0.178308).abs() < 1e-6 && r > 0.15);
        let r = p_final_rate(&[ChannelParam::unit(), ChannelParam::unit()]).unwrap();
        assert!((r - 0.25).abs() < 1e-15);
        assert_eq!(p_final_rate(&[]), Err(GbsError::EmptyParams));

        assert!((p_wrong(p(0.9), p(0.5)) - 0.16 / 2.12).abs() < 1e-15);
        assert_eq!(p_wrong(p(0.4), p(0.4)), 0.0);
        assert!(p_wrong(p(1.0), p(1e-6)) > 0.4999);
    }

    #[test]
    fn outcome_labels_round_trip() {
        for o in GbsOutcome::ALL {
            assert_eq!(o.label().parse::<GbsOutcome>().unwrap(), o);
            assert_eq!(GbsOutcome::from_index(o.index()), Some(o));
        }
        assert!("Phi".parse::<GbsOutcome>().is_err());
    }
}
