//! Exact enumeration of every discrete branch of one protocol round.
//!
//! Each branch fixes the uniform choices (channel, basis, key bit, Eve's
//! guesses) and every measurement result, and carries its Born weight
//! computed from explicit state vectors. Eve's pair and the source pair are
//! independent until her re-teleportation, so each stage fits in a
//! three-qubit register.

use serde::Serialize;

use super::AnalysisError;
use crate::adversary::{AttackKind, AttackModel, ReinjectBasis};
use crate::gbs::{channel_state, correction_for, gbs_basis, ChannelParam, GbsOutcome, KeyBit};
use crate::quantum::{StateVector, IMPOSSIBLE_PROB};

/// Largest channel set or guess pool the oracle accepts.
pub const MAX_ORACLE_PARAMS: usize = 4;

/// Eavesdropper scenario seen by the oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Eavesdropper {
    Passive,
    InterceptReteleport {
        pool: Vec<ChannelParam>,
        reinject: ReinjectBasis,
        informed: bool,
    },
    FakeSource {
        pool: Vec<ChannelParam>,
        informed: bool,
    },
    /// Eve swaps Alice's qubit and reads her guess, but leaves the captured
    /// qubit alone. Reference only; no simulated counterpart.
    InterceptWithoutReinjection {
        pool: Vec<ChannelParam>,
    },
}

impl Eavesdropper {
    pub fn kind(&self) -> Option<AttackKind> {
        match self {
            Eavesdropper::Passive => Some(AttackKind::Passive),
            Eavesdropper::InterceptReteleport { .. } => Some(AttackKind::InterceptReteleport),
            Eavesdropper::FakeSource { .. } => Some(AttackKind::FakeSource),
            Eavesdropper::InterceptWithoutReinjection { .. } => None,
        }
    }

    fn pool(&self) -> &[ChannelParam] {
        match self {
            Eavesdropper::Passive => &[],
            Eavesdropper::InterceptReteleport { pool, .. }
            | Eavesdropper::FakeSource { pool, .. }
            | Eavesdropper::InterceptWithoutReinjection { pool } => pool,
        }
    }
}

impl From<&AttackModel> for Eavesdropper {
    fn from(model: &AttackModel) -> Self {
        match model.kind {
            AttackKind::Passive => Eavesdropper::Passive,
            AttackKind::InterceptReteleport => Eavesdropper::InterceptReteleport {
                pool: model.guess_pool.clone(),
                reinject: model.reinject,
                informed: model.informed,
            },
            AttackKind::FakeSource => Eavesdropper::FakeSource {
                pool: model.guess_pool.clone(),
                informed: model.informed,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EveBranch {
    pub e_index: usize,
    pub reinject_index: usize,
    pub guess: KeyBit,
    pub outcome: Option<GbsOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Branch {
    pub n_index: usize,
    pub m_index: usize,
    pub key: KeyBit,
    pub outcome: GbsOutcome,
    pub bob_bit: KeyBit,
    pub eve: Option<EveBranch>,
    pub weight: f64,
}

impl Branch {
    pub fn is_sifted(&self) -> bool {
        self.n_index == self.m_index && self.outcome.is_success()
    }
}

/// Exact joint distribution of one round.
#[derive(Debug, Clone)]
pub struct OracleDistribution {
    pub channel_params: Vec<ChannelParam>,
    pub eavesdropper: Eavesdropper,
    pub branches: Vec<Branch>,
}

const KEYS: [KeyBit; 2] = [KeyBit::Zero, KeyBit::One];

/// Splits a three-qubit state by a GBM on qubits (0, 1). Yields the outcome,
/// its probability and the normalized state of qubit 2.
fn gbm_branches(
    state: &StateVector,
    m: ChannelParam,
) -> Result<Vec<(GbsOutcome, f64, StateVector)>, AnalysisError> {
    let basis = gbs_basis(m);
    let probs = state.outcome_probabilities(0, 1, &basis)?;
    let mut out = Vec::with_capacity(4);
    for (k, &p) in probs.iter().enumerate() {
        if p < IMPOSSIBLE_PROB {
            continue;
        }
        let residual = state.residual_after_pair(0, 1, &basis.elements()[k])?;
        out.push((GbsOutcome::ALL[k], p, residual));
    }
    Ok(out)
}

/// Eve's channel guesses with their probabilities. An informed Eve always
/// picks the prepared parameter.
fn eve_guesses(
    pool: &[ChannelParam],
    informed: bool,
    prepared: ChannelParam,
) -> Result<Vec<(usize, ChannelParam, f64)>, AnalysisError> {
    if informed {
        let i = pool.iter().position(|&e| e == prepared).ok_or_else(|| {
            AnalysisError::InvalidInput(format!("informed guess pool lacks {prepared}"))
        })?;
        return Ok(vec![(i, prepared, 1.0)]);
    }
    let w = 1.0 / pool.len() as f64;
    Ok(pool.iter().enumerate().map(|(i, &e)| (i, e, w)).collect())
}

/// X-basis readout of a single qubit after the receiver's correction.
fn corrected_x(qubit: &StateVector, outcome: GbsOutcome) -> Result<[f64; 2], AnalysisError> {
    Ok(qubit
        .apply_single_qubit(0, &correction_for(outcome))?
        .x_probabilities(0)?)
}

/// Enumerates all branches for the given channel set and eavesdropper.
pub fn exhaustive_oracle(
    channel_params: &[ChannelParam],
    eavesdropper: &Eavesdropper,
) -> Result<OracleDistribution, AnalysisError> {
    if channel_params.is_empty() {
        return Err(AnalysisError::InvalidInput(
            "empty channel parameter set".into(),
        ));
    }
    let pool = eavesdropper.pool();
    if channel_params.len() > MAX_ORACLE_PARAMS || pool.len() > MAX_ORACLE_PARAMS {
        return Err(AnalysisError::OracleOverflow {
            params: channel_params.len(),
            pool: pool.len(),
            max: MAX_ORACLE_PARAMS,
        });
    }
    if eavesdropper != &Eavesdropper::Passive && pool.is_empty() {
        return Err(AnalysisError::InvalidInput("empty guess pool".into()));
    }

    let n_count = channel_params.len();
    let choice = 1.0 / (n_count * n_count) as f64 * 0.5;
    let mut branches = Vec::new();
    let mut push =
        |n_index, m_index, key, outcome, bob: [f64; 2], eve: Option<EveBranch>, weight: f64| {
            for (b, &pb) in bob.iter().enumerate() {
                if pb < IMPOSSIBLE_PROB {
                    continue;
                }
                branches.push(Branch {
                    n_index,
                    m_index,
                    key,
                    outcome,
                    bob_bit: KeyBit::from_u8(b as u8).unwrap(),
                    eve,
                    weight: weight * pb,
                });
            }
        };

    for (n_index, &n) in channel_params.iter().enumerate() {
        for (m_index, &m) in channel_params.iter().enumerate() {
            for key in KEYS {
                let w0 = choice;
                match eavesdropper {
                    Eavesdropper::Passive => {
                        let state = key.state().tensor(&channel_state(n))?;
                        for (o, p, bob_qubit) in gbm_branches(&state, m)? {
                            push(
                                n_index,
                                m_index,
                                key,
                                o,
                                corrected_x(&bob_qubit, o)?,
                                None,
                                w0 * p,
                            );
                        }
                    }
                    Eavesdropper::InterceptReteleport {
                        pool,
                        reinject,
                        informed,
                    } => {
                        let reinjects: Vec<(usize, f64)> = match reinject {
                            ReinjectBasis::MatchGuess => vec![],
                            ReinjectBasis::Independent => (0..pool.len())
                                .map(|r| (r, 1.0 / pool.len() as f64))
                                .collect(),
                        };
                        for (e_index, e, pe) in eve_guesses(pool, *informed, n)? {
                            let alice_side = key.state().tensor(&channel_state(e))?;
                            for (o, p, eve_qubit) in gbm_branches(&alice_side, m)? {
                                let guesses = corrected_x(&eve_qubit, o)?;
                                for (g, &pg) in guesses.iter().enumerate() {
                                    if pg < IMPOSSIBLE_PROB {
                                        continue;
                                    }
                                    let guess = KeyBit::from_u8(g as u8).unwrap();
                                    let line = guess.state().tensor(&channel_state(n))?;
                                    let rs = if reinjects.is_empty() {
                                        vec![(e_index, 1.0)]
                                    } else {
                                        reinjects.clone()
                                    };
                                    for (r_index, pr) in rs {
                                        for (oe, pe_out, bob_qubit) in
                                            gbm_branches(&line, pool[r_index])?
                                        {
                                            let eve = EveBranch {
                                                e_index,
                                                reinject_index: r_index,
                                                guess,
                                                outcome: Some(oe),
                                            };
                                            push(
                                                n_index,
                                                m_index,
                                                key,
                                                o,
                                                corrected_x(&bob_qubit, o)?,
                                                Some(eve),
                                                w0 * pe * p * pg * pr * pe_out,
                                            );
                                        }
                                    }
                                }
                            }
                        }
                    }
                    Eavesdropper::FakeSource { pool, informed } => {
                        for (e_index, e, pe) in eve_guesses(pool, *informed, n)? {
                            let alice_side = key.state().tensor(&channel_state(e))?;
                            for (o, p, eve_qubit) in gbm_branches(&alice_side, m)? {
                                let guesses = corrected_x(&eve_qubit, o)?;
                                for (g, &pg) in guesses.iter().enumerate() {
                                    if pg < IMPOSSIBLE_PROB {
                                        continue;
                                    }
                                    let guess = KeyBit::from_u8(g as u8).unwrap();
                                    let delivered = guess
                                        .state()
                                        .apply_single_qubit(0, &correction_for(o).adjoint())?;
                                    let eve = EveBranch {
                                        e_index,
                                        reinject_index: e_index,
                                        guess,
                                        outcome: None,
                                    };
                                    push(
                                        n_index,
                                        m_index,
                                        key,
                                        o,
                                        corrected_x(&delivered, o)?,
                                        Some(eve),
                                        w0 * pe * p * pg,
                                    );
                                }
                            }
                        }
                    }
                    Eavesdropper::InterceptWithoutReinjection { pool } => {
                        let pe = 1.0 / pool.len() as f64;
                        // The receiver's qubit is qubit 1 of the untouched source pair.
                        let source = channel_state(n);
                        for (e_index, &e) in pool.iter().enumerate() {
                            let alice_side = key.state().tensor(&channel_state(e))?;
                            for (o, p, eve_qubit) in gbm_branches(&alice_side, m)? {
                                let bob = source
                                    .apply_single_qubit(1, &correction_for(o))?
                                    .x_probabilities(1)?;
                                let guesses = corrected_x(&eve_qubit, o)?;
                                for (g, &pg) in guesses.iter().enumerate() {
                                    if pg < IMPOSSIBLE_PROB {
                                        continue;
                                    }
                                    let eve = EveBranch {
                                        e_index,
                                        reinject_index: e_index,
                                        guess: KeyBit::from_u8(g as u8).unwrap(),
                                        outcome: None,
                                    };
                                    push(
                                        n_index,
                                        m_index,
                                        key,
                                        o,
                                        bob,
                                        Some(eve),
                                        w0 * pe * p * pg,
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(OracleDistribution {
        channel_params: channel_params.to_vec(),
        eavesdropper: eavesdropper.clone(),
        branches,
    })
}

impl OracleDistribution {
    fn mass(&self, pred: impl Fn(&Branch) -> bool) -> f64 {
        self.branches
            .iter()
            .filter(|b| pred(b))
            .fold(0.0, |acc, b| acc + b.weight)
    }

    fn conditional(
        &self,
        event: impl Fn(&Branch) -> bool,
        given: impl Fn(&Branch) -> bool,
    ) -> Option<f64> {
        let denom = self.mass(&given);
        (denom > 0.0).then(|| self.mass(|b| given(b) && event(b)) / denom)
    }

    fn eve_param(&self, b: &Branch) -> Option<ChannelParam> {
        b.eve.map(|e| self.eavesdropper.pool()[e.e_index])
    }

    pub fn total_mass(&self) -> f64 {
        self.mass(|_| true)
    }

    /// Probability that a round survives sifting.
    pub fn sift_probability(&self) -> f64 {
        self.mass(Branch::is_sifted)
    }

    pub fn match_probability(&self) -> f64 {
        self.mass(|b| b.n_index == b.m_index)
    }

    /// Half the success probability given a basis match; equals the
    /// closed-form final rate for any channel set.
    pub fn final_rate(&self) -> f64 {
        0.5 * self
            .conditional(|b| b.outcome.is_success(), |b| b.n_index == b.m_index)
            .unwrap_or(0.0)
    }

    /// Success probability given that channel `j` was prepared and matched.
    pub fn success_given_match(&self, j: usize) -> Option<f64> {
        self.conditional(
            |b| b.outcome.is_success(),
            |b| b.n_index == j && b.m_index == j,
        )
    }

    /// Outcome distribution for a fixed channel, basis and (optionally) key bit.
    pub fn outcome_distribution(
        &self,
        n_index: usize,
        m_index: usize,
        key: Option<KeyBit>,
    ) -> Option<[f64; 4]> {
        let given = |b: &Branch| {
            b.n_index == n_index && b.m_index == m_index && key.is_none_or(|k| b.key == k)
        };
        let mut out = [0.0; 4];
        for o in GbsOutcome::ALL {
            out[o.index()] = self.conditional(|b| b.outcome == o, given)?;
        }
        Some(out)
    }

    /// Outcome marginal over all choices.
    pub fn outcome_marginal(&self) -> [f64; 4] {
        GbsOutcome::ALL.map(|o| self.mass(|b| b.outcome == o))
    }

    /// Probability that Bob's bit differs from the key given the channel,
    /// basis and outcome.
    pub fn bob_error_given(
        &self,
        n_index: usize,
        m_index: usize,
        outcome: GbsOutcome,
    ) -> Option<f64> {
        self.conditional(
            |b| b.bob_bit != b.key,
            |b| b.n_index == n_index && b.m_index == m_index && b.outcome == outcome,
        )
    }

    /// Expected QBER on disclosed bits: error rate among sifted rounds.
    pub fn qber(&self) -> Option<f64> {
        self.conditional(|b| b.bob_bit != b.key, Branch::is_sifted)
    }

    /// Probability that a round is sifted and Bob's bit is wrong.
    pub fn sifted_mismatch_probability(&self) -> f64 {
        self.mass(|b| b.is_sifted() && b.bob_bit != b.key)
    }

    /// Probability that Eve's guess equals the key on sifted rounds.
    pub fn eve_information(&self) -> Option<f64> {
        if self.eavesdropper == Eavesdropper::Passive {
            return None;
        }
        self.conditional(
            |b| b.eve.is_some_and(|e| e.guess == b.key),
            Branch::is_sifted,
        )
    }

    /// Probability that Eve's channel guess equals Alice's basis parameter.
    pub fn eve_match_probability(&self) -> Option<f64> {
        if self.eavesdropper == Eavesdropper::Passive {
            return None;
        }
        Some(self.mass(|b| self.eve_param(b) == Some(self.channel_params[b.m_index])))
    }

    /// Eve's wrong-guess probability given her channel, Alice's basis and
    /// the announced outcome.
    pub fn eve_wrong_given(
        &self,
        e: ChannelParam,
        m: ChannelParam,
        outcome: GbsOutcome,
    ) -> Option<f64> {
        self.conditional(
            |b| b.eve.is_some_and(|x| x.guess != b.key),
            |b| {
                self.eve_param(b) == Some(e)
                    && self.channel_params[b.m_index] == m
                    && b.outcome == outcome
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbs::{gbm_probabilities, p_final_rate, p_suc, p_wrong};
    use crate::quantum::Amplitude;

    fn params(xs: &[f64]) -> Vec<ChannelParam> {
        xs.iter().map(|&x| ChannelParam::new(x).unwrap()).collect()
    }

    #[test]
    fn passive_marginals_match_closed_forms() {
        let cp = params(&[0.5, 0.9]);
        let d = exhaustive_oracle(&cp, &Eavesdropper::Passive).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        assert!((d.sift_probability() - 0.2036226000427337).abs() < 1e-12);
        assert!((d.final_rate() - p_final_rate(&cp).unwrap()).abs() < 1e-12);
        assert!((d.match_probability() - 0.5).abs() < 1e-12);
        for (j, &n) in cp.iter().enumerate() {
            assert!((d.success_given_match(j).unwrap() - p_suc(n)).abs() < 1e-12);
        }
        assert_eq!(d.qber(), Some(0.0));
        assert_eq!(d.eve_information(), None);

        let h = Amplitude::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let expected = gbm_probabilities(h, h, cp[0], cp[1]).unwrap();
        let got = d.outcome_distribution(0, 1, Some(KeyBit::Zero)).unwrap();
        for k in 0..4 {
            assert!((expected[k] - got[k]).abs() < 1e-12);
        }
        let err = d.bob_error_given(0, 1, GbsOutcome::PhiMinus).unwrap();
        assert!((err - p_wrong(cp[1], cp[0])).abs() < 1e-12);
    }

    #[test]
    fn matched_outcome_distribution() {
        let cp = params(&[0.5, 0.9]);
        let d = exhaustive_oracle(&cp, &Eavesdropper::Passive).unwrap();
        let got = d.outcome_distribution(0, 0, Some(KeyBit::Zero)).unwrap();
        for (g, e) in got.iter().zip([0.34, 0.16, 0.16, 0.34]) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn intercept_distorts_and_reads() {
        let cp = params(&[0.5, 0.9]);
        let d = exhaustive_oracle(
            &cp,
            &Eavesdropper::InterceptReteleport {
                pool: cp.clone(),
                reinject: ReinjectBasis::MatchGuess,
                informed: false,
            },
        )
        .unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        assert!((d.qber().unwrap() - 0.5).abs() < 1e-12);
        assert!((d.eve_match_probability().unwrap() - 0.5).abs() < 1e-12);
        let w = d
            .eve_wrong_given(cp[0], cp[1], GbsOutcome::PhiMinus)
            .unwrap();
        assert!((w - p_wrong(cp[1], cp[0])).abs() < 1e-12);
        assert_eq!(
            d.eve_wrong_given(cp[1], cp[1], GbsOutcome::PsiPlus),
            Some(0.0)
        );
        let info = d.eve_information().unwrap();
        assert!(info > 0.9 && info < 1.0);
    }

    #[test]
    fn fake_source_with_perfect_guess_is_silent() {
        let cp = params(&[0.5, 0.9]);
        let exact = exhaustive_oracle(
            &cp,
            &Eavesdropper::FakeSource {
                pool: cp.clone(),
                informed: true,
            },
        )
        .unwrap();
        assert_eq!(exact.qber(), Some(0.0));
        assert!((exact.eve_information().unwrap() - 1.0).abs() < 1e-12);

        let uniform = exhaustive_oracle(
            &cp,
            &Eavesdropper::FakeSource {
                pool: cp.clone(),
                informed: false,
            },
        )
        .unwrap();
        assert!(uniform.qber().unwrap() > 0.0);
        let disjoint = exhaustive_oracle(
            &cp,
            &Eavesdropper::FakeSource {
                pool: params(&[0.2, 0.3]),
                informed: false,
            },
        )
        .unwrap();
        assert!(disjoint.qber().unwrap() > uniform.qber().unwrap());
    }

    #[test]
    fn no_reinjection_randomizes_bob() {
        let cp = params(&[0.5, 0.9]);
        let d = exhaustive_oracle(
            &cp,
            &Eavesdropper::InterceptWithoutReinjection { pool: cp.clone() },
        )
        .unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
        assert!((d.qber().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oversized_sets_are_rejected() {
        let cp = params(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        assert!(matches!(
            exhaustive_oracle(&cp, &Eavesdropper::Passive),
            Err(AnalysisError::OracleOverflow { .. })
        ));
    }
}
