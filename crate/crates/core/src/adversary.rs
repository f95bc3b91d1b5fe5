//! Eavesdropper strategies acting on the Alice-bound qubit.
//!
//! Eve hears every public broadcast but learns the channel and basis
//! parameters only after Bob has measured, too late to use them in the
//! round. Her per-round randomness comes from her own substream so that
//! honest parties draw identical values with or without her.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gbs::{self, channel_state, correction_for, ChannelParam, GbsOutcome, KeyBit};
use crate::protocol::{Transcript, Verdict};
use crate::quantum::StateVector;
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackKind {
    Passive,
    InterceptReteleport,
    FakeSource,
}

impl AttackKind {
    pub fn label(self) -> &'static str {
        match self {
            AttackKind::Passive => "passive",
            AttackKind::InterceptReteleport => "intercept",
            AttackKind::FakeSource => "fake-source",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AttackKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "passive" | "none" => Ok(AttackKind::Passive),
            "intercept" | "intercept-reteleport" => Ok(AttackKind::InterceptReteleport),
            "fake-source" | "fake_source" => Ok(AttackKind::FakeSource),
            other => Err(format!("unknown attack kind {other:?}")),
        }
    }
}

/// Basis parameter Eve uses when re-teleporting her guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReinjectBasis {
    /// Same value as her channel guess `e`.
    MatchGuess,
    /// A second, independent draw from the guess pool.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    pub kind: AttackKind,
    /// Channel parameters Eve chooses from, normally the public set.
    pub guess_pool: Vec<ChannelParam>,
    pub eve_seed: u64,
    pub reinject: ReinjectBasis,
    /// Eve learns the prepared channel parameter and uses it as her guess.
    /// Upper-bound reference, not a physical strategy.
    #[serde(default)]
    pub informed: bool,
}

impl AttackModel {
    pub fn passive() -> Self {
        Self {
            kind: AttackKind::Passive,
            guess_pool: Vec::new(),
            eve_seed: 0,
            reinject: ReinjectBasis::MatchGuess,
            informed: false,
        }
    }

    pub fn intercept(guess_pool: Vec<ChannelParam>, eve_seed: u64) -> Self {
        Self {
            kind: AttackKind::InterceptReteleport,
            guess_pool,
            eve_seed,
            reinject: ReinjectBasis::MatchGuess,
            informed: false,
        }
    }

    pub fn fake_source(guess_pool: Vec<ChannelParam>, eve_seed: u64) -> Self {
        Self {
            kind: AttackKind::FakeSource,
            guess_pool,
            eve_seed,
            reinject: ReinjectBasis::MatchGuess,
            informed: false,
        }
    }

    /// Same attack with Eve told the prepared parameter each round.
    pub fn informed(self) -> Self {
        Self {
            informed: true,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.kind != AttackKind::Passive && self.guess_pool.is_empty() {
            return Err(format!("{} attack needs a non-empty guess pool", self.kind));
        }
        if self.kind == AttackKind::Passive && self.informed {
            return Err("a passive adversary cannot be informed".into());
        }
        Ok(())
    }

    /// Starts Eve's work on one round: draws her channel guess and prepares
    /// the substitute pair. `prepared` is read only by an informed Eve and
    /// must then be in the pool. `None` for a passive adversary.
    pub fn begin_round(&self, round_id: u64, prepared: ChannelParam) -> Option<EveRound> {
        if self.kind == AttackKind::Passive {
            return None;
        }
        let mut rng = substream(self.eve_seed, Domain::Eve, round_id);
        let drawn = rng.random_range(0..self.guess_pool.len());
        let guess_index = match self.informed {
            true => self.guess_pool.iter().position(|&e| e == prepared)?,
            false => drawn,
        };
        let reinject_index = match self.reinject {
            ReinjectBasis::MatchGuess => guess_index,
            ReinjectBasis::Independent => rng.random_range(0..self.guess_pool.len()),
        };
        let guess = self.guess_pool[guess_index];
        Some(EveRound {
            rng,
            round_id,
            guess_index,
            guess,
            reinject_index,
            reinject: self.guess_pool[reinject_index],
            alice_pair: channel_state(guess),
        })
    }
}

/// Eve's knowledge for one round. `knew_bit` is filled by the post-run
/// audit and never reaches the parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveRecord {
    pub round_id: u64,
    pub guess_index: usize,
    pub guessed_e: ChannelParam,
    pub eve_bit_guess: Option<KeyBit>,
    pub eve_gbm_outcome: Option<GbsOutcome>,
    pub knew_bit: bool,
}

/// Eve's in-flight state for one round.
#[derive(Debug, Clone)]
pub struct EveRound {
    rng: ChaCha8Rng,
    round_id: u64,
    guess_index: usize,
    guess: ChannelParam,
    reinject_index: usize,
    reinject: ChannelParam,
    alice_pair: StateVector,
}

impl EveRound {
    pub fn guess_index(&self) -> usize {
        self.guess_index
    }

    pub fn guess(&self) -> ChannelParam {
        self.guess
    }

    pub fn reinject_index(&self) -> usize {
        self.reinject_index
    }

    /// Eve's `channel_state(e)`; qubit 0 is delivered to Alice, qubit 1 stays
    /// with Eve.
    pub fn alice_pair(&self) -> &StateVector {
        &self.alice_pair
    }

    /// Corrects her half by the announced outcome and reads it in the X basis.
    fn read_guess(&mut self, eve_half: &StateVector, announced: GbsOutcome) -> gbs::Result<KeyBit> {
        let corrected = eve_half.apply_single_qubit(0, &correction_for(announced))?;
        let (bit, _) = corrected.measure_x(0, self.rng.random())?;
        Ok(KeyBit::from_u8(bit).expect("X measurement yields a bit"))
    }

    fn record(&self, guess: KeyBit, eve_gbm_outcome: Option<GbsOutcome>) -> EveRecord {
        EveRecord {
            round_id: self.round_id,
            guess_index: self.guess_index,
            guessed_e: self.guess,
            eve_bit_guess: Some(guess),
            eve_gbm_outcome,
            knew_bit: false,
        }
    }
}

/// Output of an active hook: the qubit travelling on toward Bob (before his
/// corrections) and Eve's record.
#[derive(Debug, Clone)]
pub struct HookOutput {
    pub line_qubit: StateVector,
    pub record: EveRecord,
}

/// The no-attack hook.
pub fn passive_hook(qubit: StateVector) -> StateVector {
    qubit
}

/// Intercept and re-teleport.
///
/// Eve already swapped the source's Alice-bound qubit for half of her own
/// pair. After Alice announces her outcome, Eve corrects her half and reads
/// the key guess in the X basis. She then prepares that X eigenstate and
/// teleports it onto the captured qubit with a GBM of parameter equal to
/// her reinjection basis. She cannot announce her own outcome, so the
/// receiver corrects only by Alice's.
///
/// `source_pair` is the genuine pair: qubit 0 is the captured one, qubit 1
/// the one held on the receiving side.
pub fn intercept_reteleport_hook(
    mut eve: EveRound,
    eve_half: &StateVector,
    announced: GbsOutcome,
    source_pair: &StateVector,
) -> gbs::Result<HookOutput> {
    let guess = eve.read_guess(eve_half, announced)?;
    let reinject = gbs::gbm_teleport(&guess.state(), source_pair, eve.reinject, eve.rng.random())?;
    Ok(HookOutput {
        line_qubit: reinject.partner,
        record: eve.record(guess, Some(reinject.outcome)),
    })
}

/// Fake distributor.
///
/// Eve replaced the distributor's pair. She keeps the partner of Alice's
/// half and, holding the receiver's qubit until after Alice's broadcast,
/// prepares it as the state that Bob's correction maps onto her guess.
pub fn fake_source_hook(
    mut eve: EveRound,
    eve_half: &StateVector,
    announced: GbsOutcome,
) -> gbs::Result<HookOutput> {
    let guess = eve.read_guess(eve_half, announced)?;
    let line_qubit = guess
        .state()
        .apply_single_qubit(0, &correction_for(announced).adjoint())?;
    Ok(HookOutput {
        line_qubit,
        record: eve.record(guess, None),
    })
}

/// Fraction of kept key rounds where Eve's guess equals Alice's bit.
///
/// `None` without an active adversary or when no round was kept.
pub fn eve_information(transcript: &Transcript) -> Option<f64> {
    if transcript.attack == AttackKind::Passive || transcript.eve_records.is_empty() {
        return None;
    }
    let mut kept = 0usize;
    let mut known = 0usize;
    for (record, eve) in transcript.records.iter().zip(&transcript.eve_records) {
        if record.verdict == Some(Verdict::SiftedKept) {
            kept += 1;
            if eve.eve_bit_guess == Some(record.alice_key_bit) {
                known += 1;
            }
        }
    }
    (kept > 0).then(|| known as f64 / kept as f64)
}
