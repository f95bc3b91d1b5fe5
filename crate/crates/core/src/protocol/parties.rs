//! Per-round party state machines.
//!
//! Each party moves `Idle → PairSent → OutcomeReceived → Measured →
//! Revealed` (skipping phases that do not apply to its role) and reads only
//! the public log plus its own local state.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::messages::{ClassicalMessage, MessageKind, MessageLog, Party, Payload};
use super::ProtocolError;
use crate::gbs::{
    self, channel_state, correction_for, gbm_teleport, ChannelParam, GbsOutcome, KeyBit,
};
use crate::quantum::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    PairSent,
    OutcomeReceived,
    Measured,
    Revealed,
}

fn advance(
    party: Party,
    round_id: u64,
    phase: &mut Phase,
    from: Phase,
    to: Phase,
) -> Result<(), ProtocolError> {
    if *phase != from {
        return Err(ProtocolError::OutOfOrder {
            party,
            round_id,
            phase: *phase,
            attempted: to,
        });
    }
    *phase = to;
    Ok(())
}

fn require_ack(
    party: Party,
    round_id: u64,
    phase: Phase,
    log: &MessageLog,
) -> Result<(), ProtocolError> {
    if !log.is_acked(round_id) {
        return Err(ProtocolError::OutOfOrder {
            party,
            round_id,
            phase,
            attempted: Phase::Revealed,
        });
    }
    Ok(())
}

/// Whoever prepares the partially entangled pair: Bob, Charlie, or the
/// repeater station closest to Alice.
#[derive(Debug, Clone)]
pub struct Source {
    role: Party,
    round_id: u64,
    phase: Phase,
    n_index: usize,
    discloses: bool,
}

impl Source {
    /// Draws `n` uniformly and prepares `channel_state(n)`. Qubit 0 is sent
    /// toward Alice, qubit 1 is retained.
    pub fn prepare(
        role: Party,
        round_id: u64,
        params: &[ChannelParam],
        discloses: bool,
        rng: &mut ChaCha8Rng,
    ) -> (Self, StateVector) {
        let n_index = rng.random_range(0..params.len());
        let source = Self {
            role,
            round_id,
            phase: Phase::PairSent,
            n_index,
            discloses,
        };
        (source, channel_state(params[n_index]))
    }

    pub fn role(&self) -> Party {
        self.role
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Private preparation record. Used by the audit and for the
    /// distributor's own view.
    pub fn n_index(&self) -> usize {
        self.n_index
    }

    /// Announces `n` once Bob has acknowledged. `None` when withholding.
    pub fn reveal(&mut self, log: &MessageLog) -> Result<Option<ClassicalMessage>, ProtocolError> {
        require_ack(self.role, self.round_id, self.phase, log)?;
        if !self.discloses {
            return Ok(None);
        }
        advance(
            self.role,
            self.round_id,
            &mut self.phase,
            Phase::PairSent,
            Phase::Revealed,
        )?;
        let kind = if self.role == Party::Charlie {
            MessageKind::CharlieReveal
        } else {
            MessageKind::RevealN
        };
        Ok(Some(ClassicalMessage::new(
            self.round_id,
            self.role,
            kind,
            Payload::ParamIndex(self.n_index),
        )))
    }
}

#[derive(Debug, Clone)]
pub struct Alice {
    round_id: u64,
    phase: Phase,
    key: KeyBit,
    m_index: usize,
}

impl Alice {
    /// Draws the key bit and the basis index for the round.
    pub fn new(round_id: u64, num_params: usize, rng: &mut ChaCha8Rng) -> Self {
        let key = if rng.random::<bool>() {
            KeyBit::One
        } else {
            KeyBit::Zero
        };
        let m_index = rng.random_range(0..num_params);
        Self {
            round_id,
            phase: Phase::Idle,
            key,
            m_index,
        }
    }

    pub fn key(&self) -> KeyBit {
        self.key
    }

    pub fn m_index(&self) -> usize {
        self.m_index
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn receive_half(&mut self) -> Result<(), ProtocolError> {
        advance(
            Party::Alice,
            self.round_id,
            &mut self.phase,
            Phase::Idle,
            Phase::PairSent,
        )
    }

    /// GBM on (key qubit, received half). Broadcasts only the outcome and
    /// returns the uncorrected partner state.
    pub fn measure(
        &mut self,
        pair: &StateVector,
        params: &[ChannelParam],
        rng: &mut ChaCha8Rng,
    ) -> Result<(ClassicalMessage, StateVector), ProtocolError> {
        advance(
            Party::Alice,
            self.round_id,
            &mut self.phase,
            Phase::PairSent,
            Phase::Measured,
        )?;
        let gbm = gbm_teleport(&self.key.state(), pair, params[self.m_index], rng.random())?;
        let msg = ClassicalMessage::new(
            self.round_id,
            Party::Alice,
            MessageKind::GbmOutcome,
            Payload::Outcome(gbm.outcome),
        );
        Ok((msg, gbm.partner))
    }

    pub fn reveal(&mut self, log: &MessageLog) -> Result<ClassicalMessage, ProtocolError> {
        require_ack(Party::Alice, self.round_id, self.phase, log)?;
        advance(
            Party::Alice,
            self.round_id,
            &mut self.phase,
            Phase::Measured,
            Phase::Revealed,
        )?;
        Ok(ClassicalMessage::new(
            self.round_id,
            Party::Alice,
            MessageKind::RevealM,
            Payload::ParamIndex(self.m_index),
        ))
    }
}

/// Bob as receiver.
#[derive(Debug, Clone)]
pub struct Bob {
    round_id: u64,
    phase: Phase,
    corrections: Vec<GbsOutcome>,
    bit: Option<KeyBit>,
}

impl Bob {
    pub fn new(round_id: u64) -> Self {
        Self {
            round_id,
            phase: Phase::Idle,
            corrections: Vec::new(),
            bit: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn bit(&self) -> Option<KeyBit> {
        self.bit
    }

    pub fn hold_pair(&mut self) -> Result<(), ProtocolError> {
        advance(
            Party::Bob,
            self.round_id,
            &mut self.phase,
            Phase::Idle,
            Phase::PairSent,
        )
    }

    /// Reads Alice's outcome and, with a relay chain, the last hop's outcome.
    pub fn read_outcomes(
        &mut self,
        log: &MessageLog,
        last_station: Option<usize>,
    ) -> Result<(), ProtocolError> {
        advance(
            Party::Bob,
            self.round_id,
            &mut self.phase,
            Phase::PairSent,
            Phase::OutcomeReceived,
        )?;
        if let Some(station) = last_station {
            self.corrections.push(outcome_in(
                log,
                self.round_id,
                MessageKind::RelayOutcome,
                Party::Station(station),
            )?);
        }
        self.corrections.push(outcome_in(
            log,
            self.round_id,
            MessageKind::GbmOutcome,
            Party::Alice,
        )?);
        Ok(())
    }

    /// Applies the corrections in announcement order, measures X and
    /// acknowledges.
    pub fn measure(
        &mut self,
        qubit: &StateVector,
        rng: &mut ChaCha8Rng,
    ) -> Result<ClassicalMessage, ProtocolError> {
        advance(
            Party::Bob,
            self.round_id,
            &mut self.phase,
            Phase::OutcomeReceived,
            Phase::Measured,
        )?;
        let mut q = qubit.clone();
        for &o in &self.corrections {
            q = q
                .apply_single_qubit(0, &correction_for(o))
                .map_err(gbs::GbsError::from)?;
        }
        let (bit, _) = q.measure_x(0, rng.random()).map_err(gbs::GbsError::from)?;
        self.bit = KeyBit::from_u8(bit);
        Ok(ClassicalMessage::new(
            self.round_id,
            Party::Bob,
            MessageKind::BobMeasuredAck,
            Payload::Empty,
        ))
    }
}

fn outcome_in(
    log: &MessageLog,
    round_id: u64,
    kind: MessageKind,
    sender: Party,
) -> Result<GbsOutcome, ProtocolError> {
    match log.find_from(round_id, kind, sender).map(|m| m.payload) {
        Some(Payload::Outcome(o)) => Ok(o),
        _ => Err(ProtocolError::MissingMessage { round_id, kind }),
    }
}

/// Repeater station forwarding the in-flight qubit across its own link.
#[derive(Debug, Clone)]
pub struct Station {
    index: usize,
    round_id: u64,
    phase: Phase,
    link: ChannelParam,
    discloses: bool,
}

impl Station {
    pub fn new(index: usize, round_id: u64, link: ChannelParam, discloses: bool) -> Self {
        Self {
            index,
            round_id,
            phase: Phase::Idle,
            link,
            discloses,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Corrects the incoming qubit by the previous hop's announcement, then
    /// teleports it over `channel_state(link)` with a matched GBM. Returns
    /// the announcement and the qubit at the next node before correction.
    pub fn relay(
        &mut self,
        incoming: &StateVector,
        log: &MessageLog,
        rng: &mut ChaCha8Rng,
    ) -> Result<(ClassicalMessage, StateVector), ProtocolError> {
        let me = Party::Station(self.index);
        advance(
            me,
            self.round_id,
            &mut self.phase,
            Phase::Idle,
            Phase::Measured,
        )?;
        let qubit = if self.index == 0 {
            incoming.clone()
        } else {
            let prev = outcome_in(
                log,
                self.round_id,
                MessageKind::RelayOutcome,
                Party::Station(self.index - 1),
            )?;
            incoming
                .apply_single_qubit(0, &correction_for(prev))
                .map_err(gbs::GbsError::from)?
        };
        let hop = gbm_teleport(&qubit, &channel_state(self.link), self.link, rng.random())?;
        let msg = ClassicalMessage::new(
            self.round_id,
            me,
            MessageKind::RelayOutcome,
            Payload::Outcome(hop.outcome),
        );
        Ok((msg, hop.partner))
    }

    pub fn reveal(&mut self, log: &MessageLog) -> Result<Option<ClassicalMessage>, ProtocolError> {
        let me = Party::Station(self.index);
        require_ack(me, self.round_id, self.phase, log)?;
        if !self.discloses {
            return Ok(None);
        }
        advance(
            me,
            self.round_id,
            &mut self.phase,
            Phase::Measured,
            Phase::Revealed,
        )?;
        Ok(Some(ClassicalMessage::new(
            self.round_id,
            me,
            MessageKind::StationReveal,
            Payload::Link(self.link),
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};

    #[test]
    fn reveal_before_ack_is_rejected() {
        let params = [
            ChannelParam::new(0.5).unwrap(),
            ChannelParam::new(0.9).unwrap(),
        ];
        let mut rng = substream(1, Domain::Source, 0);
        let (mut source, _) = Source::prepare(Party::Bob, 0, &params, true, &mut rng);
        let log = MessageLog::new();
        assert!(matches!(
            source.reveal(&log),
            Err(ProtocolError::OutOfOrder { .. })
        ));

        let mut alice = Alice::new(0, 2, &mut rng);
        alice.receive_half().unwrap();
        assert!(matches!(
            alice.reveal(&log),
            Err(ProtocolError::OutOfOrder { .. })
        ));
    }

    #[test]
    fn bob_cannot_measure_before_outcome() {
        let mut bob = Bob::new(0);
        bob.hold_pair().unwrap();
        let mut rng = substream(1, Domain::Bob, 0);
        assert!(matches!(
            bob.measure(&StateVector::x_eigenstate(0), &mut rng),
            Err(ProtocolError::OutOfOrder { .. })
        ));
        let log = MessageLog::new();
        assert!(matches!(
            bob.read_outcomes(&log, None),
            Err(ProtocolError::MissingMessage { .. })
        ));
    }

    #[test]
    fn withholding_source_stays_unrevealed() {
        let params = [
            ChannelParam::new(0.5).unwrap(),
            ChannelParam::new(0.9).unwrap(),
        ];
        let mut rng = substream(1, Domain::Source, 0);
        let (mut source, _) = Source::prepare(Party::Charlie, 0, &params, false, &mut rng);
        let mut log = MessageLog::new();
        log.push(ClassicalMessage::new(
            0,
            Party::Bob,
            MessageKind::BobMeasuredAck,
            Payload::Empty,
        ));
        assert_eq!(source.reveal(&log).unwrap(), None);
        assert_eq!(source.phase(), Phase::PairSent);
    }
}
