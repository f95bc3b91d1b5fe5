//! Authenticated public broadcast channel.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::gbs::{ChannelParam, GbsOutcome, KeyBit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
    Charlie,
    /// Repeater station, numbered from the one closest to Alice.
    Station(usize),
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Alice => f.write_str("Alice"),
            Party::Bob => f.write_str("Bob"),
            Party::Charlie => f.write_str("Charlie"),
            Party::Station(i) => write!(f, "Station{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    GbmOutcome,
    /// A repeater station's Bell-measurement result for its hop.
    RelayOutcome,
    BobMeasuredAck,
    RevealN,
    RevealM,
    CharlieReveal,
    /// A repeater station discloses its link parameter.
    StationReveal,
    DiscloseBit,
    Abort,
}

impl MessageKind {
    /// Kinds that disclose a secret parameter choice and must wait for
    /// Bob's acknowledgment.
    pub fn is_reveal(self) -> bool {
        matches!(
            self,
            MessageKind::RevealN
                | MessageKind::RevealM
                | MessageKind::CharlieReveal
                | MessageKind::StationReveal
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Empty,
    Outcome(GbsOutcome),
    ParamIndex(usize),
    Link(ChannelParam),
    Bit(KeyBit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub round_id: u64,
    pub sender: Party,
    pub kind: MessageKind,
    pub payload: Payload,
}

impl ClassicalMessage {
    pub fn new(round_id: u64, sender: Party, kind: MessageKind, payload: Payload) -> Self {
        Self {
            round_id,
            sender,
            kind,
            payload,
        }
    }
}

/// Ordered broadcast log. Every party reads the same log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MessageLog {
    messages: Vec<ClassicalMessage>,
    acked: HashSet<u64>,
}

impl MessageLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, msg: ClassicalMessage) {
        if msg.kind == MessageKind::BobMeasuredAck {
            self.acked.insert(msg.round_id);
        }
        self.messages.push(msg);
    }

    pub fn extend(&mut self, msgs: impl IntoIterator<Item = ClassicalMessage>) {
        for m in msgs {
            self.push(m);
        }
    }

    pub fn messages(&self) -> &[ClassicalMessage] {
        &self.messages
    }

    pub fn into_messages(self) -> Vec<ClassicalMessage> {
        self.messages
    }

    pub fn is_acked(&self, round_id: u64) -> bool {
        self.acked.contains(&round_id)
    }

    /// Searches from the end; in-round lookups touch only the tail.
    pub fn find(&self, round_id: u64, kind: MessageKind) -> Option<&ClassicalMessage> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.round_id == round_id && m.kind == kind)
    }

    pub fn find_from(
        &self,
        round_id: u64,
        kind: MessageKind,
        sender: Party,
    ) -> Option<&ClassicalMessage> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.round_id == round_id && m.kind == kind && m.sender == sender)
    }
}

/// Checks that no reveal precedes Bob's acknowledgment for its round.
/// Returns the position of the first violation.
pub fn first_ordering_violation(messages: &[ClassicalMessage]) -> Option<usize> {
    let mut acked = HashSet::new();
    for (pos, m) in messages.iter().enumerate() {
        if m.kind == MessageKind::BobMeasuredAck {
            acked.insert(m.round_id);
        } else if m.kind.is_reveal() && !acked.contains(&m.round_id) {
            return Some(pos);
        }
    }
    None
}
