//! Protocol orchestration over a simulated quantum channel and an
//! authenticated public broadcast channel.
//!
//! One round:
//! 1. the source draws `n` and prepares `channel_state(n)`, sending qubit 0
//!    toward Alice (through the adversary) and keeping qubit 1;
//! 2. Alice draws a key bit and a basis index, performs the GBM and
//!    broadcasts only the outcome;
//! 3. in repeater mode each station forwards the source's qubit over its
//!    link and broadcasts its hop outcome;
//! 4. Bob corrects, measures in the X basis and acknowledges.
//!
//! Reveals of `n`, `m` and station links are accepted only after the
//! acknowledgment, either in one batch after all rounds or right after each
//! round. Sifting, disclosure of a random subset of sifted bits, and QBER
//! estimation follow.

mod messages;
mod parties;
mod transcript;

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use messages::{
    first_ordering_violation, ClassicalMessage, MessageKind, MessageLog, Party, Payload,
};
pub use parties::{Alice, Bob, Phase, Source, Station};
pub use transcript::{
    classify, estimate_qber, read_transcript, sift, CharlieView, ParseError, ParsedRun,
    ParsedTranscript, RunRecord, SiftPartition, Summary, Transcript, Verdict,
};

use crate::adversary::{
    fake_source_hook, intercept_reteleport_hook, passive_hook, AttackKind, AttackModel, EveRecord,
};
use crate::gbs::{ChannelParam, GbsError};
use crate::rng::{substream, Domain};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_090_817;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid adversary: {0}")]
    InvalidAdversary(String),
    #[error(transparent)]
    Quantum(#[from] GbsError),
    #[error("round {round_id}: {party} in phase {phase:?} cannot move to {attempted:?}")]
    OutOfOrder {
        party: Party,
        round_id: u64,
        phase: Phase,
        attempted: Phase,
    },
    #[error("round {round_id}: missing {kind:?} message")]
    MissingMessage { round_id: u64, kind: MessageKind },
    #[error("premature sift: round {round_id} has unrevealed parameters")]
    PrematureSift { round_id: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Standard,
    Controlled,
    Repeater,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "standard" => Ok(Mode::Standard),
            "controlled" => Ok(Mode::Controlled),
            "repeater" => Ok(Mode::Repeater),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Standard => "standard",
            Mode::Controlled => "controlled",
            Mode::Repeater => "repeater",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RevealSchedule {
    /// All reveals after the last round.
    Batch,
    /// Reveals right after each round's acknowledgment.
    PerRound,
}

impl FromStr for RevealSchedule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "batch" => Ok(RevealSchedule::Batch),
            "per-round" | "per_round" => Ok(RevealSchedule::PerRound),
            other => Err(format!("unknown reveal schedule {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub channel_params: Vec<ChannelParam>,
    pub num_rounds: u64,
    pub disclosure_fraction: f64,
    pub mode: Mode,
    /// One link per repeater station, station 0 being closest to Alice.
    pub repeater_links: Vec<ChannelParam>,
    pub seed: u64,
    pub reveal: RevealSchedule,
    /// Controlled mode: whether Charlie announces his preparations.
    pub charlie_discloses: bool,
    /// Repeater mode: stations that never disclose.
    pub withheld_stations: Vec<usize>,
    /// Worker threads for round evaluation. Output does not depend on it.
    pub threads: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            channel_params: vec![
                ChannelParam::new(0.5).unwrap(),
                ChannelParam::new(0.9).unwrap(),
            ],
            num_rounds: 100_000,
            disclosure_fraction: 0.5,
            mode: Mode::Standard,
            repeater_links: Vec::new(),
            seed: DEFAULT_SEED,
            reveal: RevealSchedule::Batch,
            charlie_discloses: true,
            withheld_stations: Vec::new(),
            threads: 1,
        }
    }
}

impl ProtocolConfig {
    pub fn with_params(params: &[f64]) -> Result<Self, ProtocolError> {
        let channel_params = params
            .iter()
            .map(|&n| ChannelParam::new(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            channel_params,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |msg: String| Err(ProtocolError::InvalidConfig(msg));
        let params = &self.channel_params;
        if params.len() < 2 {
            return bad(format!(
                "need at least two channel parameters, got {}",
                params.len()
            ));
        }
        for (i, p) in params.iter().enumerate() {
            if p.is_unit() {
                return bad(format!("channel parameter {p} must be below 1"));
            }
            if params[..i].contains(p) {
                return bad(format!("channel parameter {p} repeated"));
            }
        }
        if self.num_rounds == 0 {
            return bad("num_rounds must be positive".into());
        }
        if !(self.disclosure_fraction > 0.0 && self.disclosure_fraction < 1.0) {
            return bad(format!(
                "disclosure_fraction {} outside (0, 1)",
                self.disclosure_fraction
            ));
        }
        if self.mode == Mode::Repeater && self.repeater_links.is_empty() {
            return bad("repeater mode needs at least one station link".into());
        }
        if let Some(s) = self
            .withheld_stations
            .iter()
            .find(|&&s| s >= self.repeater_links.len())
        {
            return bad(format!("withheld station {s} does not exist"));
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }
}

/// Everything one round leaves behind before reveals.
struct RoundOutput {
    messages: Vec<ClassicalMessage>,
    record: RunRecord,
    eve: Option<EveRecord>,
    source: Source,
    alice: Alice,
    stations: Vec<Station>,
}

struct RoundContext<'a> {
    config: &'a ProtocolConfig,
    adversary: &'a AttackModel,
    source_role: Party,
}

fn play_round(ctx: &RoundContext<'_>, round_id: u64) -> Result<RoundOutput, ProtocolError> {
    let config = ctx.config;
    let params = &config.channel_params;
    let seed = config.seed;
    let mut log = MessageLog::new();

    let source_discloses = match ctx.source_role {
        Party::Charlie => config.charlie_discloses,
        Party::Station(0) => !config.withheld_stations.contains(&0),
        _ => true,
    };
    let (source, source_pair) = Source::prepare(
        ctx.source_role,
        round_id,
        params,
        source_discloses,
        &mut substream(seed, Domain::Source, round_id),
    );

    let mut alice_rng = substream(seed, Domain::Alice, round_id);
    let mut alice = Alice::new(round_id, params.len(), &mut alice_rng);
    let mut bob = Bob::new(round_id);
    bob.hold_pair()?;

    // The Alice-bound qubit passes the adversary.
    let eve = ctx
        .adversary
        .begin_round(round_id, params[source.n_index()]);
    alice.receive_half()?;
    let alice_pair = eve
        .as_ref()
        .map_or(&source_pair, |e| e.alice_pair())
        .clone();
    let (announce, partner) = alice.measure(&alice_pair, params, &mut alice_rng)?;
    let announced = match announce.payload {
        Payload::Outcome(o) => o,
        _ => unreachable!("GBM announcement carries an outcome"),
    };
    log.push(announce);

    let (line_qubit, eve_record) = match eve {
        None => (passive_hook(partner), None),
        Some(eve) => {
            let out = match ctx.adversary.kind {
                AttackKind::InterceptReteleport => {
                    intercept_reteleport_hook(eve, &partner, announced, &source_pair)?
                }
                AttackKind::FakeSource => fake_source_hook(eve, &partner, announced)?,
                AttackKind::Passive => unreachable!("passive adversary has no round state"),
            };
            (out.line_qubit, Some(out.record))
        }
    };

    let mut stations = Vec::new();
    let mut at_bob = line_qubit;
    if config.mode == Mode::Repeater {
        let mut relay_rng = substream(seed, Domain::Relay, round_id);
        for (i, &link) in config.repeater_links.iter().enumerate() {
            let mut station =
                Station::new(i, round_id, link, !config.withheld_stations.contains(&i));
            let (msg, next) = station.relay(&at_bob, &log, &mut relay_rng)?;
            log.push(msg);
            at_bob = next;
            stations.push(station);
        }
    }

    let last_station = (!stations.is_empty()).then(|| stations.len() - 1);
    bob.read_outcomes(&log, last_station)?;
    let ack = bob.measure(&at_bob, &mut substream(seed, Domain::Bob, round_id))?;
    log.push(ack);

    let record = RunRecord {
        round_id,
        bob_n_index: None,
        alice_m_index: None,
        alice_key_bit: alice.key(),
        gbm_outcome: announced,
        bob_bit: bob.bit().expect("Bob measured"),
        relay_intact: None,
        verdict: None,
    };
    let mut out = RoundOutput {
        messages: Vec::new(),
        record,
        eve: eve_record,
        source,
        alice,
        stations,
    };
    if config.reveal == RevealSchedule::PerRound {
        reveal_round(&mut out, &mut log)?;
    }
    out.messages = log.into_messages();
    Ok(out)
}

fn reveal_round(round: &mut RoundOutput, log: &mut MessageLog) -> Result<(), ProtocolError> {
    if let Some(m) = round.source.reveal(log)? {
        log.push(m);
    }
    let m = round.alice.reveal(log)?;
    log.push(m);
    for station in &mut round.stations {
        if let Some(m) = station.reveal(log)? {
            log.push(m);
        }
    }
    Ok(())
}

/// Fills the revealed fields of every record from the public log.
fn apply_reveals(
    records: &mut [RunRecord],
    messages: &[ClassicalMessage],
    mode: Mode,
    links: usize,
) {
    let mut station_links: Vec<Vec<Option<ChannelParam>>> = vec![vec![None; links]; records.len()];
    let mut relay_outcomes: Vec<Vec<Option<crate::gbs::GbsOutcome>>> =
        vec![vec![None; links]; records.len()];
    for m in messages {
        let Some(r) = records.get_mut(m.round_id as usize) else {
            continue;
        };
        match (m.kind, m.payload, m.sender) {
            (MessageKind::RevealN | MessageKind::CharlieReveal, Payload::ParamIndex(i), _) => {
                r.bob_n_index = Some(i)
            }
            (MessageKind::RevealM, Payload::ParamIndex(i), _) => r.alice_m_index = Some(i),
            (MessageKind::StationReveal, Payload::Link(l), Party::Station(s)) => {
                station_links[m.round_id as usize][s] = Some(l)
            }
            (MessageKind::RelayOutcome, Payload::Outcome(o), Party::Station(s)) => {
                relay_outcomes[m.round_id as usize][s] = Some(o)
            }
            _ => {}
        }
    }
    for (i, r) in records.iter_mut().enumerate() {
        r.relay_intact = if mode != Mode::Repeater {
            Some(true)
        } else {
            station_links[i]
                .iter()
                .zip(&relay_outcomes[i])
                .map(|(link, outcome)| match (link, outcome) {
                    (Some(l), Some(o)) => Some(l.is_unit() || o.is_success()),
                    _ => None,
                })
                .collect::<Option<Vec<bool>>>()
                .map(|hops| hops.into_iter().all(|ok| ok))
        };
    }
}

fn execute(config: &ProtocolConfig, adversary: &AttackModel) -> Result<Transcript, ProtocolError> {
    config.validate()?;
    adversary
        .validate()
        .map_err(ProtocolError::InvalidAdversary)?;
    if adversary.informed
        && !config
            .channel_params
            .iter()
            .all(|p| adversary.guess_pool.contains(p))
    {
        return Err(ProtocolError::InvalidAdversary(
            "an informed adversary needs every channel parameter in its pool".into(),
        ));
    }
    if adversary.kind == AttackKind::FakeSource && config.mode != Mode::Controlled {
        return Err(ProtocolError::InvalidAdversary(
            "fake-source attack requires controlled mode".into(),
        ));
    }
    let ctx = RoundContext {
        config,
        adversary,
        source_role: match config.mode {
            Mode::Standard => Party::Bob,
            Mode::Controlled => Party::Charlie,
            Mode::Repeater => Party::Station(0),
        },
    };

    let rounds: Vec<RoundOutput> = if config.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| ProtocolError::InvalidConfig(e.to_string()))?;
        pool.install(|| {
            (0..config.num_rounds)
                .into_par_iter()
                .map(|r| play_round(&ctx, r))
                .collect::<Result<_, _>>()
        })?
    } else {
        (0..config.num_rounds)
            .map(|r| play_round(&ctx, r))
            .collect::<Result<_, _>>()?
    };

    let mut log = MessageLog::new();
    let mut records = Vec::with_capacity(rounds.len());
    let mut eve_records = Vec::new();
    let mut parties = Vec::with_capacity(rounds.len());
    for mut round in rounds {
        log.extend(std::mem::take(&mut round.messages));
        records.push(round.record.clone());
        eve_records.extend(round.eve.take());
        parties.push(round);
    }
    if config.reveal == RevealSchedule::Batch {
        for round in &mut parties {
            reveal_round(round, &mut log)?;
        }
    }
    let charlie_indices = (config.mode == Mode::Controlled)
        .then(|| parties.iter().map(|r| r.source.n_index()).collect());
    drop(parties);

    apply_reveals(
        &mut records,
        log.messages(),
        config.mode,
        config.repeater_links.len(),
    );
    for (e, r) in eve_records.iter_mut().zip(&records) {
        e.knew_bit = e.eve_bit_guess == Some(r.alice_key_bit);
    }

    let partition = match sift(&records) {
        Ok(p) => p,
        Err(ProtocolError::PrematureSift { round_id }) => {
            log.push(ClassicalMessage::new(
                round_id,
                Party::Alice,
                MessageKind::Abort,
                Payload::Empty,
            ));
            return Ok(Transcript {
                config: config.clone(),
                attack: adversary.kind,
                records,
                messages: log.into_messages(),
                alice_key: Vec::new(),
                bob_key: Vec::new(),
                disclosed: Vec::new(),
                qber: 0.0,
                aborted: true,
                eve_records,
                charlie_indices,
            });
        }
        Err(e) => return Err(e),
    };
    for &i in &partition.discarded {
        records[i].verdict = Some(classify(&records[i])?);
    }

    let sifted = partition.kept.len();
    let disclose_count =
        ((config.disclosure_fraction * sifted as f64).round() as usize).min(sifted);
    let mut chosen = sample(
        &mut substream(config.seed, Domain::Disclosure, 0),
        sifted,
        disclose_count,
    )
    .into_vec();
    chosen.sort_unstable();
    let mut disclosed_flags = vec![false; sifted];
    for &c in &chosen {
        disclosed_flags[c] = true;
    }

    let mut alice_key = Vec::new();
    let mut bob_key = Vec::new();
    let mut disclosed = Vec::new();
    for (slot, &i) in partition.kept.iter().enumerate() {
        let r = &mut records[i];
        if disclosed_flags[slot] {
            r.verdict = Some(Verdict::SiftedDisclosed);
            disclosed.push((r.alice_key_bit, r.bob_bit));
            log.push(ClassicalMessage::new(
                r.round_id,
                Party::Alice,
                MessageKind::DiscloseBit,
                Payload::Bit(r.alice_key_bit),
            ));
            log.push(ClassicalMessage::new(
                r.round_id,
                Party::Bob,
                MessageKind::DiscloseBit,
                Payload::Bit(r.bob_bit),
            ));
        } else {
            r.verdict = Some(Verdict::SiftedKept);
            alice_key.push(r.alice_key_bit);
            bob_key.push(r.bob_bit);
        }
    }

    Ok(Transcript {
        config: config.clone(),
        attack: adversary.kind,
        records,
        messages: log.into_messages(),
        alice_key,
        bob_key,
        qber: estimate_qber(&disclosed),
        disclosed,
        aborted: false,
        eve_records,
        charlie_indices,
    })
}

/// Runs the protocol in the configured mode.
pub fn run_protocol(
    config: &ProtocolConfig,
    adversary: &AttackModel,
) -> Result<Transcript, ProtocolError> {
    execute(config, adversary)
}

/// Controlled run: Charlie distributes the pairs and decides whether to
/// announce his preparations.
pub fn controlled_run(
    config: &ProtocolConfig,
    adversary: &AttackModel,
    charlie_discloses: bool,
) -> Result<Transcript, ProtocolError> {
    if config.mode != Mode::Controlled {
        return Err(ProtocolError::InvalidConfig(
            "controlled run needs controlled mode".into(),
        ));
    }
    let config = ProtocolConfig {
        charlie_discloses,
        ..config.clone()
    };
    execute(&config, adversary)
}

/// Repeater run over `config.repeater_links`.
pub fn repeater_run(
    config: &ProtocolConfig,
    adversary: &AttackModel,
) -> Result<Transcript, ProtocolError> {
    if config.mode != Mode::Repeater {
        return Err(ProtocolError::InvalidConfig(
            "repeater run needs repeater mode".into(),
        ));
    }
    execute(config, adversary)
}
