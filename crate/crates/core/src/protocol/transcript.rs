//! Round records, sifting, and the line-delimited transcript format.
//!
//! The transcript file is comma-separated. Each record type is introduced by
//! a header row whose first field is `record`; data rows carry a tag in the
//! first field:
//!
//! ```text
//! record,round_id,n_index,m_index,key_bit,outcome,bob_bit,verdict
//! run,0,1,1,0,PhiMinus,0,SiftedKept
//! ...
//! record,sifted_count,key_length,qber,aborted
//! summary,20362,10181,0,false
//! record,round_id,guess_index,guessed_e,eve_bit_guess,eve_gbm_outcome,knew_bit
//! eve,0,0,0.5,1,PsiPlus,true
//! ```
//!
//! Unrevealed indices and unassigned verdicts are empty fields. The `eve`
//! section is omitted for a passive adversary.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::messages::{ClassicalMessage, Payload};
use super::{ProtocolConfig, ProtocolError};
use crate::adversary::{AttackKind, EveRecord};
use crate::gbs::{ChannelParam, GbsOutcome, KeyBit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    DiscardMismatch,
    DiscardOutcome,
    SiftedKept,
    SiftedDisclosed,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::DiscardMismatch => "DiscardMismatch",
            Verdict::DiscardOutcome => "DiscardOutcome",
            Verdict::SiftedKept => "SiftedKept",
            Verdict::SiftedDisclosed => "SiftedDisclosed",
        }
    }

    pub fn is_sifted(self) -> bool {
        matches!(self, Verdict::SiftedKept | Verdict::SiftedDisclosed)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Verdict {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            Verdict::DiscardMismatch,
            Verdict::DiscardOutcome,
            Verdict::SiftedKept,
            Verdict::SiftedDisclosed,
        ]
        .into_iter()
        .find(|v| v.label() == s)
        .ok_or_else(|| format!("unknown verdict {s:?}"))
    }
}

/// One protocol round as seen by the audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub round_id: u64,
    /// Channel index, known once the source reveals it.
    pub bob_n_index: Option<usize>,
    /// Basis index, known once Alice reveals it.
    pub alice_m_index: Option<usize>,
    pub alice_key_bit: KeyBit,
    pub gbm_outcome: GbsOutcome,
    pub bob_bit: KeyBit,
    /// Whether every relay hop teleported faithfully; `None` until every
    /// station has disclosed its link. Always `Some(true)` without relays.
    pub relay_intact: Option<bool>,
    pub verdict: Option<Verdict>,
}

/// Verdict implied by the public data of a fully revealed record.
pub fn classify(record: &RunRecord) -> Result<Verdict, ProtocolError> {
    let premature = ProtocolError::PrematureSift {
        round_id: record.round_id,
    };
    let n = record.bob_n_index.ok_or(premature.clone())?;
    let m = record.alice_m_index.ok_or(premature.clone())?;
    let relay_intact = record.relay_intact.ok_or(premature)?;
    Ok(if n != m {
        Verdict::DiscardMismatch
    } else if !record.gbm_outcome.is_success() || !relay_intact {
        Verdict::DiscardOutcome
    } else {
        Verdict::SiftedKept
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiftPartition {
    pub kept: Vec<usize>,
    pub discarded: Vec<usize>,
}

/// Splits records (by position) into successful matched rounds and the rest.
pub fn sift(records: &[RunRecord]) -> Result<SiftPartition, ProtocolError> {
    let mut out = SiftPartition::default();
    for (i, r) in records.iter().enumerate() {
        if classify(r)?.is_sifted() {
            out.kept.push(i);
        } else {
            out.discarded.push(i);
        }
    }
    Ok(out)
}

/// Fraction of disclosed pairs that disagree; 0 when nothing was disclosed.
pub fn estimate_qber(disclosed: &[(KeyBit, KeyBit)]) -> f64 {
    if disclosed.is_empty() {
        return 0.0;
    }
    let mismatches = disclosed.iter().filter(|(a, b)| a != b).count();
    mismatches as f64 / disclosed.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sifted_count: usize,
    pub key_length: usize,
    pub qber: f64,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub config: ProtocolConfig,
    pub attack: AttackKind,
    pub records: Vec<RunRecord>,
    pub messages: Vec<ClassicalMessage>,
    pub alice_key: Vec<KeyBit>,
    pub bob_key: Vec<KeyBit>,
    pub disclosed: Vec<(KeyBit, KeyBit)>,
    pub qber: f64,
    pub aborted: bool,
    /// Audit metadata; one entry per round under an active adversary.
    pub eve_records: Vec<EveRecord>,
    pub(crate) charlie_indices: Option<Vec<usize>>,
}

/// Everything the distributor of a controlled run holds: its own preparation
/// choices and what it heard on the public channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CharlieView<'a> {
    pub n_indices: &'a [usize],
    pub heard: &'a [ClassicalMessage],
}

impl CharlieView<'_> {
    /// Rounds whose bit value appears anywhere in this view.
    pub fn rounds_with_bits(&self) -> Vec<u64> {
        self.heard
            .iter()
            .filter(|m| matches!(m.payload, Payload::Bit(_)))
            .map(|m| m.round_id)
            .collect()
    }
}

impl Transcript {
    pub fn summary(&self) -> Summary {
        Summary {
            sifted_count: self.sifted_count(),
            key_length: self.alice_key.len(),
            qber: self.qber,
            aborted: self.aborted,
        }
    }

    pub fn sifted_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.verdict.is_some_and(Verdict::is_sifted))
            .count()
    }

    pub fn count_verdict(&self, v: Verdict) -> usize {
        self.records.iter().filter(|r| r.verdict == Some(v)).count()
    }

    /// `None` outside controlled mode.
    pub fn charlie_view(&self) -> Option<CharlieView<'_>> {
        self.charlie_indices
            .as_deref()
            .map(|n_indices| CharlieView {
                n_indices,
                heard: &self.messages,
            })
    }

    /// Same transcript with the adversary audit removed.
    pub fn without_audit(&self) -> Transcript {
        Transcript {
            eve_records: Vec::new(),
            ..self.clone()
        }
    }

    /// Writes the line-delimited transcript format described in the module
    /// documentation.
    pub fn write_to<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(RUN_HEADER)?;
        for r in &self.records {
            w.write_record([
                "run".to_string(),
                r.round_id.to_string(),
                opt(r.bob_n_index),
                opt(r.alice_m_index),
                r.alice_key_bit.as_u8().to_string(),
                r.gbm_outcome.to_string(),
                r.bob_bit.as_u8().to_string(),
                opt(r.verdict),
            ])?;
        }
        let s = self.summary();
        w.write_record(SUMMARY_HEADER)?;
        w.write_record([
            "summary".to_string(),
            s.sifted_count.to_string(),
            s.key_length.to_string(),
            s.qber.to_string(),
            s.aborted.to_string(),
        ])?;
        if self.attack != AttackKind::Passive {
            w.write_record(EVE_HEADER)?;
            for e in &self.eve_records {
                w.write_record([
                    "eve".to_string(),
                    e.round_id.to_string(),
                    e.guess_index.to_string(),
                    e.guessed_e.to_string(),
                    opt(e.eve_bit_guess.map(KeyBit::as_u8)),
                    opt(e.eve_gbm_outcome),
                    e.knew_bit.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

const RUN_HEADER: [&str; 8] = [
    "record", "round_id", "n_index", "m_index", "key_bit", "outcome", "bob_bit", "verdict",
];
const SUMMARY_HEADER: [&str; 5] = ["record", "sifted_count", "key_length", "qber", "aborted"];
const EVE_HEADER: [&str; 7] = [
    "record",
    "round_id",
    "guess_index",
    "guessed_e",
    "eve_bit_guess",
    "eve_gbm_outcome",
    "knew_bit",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rows recovered from a transcript file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTranscript {
    pub runs: Vec<ParsedRun>,
    pub summary: Summary,
    pub eve: Vec<EveRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRun {
    pub round_id: u64,
    pub n_index: Option<usize>,
    pub m_index: Option<usize>,
    pub key_bit: KeyBit,
    pub outcome: GbsOutcome,
    pub bob_bit: KeyBit,
    pub verdict: Option<Verdict>,
}

impl From<&RunRecord> for ParsedRun {
    fn from(r: &RunRecord) -> Self {
        Self {
            round_id: r.round_id,
            n_index: r.bob_n_index,
            m_index: r.alice_m_index,
            key_bit: r.alice_key_bit,
            outcome: r.gbm_outcome,
            bob_bit: r.bob_bit,
            verdict: r.verdict,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
}

/// Reads a transcript written by [`Transcript::write_to`].
pub fn read_transcript<R: Read>(input: R) -> Result<ParsedTranscript, ParseError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut runs = Vec::new();
    let mut summary = None;
    let mut eve = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |msg: String| ParseError::Malformed { line, msg };
        let field = |i: usize| row.get(i).ok_or_else(|| bad(format!("missing field {i}")));
        fn num<T: FromStr>(s: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("bad number {s:?}"))
        }
        fn opt_num<T: FromStr>(s: &str) -> Result<Option<T>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        }
        fn bit(s: &str) -> Result<KeyBit, String> {
            num::<u8>(s).and_then(|b| KeyBit::from_u8(b).ok_or_else(|| format!("bad bit {s:?}")))
        }
        match field(0)? {
            "record" => {}
            "run" => runs.push(ParsedRun {
                round_id: num(field(1)?).map_err(bad)?,
                n_index: opt_num(field(2)?).map_err(bad)?,
                m_index: opt_num(field(3)?).map_err(bad)?,
                key_bit: bit(field(4)?).map_err(bad)?,
                outcome: field(5)?.parse().map_err(bad)?,
                bob_bit: bit(field(6)?).map_err(bad)?,
                verdict: match field(7)? {
                    "" => None,
                    v => Some(v.parse().map_err(bad)?),
                },
            }),
            "summary" => {
                summary = Some(Summary {
                    sifted_count: num(field(1)?).map_err(bad)?,
                    key_length: num(field(2)?).map_err(bad)?,
                    qber: num(field(3)?).map_err(bad)?,
                    aborted: num(field(4)?).map_err(bad)?,
                })
            }
            "eve" => eve.push(EveRecord {
                round_id: num(field(1)?).map_err(bad)?,
                guess_index: num(field(2)?).map_err(bad)?,
                guessed_e: ChannelParam::new(num(field(3)?).map_err(bad)?)
                    .map_err(|e| bad(e.to_string()))?,
                eve_bit_guess: match field(4)? {
                    "" => None,
                    b => Some(bit(b).map_err(bad)?),
                },
                eve_gbm_outcome: match field(5)? {
                    "" => None,
                    o => Some(o.parse().map_err(bad)?),
                },
                knew_bit: num(field(6)?).map_err(bad)?,
            }),
            tag => return Err(bad(format!("unknown record tag {tag:?}"))),
        }
    }
    let summary = summary.ok_or(ParseError::Malformed {
        line: 0,
        msg: "missing summary record".into(),
    })?;
    Ok(ParsedTranscript { runs, summary, eve })
}
