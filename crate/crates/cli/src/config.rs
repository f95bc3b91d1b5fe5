//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Recognized keys:
//!
//! ```text
//! channel_params      = 0.5, 0.9
//! num_rounds          = 100000
//! disclosure_fraction = 0.5
//! mode                = standard | controlled | repeater
//! repeater_links      = 1, 1, 1
//! withheld_stations   = 1
//! charlie_discloses   = true
//! reveal              = batch | per-round
//! seed                = 20090817
//! threads             = 1
//! attack              = passive | intercept | fake-source
//! guess_pool          = 0.5, 0.9
//! eve_seed            = 7
//! reinject            = match | independent
//! grid_min            = 0.05
//! grid_max            = 0.95
//! grid_step           = 0.05
//! ```

use std::str::FromStr;

use pqkd::adversary::{AttackKind, AttackModel, ReinjectBasis};
use pqkd::analysis::GridSpec;
use pqkd::gbs::ChannelParam;
use pqkd::protocol::{ProtocolConfig, RevealSchedule};

/// Eve's seed when none is configured.
pub const DEFAULT_EVE_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub protocol: ProtocolConfig,
    pub attack: AttackKind,
    pub guess_pool: Option<Vec<ChannelParam>>,
    pub eve_seed: u64,
    pub reinject: ReinjectBasis,
    pub informed: bool,
    pub grid: GridSpec,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            protocol: ProtocolConfig::default(),
            attack: AttackKind::Passive,
            guess_pool: None,
            eve_seed: DEFAULT_EVE_SEED,
            reinject: ReinjectBasis::MatchGuess,
            informed: false,
            grid: GridSpec::default(),
        }
    }
}

impl Settings {
    /// Eve's model; the guess pool defaults to the public channel set.
    pub fn attack_model(&self) -> AttackModel {
        let pool = self
            .guess_pool
            .clone()
            .unwrap_or_else(|| self.protocol.channel_params.clone());
        AttackModel {
            kind: self.attack,
            guess_pool: if self.attack == AttackKind::Passive {
                Vec::new()
            } else {
                pool
            },
            eve_seed: self.eve_seed,
            reinject: self.reinject,
            informed: self.informed,
        }
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let p = &mut self.protocol;
        match key {
            "channel_params" => p.channel_params = parse_params(value)?,
            "num_rounds" | "trials" => p.num_rounds = parse(key, value)?,
            "disclosure_fraction" => p.disclosure_fraction = parse(key, value)?,
            "mode" => p.mode = parse(key, value)?,
            "repeater_links" => p.repeater_links = parse_params(value)?,
            "withheld_stations" => p.withheld_stations = parse_list(key, value)?,
            "charlie_discloses" => p.charlie_discloses = parse(key, value)?,
            "reveal" => p.reveal = parse::<RevealSchedule>(key, value)?,
            "seed" => p.seed = parse(key, value)?,
            "threads" => p.threads = parse(key, value)?,
            "attack" => self.attack = parse(key, value)?,
            "guess_pool" => self.guess_pool = Some(parse_params(value)?),
            "eve_seed" => self.eve_seed = parse(key, value)?,
            "reinject" => {
                self.reinject = match value {
                    "match" => ReinjectBasis::MatchGuess,
                    "independent" => ReinjectBasis::Independent,
                    other => return Err(format!("reinject: unknown basis rule {other:?}")),
                }
            }
            "informed" => self.informed = parse(key, value)?,
            "grid_min" => {
                let v = parse(key, value)?;
                self.grid.n1.min = v;
                self.grid.n2.min = v;
            }
            "grid_max" => {
                let v = parse(key, value)?;
                self.grid.n1.max = v;
                self.grid.n2.max = v;
            }
            "grid_step" => {
                let v = parse(key, value)?;
                self.grid.n1.step = v;
                self.grid.n2.step = v;
            }
            other => return Err(format!("unknown configuration key {other:?}")),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            self.apply(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("{key}: cannot parse {value:?}: {e}"))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

pub fn parse_params(value: &str) -> Result<Vec<ChannelParam>, String> {
    parse_list::<f64>("parameter list", value)?
        .into_iter()
        .map(|x| ChannelParam::new(x).map_err(|e| e.to_string()))
        .collect()
}
