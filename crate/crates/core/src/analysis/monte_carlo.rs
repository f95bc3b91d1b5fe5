//! Monte Carlo harness: runs the protocol and standardizes every tracked
//! frequency against its exact expectation.

use serde::Serialize;

use super::oracle::{exhaustive_oracle, Eavesdropper, OracleDistribution, MAX_ORACLE_PARAMS};
use super::AnalysisError;
use crate::adversary::{AttackKind, AttackModel};
use crate::gbs::{gbm_probabilities, ChannelParam, GbsOutcome};
use crate::protocol::{run_protocol, Mode, ProtocolConfig, Verdict};
use crate::quantum::Amplitude;

pub const MIN_TRIALS: u64 = 1_000;

/// Floor for standard deviations so that z-scores stay finite.
const SIGMA_FLOOR: f64 = 1e-12;

/// One tracked frequency: `hits / count` against `expected`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Statistic {
    pub name: String,
    pub hits: u64,
    pub count: u64,
    pub empirical: f64,
    pub expected: f64,
    pub sigma: f64,
    pub z: f64,
}

impl Statistic {
    pub fn binomial(name: impl Into<String>, hits: u64, count: u64, expected: f64) -> Self {
        let empirical = if count == 0 {
            0.0
        } else {
            hits as f64 / count as f64
        };
        let sigma = if count == 0 {
            SIGMA_FLOOR
        } else {
            (expected * (1.0 - expected) / count as f64)
                .sqrt()
                .max(SIGMA_FLOOR)
        };
        let z = if count == 0 {
            0.0
        } else {
            (empirical - expected) / sigma
        };
        Self {
            name: name.into(),
            hits,
            count,
            empirical,
            expected,
            sigma,
            z,
        }
    }

    /// Same counts, different reference value.
    pub fn against(&self, expected: f64) -> Self {
        Self::binomial(self.name.clone(), self.hits, self.count, expected)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    pub channel_params: Vec<ChannelParam>,
    pub attack: AttackKind,
    pub guess_pool: Vec<ChannelParam>,
    pub mode: Mode,
    pub trials: u64,
    pub aborted: bool,
    pub sifted_count: u64,
    pub kept_count: u64,
    pub disclosed_count: u64,
    pub disclosed_mismatches: u64,
    /// Rounds with channel and basis both equal to parameter `j`.
    pub match_counts: Vec<u64>,
    /// Of those, rounds with a success outcome.
    pub success_counts: Vec<u64>,
    pub outcome_counts: [u64; 4],
    pub eve_match_count: u64,
    pub eve_known_kept: u64,
    pub qber: f64,
    pub eve_information: Option<f64>,
    pub key_rate_pre_disclosure: f64,
    pub key_rate_post_disclosure: f64,
    pub z_scores: Vec<Statistic>,
}

impl TrialStats {
    pub fn max_abs_z(&self) -> f64 {
        self.z_scores.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }

    pub fn statistic(&self, name: &str) -> Option<&Statistic> {
        self.z_scores.iter().find(|s| s.name == name)
    }

    pub fn matched_rounds(&self) -> u64 {
        self.match_counts.iter().sum()
    }
}

/// Parameters of the pair Alice actually measures, each with its weight.
fn alice_pair_params(
    config: &ProtocolConfig,
    adversary: &AttackModel,
    n_index: usize,
) -> Vec<(ChannelParam, f64)> {
    match adversary.kind {
        AttackKind::Passive => vec![(config.channel_params[n_index], 1.0)],
        _ if adversary.informed => vec![(config.channel_params[n_index], 1.0)],
        _ => {
            let w = 1.0 / adversary.guess_pool.len() as f64;
            adversary.guess_pool.iter().map(|&e| (e, w)).collect()
        }
    }
}

fn plus_state_probabilities(n: ChannelParam, m: ChannelParam) -> [f64; 4] {
    let h = Amplitude::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    gbm_probabilities(h, h, n, m).expect("valid parameters")
}

/// Applies the statistic names used across reports.
pub fn success_name(j: usize) -> String {
    format!("success_given_match[{j}]")
}

pub fn outcome_name(o: GbsOutcome) -> String {
    format!("outcome_frequency[{}]", o.label())
}

fn oracle_for(config: &ProtocolConfig, adversary: &AttackModel) -> Option<OracleDistribution> {
    let chain_is_transparent =
        config.mode != Mode::Repeater || config.repeater_links.iter().all(|l| l.is_unit());
    if !chain_is_transparent
        || config.channel_params.len() > MAX_ORACLE_PARAMS
        || adversary.guess_pool.len() > MAX_ORACLE_PARAMS
    {
        return None;
    }
    exhaustive_oracle(&config.channel_params, &Eavesdropper::from(adversary)).ok()
}

/// Runs `trials` rounds and tabulates the result.
pub fn monte_carlo(
    config: &ProtocolConfig,
    adversary: &AttackModel,
    trials: u64,
) -> Result<TrialStats, AnalysisError> {
    if trials < MIN_TRIALS {
        return Err(AnalysisError::InvalidInput(format!(
            "at least {MIN_TRIALS} trials required, got {trials}"
        )));
    }
    let config = ProtocolConfig {
        num_rounds: trials,
        ..config.clone()
    };
    let transcript = run_protocol(&config, adversary)?;
    let params = &config.channel_params;
    let n = params.len();

    let mut match_counts = vec![0u64; n];
    let mut success_counts = vec![0u64; n];
    let mut outcome_counts = [0u64; 4];
    let mut sifted = 0u64;
    let mut kept = 0u64;
    let mut eve_match = 0u64;
    let mut eve_known_kept = 0u64;
    for (i, r) in transcript.records.iter().enumerate() {
        outcome_counts[r.gbm_outcome.index()] += 1;
        let eve = transcript.eve_records.get(i);
        // Alice reveals her basis even in aborted runs.
        if let (Some(e), Some(m)) = (eve, r.alice_m_index) {
            if e.guessed_e == params[m] {
                eve_match += 1;
            }
        }
        if let (Some(a), Some(b)) = (r.bob_n_index, r.alice_m_index) {
            if a == b {
                match_counts[a] += 1;
                if r.gbm_outcome.is_success() {
                    success_counts[a] += 1;
                }
            }
        }
        match r.verdict {
            Some(Verdict::SiftedKept) => {
                sifted += 1;
                kept += 1;
                if eve.is_some_and(|e| e.eve_bit_guess == Some(r.alice_key_bit)) {
                    eve_known_kept += 1;
                }
            }
            Some(Verdict::SiftedDisclosed) => sifted += 1,
            _ => {}
        }
    }
    let disclosed = transcript.disclosed.len() as u64;
    let mismatches = transcript.disclosed.iter().filter(|(a, b)| a != b).count() as u64;
    let eve_information = (adversary.kind != AttackKind::Passive && kept > 0)
        .then(|| eve_known_kept as f64 / kept as f64);

    let mut z = Vec::new();
    let matched: u64 = match_counts.iter().sum();
    if !transcript.aborted {
        z.push(Statistic::binomial(
            "match_frequency",
            matched,
            trials,
            1.0 / n as f64,
        ));
    }
    let mut sifted_expected = 0.0;
    for j in 0..n {
        let p: f64 = alice_pair_params(&config, adversary, j)
            .iter()
            .map(|&(a, w)| {
                let probs = plus_state_probabilities(a, params[j]);
                w * (probs[GbsOutcome::PhiMinus.index()] + probs[GbsOutcome::PsiPlus.index()])
            })
            .sum();
        sifted_expected += p / (n * n) as f64;
        if !transcript.aborted {
            z.push(Statistic::binomial(
                success_name(j),
                success_counts[j],
                match_counts[j],
                p,
            ));
        }
    }
    let mut outcome_expected = [0.0; 4];
    for j in 0..n {
        for &m in params {
            for (a, w) in alice_pair_params(&config, adversary, j) {
                let probs = plus_state_probabilities(a, m);
                for k in 0..4 {
                    outcome_expected[k] += w * probs[k] / (n * n) as f64;
                }
            }
        }
    }
    for o in GbsOutcome::ALL {
        z.push(Statistic::binomial(
            outcome_name(o),
            outcome_counts[o.index()],
            trials,
            outcome_expected[o.index()],
        ));
    }

    let transparent =
        config.mode != Mode::Repeater || config.repeater_links.iter().all(|l| l.is_unit());
    if !transcript.aborted && transparent {
        z.push(Statistic::binomial(
            "sifted_rate",
            sifted,
            trials,
            sifted_expected,
        ));
        let oracle = oracle_for(&config, adversary);
        let qber_expected = match adversary.kind {
            AttackKind::Passive => Some(0.0),
            _ => oracle.as_ref().and_then(|o| o.qber()),
        };
        if let Some(q) = qber_expected {
            z.push(Statistic::binomial("qber", mismatches, disclosed, q));
        }
        if let Some(info) = oracle.as_ref().and_then(|o| o.eve_information()) {
            z.push(Statistic::binomial(
                "eve_information",
                eve_known_kept,
                kept,
                info,
            ));
        }
    }
    if adversary.kind != AttackKind::Passive {
        let hits = adversary
            .guess_pool
            .iter()
            .filter(|e| params.contains(e))
            .count();
        let expected = match adversary.informed {
            true => 1.0 / n as f64,
            false => hits as f64 / (adversary.guess_pool.len() * n) as f64,
        };
        z.push(Statistic::binomial(
            "eve_match_frequency",
            eve_match,
            trials,
            expected,
        ));
    }

    Ok(TrialStats {
        channel_params: params.clone(),
        attack: adversary.kind,
        guess_pool: adversary.guess_pool.clone(),
        mode: config.mode,
        trials,
        aborted: transcript.aborted,
        sifted_count: sifted,
        kept_count: kept,
        disclosed_count: disclosed,
        disclosed_mismatches: mismatches,
        match_counts,
        success_counts,
        outcome_counts,
        eve_match_count: eve_match,
        eve_known_kept,
        qber: transcript.qber,
        eve_information,
        key_rate_pre_disclosure: sifted as f64 / trials as f64,
        key_rate_post_disclosure: kept as f64 / trials as f64,
        z_scores: z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(params: &[f64]) -> ProtocolConfig {
        ProtocolConfig::with_params(params).unwrap()
    }

    #[test]
    fn rejects_short_runs() {
        assert!(monte_carlo(&config(&[0.5, 0.9]), &AttackModel::passive(), 999).is_err());
    }

    #[test]
    fn passive_statistics_are_consistent() {
        let s = monte_carlo(&config(&[0.5, 0.9]), &AttackModel::passive(), 20_000).unwrap();
        assert_eq!(s.qber, 0.0);
        assert!(s.max_abs_z() < 5.0, "{:?}", s.z_scores);
        assert!(s.key_rate_post_disclosure < s.key_rate_pre_disclosure);
        assert!(s.statistic("sifted_rate").is_some());
        assert!(s.eve_information.is_none());
    }

    #[test]
    fn intercept_statistics_track_the_oracle() {
        let c = config(&[0.5, 0.9]);
        let a = AttackModel::intercept(c.channel_params.clone(), 3);
        let s = monte_carlo(&c, &a, 20_000).unwrap();
        assert!(s.qber > 0.3);
        assert!(s.statistic("qber").is_some());
        assert!(s.statistic("eve_information").is_some());
        assert!(s.max_abs_z() < 5.0, "{:?}", s.z_scores);
    }

    #[test]
    fn informed_fake_source_is_silent_and_omniscient() {
        let c = ProtocolConfig {
            mode: Mode::Controlled,
            ..config(&[0.5, 0.9])
        };
        let a = AttackModel::fake_source(c.channel_params.clone(), 3).informed();
        let s = monte_carlo(&c, &a, 10_000).unwrap();
        assert_eq!(s.qber, 0.0);
        assert_eq!(s.eve_information, Some(1.0));
        assert!(s.max_abs_z() < 5.0, "{:?}", s.z_scores);
    }

    #[test]
    fn binomial_z_is_finite_at_the_edges() {
        let s = Statistic::binomial("x", 0, 100, 0.0);
        assert_eq!(s.z, 0.0);
        let s = Statistic::binomial("x", 1, 100, 0.0);
        assert!(s.z.is_finite() && s.z > 5.0);
        let s = Statistic::binomial("x", 0, 0, 0.3);
        assert_eq!(s.z, 0.0);
    }
}
