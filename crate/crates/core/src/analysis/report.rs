//! Empirical-versus-exact comparison tables.

use serde::Serialize;

use super::monte_carlo::{outcome_name, success_name, Statistic, TrialStats};
use super::oracle::{Eavesdropper, OracleDistribution};
use super::AnalysisError;
use crate::adversary::AttackKind;
use crate::gbs::GbsOutcome;

/// Pass threshold in standard deviations.
pub const SIGMA_POLICY: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub statistic: String,
    pub empirical: f64,
    pub reference: f64,
    pub abs_deviation: f64,
    pub z: f64,
    pub pass: bool,
}

impl ReportRow {
    pub fn from_statistic(s: &Statistic) -> Self {
        Self {
            statistic: s.name.clone(),
            empirical: s.empirical,
            reference: s.expected,
            abs_deviation: (s.empirical - s.expected).abs(),
            z: s.z,
            pass: s.z.abs() <= SIGMA_POLICY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub attack: AttackKind,
    pub trials: u64,
    pub rows: Vec<ReportRow>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

fn oracle_value(oracle: &OracleDistribution, name: &str) -> Option<f64> {
    match name {
        "match_frequency" => Some(oracle.match_probability()),
        "sifted_rate" => Some(oracle.sift_probability()),
        "qber" => oracle.qber(),
        "eve_information" => oracle.eve_information(),
        "eve_match_frequency" => oracle.eve_match_probability(),
        _ => {
            if let Some(o) = GbsOutcome::ALL
                .into_iter()
                .find(|&o| outcome_name(o) == name)
            {
                return Some(oracle.outcome_marginal()[o.index()]);
            }
            (0..oracle.channel_params.len())
                .find(|&j| success_name(j) == name)
                .and_then(|j| oracle.success_given_match(j))
        }
    }
}

/// Restandardizes every tracked statistic against the oracle.
pub fn compare_report(
    stats: &TrialStats,
    oracle: &OracleDistribution,
) -> Result<ComparisonReport, AnalysisError> {
    if stats.channel_params != oracle.channel_params {
        return Err(AnalysisError::MismatchedParameters(format!(
            "trial channel set {:?} differs from oracle set {:?}",
            stats.channel_params, oracle.channel_params
        )));
    }
    if oracle.eavesdropper.kind() != Some(stats.attack) {
        return Err(AnalysisError::MismatchedParameters(format!(
            "trial attack {} differs from oracle scenario {:?}",
            stats.attack, oracle.eavesdropper
        )));
    }
    let oracle_pool = match &oracle.eavesdropper {
        Eavesdropper::InterceptReteleport { pool, .. } | Eavesdropper::FakeSource { pool, .. } => {
            pool.as_slice()
        }
        _ => &[],
    };
    if stats.attack != AttackKind::Passive && stats.guess_pool != oracle_pool {
        return Err(AnalysisError::MismatchedParameters(
            "guess pools differ".into(),
        ));
    }

    let rows = stats
        .z_scores
        .iter()
        .filter_map(|s| {
            oracle_value(oracle, &s.name).map(|v| ReportRow::from_statistic(&s.against(v)))
        })
        .collect();
    Ok(ComparisonReport {
        attack: stats.attack,
        trials: stats.trials,
        rows,
    })
}
