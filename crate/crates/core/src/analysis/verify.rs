//! Regression suite: closed forms, oracle marginals, frozen oracle values,
//! scan shape and Monte Carlo agreement, each reduced to a pass/fail check.

use std::collections::BTreeMap;

use serde::Serialize;

use super::monte_carlo::monte_carlo;
use super::oracle::{exhaustive_oracle, Eavesdropper};
use super::report::{compare_report, SIGMA_POLICY};
use super::scan::{scan, GridSpec};
use super::AnalysisError;
use crate::adversary::AttackModel;
use crate::gbs::{p_final_rate, p_suc, p_wrong, ChannelParam, GbsOutcome, KeyBit};
use crate::protocol::{run_protocol, Mode, ProtocolConfig, DEFAULT_SEED};

/// Absolute tolerance for exact values.
pub const EXACT_TOL: f64 = 1e-12;

/// Frozen reference values, stored with 15 significant digits.
const PUBLISHED: [(&str, f64); 14] = [
    ("final_rate_0.5_0.9", 0.203622600042734),
    ("final_rate_0.55_0.55", 0.178307624861388),
    ("p_suc_0.5", 0.32),
    ("p_suc_0.9", 0.494490400170935),
    ("p_wrong_0.9_0.5", 0.0754716981132075),
    ("objective_0.95_0.05", 0.0563489138203023),
    ("outcome_phi_plus_0.5", 0.34),
    ("outcome_phi_minus_0.5", 0.16),
    ("outcome_psi_plus_0.5", 0.16),
    ("outcome_psi_minus_0.5", 0.34),
    ("intercept_qber_0.5_0.9", 0.5),
    ("intercept_eve_information_0.5_0.9", 0.959624350308951),
    ("intercept_sifted_mismatch_0.5_0.9", 0.109469185922286),
    ("fake_source_qber_0.5_0.9", 0.0403756496910482),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceValues(BTreeMap<String, f64>);

impl Default for ReferenceValues {
    fn default() -> Self {
        Self::published()
    }
}

impl ReferenceValues {
    pub fn published() -> Self {
        Self(PUBLISHED.iter().map(|&(k, v)| (k.to_string(), v)).collect())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> f64 {
        self.0[key]
    }

    /// Replaces a known value.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), AnalysisError> {
        match self.0.get_mut(key) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(AnalysisError::InvalidInput(format!(
                "unknown reference value {key:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub trials: u64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: DEFAULT_SEED,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn near(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            expected,
            tolerance,
            pass: (observed - expected).abs() <= tolerance,
        }
    }

    fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self {
            name: name.into(),
            observed: v,
            expected: 1.0,
            tolerance: 0.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn p(x: f64) -> ChannelParam {
    ChannelParam::new(x).expect("constant in range")
}

pub fn verify(opts: &VerifyOptions, refs: &ReferenceValues) -> Result<VerifyReport, AnalysisError> {
    let mut checks = Vec::new();
    let pair = vec![p(0.5), p(0.9)];

    checks.push(Check::near(
        "final_rate_0.5_0.9",
        p_final_rate(&pair)?,
        refs.get("final_rate_0.5_0.9"),
        EXACT_TOL,
    ));
    checks.push(Check::near(
        "final_rate_0.55_0.55",
        p_final_rate(&[p(0.55), p(0.55)])?,
        refs.get("final_rate_0.55_0.55"),
        EXACT_TOL,
    ));
    checks.push(Check::near(
        "p_suc_0.5",
        p_suc(p(0.5)),
        refs.get("p_suc_0.5"),
        EXACT_TOL,
    ));
    checks.push(Check::near(
        "p_suc_0.9",
        p_suc(p(0.9)),
        refs.get("p_suc_0.9"),
        EXACT_TOL,
    ));
    checks.push(Check::near(
        "p_wrong_0.9_0.5",
        p_wrong(p(0.9), p(0.5)),
        refs.get("p_wrong_0.9_0.5"),
        EXACT_TOL,
    ));

    let passive = exhaustive_oracle(&pair, &Eavesdropper::Passive)?;
    checks.push(Check::near(
        "oracle_total_mass",
        passive.total_mass(),
        1.0,
        EXACT_TOL,
    ));
    checks.push(Check::near(
        "oracle_final_rate_0.5_0.9",
        passive.final_rate(),
        refs.get("final_rate_0.5_0.9"),
        EXACT_TOL,
    ));
    checks.push(Check::near(
        "oracle_sift_probability_0.5_0.9",
        passive.sift_probability(),
        refs.get("final_rate_0.5_0.9"),
        EXACT_TOL,
    ));
    checks.push(Check::near(
        "oracle_p_wrong_0.9_0.5",
        passive
            .bob_error_given(0, 1, GbsOutcome::PhiMinus)
            .unwrap_or(f64::NAN),
        refs.get("p_wrong_0.9_0.5"),
        EXACT_TOL,
    ));
    let matched = passive
        .outcome_distribution(0, 0, Some(KeyBit::Zero))
        .unwrap_or([f64::NAN; 4]);
    for (o, key) in GbsOutcome::ALL.into_iter().zip([
        "outcome_phi_plus_0.5",
        "outcome_phi_minus_0.5",
        "outcome_psi_plus_0.5",
        "outcome_psi_minus_0.5",
    ]) {
        checks.push(Check::near(
            format!("oracle_{key}"),
            matched[o.index()],
            refs.get(key),
            EXACT_TOL,
        ));
    }

    let intercept_model = AttackModel::intercept(pair.clone(), opts.seed ^ 0x5eed);
    let intercept = exhaustive_oracle(&pair, &Eavesdropper::from(&intercept_model))?;
    checks.push(Check::near(
        "oracle_intercept_qber_0.5_0.9",
        intercept.qber().unwrap_or(f64::NAN),
        refs.get("intercept_qber_0.5_0.9"),
        EXACT_TOL,
    ));
    checks.push(Check::near(
        "oracle_intercept_eve_information_0.5_0.9",
        intercept.eve_information().unwrap_or(f64::NAN),
        refs.get("intercept_eve_information_0.5_0.9"),
        EXACT_TOL,
    ));
    checks.push(Check::near(
        "oracle_intercept_sifted_mismatch_0.5_0.9",
        intercept.sifted_mismatch_probability(),
        refs.get("intercept_sifted_mismatch_0.5_0.9"),
        EXACT_TOL,
    ));
    let fake_model = AttackModel::fake_source(pair.clone(), opts.seed ^ 0xfa4e);
    let fake = exhaustive_oracle(&pair, &Eavesdropper::from(&fake_model))?;
    checks.push(Check::near(
        "oracle_fake_source_qber_0.5_0.9",
        fake.qber().unwrap_or(f64::NAN),
        refs.get("fake_source_qber_0.5_0.9"),
        EXACT_TOL,
    ));

    let surface = scan(&GridSpec::default())?;
    let corner = [(0.95, 0.05), (0.05, 0.95)].contains(&(surface.argmax.n1, surface.argmax.n2));
    checks.push(Check::flag("scan_argmax_is_max_gap_corner", corner));
    checks.push(Check::near(
        "scan_diagonal_max",
        surface.diagonal_max.unwrap_or(f64::NAN),
        0.0,
        0.0,
    ));
    checks.push(Check::near(
        "scan_objective_0.95_0.05",
        surface.at(0.95, 0.05).map_or(f64::NAN, |pt| pt.objective),
        refs.get("objective_0.95_0.05"),
        EXACT_TOL,
    ));

    let base = ProtocolConfig {
        channel_params: pair.clone(),
        num_rounds: opts.trials,
        seed: opts.seed,
        threads: opts.threads,
        ..ProtocolConfig::default()
    };
    for (label, model, oracle) in [
        ("passive", AttackModel::passive(), &passive),
        ("intercept", intercept_model, &intercept),
    ] {
        let stats = monte_carlo(&base, &model, opts.trials)?;
        let report = compare_report(&stats, oracle)?;
        for row in &report.rows {
            checks.push(Check {
                name: format!("mc_{label}_{}", row.statistic),
                observed: row.z,
                expected: 0.0,
                tolerance: SIGMA_POLICY,
                pass: row.pass,
            });
        }
    }
    let honest = run_protocol(&base, &AttackModel::passive())?;
    checks.push(Check::flag(
        "passive_keys_agree",
        honest.alice_key == honest.bob_key,
    ));
    checks.push(Check::near("passive_qber", honest.qber, 0.0, 0.0));

    let controlled = ProtocolConfig {
        mode: Mode::Controlled,
        charlie_discloses: false,
        ..base.clone()
    };
    let withheld = run_protocol(&controlled, &AttackModel::passive())?;
    checks.push(Check::flag(
        "controlled_withheld_aborts",
        withheld.aborted && withheld.alice_key.is_empty(),
    ));

    let chain = ProtocolConfig {
        mode: Mode::Repeater,
        repeater_links: vec![ChannelParam::unit(); 3],
        ..base.clone()
    };
    let relayed = run_protocol(&chain, &AttackModel::passive())?;
    checks.push(Check::flag(
        "repeater_unit_links_agree",
        !relayed.aborted && relayed.alice_key == relayed.bob_key && relayed.qber == 0.0,
    ));
    let silent = ProtocolConfig {
        withheld_stations: vec![1],
        ..chain
    };
    checks.push(Check::flag(
        "repeater_withheld_aborts",
        run_protocol(&silent, &AttackModel::passive())?.aborted,
    ));

    Ok(VerifyReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> VerifyOptions {
        VerifyOptions {
            trials: 2_000,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn published_values_pass() {
        let report = verify(&quick(), &ReferenceValues::published()).unwrap();
        let failed: Vec<_> = report.failures().collect();
        assert!(failed.is_empty(), "{failed:?}");
    }

    #[test]
    fn wrong_constant_is_caught() {
        let mut refs = ReferenceValues::published();
        refs.set("p_suc_0.5", 0.33).unwrap();
        let report = verify(&quick(), &refs).unwrap();
        assert_eq!(
            report
                .failures()
                .map(|c| c.name.as_str())
                .collect::<Vec<_>>(),
            ["p_suc_0.5"]
        );
        assert!(refs.set("no_such_value", 1.0).is_err());
    }
}
