//! CSV and JSON emitters. Every CSV starts with a fixed header row.
//!
//! | file          | columns |
//! |---------------|---------|
//! | scan surface  | `n1,n2,p_wrong,rate,objective` |
//! | trial stats   | `statistic,hits,count,empirical,expected,sigma,z` |
//! | comparison    | `statistic,empirical,reference,abs_deviation,z,pass` |
//! | verification  | `check,observed,expected,tolerance,pass` |
//! | oracle        | `n_index,m_index,key_bit,outcome,bob_bit,e_index,reinject_index,eve_guess,eve_outcome,weight` |

use std::io::Write;

use serde::Serialize;

use super::monte_carlo::TrialStats;
use super::oracle::OracleDistribution;
use super::report::ComparisonReport;
use super::scan::ScanResult;
use super::verify::VerifyReport;

pub const SCAN_HEADER: [&str; 5] = ["n1", "n2", "p_wrong", "rate", "objective"];
pub const STATS_HEADER: [&str; 7] = [
    "statistic",
    "hits",
    "count",
    "empirical",
    "expected",
    "sigma",
    "z",
];
pub const REPORT_HEADER: [&str; 6] = [
    "statistic",
    "empirical",
    "reference",
    "abs_deviation",
    "z",
    "pass",
];
pub const VERIFY_HEADER: [&str; 5] = ["check", "observed", "expected", "tolerance", "pass"];
pub const ORACLE_HEADER: [&str; 10] = [
    "n_index",
    "m_index",
    "key_bit",
    "outcome",
    "bob_bit",
    "e_index",
    "reinject_index",
    "eve_guess",
    "eve_outcome",
    "weight",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_scan_csv<W: Write>(result: &ScanResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCAN_HEADER)?;
    for p in &result.points {
        w.write_record([
            p.n1.to_string(),
            p.n2.to_string(),
            p.p_wrong.to_string(),
            p.rate.to_string(),
            p.objective.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stats_csv<W: Write>(stats: &TrialStats, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATS_HEADER)?;
    for s in &stats.z_scores {
        w.write_record([
            s.name.clone(),
            s.hits.to_string(),
            s.count.to_string(),
            s.empirical.to_string(),
            s.expected.to_string(),
            s.sigma.to_string(),
            s.z.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_csv<W: Write>(report: &ComparisonReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.statistic.clone(),
            r.empirical.to_string(),
            r.reference.to_string(),
            r.abs_deviation.to_string(),
            r.z.to_string(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_verify_csv<W: Write>(report: &VerifyReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VERIFY_HEADER)?;
    for c in &report.checks {
        w.write_record([
            c.name.clone(),
            c.observed.to_string(),
            c.expected.to_string(),
            c.tolerance.to_string(),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_oracle_csv<W: Write>(oracle: &OracleDistribution, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ORACLE_HEADER)?;
    for b in &oracle.branches {
        w.write_record([
            b.n_index.to_string(),
            b.m_index.to_string(),
            b.key.as_u8().to_string(),
            b.outcome.label().to_string(),
            b.bob_bit.as_u8().to_string(),
            opt(b.eve.map(|e| e.e_index)),
            opt(b.eve.map(|e| e.reinject_index)),
            opt(b.eve.map(|e| e.guess.as_u8())),
            opt(b.eve.and_then(|e| e.outcome).map(|o| o.label())),
            b.weight.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(value: &T, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")
}
