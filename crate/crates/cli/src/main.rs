//! `pqkd` command-line driver.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 I/O failure.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pqkd::adversary::{eve_information, AttackKind};
use pqkd::analysis::output::{write_oracle_csv, write_scan_csv, write_verify_csv};
use pqkd::analysis::{
    exhaustive_oracle, scan, verify, AnalysisError, Eavesdropper, ReferenceValues, VerifyOptions,
};
use pqkd::protocol::{run_protocol, ProtocolError, Transcript};

use config::Settings;

#[derive(Parser)]
#[command(
    name = "pqkd",
    version,
    about = "Key distribution over partially entangled channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the protocol and write the transcript.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run the protocol against an eavesdropper.
    Attack {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        eve: EveArgs,
    },
    /// Evaluate the security-rate objective on a parameter grid.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid_min: Option<String>,
        #[arg(long)]
        grid_max: Option<String>,
        #[arg(long)]
        grid_step: Option<String>,
    },
    /// Run the regression suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// `key = value` file overriding frozen reference values.
        #[arg(long)]
        references: Option<PathBuf>,
    },
    /// Enumerate the exact branch distribution of one round.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        eve: EveArgs,
        /// Eve leaves the captured qubit alone (intercept only).
        #[arg(long)]
        no_reinject: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Rounds to run (Monte Carlo trials for `verify`).
    #[arg(long)]
    trials: Option<String>,
    /// Comma-separated channel parameters.
    #[arg(long)]
    params: Option<String>,
    /// standard, controlled or repeater.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    charlie_discloses: Option<String>,
    /// Comma-separated link parameters, one per repeater station.
    #[arg(long)]
    repeater_links: Option<String>,
    /// Comma-separated indices of stations that never disclose.
    #[arg(long)]
    withheld_stations: Option<String>,
    /// batch or per-round.
    #[arg(long)]
    reveal: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

#[derive(Args)]
struct EveArgs {
    /// passive, intercept or fake-source.
    #[arg(long)]
    attack: Option<String>,
    #[arg(long)]
    guess_pool: Option<String>,
    #[arg(long)]
    eve_seed: Option<String>,
    /// match or independent.
    #[arg(long)]
    reinject: Option<String>,
    /// Let Eve know each round's prepared channel parameter.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    informed: Option<String>,
}

enum Failure {
    Verification(String),
    Config(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Config(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn load(common: &Common, overrides: &[(&str, &Option<String>)]) -> Result<Settings, Failure> {
    let mut settings = Settings::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        settings
            .apply_text(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    }
    let flags = [
        ("seed", &common.seed),
        ("num_rounds", &common.trials),
        ("channel_params", &common.params),
        ("mode", &common.mode),
        ("charlie_discloses", &common.charlie_discloses),
        ("repeater_links", &common.repeater_links),
        ("withheld_stations", &common.withheld_stations),
        ("reveal", &common.reveal),
        ("threads", &common.threads),
    ];
    for (key, value) in flags.iter().chain(overrides) {
        if let Some(v) = value {
            settings
                .apply(key, v)
                .map_err(|e| Failure::Config(format!("--{}: {e}", key.replace('_', "-"))))?;
        }
    }
    Ok(settings)
}

fn eve_overrides(eve: &EveArgs) -> [(&'static str, &Option<String>); 5] {
    [
        ("attack", &eve.attack),
        ("guess_pool", &eve.guess_pool),
        ("eve_seed", &eve.eve_seed),
        ("reinject", &eve.reinject),
        ("informed", &eve.informed),
    ]
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    Ok((path, BufWriter::new(file)))
}

fn finish(path: &Path, mut w: BufWriter<File>) -> Result<(), Failure> {
    w.flush().map_err(io_err(path))
}

fn csv_err<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn write_transcript(dir: &Path, t: &Transcript) -> Result<(), Failure> {
    let (path, mut w) = create(dir, "transcript.csv")?;
    t.write_to(&mut w).map_err(csv_err(&path))?;
    finish(&path, w)?;

    let s = t.summary();
    let info = eve_information(t)
        .map(|x| x.to_string())
        .unwrap_or_default();
    let (path, mut w) = create(dir, "summary.csv")?;
    writeln!(w, "sifted_count,key_length,qber,aborted,eve_information")
        .and_then(|_| {
            writeln!(
                w,
                "{},{},{},{},{}",
                s.sifted_count, s.key_length, s.qber, s.aborted, info
            )
        })
        .map_err(io_err(&path))?;
    finish(&path, w)?;

    println!(
        "rounds={} sifted={} key_length={} qber={} aborted={}{}",
        t.records.len(),
        s.sifted_count,
        s.key_length,
        s.qber,
        s.aborted,
        if info.is_empty() {
            String::new()
        } else {
            format!(" eve_information={info}")
        }
    );
    Ok(())
}

fn cmd_run(common: &Common) -> Result<(), Failure> {
    let settings = load(common, &[])?;
    let t = run_protocol(&settings.protocol, &settings.attack_model())?;
    write_transcript(&common.out, &t)
}

fn cmd_attack(common: &Common, eve: &EveArgs) -> Result<(), Failure> {
    let mut settings = load(common, &eve_overrides(eve))?;
    if settings.attack == AttackKind::Passive && eve.attack.is_none() {
        settings.attack = AttackKind::InterceptReteleport;
    }
    let model = settings.attack_model();
    let t = run_protocol(&settings.protocol, &model)?;
    write_transcript(&common.out, &t)?;
    if let Ok(oracle) = exhaustive_oracle(
        &settings.protocol.channel_params,
        &Eavesdropper::from(&model),
    ) {
        if let Some(q) = oracle.qber() {
            println!("oracle_qber={q}");
        }
    }
    Ok(())
}

fn cmd_scan(common: &Common, grid: [(&str, &Option<String>); 3]) -> Result<(), Failure> {
    let settings = load(common, &grid)?;
    let result = scan(&settings.grid)?;
    let (path, mut w) = create(&common.out, "scan.csv")?;
    write_scan_csv(&result, &mut w).map_err(csv_err(&path))?;
    finish(&path, w)?;
    let a = result.argmax;
    println!("argmax n1={} n2={} objective={}", a.n1, a.n2, a.objective);
    println!(
        "points={} diagonal_max={}",
        result.points.len(),
        result.diagonal_max.unwrap_or(0.0)
    );
    Ok(())
}

fn load_references(path: &Path) -> Result<ReferenceValues, Failure> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut refs = ReferenceValues::published();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad =
            |msg: String| Failure::Config(format!("{}: line {}: {msg}", path.display(), i + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected key = value".into()))?;
        let value: f64 = value.trim().parse().map_err(|e| bad(format!("{e}")))?;
        refs.set(key.trim(), value)
            .map_err(|e| bad(e.to_string()))?;
    }
    Ok(refs)
}

fn cmd_verify(common: &Common, references: &Option<PathBuf>) -> Result<(), Failure> {
    let settings = load(common, &[])?;
    let refs = match references {
        Some(p) => load_references(p)?,
        None => ReferenceValues::published(),
    };
    let opts = VerifyOptions {
        trials: if common.trials.is_some() {
            settings.protocol.num_rounds
        } else {
            VerifyOptions::default().trials
        },
        seed: settings.protocol.seed,
        threads: settings.protocol.threads,
    };
    let report = verify(&opts, &refs)?;
    let (path, mut w) = create(&common.out, "verify.csv")?;
    write_verify_csv(&report, &mut w).map_err(csv_err(&path))?;
    finish(&path, w)?;

    let failed: Vec<_> = report.failures().collect();
    println!("checks={} failed={}", report.checks.len(), failed.len());
    if failed.is_empty() {
        return Ok(());
    }
    let list = failed
        .iter()
        .map(|c| {
            format!(
                "  {}: observed {} expected {} tolerance {}",
                c.name, c.observed, c.expected, c.tolerance
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Err(Failure::Verification(format!(
        "verification failed:\n{list}"
    )))
}

fn cmd_oracle(common: &Common, eve: &EveArgs, no_reinject: bool) -> Result<(), Failure> {
    let settings = load(common, &eve_overrides(eve))?;
    let model = settings.attack_model();
    let scenario = if no_reinject {
        if model.kind != AttackKind::InterceptReteleport {
            return Err(Failure::Config(
                "--no-reinject needs --attack intercept".into(),
            ));
        }
        Eavesdropper::InterceptWithoutReinjection {
            pool: model.guess_pool.clone(),
        }
    } else {
        model.validate().map_err(Failure::Config)?;
        Eavesdropper::from(&model)
    };
    let oracle = exhaustive_oracle(&settings.protocol.channel_params, &scenario)?;
    let (path, mut w) = create(&common.out, "oracle.csv")?;
    write_oracle_csv(&oracle, &mut w).map_err(csv_err(&path))?;
    finish(&path, w)?;

    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let rows = [
        ("total_mass", Some(oracle.total_mass())),
        ("match_probability", Some(oracle.match_probability())),
        ("sift_probability", Some(oracle.sift_probability())),
        ("final_rate", Some(oracle.final_rate())),
        ("qber", oracle.qber()),
        (
            "sifted_mismatch_probability",
            Some(oracle.sifted_mismatch_probability()),
        ),
        ("eve_information", oracle.eve_information()),
        ("eve_match_probability", oracle.eve_match_probability()),
    ];
    let (path, mut w) = create(&common.out, "oracle_marginals.csv")?;
    writeln!(w, "quantity,value").map_err(io_err(&path))?;
    for (name, value) in rows {
        writeln!(w, "{name},{}", fmt(value)).map_err(io_err(&path))?;
        println!("{name}={}", fmt(value));
    }
    finish(&path, w)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common } => cmd_run(common),
        Command::Attack { common, eve } => cmd_attack(common, eve),
        Command::Scan {
            common,
            grid_min,
            grid_max,
            grid_step,
        } => cmd_scan(
            common,
            [
                ("grid_min", grid_min),
                ("grid_max", grid_max),
                ("grid_step", grid_step),
            ],
        ),
        Command::Verify { common, references } => cmd_verify(common, references),
        Command::Oracle {
            common,
            eve,
            no_reinject,
        } => cmd_oracle(common, eve, *no_reinject),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pqkd: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
