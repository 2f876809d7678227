//! Subcommand driver behind the `ldp-market` binary.
//!
//! Every subcommand is deterministic: the same flags and seed produce
//! byte-identical output. Stochastic subcommands require an explicit
//! `--seed` (there is no silent entropy). Exit codes are stable API:
//!
//! - 0  success (for `verify`: the artifact checked out)
//! - 2  filtering threshold not met
//! - 3  dispute (failed reveal, failed integrity, failed verification)
//! - 64 usage error (bad flags or parameter values)
//! - 65 input parse failure
//! - 66 missing input file

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::ldp::CoinBias;
use crate::ledger::{load_gas_config, FiatRate, GasSchedule};
use crate::protocol::{
    self, FaultInjection, MetadataPredicate, SessionSpec, SessionStatus, SessionTranscript,
};
use crate::sim::{self, AttackerMode, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_THRESHOLD: i32 = 2;
pub const EXIT_DISPUTE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_PARSE: i32 = 65;
pub const EXIT_MISSING_INPUT: i32 = 66;

#[derive(Parser)]
#[command(
    name = "ldp-market",
    version,
    about = "Privacy-preserving crowdsourced data marketplace: sessions, experiments, disputes, gas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one full market session end to end and emit its transcript.
    RunSession(RunSessionArgs),
    /// Estimator accuracy versus provider count.
    Accuracy(AccuracyArgs),
    /// Sequential-attacker experiment (no-noise vs rappor).
    Attacker(AttackerArgs),
    /// Closed-form attacker advantage over a grid of n and f.
    Advantage(AdvantageArgs),
    /// Check a transcript's response or filter commitments.
    Verify(VerifyArgs),
    /// Gas accounting for a transcript, with optional fiat conversion.
    Gas(GasArgs),
}

#[derive(Args)]
struct RunSessionArgs {
    /// Number of query choices.
    #[arg(long)]
    n: Option<usize>,
    /// Total price the consumer pays, in abstract currency units.
    #[arg(long)]
    price: Option<u64>,
    /// Required accepted responses N_R.
    #[arg(long = "n-r")]
    n_r: Option<u64>,
    /// How many providers submit.
    #[arg(long)]
    providers: Option<u64>,
    /// Truth-telling coin bias in (0, 1].
    #[arg(long)]
    f: Option<f64>,
    /// Root seed; required (directly or via --config).
    #[arg(long)]
    seed: Option<u64>,
    /// Filter predicate: all, region:<tag>, or after:<unix-seconds>.
    #[arg(long)]
    predicate: Option<String>,
    /// Reveal a wrong nonce at settlement (dispute demo).
    #[arg(long)]
    inject_wrong_reveal: bool,
    /// Flip a ciphertext bit of submission IDX after settlement.
    #[arg(long, value_name = "IDX")]
    inject_tamper: Option<usize>,
    /// Output format; transcripts are json only.
    #[arg(long)]
    format: Option<String>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file supplying defaults for any flag not given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// key=value file overriding the gas schedule / fiat rate.
    #[arg(long)]
    gas_config: Option<PathBuf>,
}

#[derive(Args)]
struct AccuracyArgs {
    /// Number of query choices.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated provider counts.
    #[arg(long)]
    counts: Option<String>,
    /// Mean of the truth distribution, in choice-index units
    /// (defaults to n/2).
    #[arg(long)]
    mean: Option<f64>,
    /// Standard deviation of the truth distribution.
    #[arg(long)]
    sd: Option<f64>,
    /// Truth-telling coin bias in (0, 1].
    #[arg(long)]
    f: Option<f64>,
    /// Root seed; required (directly or via --config).
    #[arg(long)]
    seed: Option<u64>,
    /// csv (default) or json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AttackerArgs {
    /// no-noise or rappor.
    #[arg(long)]
    mode: Option<String>,
    /// Number of sequential submissions the attacker observes.
    #[arg(long)]
    providers: Option<u64>,
    /// Number of query choices.
    #[arg(long)]
    n: Option<usize>,
    /// Truth-telling coin bias in (0, 1].
    #[arg(long)]
    f: Option<f64>,
    /// Root seed; required (directly or via --config).
    #[arg(long)]
    seed: Option<u64>,
    /// csv (default) or json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AdvantageArgs {
    /// Choice counts: comma list and/or inclusive ranges, e.g. 2..100.
    #[arg(long)]
    n_list: Option<String>,
    /// Comma-separated coin biases.
    #[arg(long)]
    f_list: Option<String>,
    /// csv (default) or json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Path to a session transcript JSON file.
    #[arg(long)]
    transcript: PathBuf,
    /// What to check: filter, or response:<hex address>.
    #[arg(long)]
    which: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GasArgs {
    /// Path to a session transcript JSON file.
    #[arg(long)]
    transcript: PathBuf,
    /// Dollars per gas unit (defaults to the pinned fixture rate).
    #[arg(long)]
    usd_per_gas: Option<f64>,
    /// Omit fiat conversion entirely.
    #[arg(long)]
    no_fiat: bool,
    /// key=value file that may supply usd_per_gas.
    #[arg(long)]
    gas_config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn parse(message: impl Into<String>) -> Self {
        Self { code: EXIT_PARSE, message: message.into() }
    }

    fn missing(message: impl Into<String>) -> Self {
        Self { code: EXIT_MISSING_INPUT, message: message.into() }
    }
}

/// Parses `args` (argv-style, program name first) and runs the
/// subcommand, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    EXIT_OK
                }
                _ => {
                    eprint!("{err}");
                    EXIT_USAGE
                }
            };
        }
    };
    let outcome = match cli.command {
        Command::RunSession(args) => cmd_run_session(args),
        Command::Accuracy(args) => cmd_accuracy(args),
        Command::Attacker(args) => cmd_attacker(args),
        Command::Advantage(args) => cmd_advantage(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Gas(args) => cmd_gas(args),
    };
    match outcome {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

/// Defaults read from a `--config` file; explicit flags always win.
struct Overrides(BTreeMap<String, String>);

impl Overrides {
    fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self(BTreeMap::new())) };
        let text = read_input(path)?;
        crate::config::parse_key_values(&text)
            .map(Self)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    }

    fn resolve<V: FromStr>(&self, flag: Option<V>, key: &str, default: V) -> Result<V, Failure> {
        self.resolve_opt(flag, key)?.map_or(Ok(default), Ok)
    }

    fn resolve_required<V: FromStr>(&self, flag: Option<V>, key: &str) -> Result<V, Failure> {
        self.resolve_opt(flag, key)?
            .ok_or_else(|| Failure::usage(format!("--{key} is required (flag or config file)")))
    }

    fn resolve_opt<V: FromStr>(&self, flag: Option<V>, key: &str) -> Result<Option<V>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.0.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Failure::usage(format!("config value `{raw}` is invalid for {key}"))),
            None => Ok(None),
        }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|err| {
        if err.kind() == std::io::ErrorKind::NotFound {
            Failure::missing(format!("{}: no such file", path.display()))
        } else {
            Failure::missing(format!("{}: {err}", path.display()))
        }
    })
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|err| Failure { code: 1, message: format!("{}: {err}", path.display()) }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn parse_format(
    raw: Option<String>,
    overrides: &Overrides,
    default: &str,
) -> Result<String, Failure> {
    let format = overrides.resolve(raw, "format", default.to_string())?;
    match format.as_str() {
        "json" | "csv" => Ok(format),
        other => Err(Failure::usage(format!("unknown format `{other}`; use json or csv"))),
    }
}

fn coin_bias(f: f64) -> Result<CoinBias, Failure> {
    CoinBias::new(f).map_err(|e| Failure::usage(e.to_string()))
}

fn load_schedule(path: Option<&Path>) -> Result<(GasSchedule, Option<FiatRate>), Failure> {
    let Some(path) = path else { return Ok((GasSchedule::default(), None)) };
    let text = read_input(path)?;
    load_gas_config(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn cmd_run_session(args: RunSessionArgs) -> Result<i32, Failure> {
    let overrides = Overrides::load(args.config.as_deref())?;
    let format = parse_format(args.format, &overrides, "json")?;
    if format != "json" {
        return Err(Failure::usage("run-session transcripts are json only"));
    }
    let predicate: MetadataPredicate = overrides
        .resolve(args.predicate, "predicate", "all".to_string())?
        .parse()
        .map_err(Failure::usage)?;
    let spec = SessionSpec {
        n_choices: overrides.resolve(args.n, "n", 20)?,
        price: overrides.resolve(args.price, "price", 1000)?,
        required_responses: overrides.resolve(args.n_r, "n-r", 5)?,
        providers: overrides.resolve(args.providers, "providers", 10)?,
        coin_bias: coin_bias(overrides.resolve(args.f, "f", 0.5)?)?,
        predicate,
        seed: overrides.resolve_required(args.seed, "seed")?,
        fault: FaultInjection {
            wrong_reveal: args.inject_wrong_reveal,
            tamper_submission: args.inject_tamper,
        },
    };
    let (schedule, _) = load_schedule(args.gas_config.as_deref())?;
    let transcript = protocol::run_session(&spec, schedule)
        .map_err(|e| Failure::usage(format!("invalid session parameters: {e}")))?;
    write_output(args.out.as_deref(), &transcript.to_json())?;
    Ok(match transcript.status {
        SessionStatus::Settled => EXIT_OK,
        SessionStatus::Collecting | SessionStatus::Filtered => {
            eprintln!("session stopped early: filtering threshold not met");
            EXIT_THRESHOLD
        }
        SessionStatus::Disputed { ref reason } => {
            eprintln!("session disputed: {reason:?}");
            EXIT_DISPUTE
        }
    })
}

fn experiment_config(
    overrides: &Overrides,
    n: Option<usize>,
    counts: Vec<u64>,
    mean: Option<f64>,
    sd: Option<f64>,
    f: Option<f64>,
    seed: Option<u64>,
) -> Result<ExperimentConfig, Failure> {
    let n_choices = overrides.resolve(n, "n", 20)?;
    let mean = overrides.resolve(mean, "mean", n_choices as f64 / 2.0)?;
    let sd = overrides.resolve(sd, "sd", 2.0)?;
    let coin = coin_bias(overrides.resolve(f, "f", 0.5)?)?;
    let seed = overrides.resolve_required(seed, "seed")?;
    ExperimentConfig::new(n_choices, counts, mean, sd, coin, seed)
        .map_err(|e| Failure::usage(e.to_string()))
}

fn cmd_accuracy(args: AccuracyArgs) -> Result<i32, Failure> {
    let overrides = Overrides::load(args.config.as_deref())?;
    let format = parse_format(args.format, &overrides, "csv")?;
    let counts_raw =
        overrides.resolve(args.counts, "counts", "500,1000,5000,10000".to_string())?;
    let counts = parse_u64_list(&counts_raw)?;
    let config =
        experiment_config(&overrides, args.n, counts, args.mean, args.sd, args.f, args.seed)?;
    let report =
        sim::run_accuracy_experiment(&config).map_err(|e| Failure::usage(e.to_string()))?;
    let content = match format.as_str() {
        "csv" => sim::accuracy_csv(&report),
        _ => to_pretty_json(&report),
    };
    write_output(args.out.as_deref(), &content)?;
    Ok(EXIT_OK)
}

fn cmd_attacker(args: AttackerArgs) -> Result<i32, Failure> {
    let overrides = Overrides::load(args.config.as_deref())?;
    let format = parse_format(args.format, &overrides, "csv")?;
    let mode: AttackerMode = overrides
        .resolve(args.mode, "mode", "rappor".to_string())?
        .parse()
        .map_err(Failure::usage)?;
    let providers = overrides.resolve(args.providers, "providers", 1000)?;
    if providers == 0 {
        return Err(Failure::usage("--providers must be positive"));
    }
    let config =
        experiment_config(&overrides, args.n, vec![providers], None, None, args.f, args.seed)?;
    let report = sim::run_attacker_experiment(&config, mode, providers)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let content = match format.as_str() {
        "csv" => sim::attacker_csv(&report),
        _ => to_pretty_json(&report),
    };
    write_output(args.out.as_deref(), &content)?;
    Ok(EXIT_OK)
}

fn cmd_advantage(args: AdvantageArgs) -> Result<i32, Failure> {
    let overrides = Overrides::load(args.config.as_deref())?;
    let format = parse_format(args.format, &overrides, "csv")?;
    let n_list =
        parse_usize_list(&overrides.resolve(args.n_list, "n-list", "2..100".to_string())?)?;
    let f_raw = overrides.resolve(args.f_list, "f-list", "0.5,0.2".to_string())?;
    let mut f_list = Vec::new();
    for piece in f_raw.split(',') {
        let value: f64 = piece
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("bad coin bias `{piece}` in --f-list")))?;
        f_list.push(coin_bias(value)?);
    }
    let rows = sim::advantage_sweep(&n_list, &f_list).map_err(|e| Failure::usage(e.to_string()))?;
    let content = match format.as_str() {
        "csv" => sim::advantage_csv(&rows),
        _ => to_pretty_json(&rows),
    };
    write_output(args.out.as_deref(), &content)?;
    Ok(EXIT_OK)
}

fn cmd_verify(args: VerifyArgs) -> Result<i32, Failure> {
    let transcript = load_transcript(&args.transcript)?;
    let verified = match args.which.as_str() {
        "filter" => {
            let filter = transcript
                .filter
                .as_ref()
                .ok_or_else(|| Failure::parse("transcript records no filter vector"))?;
            protocol::verify_filter(filter, &transcript.contract)
                .map_err(|e| Failure::parse(e.to_string()))?
        }
        other => match other.strip_prefix("response:") {
            Some(hex_addr) => {
                let address = crate::ledger::Address::from_hex(hex_addr).map_err(|_| {
                    Failure::usage(format!("`{hex_addr}` is not a 20-byte hex address"))
                })?;
                let submission = transcript
                    .submissions
                    .iter()
                    .find(|s| s.address == address)
                    .ok_or_else(|| {
                        Failure::parse(format!("transcript has no submission from {address}"))
                    })?;
                protocol::verify_response_integrity(submission, &transcript.contract)
                    .map_err(|e| Failure::parse(e.to_string()))?
            }
            None => {
                return Err(Failure::usage(format!(
                    "unknown --which `{other}`; use filter or response:<hex address>"
                )));
            }
        },
    };
    let content = format!(
        "{{\n  \"which\": {},\n  \"verified\": {}\n}}\n",
        serde_json::to_string(&args.which).expect("string serializes"),
        verified
    );
    write_output(args.out.as_deref(), &content)?;
    Ok(if verified { EXIT_OK } else { EXIT_DISPUTE })
}

fn cmd_gas(args: GasArgs) -> Result<i32, Failure> {
    let transcript = load_transcript(&args.transcript)?;
    let (_, config_rate) = load_schedule(args.gas_config.as_deref())?;
    let fiat = if args.no_fiat {
        None
    } else {
        Some(match args.usd_per_gas {
            Some(rate) if rate.is_finite() && rate > 0.0 => FiatRate { usd_per_gas: rate },
            Some(rate) => {
                return Err(Failure::usage(format!("--usd-per-gas must be positive, got {rate}")));
            }
            None => config_rate.unwrap_or_default(),
        })
    };
    let report = transcript.contract.gas_report(fiat);
    write_output(args.out.as_deref(), &to_pretty_json(&report))?;
    Ok(EXIT_OK)
}

fn load_transcript(path: &Path) -> Result<SessionTranscript, Failure> {
    let text = read_input(path)?;
    SessionTranscript::from_json(&text)
        .map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn to_pretty_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    text
}

fn parse_u64_list(raw: &str) -> Result<Vec<u64>, Failure> {
    raw.split(',')
        .map(|piece| {
            piece.trim().parse().map_err(|_| Failure::usage(format!("bad count `{piece}` in list")))
        })
        .collect()
}

/// Comma-separated values and/or inclusive `a..b` ranges.
fn parse_usize_list(raw: &str) -> Result<Vec<usize>, Failure> {
    let mut values = Vec::new();
    for piece in raw.split(',') {
        let piece = piece.trim();
        match piece.split_once("..") {
            Some((start, end)) => {
                let start: usize = start
                    .trim()
                    .parse()
                    .map_err(|_| Failure::usage(format!("bad range start `{piece}`")))?;
                let end: usize = end
                    .trim()
                    .parse()
                    .map_err(|_| Failure::usage(format!("bad range end `{piece}`")))?;
                if end < start {
                    return Err(Failure::usage(format!("empty range `{piece}`")));
                }
                values.extend(start..=end);
            }
            None => values.push(
                piece
                    .parse()
                    .map_err(|_| Failure::usage(format!("bad value `{piece}` in list")))?,
            ),
        }
    }
    Ok(values)
}
