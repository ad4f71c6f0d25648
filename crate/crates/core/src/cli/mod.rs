//! Command-line front end. Every failure prints one line,
//! `error: <code>: <message>`, and exits nonzero.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::agent::Scenario;
use crate::evaluation::{
    evaluate, fisher_exact, mcnemar_test, read_records_jsonl, render_stratified_table, render_summary_table,
    wilson_interval, write_records_jsonl, McNemarMethod, Pricing, Z_95,
};
use crate::governance::{verify_file, AuditBundle, AuditLedger, Durability};
use crate::knowledge::Submission;
use crate::service::{build_engine, serve, CaseSummary, ServiceConfig};
use crate::simulation::{run_experiment, ExperimentConfig};

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    fn new(code: &'static str, message: impl fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string().replace('\n', " "),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error: {}: {}", self.code, self.message)
    }
}

#[derive(Debug, Parser)]
#[command(name = "underwrite", version, about = "Decision-negative underwriting workflow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
    },
    /// Run one submission (or scenario file) through the pipeline and print its queue row.
    Ingest {
        file: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    Simulate {
        #[command(subcommand)]
        action: SimulateCommand,
    },
    /// Summarise outcome records.
    Evaluate {
        records: PathBuf,
        #[arg(long, value_enum)]
        stratify: Option<Stratify>,
        /// Print the report as JSON instead of tables.
        #[arg(long)]
        json: bool,
    },
    Audit {
        #[command(subcommand)]
        action: AuditCommand,
    },
    Stats {
        #[command(subcommand)]
        test: StatsCommand,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Stratify {
    Tier,
}

#[derive(Debug, Subcommand)]
enum SimulateCommand {
    /// Run a simulated experiment and write outcome records as JSONL.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum AuditCommand {
    /// Verify a ledger file's hash chain.
    Verify { ledger: PathBuf },
    /// Print the self-verifying audit bundle for one case.
    Export {
        #[arg(long = "case")]
        case_id: String,
        /// Ledger file; the service data directory's ledger when absent.
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum StatsCommand {
    /// Wilson score interval for k successes in n trials.
    Wilson {
        successes: u64,
        n: u64,
        #[arg(long, default_value_t = Z_95)]
        z: f64,
    },
    /// McNemar test on the discordant counts b and c.
    Mcnemar {
        b: u64,
        c: u64,
        /// Continuity-corrected chi-squared instead of the exact binomial test.
        #[arg(long)]
        chi2: bool,
    },
    /// Two-sided Fisher exact test on the table [[a, b], [c, d]].
    Fisher { a: u64, b: u64, c: u64, d: u64 },
}

fn format_prob(p: f64) -> String {
    if p != 0.0 && p < 1e-4 {
        format!("{p:.6e}")
    } else {
        format!("{p:.6}")
    }
}

fn service_config(path: Option<&Path>) -> Result<ServiceConfig, CliError> {
    match path {
        Some(p) => ServiceConfig::load(p).map_err(|e| CliError::new("config", e)),
        None => Ok(ServiceConfig::default()),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::new("io", e))
}

fn parse_submission(raw: &str) -> Result<Submission, CliError> {
    match serde_json::from_str::<Submission>(raw) {
        Ok(s) => Ok(s),
        Err(first) => Scenario::from_json(raw)
            .map(|s| s.submission)
            .map_err(|_| CliError::new("malformed_submission", first)),
    }
}

fn run_command(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Serve { config, listen } => {
            let mut config = service_config(config.as_deref())?;
            if let Some(listen) = listen {
                config.listen = listen;
            }
            let _ = tracing_subscriber::fmt()
                .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
                .with_writer(std::io::stderr)
                .try_init();
            serve(&config).map_err(|e| CliError::new("serve", e))
        }
        Command::Ingest { file, config } => {
            let config = service_config(config.as_deref())?;
            let submission = parse_submission(&read(&file)?)?;
            let engine = build_engine(&config).map_err(|e| CliError::new("service", e))?;
            let dossier = engine.submit(submission).map_err(|e| CliError::new("ingest", e))?;
            let row = serde_json::to_string(&CaseSummary::of(&dossier)).map_err(|e| CliError::new("io", e))?;
            emit(out, &format!("{row}\n"))
        }
        Command::Simulate {
            action: SimulateCommand::Run { config, out: target },
        } => {
            let config = ExperimentConfig::load(&config).map_err(|e| CliError::new("config", e))?;
            let records = run_experiment(&config).map_err(|e| CliError::new("simulate", e))?;
            let text = write_records_jsonl(&records);
            match target {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
                    emit(out, &format!("wrote {} records to {}\n", records.len(), path.display()))
                }
                None => emit(out, &text),
            }
        }
        Command::Evaluate { records, stratify, json } => {
            let records = read_records_jsonl(&read(&records)?).map_err(|e| CliError::new("malformed_records", e))?;
            let report =
                evaluate(&records, Pricing::default(), stratify.is_some()).map_err(|e| CliError::new("evaluate", e))?;
            if json {
                let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::new("io", e))?;
                return emit(out, &format!("{text}\n"));
            }
            emit(out, &render_summary_table(&report))?;
            if let Some(strat) = &report.stratified {
                emit(out, "\n")?;
                emit(out, &render_stratified_table(strat))?;
            }
            Ok(())
        }
        Command::Audit {
            action: AuditCommand::Verify { ledger },
        } => {
            let report = verify_file(&ledger).map_err(|e| CliError::new("io", format!("{}: {e}", ledger.display())))?;
            match report.first_divergence {
                None => emit(out, &format!("ok: {} records verified\n", report.records_checked)),
                Some(d) => Err(CliError::new(
                    "ledger_corrupt",
                    format!("first divergence at seq {}: {:?}", d.seq, d.reason),
                )),
            }
        }
        Command::Audit {
            action: AuditCommand::Export { case_id, ledger, config },
        } => {
            let path = match ledger {
                Some(p) => p,
                None => service_config(config.as_deref())?.ledger_path(),
            };
            if !path.exists() {
                return Err(CliError::new("no_ledger", format!("{} does not exist", path.display())));
            }
            let ledger = AuditLedger::open(&path, Durability::Flush).map_err(|e| CliError::new("ledger_corrupt", e))?;
            let bundle = AuditBundle::export(&ledger, &case_id).map_err(|e| CliError::new("unknown_case", e))?;
            let text = serde_json::to_string_pretty(&bundle).map_err(|e| CliError::new("io", e))?;
            emit(out, &format!("{text}\n"))
        }
        Command::Stats { test } => {
            let line = match test {
                StatsCommand::Wilson { successes, n, z } => {
                    let (lo, hi) = wilson_interval(successes, n, z).map_err(|e| CliError::new("domain", e))?;
                    format!("wilson successes={successes} n={n} z={z} lower={lo:.9} upper={hi:.9}")
                }
                StatsCommand::Mcnemar { b, c, chi2 } => {
                    let method = if chi2 { McNemarMethod::ChiSquaredCorrected } else { McNemarMethod::Exact };
                    format!("mcnemar b={b} c={c} p={}", format_prob(mcnemar_test(b, c, method)))
                }
                StatsCommand::Fisher { a, b, c, d } => {
                    if a + b + c + d == 0 {
                        return Err(CliError::new("domain", "table is empty"));
                    }
                    format!("fisher table=[[{a},{b}],[{c},{d}]] p={}", format_prob(fisher_exact([[a, b], [c, d]])))
                }
            };
            emit(out, &format!("{line}\n"))
        }
    }
}

/// Parses `args` (program name first) and runs the command, writing results
/// to `out`.
pub fn run(args: impl IntoIterator<Item = OsString>, out: &mut dyn Write) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            return emit(out, &e.render().to_string());
        }
        Err(e) => {
            let first = e.render().to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::new("usage", first.trim_start_matches("error: ")));
        }
    };
    run_command(cli.command, out)
}

pub fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(std::env::args_os(), &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
