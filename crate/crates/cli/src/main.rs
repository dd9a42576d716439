//! `munifund`: analytics, simulation and note-ledger tooling for a
//! municipal guaranteed microloan fund.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible rate target,
//! 4 ledger invariant violation.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use munifund_core::analytics::{portfolio_yield, solve_rate, AnalyticsError};
use munifund_core::config::{ScenarioConfig, SimSettings};
use munifund_core::ledger::{parse_ledger, replay, serialize_ledger, LedgerError};
use munifund_core::loanbook::parse_loan_book;
use munifund_core::sim::{run_input, LoanBook, LoanProfile, SimInput};
use munifund_core::Exact;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Parser)]
#[command(name = "munifund", version, about = "Municipal guaranteed microloan fund analytics")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Scenario config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the simulation seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-loan figures and both settlement outcomes.
    Deal,
    /// Break-even and critical default shares and yield ranges.
    Portfolio,
    /// Lending rate that hits a target yield at a forecast default share.
    SolveRate {
        /// Forecast default share, as a percent ("13.0435") or a ratio ("3/23").
        #[arg(long, allow_hyphen_values = true)]
        forecast_default: String,
        /// Target yield, as a percent ("-10") or a ratio ("-1/10").
        #[arg(long, allow_hyphen_values = true)]
        target_yield: String,
    },
    /// Monte Carlo portfolio simulation.
    Simulate {
        /// Loan-book CSV; when given, the config supplies only simulation settings.
        #[arg(long)]
        book: Option<PathBuf>,
    },
    /// Guarantee-note ledger.
    Ledger {
        #[command(subcommand)]
        action: LedgerAction,
    },
}

#[derive(Subcommand)]
enum LedgerAction {
    /// Rebuild and print the fund account from a ledger file.
    Replay { ledger: PathBuf },
    /// Validate events from a file and append them to the ledger.
    Apply { ledger: PathBuf, events: PathBuf },
}

enum CliError {
    Input(String),
    Infeasible(String),
    Ledger(LedgerError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Ledger(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) => format!("invalid input: {m}"),
            CliError::Infeasible(m) => format!("infeasible: {m}"),
            CliError::Ledger(e) => match e.seq() {
                Some(seq) => format!("ledger violation at seq {seq}: {e}"),
                None => format!("ledger violation: {e}"),
            },
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(format: Format, text: String, json: &T) -> String {
    match format {
        Format::Text => text,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(json).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Input("--config is required".into()))?;
    let mut cfg = ScenarioConfig::parse(&read(path)?).map_err(input)?;
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Deal => {
            let r = report::DealReport::build(&load_config(cli)?).map_err(input)?;
            Ok(emit(cli.format, r.text(), &r.json()))
        }
        Command::Portfolio => {
            let r = report::PortfolioReport::build(&load_config(cli)?).map_err(CliError::Input)?;
            Ok(emit(cli.format, r.text(), &r.json()))
        }
        Command::SolveRate {
            forecast_default,
            target_yield,
        } => {
            let x = Exact::parse_percent_or_ratio(forecast_default, 4).map_err(input)?;
            let target = Exact::parse_percent_or_ratio(target_yield, 4).map_err(input)?;
            let rate = solve_rate(&x, &target).map_err(|e| match e {
                AnalyticsError::Infeasible(_) | AnalyticsError::CertainDefault => CliError::Infeasible(e.to_string()),
                other => input(other),
            })?;
            let check = portfolio_yield(&x, &rate).map_err(input)?;
            Ok(emit(cli.format, report::solve_text(&rate, &check), &report::solve_json(&rate, &check)))
        }
        Command::Simulate { book } => {
            let sim_input = match book {
                Some(path) => {
                    let cfg_path = cli.config.as_ref().ok_or_else(|| CliError::Input("--config is required".into()))?;
                    let mut settings = SimSettings::parse(&read(cfg_path)?).map_err(input)?;
                    if let Some(seed) = cli.seed {
                        settings.seed = seed;
                    }
                    let rows = parse_loan_book(&read(path)?).map_err(input)?;
                    let runs = rows
                        .iter()
                        .map(|row| {
                            let recovery = settings.recovery_model_for(row.collateral_value());
                            LoanProfile::from_terms(&row.terms(), &recovery).map(|p| (p, 1))
                        })
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(input)?;
                    let book = LoanBook::new(runs).map_err(input)?;
                    SimInput::new(book, &settings.default_prob, settings.trials, settings.seed).map_err(input)?
                }
                None => SimInput::from_config(&load_config(cli)?.sim_config()).map_err(input)?,
            };
            let r = run_input(&sim_input);
            Ok(emit(cli.format, report::sim_text(&r), &r.to_json()))
        }
        Command::Ledger { action } => match action {
            LedgerAction::Replay { ledger } => {
                let events = parse_ledger(&read(ledger)?).map_err(input)?;
                let state = replay(&events).map_err(CliError::Ledger)?;
                Ok(emit(cli.format, report::ledger_text(&state), &report::ledger_json(&state)))
            }
            LedgerAction::Apply { ledger, events } => {
                let existing = read(ledger)?;
                let mut log = parse_ledger(&existing).map_err(input)?;
                let additions = parse_ledger(&read(events)?).map_err(input)?;
                log.extend(additions);
                let state = replay(&log).map_err(CliError::Ledger)?;
                fs::write(ledger, serialize_ledger(&log)).map_err(|e| CliError::Input(format!("{}: {e}", ledger.display())))?;
                Ok(emit(cli.format, report::ledger_text(&state), &report::ledger_json(&state)))
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("munifund: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
