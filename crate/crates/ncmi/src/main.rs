use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use ncmi::bounds::all_bounds;
use ncmi::error::{Error, Result};
use ncmi::harness::{emit_csv, monte_carlo, run_scheme, ExperimentConfig, Scheme};
use ncmi::model::{RunOptions, Scenario, TieBreak};
use ncmi::oracle::optimal_completion_time;
use ncmi::overhead::{overhead_fraction, OverheadParams, OverheadVariant};

#[derive(Parser)]
#[command(name = "ncmi", version, about = "Cooperative packet-repair simulator for joint cellular + D2D networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme on a scenario file and print the result as JSON
    Run(RunArgs),
    /// Run a Monte Carlo sweep from a config file and write a CSV
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print all completion-time bounds of a scenario as JSON
    Bounds {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Print the signaling-overhead breakdown of one scheme variant
    Overhead(OverheadArgs),
    /// Exhaustively compute the optimal completion time of a tiny scenario
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// ncmi-batch, ncmi-instant, nonc-multi, ncsi-batch-cell,
    /// ncsi-batch-d2d, ncsi-instant-cell or ncsi-instant-d2d
    #[arg(long)]
    scheme: String,
    /// Use the lossy stage-two variant of the scheme
    #[arg(long)]
    lossy: bool,
    /// Break planner ties deterministically instead of by seed
    #[arg(long)]
    deterministic: bool,
    /// Include the per-slot trace in the output
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct OverheadArgs {
    /// stage1, batch-lossless, instant-lossless, batch-lossy or instant-lossy
    #[arg(long)]
    variant: String,
    /// Packet size in bits
    #[arg(long = "P")]
    p: u64,
    /// Field size (power of two)
    #[arg(long = "F", default_value_t = 256)]
    f: u64,
    /// Number of missing packets
    #[arg(long = "M")]
    m: u64,
    /// Number of targeted receivers
    #[arg(long = "Nt")]
    nt: u64,
    /// Number of devices
    #[arg(long = "N")]
    n: u64,
}

fn load_scenario(path: &PathBuf) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad scenario file: {e}")))?;
    scenario.validate()?;
    Ok(scenario)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let scenario = load_scenario(&args.scenario)?;
            let scheme = Scheme::from_str(&args.scheme)?;
            let opts = RunOptions {
                tie_break: if args.deterministic { TieBreak::Deterministic } else { TieBreak::Seeded },
                record_trace: args.trace,
            };
            let result = run_scheme(&scenario, scheme, args.lossy, &opts)?;
            let mut out = serde_json::json!({
                "scheme": scheme.as_str(),
                "lossy": args.lossy,
                "completion_time": result.completion_time,
                "per_device_satisfaction_slot": result.per_device_satisfaction_slot,
            });
            if args.trace {
                out["trace"] = serde_json::to_value(&result.trace).expect("trace serializes");
            }
            println!("{}", serde_json::to_string_pretty(&out).expect("json"));
            Ok(())
        }
        Command::Sweep { config, out } => {
            let text = fs::read_to_string(&config)?;
            let config: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("bad sweep config: {e}")))?;
            let points = monte_carlo(&config)?;
            emit_csv(&points, &out)?;
            println!("wrote {} rows to {}", points.len(), out.display());
            Ok(())
        }
        Command::Bounds { scenario } => {
            let scenario = load_scenario(&scenario)?;
            let bounds = all_bounds(&scenario)?;
            println!("{}", serde_json::to_string_pretty(&bounds).expect("json"));
            Ok(())
        }
        Command::Overhead(args) => {
            let variant = OverheadVariant::from_str(&args.variant)?;
            let params = OverheadParams {
                packet_bits: args.p,
                field_size: args.f,
                missing: args.m,
                targeted: args.nt,
                devices: args.n,
            };
            let oh = overhead_fraction(variant, &params)?;
            println!("{}", serde_json::to_string_pretty(&oh).expect("json"));
            Ok(())
        }
        Command::Oracle { scenario } => {
            let scenario = load_scenario(&scenario)?;
            let optimal = optimal_completion_time(&scenario)?;
            println!("{}", serde_json::json!({ "optimal_completion_time": optimal }));
            Ok(())
        }
    }
}
