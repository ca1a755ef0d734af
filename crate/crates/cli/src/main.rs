mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grounding_reward::matching::MatchingStrategy;

/// Score temporal grounding outputs, evaluate predictions and run the RL sandbox.
#[derive(Debug, Parser)]
#[command(name = "greward", version)]
struct Cli {
    /// TOML config file. Flags override its values.
    #[arg(long, global = true, env = "GREWARD_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score JSONL records (`id`, `gt`, `raw_output`), one breakdown line each.
    Score {
        /// Input file, or `-` for standard input.
        input: PathBuf,
        /// Training step used to pick the reward phase.
        #[arg(long, default_value_t = 1)]
        step: u64,
        #[command(flatten)]
        reward: RewardArgs,
    },
    /// Compute benchmark metrics over JSONL records (`id`, `gt`, `pred`).
    Eval {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: EvalKind,
        /// Also write per-record scores as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the policy-optimization sandbox and write its training log as CSV.
    Simulate {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        steps: Option<u64>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        reward: RewardArgs,
    },
    /// Show how a model output parses. Reads standard input without TEXT.
    Parse { text: Option<String> },
    /// Print the version.
    Version,
}

/// Reward overrides shared by `score` and `simulate`.
#[derive(Debug, Clone, Default, Args)]
struct RewardArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Last step that still uses the timestamp reward.
    #[arg(long)]
    phase_switch: Option<u64>,
    /// Timestamp matching tolerance in seconds.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StrategyArg {
    Sequential,
    Maximum,
    Global,
}

impl From<StrategyArg> for MatchingStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Sequential => MatchingStrategy::Sequential,
            StrategyArg::Maximum => MatchingStrategy::MaximumWeight,
            StrategyArg::Global => MatchingStrategy::GlobalOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalKind {
    Single,
    Multi,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Score {
            input,
            step,
            reward,
        } => commands::score(config, &reward, &input, step),
        Command::Eval { input, kind, out } => commands::eval(&input, kind, out.as_deref()),
        Command::Simulate {
            seed,
            steps,
            out,
            reward,
        } => commands::simulate(config, &reward, seed, steps, out.as_deref()),
        Command::Parse { text } => commands::parse(text),
        Command::Version => {
            println!("greward {}", env!("CARGO_PKG_VERSION"));
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
