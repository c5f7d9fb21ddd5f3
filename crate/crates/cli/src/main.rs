//! `devcomp`: build personalized code-completion datasets from git
//! histories and evaluate predictions made on them.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use devcomp_core::fixtures::{build_ineligible_fixture, build_organization_fixture};
use devcomp_core::pipeline::{self, Context, PipelineError, RunConfig, Stage};
use serde_json::json;

#[derive(Parser)]
#[command(name = "devcomp", version, about = "Personalized code-completion dataset pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Mine,
    Assemble,
    Insight,
    Verify,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Mine => Stage::Mine,
            StageArg::Assemble => Stage::Assemble,
            StageArg::Insight => Stage::Insight,
            StageArg::Verify => Stage::Verify,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Mine commits, resolve authors and forge completion instances.
    Mine(Common),
    /// Build developer, organization, size-controlled and generic datasets.
    Assemble(Common),
    /// Score prediction files against a dataset's test split.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: String,
        /// Prediction JSONL files ({id, model, text} per line).
        #[arg(long, num_args = 1.., required = true)]
        predictions: Vec<PathBuf>,
    },
    /// Paired statistical comparison of two scored models.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        report_a: PathBuf,
        #[arg(long)]
        model_a: String,
        #[arg(long)]
        report_b: PathBuf,
        #[arg(long)]
        model_b: String,
    },
    /// Coverage analyses and breakeven estimates.
    Insight(Common),
    /// Leak audit and invariant checks over the assembled datasets.
    Verify(Common),
    /// Mine, assemble, insight and verify in order, or a single `--stage`.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        stage: Option<StageArg>,
    },
    /// Write the bundled fixture repositories and their config.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Single-developer fixture in which nobody is eligible.
        #[arg(long)]
        ineligible: bool,
    },
}

fn context(common: &Common) -> Result<Context, PipelineError> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    Context::new(config)
}

fn print(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("json"));
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Mine(c) => {
            let ctx = context(&c)?;
            print(json!({"stage": "mine", "outcome": pipeline::mine(&ctx)?, "config_hash": ctx.config_hash}));
        }
        Command::Assemble(c) => {
            let ctx = context(&c)?;
            print(json!({"stage": "assemble", "outcome": pipeline::assemble(&ctx)?, "config_hash": ctx.config_hash}));
        }
        Command::Score { common, dataset, predictions } => {
            let ctx = context(&common)?;
            let (outcome, report) = pipeline::score(&ctx, &dataset, &predictions)?;
            let summary: pipeline::ScoreReport = devcomp_core::io::read_json(&report)?;
            print(json!({"stage": "score", "outcome": outcome, "report": report, "models": summary.report.models}));
        }
        Command::Compare { common, report_a, model_a, report_b, model_b } => {
            let ctx = context(&common)?;
            let (file, path) = pipeline::compare(&ctx, &report_a, &model_a, &report_b, &model_b)?;
            print(json!({"stage": "compare", "output": path, "comparison": file}));
        }
        Command::Insight(c) => {
            let ctx = context(&c)?;
            let (outcome, summary) = pipeline::insight(&ctx)?;
            print(json!({"stage": "insight", "outcome": outcome, "breakeven": summary.breakeven}));
        }
        Command::Verify(c) => {
            let ctx = context(&c)?;
            let report = pipeline::verify(&ctx)?;
            print(json!({"stage": "verify", "report": report}));
        }
        Command::Run { common, stage } => {
            let ctx = context(&common)?;
            match stage {
                Some(s) => print(json!({"stage": Stage::from(s), "outcome": pipeline::run_one(&ctx, s.into())?})),
                None => print(json!(pipeline::run_all(&ctx)?)),
            }
        }
        Command::Fixtures { out, seed, ineligible } => {
            let built = if ineligible { build_ineligible_fixture(&out, seed) } else { build_organization_fixture(&out, seed) };
            let config = built.map_err(|e| PipelineError::Data(format!("building fixtures: {e}")))?;
            print(json!({"config": config}));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("devcomp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
