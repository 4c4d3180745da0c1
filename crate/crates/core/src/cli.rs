//! Command-line front end. Exit codes: 0 on success, 1 on runtime failure,
//! 2 on configuration or argument errors.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::corpus::import_multiwoz;
use crate::orchestrator::{
    ablate_equidistant, ablate_granularity, forge_phase, judge_phase, load_corpus, run_phase,
    score_phase, ExperimentPaths, PipelineError, RunConfig,
};
use crate::sim::{probe_trajectory, simulate_response, simulate_with_protocol, ProbeSpec, SimParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pivotbench",
    version,
    about = "Forge long-context goal-pivot trajectories, run recovery strategies, and score them."
)]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "pivotbench.toml")]
    pub config: PathBuf,

    /// Override the configured global seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Continue an interrupted run phase instead of demanding a fresh dir.
    #[arg(long, global = true)]
    pub resume: bool,

    /// Plan without executing (forge build and run).
    #[arg(long, global = true)]
    pub dry_run: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus import and trajectory construction.
    Forge {
        #[command(subcommand)]
        action: ForgeAction,
    },
    /// Execute every configured strategy over the forged trajectories.
    Run {
        /// Stop after this many newly executed items (checkpointing aid).
        #[arg(long)]
        max_items: Option<usize>,
        /// Override the configured worker count.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Score stored runs into verdicts.
    Judge,
    /// Aggregate verdicts into report.json and report.csv.
    Score,
    /// One simulated completion over a probe trajectory; config-free.
    Simulate(SimulateArgs),
    /// Held-out studies writing CSVs under <output_dir>/ablations/.
    Ablate {
        #[command(subcommand)]
        which: AblateAction,
    },
    /// Print report.json to stdout.
    Report,
}

#[derive(Debug, Subcommand)]
pub enum ForgeAction {
    /// Convert a MultiWOZ-style dump into the dialogue JSONL format.
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Build trajectories for every configured tier.
    Build,
}

#[derive(Debug, Subcommand)]
pub enum AblateAction {
    /// Protocol step-granularity sweep at fixed trajectories.
    Granularity {
        #[arg(long, default_value_t = 50)]
        n: usize,
    },
    /// Dual-anchor positional-symmetry study.
    Equidistant {
        #[arg(long, default_value_t = 50)]
        n: usize,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Probe context length in tokens.
    #[arg(long, default_value_t = 10_000)]
    pub tokens: u64,

    /// Fact anchor fractions in [0, 1], comma separated.
    #[arg(long = "fact-pos", value_delimiter = ',', default_value = "0.5")]
    pub fact_positions: Vec<f64>,

    /// Link the facts into a dependency chain.
    #[arg(long)]
    pub chained: bool,

    /// Seed the update at this fraction instead of leaving it available.
    #[arg(long)]
    pub update_pos: Option<f64>,

    /// Simulator seed (draw stream and probe signal).
    #[arg(long, default_value_t = 0)]
    pub sim_seed: u64,

    /// Simulate under an n-step protocol.
    #[arg(long)]
    pub protocol_steps: Option<u32>,

    /// Simulator parameters as JSON; unset fields take their defaults.
    #[arg(long)]
    pub params: Option<String>,
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.global_seed = seed;
    }
    Ok(config)
}

fn simulate(args: &SimulateArgs) -> Result<(), PipelineError> {
    let params: SimParams = match &args.params {
        Some(raw) => serde_json::from_str(raw)
            .map_err(|e| PipelineError::State(format!("--params: {e}")))?,
        None => SimParams::default(),
    };
    params.validate()?;
    let probe = probe_trajectory(&ProbeSpec {
        token_count: args.tokens,
        fact_positions: args.fact_positions.clone(),
        chained: args.chained,
        update_position: args.update_pos,
        seed: args.sim_seed,
    });
    let response = match args.protocol_steps {
        Some(steps) => {
            simulate_with_protocol(&probe, &params.curve, &params.latch, probe.rng_seed, steps)?
        }
        None => simulate_response(&probe, &params.curve, &params.latch, probe.rng_seed)?,
    };
    let out = serde_json::json!({
        "trajectory_id": probe.id,
        "expected_signal": probe.expected_signal,
        "response": response,
    });
    println!("{}", serde_json::to_string_pretty(&out).map_err(|e| PipelineError::Io(e.to_string()))?);
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Forge { action: ForgeAction::Import { input, output, limit } } => {
            let n = import_multiwoz(input, output, *limit)?;
            println!("imported {n} dialogues -> {}", output.display());
            Ok(())
        }
        Command::Forge { action: ForgeAction::Build } => {
            let config = load_config(cli)?;
            if cli.dry_run {
                let dialogues = load_corpus(&config)?;
                println!(
                    "dry run: would forge {} trajectories ({} dialogues x {} tiers)",
                    dialogues.len() * config.forge.tiers.len(),
                    dialogues.len(),
                    config.forge.tiers.len()
                );
                return Ok(());
            }
            let trajectories = forge_phase(&config)?;
            let paths = ExperimentPaths::new(&config.output_dir);
            println!(
                "forged {} trajectories across {} tiers -> {}",
                trajectories.len(),
                config.forge.tiers.len(),
                paths.trajectories.display()
            );
            Ok(())
        }
        Command::Run { max_items, parallelism } => {
            let mut config = load_config(cli)?;
            if let Some(p) = parallelism {
                config.parallelism = (*p).max(1);
            }
            let summary = run_phase(&config, cli.resume, *max_items, cli.dry_run)?;
            if cli.dry_run {
                println!(
                    "dry run: {} items total, {} reused, {} pending",
                    summary.total, summary.reused, summary.remaining
                );
                return Ok(());
            }
            println!(
                "run: executed {} of {} items ({} reused, {} remaining)",
                summary.executed, summary.total, summary.reused, summary.remaining
            );
            if summary.finalized {
                let paths = ExperimentPaths::new(&config.output_dir);
                println!("finalized {}", paths.runs.display());
            } else {
                println!("run phase incomplete; invoke again with --resume to continue");
            }
            Ok(())
        }
        Command::Judge => {
            let config = load_config(cli)?;
            let verdicts = judge_phase(&config)?;
            let paths = ExperimentPaths::new(&config.output_dir);
            println!("judged {} runs -> {}", verdicts.len(), paths.verdicts.display());
            Ok(())
        }
        Command::Score => {
            let config = load_config(cli)?;
            let report = score_phase(&config)?;
            let paths = ExperimentPaths::new(&config.output_dir);
            for group in &report.groups {
                let pi = group
                    .pi_rate
                    .map(|p| format!(" pi={p:.4} gap={:+.4}", group.grounding_gap.unwrap_or(0.0)))
                    .unwrap_or_default();
                println!(
                    "{}/{}: apa={:.4} n={}{}",
                    group.tier.name(),
                    group.strategy.name(),
                    group.apa,
                    group.n_scored,
                    pi
                );
            }
            for cmp in &report.comparisons {
                let lift = cmp
                    .lift
                    .map(|l| format!("{l:+.4}"))
                    .unwrap_or_else(|| "undefined (zero baseline)".into());
                println!(
                    "{}/{} vs vanilla: lift={} t_p={:.4} mcnemar_p={:.4}",
                    cmp.tier.name(),
                    cmp.strategy.name(),
                    lift,
                    cmp.significance.t_p,
                    cmp.significance.mcnemar_p
                );
            }
            println!("wrote {} and {}", paths.report_json.display(), paths.report_csv.display());
            Ok(())
        }
        Command::Simulate(args) => simulate(args),
        Command::Ablate { which: AblateAction::Granularity { n } } => {
            let config = load_config(cli)?;
            let rows = ablate_granularity(&config, *n)?;
            for row in &rows {
                println!(
                    "{}: steps={} apa={:.4} ({}/{})",
                    row.granularity.name(),
                    row.steps,
                    row.apa,
                    row.successes,
                    row.n_scored
                );
            }
            let paths = ExperimentPaths::new(&config.output_dir);
            println!("wrote {}", paths.ablations.join("granularity.csv").display());
            Ok(())
        }
        Command::Ablate { which: AblateAction::Equidistant { n } } => {
            let config = load_config(cli)?;
            let rows = ablate_equidistant(&config, *n)?;
            for row in &rows {
                println!("{}/{} = {:.4} (n={})", row.section, row.metric, row.value, row.n);
            }
            let paths = ExperimentPaths::new(&config.output_dir);
            println!("wrote {}", paths.ablations.join("equidistant.csv").display());
            Ok(())
        }
        Command::Report => {
            let config = load_config(cli)?;
            let paths = ExperimentPaths::new(&config.output_dir);
            let body = std::fs::read_to_string(&paths.report_json).map_err(|_| {
                PipelineError::State(format!(
                    "{} is missing; run the score phase first",
                    paths.report_json.display()
                ))
            })?;
            print!("{body}");
            Ok(())
        }
    }
}

/// Parses arguments and runs the requested command, returning the process
/// exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(PipelineError::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
