use std::path::PathBuf;
use std::process::ExitCode;

use cilo::run::{self, RunDir};
use cilo::traj::{load_trajectories, save_trajectories};
use cilo::{Error, Result};
use cilo_core::env::{EnvKind, EnvSpec};
use cilo_core::pipeline::generate_expert;
use clap::{Parser, Subcommand};

/// Continuous imitation learning from observation.
#[derive(Parser)]
#[command(name = "cilo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out the scripted expert and save the trajectories.
    GenExpert {
        #[arg(long, default_value = "double_integrator_1d")]
        env: String,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a JSON run configuration into a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Save checkpoints every N epochs (the last epoch is always saved).
        #[arg(long, default_value_t = 1)]
        checkpoint_every: usize,
    },
    /// Evaluate a policy checkpoint of a run.
    Eval {
        #[arg(long)]
        run: PathBuf,
        /// Checkpoint epoch; defaults to the last logged epoch.
        #[arg(long)]
        epoch: Option<usize>,
        /// Number of evaluation episodes; defaults to the run's setting.
        #[arg(long)]
        episodes: Option<usize>,
        /// Output file; defaults to `<run>/eval-<epoch>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Signatures of every trajectory in a `.traj.jsonl` file.
    Signature {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Consolidated per-epoch CSV of a run.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(command: Command) -> Result<String> {
    match command {
        Command::GenExpert { env, episodes, seed, out } => {
            let kind: EnvKind = env.parse().map_err(|e: cilo_core::Error| Error::Config(e.to_string()))?;
            if episodes == 0 {
                return Err(Error::Config("--episodes must be at least 1".into()));
            }
            let spec = EnvSpec::for_kind(kind);
            let set = generate_expert(&spec, episodes, seed)?;
            save_trajectories(&set, &out)?;
            Ok(format!("wrote {episodes} trajectories to {}", out.display()))
        }
        Command::Train { config, out, checkpoint_every } => {
            let cfg = run::read_config(&config)?;
            let summary = run::train(&cfg, &out, checkpoint_every)?;
            Ok(format!(
                "trained {} epochs into {}; final performance {:.4}",
                summary.reports.len(),
                out.display(),
                summary.final_eval.performance
            ))
        }
        Command::Eval { run: dir, epoch, episodes, out } => {
            let run_dir = RunDir::open(&dir)?;
            let (epoch, report) = run::evaluate_run(&run_dir, epoch, episodes)?;
            let out = out.unwrap_or_else(|| dir.join(format!("eval-{epoch}.json")));
            run::write_json(&out, &report)?;
            Ok(format!("epoch {epoch}: performance {:.4}, wrote {}", report.performance, out.display()))
        }
        Command::Signature { input, depth, out } => {
            let set = load_trajectories(&input)?;
            let sigs = run::signatures_of(&set, depth).map_err(|e| match e {
                Error::Data(m) if depth == 0 => Error::Config(m),
                other => other,
            })?;
            run::write_json(&out, &sigs)?;
            Ok(format!("wrote {} signatures to {}", sigs.signatures.len(), out.display()))
        }
        Command::Report { run: dir, out } => {
            let reports = RunDir::open(&dir)?.read_epochs()?;
            run::write_report(&reports, &out)?;
            Ok(format!("wrote {} rows to {}", reports.len(), out.display()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid usage");
            eprintln!("{}", Error::Config(first.trim_start_matches("error: ").to_string()).one_line());
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.one_line());
            ExitCode::from(e.exit_code())
        }
    }
}
