//! Run directories:
//!
//! ```text
//! <run>/config.json
//! <run>/epochs.csv
//! <run>/eval.json
//! <run>/checkpoints/{idm,policy,disc}-<epoch>.ckpt
//! <run>/datasets/{expert,pre,validation,pos}.traj.jsonl
//! ```

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use cilo_core::dataset::{Source, TrajectorySet};
use cilo_core::metrics::EvalReport;
use cilo_core::models::{DiscriminatorModel, Greedy};
use cilo_core::pipeline::{
    self, eval_seeds, expert_seed, generate_expert, run_with, EpochReport, InitSeeds, Learners, References,
    RunConfig,
};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ModelKind, SignatureShape};
use crate::error::{data, io_error, Error, Result};
use crate::traj::{chain_transitions, load_trajectories, save_trajectories};

/// Columns of the consolidated report, in order.
pub const REPORT_COLUMNS: [&str; 9] =
    ["epoch", "idm_loss", "error_pi", "disc_acc", "is_size", "admitted", "aer", "perf", "sig_dist"];

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Creates `root` and its subdirectories; an existing directory is reused.
    pub fn create(root: &Path) -> Result<Self> {
        for dir in [root.to_path_buf(), root.join("checkpoints"), root.join("datasets")] {
            fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn open(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(data(format!("{}: run directory not found", root.display())));
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn epochs_path(&self) -> PathBuf {
        self.root.join("epochs.csv")
    }

    pub fn eval_path(&self) -> PathBuf {
        self.root.join("eval.json")
    }

    pub fn checkpoint_path(&self, kind: ModelKind, epoch: usize) -> PathBuf {
        self.root.join("checkpoints").join(format!("{}-{epoch}.ckpt", kind.stem()))
    }

    pub fn dataset_path(&self, name: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{name}.traj.jsonl"))
    }

    pub fn write_config(&self, config: &RunConfig) -> Result<()> {
        write_json(&self.config_path(), config)
    }

    pub fn read_config(&self) -> Result<RunConfig> {
        read_config(&self.config_path())
    }

    pub fn read_epochs(&self) -> Result<Vec<EpochReport>> {
        read_epochs(&self.epochs_path())
    }

    fn save_learners(&self, config: &RunConfig, epoch: usize, l: &Learners<DiscriminatorModel>) -> Result<()> {
        let seeds = InitSeeds::for_master(config.seed);
        let shape = SignatureShape { d: config.env.state_dim(), k: config.signature_depth };
        let ckpts = [
            Checkpoint::idm(&l.idm, config.idm.lr, seeds.idm),
            Checkpoint::policy(&l.policy, config.policy.lr, seeds.policy),
            Checkpoint::discriminator(&l.gate, shape, config.discriminator.lr, seeds.discriminator),
        ];
        for ckpt in &ckpts {
            save_checkpoint(ckpt, &self.checkpoint_path(ckpt.kind, epoch))?;
        }
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Parses a run configuration; unknown fields and invalid values are
/// configuration errors.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config: RunConfig =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.validate().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(config)
}

/// Appends one CSV row per epoch, flushing after each so a crashed run
/// keeps its history.
pub struct EpochLog {
    writer: csv::Writer<File>,
    path: PathBuf,
}

impl EpochLog {
    pub fn create(path: &Path) -> Result<Self> {
        let writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
        Ok(Self { writer, path: path.to_path_buf() })
    }

    pub fn append(&mut self, report: &EpochReport) -> Result<()> {
        self.writer.serialize(report).map_err(|e| io_error(&self.path, e))?;
        self.writer.flush().map_err(|e| io_error(&self.path, e))
    }
}

pub fn read_epochs(path: &Path) -> Result<Vec<EpochReport>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    reader.deserialize().map(|row| row.map_err(|e| io_error(path, e))).collect()
}

#[derive(Serialize)]
struct ReportRow {
    epoch: usize,
    idm_loss: f64,
    error_pi: f64,
    disc_acc: f64,
    is_size: usize,
    admitted: usize,
    aer: f64,
    perf: f64,
    sig_dist: f64,
}

pub fn write_report(reports: &[EpochReport], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(REPORT_COLUMNS).map_err(|e| io_error(path, e))?;
    for r in reports {
        let row = ReportRow {
            epoch: r.epoch,
            idm_loss: r.idm_loss,
            error_pi: r.error_pi,
            disc_acc: r.disc_acc,
            is_size: r.is_size,
            admitted: r.admitted,
            aer: r.aer,
            perf: r.perf,
            sig_dist: r.sig_dist,
        };
        w.serialize(row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// The expert demonstrations a run trains on: the configured file, or fresh
/// scripted-expert rollouts.
pub fn load_expert(config: &RunConfig) -> Result<TrajectorySet> {
    let expert = match &config.expert_path {
        Some(p) => load_trajectories(Path::new(p))?,
        None => generate_expert(&config.env, config.expert_episodes, expert_seed(config.seed))?,
    };
    let (d, m) = (config.env.state_dim(), config.env.action_dim());
    if expert.state_dim != d || expert.action_dim != m {
        return Err(data(format!(
            "expert data has d={}, m={}; environment needs d={d}, m={m}",
            expert.state_dim, expert.action_dim
        )));
    }
    if expert.is_empty() {
        return Err(data("expert data holds no trajectories"));
    }
    Ok(expert)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub reports: Vec<EpochReport>,
    pub references: References,
    pub final_eval: EvalReport,
}

/// Runs training into `root`, writing checkpoints every `checkpoint_every`
/// epochs and always at the last one.
pub fn train(config: &RunConfig, root: &Path, checkpoint_every: usize) -> Result<TrainSummary> {
    config.validate().map_err(|e| Error::Config(e.to_string()))?;
    if checkpoint_every == 0 {
        return Err(Error::Config("checkpoint interval must be at least 1".into()));
    }
    let expert = load_expert(config)?;
    let run = RunDir::create(root)?;
    run.write_config(config)?;
    save_trajectories(&expert, &run.dataset_path("expert"))?;
    let mut log = EpochLog::create(&run.epochs_path())?;

    let disc = DiscriminatorModel::new(
        config.env.state_dim(),
        config.signature_depth,
        config.discriminator,
        InitSeeds::for_master(config.seed).discriminator,
    )?;
    let mut write_failure: Option<Error> = None;
    let outcome = run_with(config, &expert, disc, |report, learners| {
        let mut write = || -> Result<()> {
            log.append(report)?;
            if report.epoch % checkpoint_every == 0 {
                run.save_learners(config, report.epoch, learners)?;
            }
            Ok(())
        };
        write().map_err(|e| {
            write_failure = Some(e);
            cilo_core::Error::Input("run directory write failed".into())
        })
    });
    let outcome = match outcome {
        Ok(o) => o,
        Err(failure) => return Err(write_failure.unwrap_or_else(|| failure.error.into())),
    };

    let last = outcome.reports.last().map_or(0, |r| r.epoch);
    if last % checkpoint_every != 0 {
        run.save_learners(config, last, &outcome.learners)?;
    }
    let l = &outcome.learners;
    let pre_seed = config.seed;
    save_trajectories(&chain_transitions(&l.pre, Source::Random, pre_seed)?, &run.dataset_path("pre"))?;
    save_trajectories(&chain_transitions(&l.validation, Source::Random, pre_seed)?, &run.dataset_path("validation"))?;
    save_trajectories(&chain_transitions(&l.pos, Source::Agent, pre_seed)?, &run.dataset_path("pos"))?;
    write_json(&run.eval_path(), &outcome.final_eval)?;
    Ok(TrainSummary { reports: outcome.reports, references: outcome.references, final_eval: outcome.final_eval })
}

/// Greedy evaluation of the policy checkpoint of `epoch` (the last logged
/// epoch when `None`) on `episodes` evaluation seeds.
pub fn evaluate_run(run: &RunDir, epoch: Option<usize>, episodes: Option<usize>) -> Result<(usize, EvalReport)> {
    let config = run.read_config()?;
    let epoch = match epoch {
        Some(e) => e,
        None => run
            .read_epochs()?
            .last()
            .map(|r| r.epoch)
            .ok_or_else(|| data(format!("{}: no epochs logged", run.epochs_path().display())))?,
    };
    let path = run.checkpoint_path(ModelKind::Policy, epoch);
    let policy = load_checkpoint(&path)?.into_policy()?;
    let seeds = eval_seeds(config.seed, episodes.unwrap_or(config.eval_episodes));
    if seeds.is_empty() {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let refs = pipeline::references(&config.env, &seeds, config.seed)?;
    Ok((epoch, pipeline::evaluate(&mut Greedy(&policy), &config.env, &seeds, refs)?))
}

pub fn read_eval(path: &Path) -> Result<EvalReport> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| io_error(path, e))
}

/// Signatures of every trajectory in a file, as written by `cilo signature`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureFile {
    pub d: usize,
    pub k: usize,
    pub signatures: Vec<Vec<f64>>,
}

pub fn signatures_of(set: &TrajectorySet, depth: usize) -> Result<SignatureFile> {
    let signatures = set
        .episodes()
        .iter()
        .map(|e| cilo_core::signature::compute_signature(&e.trajectory, depth).map(|s| s.into_coeffs()))
        .collect::<cilo_core::Result<_>>()?;
    Ok(SignatureFile { d: set.state_dim, k: depth, signatures })
}
