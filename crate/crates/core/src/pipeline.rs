//! The outer training loop.
//!
//! Each outer epoch: fit the IDM on `I^s`, pseudo-label the expert
//! observations, clone them into the policy, roll the policy out, sign the
//! rollouts, refit the discriminator, and append the rollouts it mistakes for
//! the expert to `I^pos`. Training stops once `error_π` drops to the
//! threshold or the epoch budget runs out.
//!
//! Seeds: every stage draws from `rng::derive(master, stage, epoch)`; items
//! inside a stage (episodes) use `rng::child(stage_seed, index)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{self, upscale_expert, Origin, Source, TransitionSet, TrajectorySet};
use crate::env::{self, Actor, EnvSpec, ExpertActor, UniformRandomActor};
use crate::error::{input, Error, Result};
use crate::exploration::ExplorationConfig;
use crate::metrics::{self, EvalReport};
use crate::models::{DiscriminatorModel, Greedy, IdmModel, NetConfig, PolicyModel};
use crate::rng::{self, Stage};
use crate::signature::{compute_signature, mean_signature, Signature, SignatureReference};

/// Full configuration of one run. Missing fields take the
/// [`RunConfig::default`] values when deserialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvSpec,
    /// Expert dataset to load; generated from the scripted expert when absent.
    pub expert_path: Option<alloc::string::String>,
    pub expert_episodes: usize,
    pub signature_depth: usize,
    pub exploration: ExplorationConfig,
    pub idm: NetConfig,
    pub policy: NetConfig,
    pub discriminator: NetConfig,
    pub idm_epochs: usize,
    pub policy_epochs: usize,
    pub discriminator_epochs: usize,
    pub batch_size: usize,
    /// Outer epoch budget.
    pub epochs: usize,
    /// Early stop once `error_π ≤ threshold`.
    pub threshold: f64,
    pub upscale_factor: usize,
    /// `|I^pre|`.
    pub pre_transitions: usize,
    /// Share of `I^pre` held out to report the IDM's validation loss.
    pub validation_fraction: f64,
    /// Which policy collects `I^pre`.
    pub pre_policy: PrePolicy,
    pub rollouts_per_epoch: usize,
    pub eval_episodes: usize,
    /// Optional cap on `|I^pos|` with oldest-first eviction.
    pub pos_cap: Option<usize>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::desk(EnvSpec::double_integrator(), 0)
    }
}

impl RunConfig {
    /// Laptop-scale defaults for `spec`.
    pub fn desk(env: EnvSpec, seed: u64) -> Self {
        Self {
            env,
            expert_path: None,
            expert_episodes: 10,
            signature_depth: 3,
            exploration: ExplorationConfig::default(),
            idm: NetConfig::default(),
            policy: NetConfig::default(),
            discriminator: NetConfig::default(),
            idm_epochs: 3,
            policy_epochs: 3,
            discriminator_epochs: 5,
            batch_size: 64,
            epochs: 400,
            threshold: 0.05,
            upscale_factor: 1,
            pre_transitions: 5000,
            validation_fraction: 0.3,
            pre_policy: PrePolicy::Uniform,
            rollouts_per_epoch: 10,
            eval_episodes: 50,
            pos_cap: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.exploration.validate()?;
        let counts = [
            ("expert_episodes", self.expert_episodes),
            ("signature_depth", self.signature_depth),
            ("idm_epochs", self.idm_epochs),
            ("policy_epochs", self.policy_epochs),
            ("discriminator_epochs", self.discriminator_epochs),
            ("pre_transitions", self.pre_transitions),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("upscale_factor", self.upscale_factor),
            ("rollouts_per_epoch", self.rollouts_per_epoch),
            ("eval_episodes", self.eval_episodes),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Input(alloc::format!("{name} must be at least 1")));
        }
        for (name, net) in [("idm", &self.idm), ("policy", &self.policy), ("discriminator", &self.discriminator)] {
            if !(net.lr > 0.0 && net.lr.is_finite()) || net.width == 0 || net.tokens == 0 {
                return Err(Error::Input(alloc::format!("{name}: learning rate, width and tokens must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(input("validation_fraction must lie in [0, 1)"));
        }
        if !(self.threshold >= 0.0) {
            return Err(input("threshold must be non-negative"));
        }
        Ok(())
    }
}

/// Behaviour used to collect the random transitions `I^pre`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrePolicy {
    /// Actions uniform in the action bounds.
    #[default]
    Uniform,
    /// The freshly initialised policy network, queried greedily.
    Initial,
}

/// One row of training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub idm_loss: f64,
    /// IDM mean L1 on the held-out part of `I^pre`.
    pub idm_val_loss: Option<f64>,
    pub error_pi: f64,
    pub disc_acc: f64,
    /// `|I^s|` after this epoch's admissions.
    pub is_size: usize,
    /// Agent trajectories admitted to `I^pos` this epoch.
    pub admitted: usize,
    pub aer: f64,
    pub perf: f64,
    /// Mean normalised signature distance of this epoch's rollouts.
    pub sig_dist: f64,
    /// Same, restricted to the admitted rollouts.
    pub admitted_sig_dist: Option<f64>,
}

/// Reference returns that anchor the performance scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub aer_random: f64,
    pub aer_expert: f64,
}

/// Decides which agent trajectories join `I^pos`.
pub trait Gate {
    /// Refits on this epoch's signatures; returns held-out accuracy.
    fn fit(&mut self, expert: &[Signature], agent: &[Signature], epochs: usize, batch: usize, seed: u64) -> Result<f64>;
    fn admit(&self, sig: &Signature) -> Result<bool>;
}

impl Gate for DiscriminatorModel {
    fn fit(&mut self, expert: &[Signature], agent: &[Signature], epochs: usize, batch: usize, seed: u64) -> Result<f64> {
        Ok(self.train(expert, agent, epochs, batch, seed)?.accuracy)
    }

    fn admit(&self, sig: &Signature) -> Result<bool> {
        Ok(self.discriminate(sig)? == Source::Expert)
    }
}

/// A gate that never admits anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct RejectAll;

impl Gate for RejectAll {
    fn fit(&mut self, _: &[Signature], _: &[Signature], _: usize, _: usize, _: u64) -> Result<f64> {
        Ok(1.0)
    }

    fn admit(&self, _: &Signature) -> Result<bool> {
        Ok(false)
    }
}

/// Rolls `policy` out until `n` transitions are collected, truncating the
/// last episode. Labels are the executed actions.
pub fn collect_ipre<A: Actor + ?Sized>(policy: &mut A, spec: &EnvSpec, n: usize, seed: u64) -> Result<TransitionSet> {
    let mut set = TransitionSet::new(spec.state_dim(), spec.action_dim());
    if spec.horizon == 0 && n > 0 {
        return Err(input("cannot collect transitions with a zero horizon"));
    }
    let mut episode = 0u64;
    while set.len() < n {
        let steps = (n - set.len()).min(spec.horizon);
        let r = env::rollout_steps(policy, spec, rng::child(seed, episode), steps)?;
        for t in r.episode.transitions(Origin::Pre) {
            set.push(t)?;
        }
        episode += 1;
    }
    Ok(set)
}

/// Seed of the scripted-expert demonstrations a run generates for itself.
pub fn expert_seed(master: u64) -> u64 {
    rng::derive(master, Stage::Expert, 0)
}

/// Scripted-expert demonstrations (actions kept; strip them before use).
pub fn generate_expert(spec: &EnvSpec, episodes: usize, seed: u64) -> Result<TrajectorySet> {
    let mut set = TrajectorySet::new(spec.state_dim(), spec.action_dim(), Source::Expert, seed);
    let mut expert = ExpertActor::new(spec);
    for i in 0..episodes {
        let (ep, _) = env::rollout(&mut expert, spec, rng::child(seed, i as u64))?.into_parts();
        set.push(ep)?;
    }
    Ok(set)
}

/// Undiscounted returns of `actor` on `seeds`.
pub fn episode_returns<A: Actor + ?Sized>(actor: &mut A, spec: &EnvSpec, seeds: &[u64]) -> Result<Vec<f64>> {
    seeds.iter().map(|&s| env::rollout(actor, spec, s).map(|r| r.total_reward())).collect()
}

/// Greedy evaluation: AER and performance against `refs`.
pub fn evaluate<A: Actor + ?Sized>(actor: &mut A, spec: &EnvSpec, seeds: &[u64], refs: References) -> Result<EvalReport> {
    EvalReport::from_returns(episode_returns(actor, spec, seeds)?, refs.aer_random, refs.aer_expert)
}

pub fn eval_seeds(master: u64, episodes: usize) -> Vec<u64> {
    let base = rng::derive(master, Stage::Evaluation, 0);
    (0..episodes as u64).map(|i| rng::child(base, i)).collect()
}

/// Random and expert AER on the evaluation seeds.
pub fn references(spec: &EnvSpec, seeds: &[u64], master: u64) -> Result<References> {
    let aer_expert = metrics::aer(
        &episode_returns(&mut ExpertActor::new(spec), spec, seeds)?.iter().map(|r| [*r]).collect::<Vec<_>>(),
        1.0,
    )?;
    let mut random = UniformRandomActor::new(spec, rng::derive(master, Stage::RandomReference, 0));
    let aer_random =
        metrics::aer(&episode_returns(&mut random, spec, seeds)?.iter().map(|r| [*r]).collect::<Vec<_>>(), 1.0)?;
    Ok(References { aer_random, aer_expert })
}

/// Initialisation seeds of the three networks of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InitSeeds {
    pub idm: u64,
    pub policy: u64,
    pub discriminator: u64,
}

impl InitSeeds {
    pub fn for_master(master: u64) -> Self {
        Self {
            idm: rng::derive(master, Stage::Init, 1),
            policy: rng::derive(master, Stage::Init, 2),
            discriminator: rng::derive(master, Stage::Init, 3),
        }
    }
}

/// Models and data pools carried across outer epochs.
pub struct Learners<G> {
    pub idm: IdmModel,
    pub policy: PolicyModel,
    pub gate: G,
    /// Training part of `I^pre`.
    pub pre: TransitionSet,
    pub validation: TransitionSet,
    pub pos: TransitionSet,
}

impl<G> Learners<G> {
    /// `I^s = I^pre ⊕ I^pos`.
    pub fn samples(&self) -> Result<TransitionSet> {
        dataset::concat(&self.pre, &self.pos)
    }
}

/// Everything a finished run produces.
pub struct RunOutcome<G> {
    pub reports: Vec<EpochReport>,
    pub learners: Learners<G>,
    pub references: References,
    pub final_eval: EvalReport,
}

/// A failed run with the reports collected before the failing stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub reports: Vec<EpochReport>,
    pub error: Error,
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self { reports: Vec::new(), error }
    }
}

/// Runs the full loop with a fresh discriminator.
pub fn run_cilo(config: &RunConfig, expert: &TrajectorySet) -> Result<RunOutcome<DiscriminatorModel>, RunFailure> {
    let disc = DiscriminatorModel::new(
        config.env.state_dim(),
        config.signature_depth,
        config.discriminator,
        InitSeeds::for_master(config.seed).discriminator,
    )?;
    run_with(config, expert, disc, |_, _| Ok(()))
}

/// The loop proper, with an arbitrary gate and a per-epoch observer.
pub fn run_with<G, F>(
    config: &RunConfig,
    expert: &TrajectorySet,
    gate: G,
    mut observe: F,
) -> Result<RunOutcome<G>, RunFailure>
where
    G: Gate,
    F: FnMut(&EpochReport, &Learners<G>) -> Result<()>,
{
    config.validate()?;
    let spec = &config.env;
    let (d, m) = (spec.state_dim(), spec.action_dim());
    if expert.state_dim != d || expert.action_dim != m {
        return Err(input("expert dataset shape does not match the environment").into());
    }
    let master = config.seed;
    let expert_obs = expert.observations_only();
    let expert_states = upscale_expert(&expert_obs, config.upscale_factor)?;
    let expert_sigs: Vec<Signature> = expert_obs
        .episodes()
        .iter()
        .map(|e| compute_signature(&e.trajectory, config.signature_depth))
        .collect::<Result<_>>()?;

    let seeds = eval_seeds(master, config.eval_episodes);
    let refs = references(spec, &seeds, master)?;
    let mut random = UniformRandomActor::new(spec, rng::derive(master, Stage::RandomReference, 1));
    let random_sigs: Vec<Signature> = seeds
        .iter()
        .map(|&s| compute_signature(&env::rollout(&mut random, spec, s)?.episode.trajectory, config.signature_depth))
        .collect::<Result<_>>()?;
    let sig_ref = SignatureReference::new(mean_signature(&expert_sigs)?, mean_signature(&random_sigs)?)?;

    let init = InitSeeds::for_master(master);
    let idm = IdmModel::new(d, m, config.idm, config.exploration, init.idm)?;
    let policy = PolicyModel::new(d, m, config.policy, config.exploration, init.policy)?;
    let pre_seed = rng::derive(master, Stage::PreCollection, 0);
    let collected = match config.pre_policy {
        PrePolicy::Uniform => {
            let mut actor = UniformRandomActor::new(spec, rng::derive(master, Stage::PreCollection, 1));
            collect_ipre(&mut actor, spec, config.pre_transitions, pre_seed)?
        }
        PrePolicy::Initial => collect_ipre(&mut Greedy(&policy), spec, config.pre_transitions, pre_seed)?,
    };
    let (pre, validation) = collected.split(config.validation_fraction, rng::derive(master, Stage::PreCollection, 2))?;
    let mut learners = Learners { idm, policy, gate, pre, validation, pos: TransitionSet::new(d, m) };

    let mut reports = Vec::new();
    for epoch in 1..=config.epochs {
        match run_epoch(config, epoch, &mut learners, &expert_states, &expert_sigs, &sig_ref, refs) {
            Ok(report) => {
                let stop = report.error_pi <= config.threshold;
                if let Err(error) = observe(&report, &learners) {
                    reports.push(report);
                    return Err(RunFailure { reports, error });
                }
                reports.push(report);
                if stop {
                    break;
                }
            }
            Err(error) => return Err(RunFailure { reports, error }),
        }
    }
    let final_eval = match evaluate(&mut Greedy(&learners.policy), spec, &seeds, refs) {
        Ok(e) => e,
        Err(error) => return Err(RunFailure { reports, error }),
    };
    Ok(RunOutcome { reports, learners, references: refs, final_eval })
}

fn run_epoch<G: Gate>(
    config: &RunConfig,
    epoch: usize,
    l: &mut Learners<G>,
    expert_states: &TransitionSet,
    expert_sigs: &[Signature],
    sig_ref: &SignatureReference,
    refs: References,
) -> Result<EpochReport> {
    let spec = &config.env;
    let master = config.seed;
    let e = epoch as u64;

    let samples = l.samples()?;
    let idm_loss = l
        .idm
        .train(&samples, config.idm_epochs, config.batch_size, rng::derive(master, Stage::TrainIdm, e))?
        .final_loss;
    let idm_val_loss = if l.validation.is_empty() { None } else { Some(l.idm.mean_l1(&l.validation)?) };
    let error_pi = l.policy.train_bc(
        &l.idm,
        expert_states,
        config.policy_epochs,
        config.batch_size,
        rng::derive(master, Stage::TrainPolicy, e),
    )?;

    let rollout_seed = rng::derive(master, Stage::Rollout, e);
    let mut episodes = Vec::with_capacity(config.rollouts_per_epoch);
    let mut returns = Vec::with_capacity(config.rollouts_per_epoch);
    for i in 0..config.rollouts_per_epoch {
        let (ep, rewards) =
            env::rollout(&mut Greedy(&l.policy), spec, rng::child(rollout_seed, i as u64))?.into_parts();
        returns.push(rewards.iter().sum::<f64>());
        episodes.push(ep);
    }
    let agent_sigs: Vec<Signature> = episodes
        .iter()
        .map(|ep| compute_signature(&ep.trajectory, config.signature_depth))
        .collect::<Result<_>>()?;
    let dists: Vec<f64> = agent_sigs.iter().map(|s| sig_ref.distance(s)).collect::<Result<_>>()?;

    let disc_acc = l.gate.fit(
        expert_sigs,
        &agent_sigs,
        config.discriminator_epochs,
        config.batch_size,
        rng::derive(master, Stage::TrainDiscriminator, e),
    )?;

    let mut admitted = 0;
    let mut admitted_dist = 0.0;
    for ((ep, sig), dist) in episodes.iter().zip(&agent_sigs).zip(&dists) {
        if l.gate.admit(sig)? {
            for t in ep.transitions(Origin::Pos) {
                l.pos.push(t)?;
            }
            admitted += 1;
            admitted_dist += dist;
        }
    }
    if let Some(cap) = config.pos_cap {
        l.pos.evict_oldest_pos(cap);
    }

    let aer = metrics::aer(&returns.iter().map(|r| [*r]).collect::<Vec<_>>(), 1.0)?;
    Ok(EpochReport {
        epoch,
        idm_loss,
        idm_val_loss,
        error_pi,
        disc_acc,
        is_size: l.pre.len() + l.pos.len(),
        admitted,
        aer,
        perf: metrics::performance(aer, refs.aer_random, refs.aer_expert)?,
        sig_dist: dists.iter().sum::<f64>() / dists.len() as f64,
        admitted_sig_dist: (admitted > 0).then(|| admitted_dist / admitted as f64),
    })
}
