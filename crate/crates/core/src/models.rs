//! The three learners: inverse dynamics model, policy and discriminator.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{Origin, Source, Transition, TransitionSet, TrajectorySet};
use crate::env::Actor;
use crate::error::{check_len, input, Error, Result};
use crate::exploration::ExplorationConfig;
use crate::nn::{self, AdamState, MlpModel, Mode, Topology};
use crate::rng::{self, Rng};
use crate::signature::{signature_length, Signature};

/// Width and optimiser settings shared by the model constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub width: usize,
    /// Token count for the attention layers (`width` must divide evenly).
    pub tokens: usize,
    pub lr: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { width: 64, tokens: 8, lr: 1e-3 }
    }
}

/// Per-epoch mean training loss plus the greedy loss on the full set after
/// training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<f64>,
    pub final_loss: f64,
}

/// Shuffled minibatches covering `0..n` once.
fn epoch_batches(n: usize, batch: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch.max(1)).map(<[usize]>::to_vec).collect()
}

/// One L1 regression step on a minibatch. Predictions are replaced by their
/// exploration sample before the loss; the gradient flows through the mean.
fn l1_step(
    net: &mut MlpModel,
    adam: &mut AdamState,
    exploration: &ExplorationConfig,
    inputs: &[&[f64]],
    targets: &[&[f64]],
    rng: &mut Rng,
    grads: &mut [f64],
) -> Result<f64> {
    grads.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (x, y) in inputs.iter().zip(targets) {
        let tape = net.forward_tape(x, Mode::Train, rng)?;
        let sampled = exploration.perturb(y, tape.output(), rng)?;
        loss += nn::l1_loss(&sampled, y)?;
        let up = nn::l1_grad(&sampled, y)?;
        net.backward(&tape, &up, grads)?;
    }
    let n = inputs.len() as f64;
    grads.iter_mut().for_each(|g| *g /= n);
    adam.step(net.params_mut(), grads)?;
    Ok(loss / n)
}

fn pair(s: &[f64], sn: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(s.len() * 2);
    x.extend_from_slice(s);
    x.extend_from_slice(sn);
    x
}

/// Inverse dynamics model `M(s_t, s_{t+1}) → a_t`.
#[derive(Debug, Clone)]
pub struct IdmModel {
    net: MlpModel,
    adam: AdamState,
    pub exploration: ExplorationConfig,
    state_dim: usize,
    action_dim: usize,
}

impl IdmModel {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        cfg: NetConfig,
        exploration: ExplorationConfig,
        seed: u64,
    ) -> Result<Self> {
        exploration.validate()?;
        let net = MlpModel::new(Topology::idm(state_dim, action_dim, cfg.width, cfg.tokens)?, seed)?;
        Self::from_net(net, cfg.lr, exploration)
    }

    pub fn from_net(net: MlpModel, lr: f64, exploration: ExplorationConfig) -> Result<Self> {
        if net.input_dim() % 2 != 0 {
            return Err(input("IDM input must be a state pair"));
        }
        let adam = AdamState::new(net.param_count(), lr);
        Ok(Self { state_dim: net.input_dim() / 2, action_dim: net.output_dim(), net, adam, exploration })
    }

    pub fn net(&self) -> &MlpModel {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut MlpModel {
        &mut self.net
    }

    pub fn predict(&self, state: &[f64], next_state: &[f64]) -> Result<Vec<f64>> {
        check_len(self.state_dim, state.len())?;
        check_len(self.state_dim, next_state.len())?;
        self.net.predict(&pair(state, next_state))
    }

    fn check_set(&self, data: &TransitionSet) -> Result<()> {
        check_len(self.state_dim, data.state_dim())?;
        check_len(self.action_dim, data.action_dim())
    }

    /// Greedy mean L1 error per record.
    pub fn mean_l1(&self, data: &TransitionSet) -> Result<f64> {
        self.check_set(data)?;
        if data.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for t in data {
            let a = t.action.as_ref().ok_or_else(|| input("unlabelled record in IDM data"))?;
            total += nn::l1_loss(&self.predict(&t.state, &t.next_state)?, a)?;
        }
        Ok(total / data.len() as f64)
    }

    /// Minimises `Σ |M(s_t, s_{t+1}) − a_t|` over `data`.
    pub fn train(&mut self, data: &TransitionSet, epochs: usize, batch: usize, seed: u64) -> Result<TrainReport> {
        self.check_set(data)?;
        if !data.is_labeled() {
            return Err(input("IDM training requires labelled transitions"));
        }
        let mut r = rng::rng(seed);
        let inputs: Vec<Vec<f64>> = data.iter().map(|t| pair(&t.state, &t.next_state)).collect();
        let targets: Vec<&[f64]> = data.iter().map(|t| t.action.as_deref().unwrap_or_default()).collect();
        let mut grads = vec![0.0; self.net.param_count()];
        let mut history = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let mut sum = 0.0;
            for b in epoch_batches(inputs.len(), batch, &mut r) {
                let xs: Vec<&[f64]> = b.iter().map(|&i| inputs[i].as_slice()).collect();
                let ys: Vec<&[f64]> = b.iter().map(|&i| targets[i]).collect();
                sum += l1_step(&mut self.net, &mut self.adam, &self.exploration, &xs, &ys, &mut r, &mut grads)?
                    * b.len() as f64;
            }
            history.push(sum / inputs.len().max(1) as f64);
        }
        Ok(TrainReport { history, final_loss: self.mean_l1(data)? })
    }

    /// Copy of `set` with every action replaced by the greedy IDM output.
    pub fn label_transitions(&self, set: &TransitionSet) -> Result<TransitionSet> {
        self.check_set(set)?;
        let mut out = TransitionSet::new(set.state_dim(), set.action_dim());
        for t in set {
            let a = self.predict(&t.state, &t.next_state)?;
            out.push(Transition { action: Some(a), ..t.clone() })?;
        }
        Ok(out)
    }

    /// Pseudo-labels every transition of an observation-only expert set.
    pub fn pseudo_label(&self, expert: &TrajectorySet) -> Result<TransitionSet> {
        self.label_transitions(&expert.observations_only().to_transitions(Origin::Expert))
    }
}

/// Policy `π(s_t) → a_t`.
#[derive(Debug, Clone)]
pub struct PolicyModel {
    net: MlpModel,
    adam: AdamState,
    pub exploration: ExplorationConfig,
}

impl PolicyModel {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        cfg: NetConfig,
        exploration: ExplorationConfig,
        seed: u64,
    ) -> Result<Self> {
        exploration.validate()?;
        let net = MlpModel::new(Topology::policy(state_dim, action_dim, cfg.width, cfg.tokens)?, seed)?;
        Ok(Self::from_net(net, cfg.lr, exploration))
    }

    pub fn from_net(net: MlpModel, lr: f64, exploration: ExplorationConfig) -> Self {
        let adam = AdamState::new(net.param_count(), lr);
        Self { net, adam, exploration }
    }

    pub fn net(&self) -> &MlpModel {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut MlpModel {
        &mut self.net
    }

    pub fn predict(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.net.predict(state)
    }

    /// Greedy mean L1 gap to the labels of `labeled`.
    pub fn mean_l1(&self, labeled: &TransitionSet) -> Result<f64> {
        if labeled.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for t in labeled {
            let a = t.action.as_ref().ok_or_else(|| input("unlabelled record in BC data"))?;
            total += nn::l1_loss(&self.predict(&t.state)?, a)?;
        }
        Ok(total / labeled.len() as f64)
    }

    /// Behavioural cloning on `labeled` (already carrying the targets).
    pub fn fit_labels(&mut self, labeled: &TransitionSet, epochs: usize, batch: usize, seed: u64) -> Result<TrainReport> {
        check_len(self.net.input_dim(), labeled.state_dim())?;
        check_len(self.net.output_dim(), labeled.action_dim())?;
        if !labeled.is_labeled() {
            return Err(input("behavioural cloning needs labelled transitions"));
        }
        let mut r = rng::rng(seed);
        let inputs: Vec<&[f64]> = labeled.iter().map(|t| t.state.as_slice()).collect();
        let targets: Vec<&[f64]> = labeled.iter().map(|t| t.action.as_deref().unwrap_or_default()).collect();
        let mut grads = vec![0.0; self.net.param_count()];
        let mut history = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let mut sum = 0.0;
            for b in epoch_batches(inputs.len(), batch, &mut r) {
                let xs: Vec<&[f64]> = b.iter().map(|&i| inputs[i]).collect();
                let ys: Vec<&[f64]> = b.iter().map(|&i| targets[i]).collect();
                sum += l1_step(&mut self.net, &mut self.adam, &self.exploration, &xs, &ys, &mut r, &mut grads)?
                    * b.len() as f64;
            }
            history.push(sum / inputs.len().max(1) as f64);
        }
        Ok(TrainReport { history, final_loss: self.mean_l1(labeled)? })
    }

    /// Minimises `Σ |M(s_t, s_{t+1}) − π(s_t)|` over the expert transitions,
    /// with `idm` frozen. Returns `error_π`, the greedy mean L1 gap after
    /// training.
    pub fn train_bc(
        &mut self,
        idm: &IdmModel,
        expert_states: &TransitionSet,
        epochs: usize,
        batch: usize,
        seed: u64,
    ) -> Result<f64> {
        let labeled = idm.label_transitions(expert_states)?;
        Ok(self.fit_labels(&labeled, epochs, batch, seed)?.final_loss)
    }
}

impl Actor for PolicyModel {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self.predict(obs)
    }
}

/// Greedy policy view that can be shared behind `&`.
pub struct Greedy<'a>(pub &'a PolicyModel);

impl Actor for Greedy<'_> {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        self.0.predict(obs)
    }
}

/// Discriminator class indices.
pub const EXPERT_CLASS: usize = 0;
pub const AGENT_CLASS: usize = 1;

/// Per-coefficient standardisation fitted to expert signatures, followed by
/// `asinh` so that far-away agents stay in a trainable range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl SignatureScaler {
    pub fn fit(sigs: &[&Signature]) -> Result<Self> {
        let first = sigs.first().ok_or_else(|| input("scaler needs at least one signature"))?;
        let len = first.coeffs().len();
        let n = sigs.len() as f64;
        let mut mean = vec![0.0; len];
        for s in sigs {
            check_len(len, s.coeffs().len())?;
            for (m, c) in mean.iter_mut().zip(s.coeffs()) {
                *m += c / n;
            }
        }
        let mut var = vec![0.0; len];
        for s in sigs {
            for ((v, c), m) in var.iter_mut().zip(s.coeffs()).zip(&mean) {
                *v += (c - m) * (c - m) / n;
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| libm::sqrt(*v).max(1e-3 * (1.0 + libm::fabs(*m))))
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, sig: &Signature) -> Result<Vec<f64>> {
        check_len(self.mean.len(), sig.coeffs().len())?;
        Ok(sig
            .coeffs()
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(c, (m, s))| libm::asinh((c - m) / s))
            .collect())
    }
}

/// Outcome of one discriminator training call.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorReport {
    /// Accuracy on the held-out 20% split (training set if nothing was held out).
    pub accuracy: f64,
    /// Mean cross-entropy on the training split before and after.
    pub loss_before: f64,
    pub loss_after: f64,
}

/// Two-class classifier over trajectory signatures.
#[derive(Debug, Clone)]
pub struct DiscriminatorModel {
    net: MlpModel,
    adam: AdamState,
    dim: usize,
    depth: usize,
    scaler: Option<SignatureScaler>,
}

impl DiscriminatorModel {
    pub fn new(dim: usize, depth: usize, cfg: NetConfig, seed: u64) -> Result<Self> {
        let net = MlpModel::new(Topology::discriminator(signature_length(dim, depth)?, cfg.width), seed)?;
        Self::from_net(net, dim, depth, cfg.lr, None)
    }

    pub fn from_net(net: MlpModel, dim: usize, depth: usize, lr: f64, scaler: Option<SignatureScaler>) -> Result<Self> {
        check_len(signature_length(dim, depth)?, net.input_dim())?;
        check_len(2, net.output_dim())?;
        let adam = AdamState::new(net.param_count(), lr);
        Ok(Self { net, adam, dim, depth, scaler })
    }

    pub fn net(&self) -> &MlpModel {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut MlpModel {
        &mut self.net
    }

    pub fn scaler(&self) -> Option<&SignatureScaler> {
        self.scaler.as_ref()
    }

    fn check_sig(&self, sig: &Signature) -> Result<()> {
        if sig.dim() != self.dim || sig.depth() != self.depth {
            return Err(Error::Input(alloc::format!(
                "discriminator expects (d={}, k={}), got (d={}, k={})",
                self.dim,
                self.depth,
                sig.dim(),
                sig.depth()
            )));
        }
        Ok(())
    }

    fn features(&self, sig: &Signature) -> Result<Vec<f64>> {
        self.check_sig(sig)?;
        match &self.scaler {
            Some(s) => s.transform(sig),
            None => Ok(sig.coeffs().to_vec()),
        }
    }

    pub fn logits(&self, sig: &Signature) -> Result<Vec<f64>> {
        self.net.predict(&self.features(sig)?)
    }

    /// Expert only when its logit is strictly larger.
    pub fn discriminate(&self, sig: &Signature) -> Result<Source> {
        Ok(classify_logits(&self.logits(sig)?))
    }

    /// Cross-entropy training on expert (class 0) versus agent (class 1)
    /// signatures. Agents beyond four times the expert count are subsampled.
    pub fn train(
        &mut self,
        expert: &[Signature],
        agent: &[Signature],
        epochs: usize,
        batch: usize,
        seed: u64,
    ) -> Result<DiscriminatorReport> {
        if expert.is_empty() || agent.is_empty() {
            return Err(input("discriminator training needs both classes"));
        }
        for s in expert.iter().chain(agent) {
            self.check_sig(s)?;
        }
        let mut r = rng::rng(seed);
        self.scaler = Some(SignatureScaler::fit(&expert.iter().collect::<Vec<_>>())?);

        let mut agent_idx: Vec<usize> = (0..agent.len()).collect();
        if agent.len() > 4 * expert.len() {
            agent_idx.shuffle(&mut r);
            agent_idx.truncate(4 * expert.len());
            agent_idx.sort_unstable();
        }
        let mut labelled: Vec<(Vec<f64>, usize, bool)> = Vec::new();
        for (class, sigs) in [
            (EXPERT_CLASS, expert.iter().collect::<Vec<_>>()),
            (AGENT_CLASS, agent_idx.iter().map(|&i| &agent[i]).collect()),
        ] {
            let mut order: Vec<usize> = (0..sigs.len()).collect();
            order.shuffle(&mut r);
            let held = sigs.len() / 5;
            for (rank, i) in order.into_iter().enumerate() {
                labelled.push((self.features(sigs[i])?, class, rank < held));
            }
        }
        let train: Vec<(&[f64], usize)> =
            labelled.iter().filter(|s| !s.2).map(|s| (s.0.as_slice(), s.1)).collect();
        let held: Vec<(&[f64], usize)> =
            labelled.iter().filter(|s| s.2).map(|s| (s.0.as_slice(), s.1)).collect();

        let loss_before = self.mean_loss(&train)?;
        let mut grads = vec![0.0; self.net.param_count()];
        for _ in 0..epochs {
            for b in epoch_batches(train.len(), batch, &mut r) {
                grads.iter_mut().for_each(|g| *g = 0.0);
                for &i in &b {
                    let (x, y) = train[i];
                    let tape = self.net.forward_tape(x, Mode::Train, &mut r)?;
                    let up = nn::cross_entropy_grad(tape.output(), y)?;
                    self.net.backward(&tape, &up, &mut grads)?;
                }
                let n = b.len() as f64;
                grads.iter_mut().for_each(|g| *g /= n);
                self.adam.step(self.net.params_mut(), &grads)?;
            }
        }
        let loss_after = self.mean_loss(&train)?;
        let eval = if held.is_empty() { &train } else { &held };
        let mut correct = 0usize;
        for &(x, y) in eval {
            let class = match classify_logits(&self.net.predict(x)?) {
                Source::Expert => EXPERT_CLASS,
                _ => AGENT_CLASS,
            };
            correct += usize::from(class == y);
        }
        Ok(DiscriminatorReport { accuracy: correct as f64 / eval.len() as f64, loss_before, loss_after })
    }

    fn mean_loss(&self, set: &[(&[f64], usize)]) -> Result<f64> {
        let mut total = 0.0;
        for &(x, y) in set {
            total += nn::cross_entropy(&self.net.predict(x)?, y)?;
        }
        Ok(total / set.len().max(1) as f64)
    }
}

/// `Source::Expert` iff the expert logit wins strictly; ties go to the agent.
pub fn classify_logits(logits: &[f64]) -> Source {
    if logits[EXPERT_CLASS] > logits[AGENT_CLASS] {
        Source::Expert
    } else {
        Source::Agent
    }
}
