//! Model checkpoints as JSON lines: a header with the topology, an optional
//! scaler line for discriminators, then one line per parameter tensor in
//! parameter order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use cilo_core::exploration::ExplorationConfig;
use cilo_core::models::{DiscriminatorModel, IdmModel, PolicyModel, SignatureScaler};
use cilo_core::nn::{MlpModel, Topology};
use serde::{Deserialize, Serialize};

use crate::error::{data, io_error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Idm,
    Policy,
    Discriminator,
}

impl ModelKind {
    /// File-name stem used inside a run directory.
    pub fn stem(self) -> &'static str {
        match self {
            ModelKind::Idm => "idm",
            ModelKind::Policy => "policy",
            ModelKind::Discriminator => "disc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub input: usize,
    pub output: usize,
}

/// Signature shape a discriminator consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureShape {
    pub d: usize,
    pub k: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    kind: ModelKind,
    topology: Topology,
    dims: Dims,
    seed: u64,
    lr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exploration: Option<ExplorationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signature: Option<SignatureShape>,
}

#[derive(Serialize, Deserialize)]
struct ScalerLine {
    scaler: SignatureScaler,
}

#[derive(Serialize)]
struct TensorOut<'a> {
    name: String,
    shape: Vec<usize>,
    data: &'a [f64],
}

#[derive(Deserialize)]
struct TensorLine {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// A network plus what is needed to rebuild its trainer.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: ModelKind,
    /// Seed the network was initialised from.
    pub seed: u64,
    pub lr: f64,
    pub exploration: Option<ExplorationConfig>,
    pub signature: Option<SignatureShape>,
    pub scaler: Option<SignatureScaler>,
    pub net: MlpModel,
}

impl Checkpoint {
    pub fn idm(model: &IdmModel, lr: f64, seed: u64) -> Self {
        Self {
            kind: ModelKind::Idm,
            seed,
            lr,
            exploration: Some(model.exploration),
            signature: None,
            scaler: None,
            net: model.net().clone(),
        }
    }

    pub fn policy(model: &PolicyModel, lr: f64, seed: u64) -> Self {
        Self {
            kind: ModelKind::Policy,
            seed,
            lr,
            exploration: Some(model.exploration),
            signature: None,
            scaler: None,
            net: model.net().clone(),
        }
    }

    pub fn discriminator(model: &DiscriminatorModel, shape: SignatureShape, lr: f64, seed: u64) -> Self {
        Self {
            kind: ModelKind::Discriminator,
            seed,
            lr,
            exploration: None,
            signature: Some(shape),
            scaler: model.scaler().cloned(),
            net: model.net().clone(),
        }
    }

    fn expect(&self, kind: ModelKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(data(format!("checkpoint holds a {:?} model, expected {kind:?}", self.kind)))
        }
    }

    pub fn into_idm(self) -> Result<IdmModel> {
        self.expect(ModelKind::Idm)?;
        Ok(IdmModel::from_net(self.net, self.lr, self.exploration.unwrap_or_default())?)
    }

    pub fn into_policy(self) -> Result<PolicyModel> {
        self.expect(ModelKind::Policy)?;
        Ok(PolicyModel::from_net(self.net, self.lr, self.exploration.unwrap_or_default()))
    }

    pub fn into_discriminator(self) -> Result<DiscriminatorModel> {
        self.expect(ModelKind::Discriminator)?;
        let shape = self.signature.ok_or_else(|| data("discriminator checkpoint lacks a signature shape"))?;
        Ok(DiscriminatorModel::from_net(self.net, shape.d, shape.k, self.lr, self.scaler)?)
    }
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> Result<()> {
    let header = Header {
        format_version: FORMAT_VERSION,
        kind: ckpt.kind,
        topology: ckpt.net.topology().clone(),
        dims: Dims { input: ckpt.net.input_dim(), output: ckpt.net.output_dim() },
        seed: ckpt.seed,
        lr: ckpt.lr,
        exploration: ckpt.exploration,
        signature: ckpt.signature,
    };
    let mut emit = |json: serde_json::Result<String>| -> Result<()> {
        let line = json.map_err(|e| data(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| data(e.to_string()))
    };
    emit(serde_json::to_string(&header))?;
    if let Some(scaler) = &ckpt.scaler {
        emit(serde_json::to_string(&ScalerLine { scaler: scaler.clone() }))?;
    }
    for (name, shape, values) in ckpt.net.tensors() {
        emit(serde_json::to_string(&TensorOut { name, shape, data: values }))?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(r: R, name: &str) -> Result<Checkpoint> {
    let mut lines = r.lines().filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let mut next = |what: &str| -> Result<Option<String>> {
        lines.next().transpose().map_err(|e| data(format!("{name}: reading {what}: {e}")))
    };
    let header_line = next("header")?.ok_or_else(|| data(format!("{name}: empty checkpoint")))?;
    let value: serde_json::Value =
        serde_json::from_str(&header_line).map_err(|e| data(format!("{name}: malformed header: {e}")))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        other => {
            return Err(data(format!(
                "{name}: format_version mismatch: file has {other:?}, reader supports {FORMAT_VERSION}"
            )))
        }
    }
    let header: Header =
        serde_json::from_value(value).map_err(|e| data(format!("{name}: malformed header: {e}")))?;
    let (input, output, count) = header.topology.validate().map_err(|e| data(format!("{name}: {e}")))?;
    if (input, output) != (header.dims.input, header.dims.output) {
        return Err(data(format!("{name}: header dims disagree with the topology")));
    }
    let template = MlpModel::from_parts(header.topology.clone(), vec![0.0; count])?;
    let expected: Vec<(String, Vec<usize>)> =
        template.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();

    let mut scaler = None;
    let mut params = Vec::with_capacity(count);
    let mut seen = 0;
    while let Some(line) = next("tensor")? {
        if seen == 0 && scaler.is_none() && line.trim_start().starts_with("{\"scaler\"") {
            let s: ScalerLine = serde_json::from_str(&line).map_err(|e| data(format!("{name}: scaler: {e}")))?;
            scaler = Some(s.scaler);
            continue;
        }
        let t: TensorLine = serde_json::from_str(&line).map_err(|e| data(format!("{name}: tensor: {e}")))?;
        let Some((exp_name, exp_shape)) = expected.get(seen) else {
            return Err(data(format!("{name}: more tensors than the topology defines")));
        };
        if &t.name != exp_name || &t.shape != exp_shape {
            return Err(data(format!(
                "{name}: tensor {seen} is {} {:?}, expected {exp_name} {exp_shape:?}",
                t.name, t.shape
            )));
        }
        if t.data.len() != exp_shape.iter().product::<usize>() {
            return Err(data(format!("{name}: tensor {} has {} values", t.name, t.data.len())));
        }
        params.extend_from_slice(&t.data);
        seen += 1;
    }
    if seen != expected.len() {
        return Err(data(format!("{name}: {seen} tensors present, topology defines {}", expected.len())));
    }
    Ok(Checkpoint {
        kind: header.kind,
        seed: header.seed,
        lr: header.lr,
        exploration: header.exploration,
        signature: header.signature,
        scaler,
        net: MlpModel::from_parts(header.topology, params)?,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(ckpt, &mut w).map_err(|e| e.context(path.display()))?;
    w.flush().map_err(|e| io_error(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    read_checkpoint(BufReader::new(file), &path.display().to_string())
}
