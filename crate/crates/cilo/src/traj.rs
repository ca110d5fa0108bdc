//! `.traj.jsonl`: a header line followed by one JSON record per transition.
//!
//! ```text
//! {"format_version":1,"d":2,"m":1,"source":"expert","seed":7}
//! {"ep":0,"s":[0.0,1.0],"a":[0.5],"sn":[0.1,1.0]}
//! {"ep":0,"s":[0.1,1.0],"a":[0.5],"sn":[0.2,1.0]}
//! ```
//!
//! Consecutive records of an episode chain (`sn` of one equals `s` of the
//! next). A single-state episode is one record with `"sn": null`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use cilo_core::dataset::{Episode, Source, TrajectorySet, TransitionSet};
use cilo_core::signature::Trajectory;
use serde::{Deserialize, Serialize};

use crate::error::{data, io_error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    d: usize,
    m: usize,
    source: Source,
    seed: u64,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    ep: usize,
    s: &'a [f64],
    a: Option<&'a [f64]>,
    sn: Option<&'a [f64]>,
}

#[derive(Deserialize)]
struct Record {
    ep: usize,
    s: Vec<f64>,
    a: Option<Vec<f64>>,
    sn: Option<Vec<f64>>,
}

pub fn write_trajectories<W: Write>(set: &TrajectorySet, mut w: W) -> Result<()> {
    let header = Header {
        format_version: FORMAT_VERSION,
        d: set.state_dim,
        m: set.action_dim,
        source: set.source,
        seed: set.seed,
    };
    let mut emit = |line: String| writeln!(w, "{line}").map_err(|e| data(e.to_string()));
    emit(serde_json::to_string(&header).map_err(|e| data(e.to_string()))?)?;
    for (ep, episode) in set.episodes().iter().enumerate() {
        let traj = &episode.trajectory;
        if traj.len() == 1 {
            // `a: []` keeps a labelled single-state episode labelled.
            let a = episode.actions.as_ref().map(|_| &[][..]);
            let rec = RecordOut { ep, s: traj.state(0), a, sn: None };
            emit(serde_json::to_string(&rec).map_err(|e| data(e.to_string()))?)?;
            continue;
        }
        for t in 0..traj.len() - 1 {
            let rec = RecordOut {
                ep,
                s: traj.state(t),
                a: episode.actions.as_ref().map(|a| a[t].as_slice()),
                sn: Some(traj.state(t + 1)),
            };
            emit(serde_json::to_string(&rec).map_err(|e| data(e.to_string()))?)?;
        }
    }
    Ok(())
}

#[derive(Default)]
struct Partial {
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    labeled: Option<bool>,
    closed: bool,
}

impl Partial {
    fn finish(self, set: &mut TrajectorySet) -> Result<()> {
        let trajectory = Trajectory::from_states(&self.states)?;
        let actions = (self.labeled == Some(true)).then_some(self.actions);
        set.push(Episode { trajectory, actions })?;
        Ok(())
    }
}

/// Parses a trajectory stream; `name` identifies it in error messages.
pub fn read_trajectories<R: BufRead>(r: R, name: &str) -> Result<TrajectorySet> {
    let mut lines = r.lines().enumerate();
    let header_line = match lines.next() {
        Some((_, line)) => line.map_err(|e| data(format!("{name}: {e}")))?,
        None => return Err(data(format!("{name}: empty file, expected a header line"))),
    };
    let header = parse_header(&header_line).map_err(|m| data(format!("{name}: {m}")))?;
    let mut set = TrajectorySet::new(header.d, header.m, header.source, header.seed);
    let mut current: Option<(usize, Partial)> = None;
    for (i, line) in lines {
        let at = |m: String| data(format!("{name}:{}: {m}", i + 1));
        let line = line.map_err(|e| at(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        let next_ep = current.as_ref().map_or(0, |(ep, _)| ep + 1);
        let continues = current.as_ref().is_some_and(|(ep, _)| *ep == rec.ep);
        if !continues {
            if rec.ep != next_ep {
                return Err(at(format!("episode index {} out of sequence, expected {next_ep}", rec.ep)));
            }
            if let Some((_, done)) = current.take() {
                done.finish(&mut set).map_err(|e| e.context(format!("{name}:{}", i)))?;
            }
            current = Some((rec.ep, Partial::default()));
        }
        let (_, ep) = current.as_mut().expect("episode opened above");
        if ep.closed {
            return Err(at("record after a single-state marker".into()));
        }
        if rec.s.len() != header.d {
            return Err(at(format!("state has {} entries, header says d = {}", rec.s.len(), header.d)));
        }
        match ep.states.last() {
            None => ep.states.push(rec.s),
            Some(last) if *last == rec.s => {}
            Some(_) => return Err(at("state does not continue the previous record".into())),
        }
        let Some(sn) = rec.sn else {
            if ep.states.len() != 1 || rec.a.as_ref().is_some_and(|a| !a.is_empty()) {
                return Err(at("\"sn\": null is only valid as a lone single-state record".into()));
            }
            ep.labeled = Some(rec.a.is_some());
            ep.closed = true;
            continue;
        };
        let labeled = rec.a.is_some();
        if *ep.labeled.get_or_insert(labeled) != labeled {
            return Err(at("episode mixes labelled and unlabelled records".into()));
        }
        if let Some(a) = rec.a {
            ep.actions.push(a);
        }
        ep.states.push(sn);
    }
    if let Some((_, done)) = current {
        done.finish(&mut set).map_err(|e| e.context(name))?;
    }
    Ok(set)
}

fn parse_header(line: &str) -> std::result::Result<Header, String> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|_| "unrecognised header: format_version missing".to_string())?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(format!("format_version mismatch: file has {v}, reader supports {FORMAT_VERSION}")),
        None => return Err("unrecognised header: format_version missing".into()),
    }
    serde_json::from_value(value).map_err(|e| format!("malformed header: {e}"))
}

pub fn save_trajectories(set: &TrajectorySet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = BufWriter::new(file);
    write_trajectories(set, &mut w).map_err(|e| e.context(path.display()))?;
    w.flush().map_err(|e| io_error(path, e))
}

pub fn load_trajectories(path: &Path) -> Result<TrajectorySet> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    read_trajectories(BufReader::new(file), &path.display().to_string())
}

/// Regroups a transition list into episodes by chaining records whose
/// `next_state` equals the following record's `state`.
pub fn chain_transitions(set: &TransitionSet, source: Source, seed: u64) -> Result<TrajectorySet> {
    let mut out = TrajectorySet::new(set.state_dim(), set.action_dim(), source, seed);
    let labeled = set.is_labeled();
    let mut states: Vec<Vec<f64>> = Vec::new();
    let mut actions: Vec<Vec<f64>> = Vec::new();
    let mut flush = |states: &mut Vec<Vec<f64>>, actions: &mut Vec<Vec<f64>>| -> Result<()> {
        if states.is_empty() {
            return Ok(());
        }
        let trajectory = Trajectory::from_states(states)?;
        let acts = labeled.then(|| std::mem::take(actions));
        out.push(Episode { trajectory, actions: acts })?;
        states.clear();
        actions.clear();
        Ok(())
    };
    for t in set {
        if states.last().is_some_and(|last| *last != t.state) {
            flush(&mut states, &mut actions)?;
        }
        if states.is_empty() {
            states.push(t.state.clone());
        }
        if let (true, Some(a)) = (labeled, &t.action) {
            actions.push(a.clone());
        }
        states.push(t.next_state.clone());
    }
    flush(&mut states, &mut actions)?;
    Ok(out)
}
