//! Anomaly classification over all or sampled schedules.
//!
//! Exhaustive classification walks every interleaving. Interleavings that
//! reach the same world state have the same futures, so results are
//! memoized per state; schedule counts and witnesses are still exact.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::instance::PhysicalInstance;
use super::schedule::{sample_runs, Mode, Schedule};
use super::value::fmt_record;
use super::world::{SinkSet, World};
use crate::error::{Error, Result};
use crate::model::StreamLabel;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub kind: String,
    /// Channel names in delivery order. For disagreement the schedule is a
    /// prefix ending at the first step where replicas disagree.
    pub schedule: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub mode: String,
    /// Complete schedules covered (saturating).
    pub schedules: u64,
    pub distinct_output_sets: usize,
    /// Different sink contents in different runs.
    pub run: bool,
    /// Replica outputs disagreed at some step of some run.
    pub inst: bool,
    /// Replica states differed after some complete run.
    pub diverge: bool,
    pub coordination_min: u64,
    pub coordination_max: u64,
    pub observed: StreamLabel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Witness>,
    /// A few distinct sink sets, rendered.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub output_sets: Vec<Vec<String>>,
}

const MAX_LISTED_OUTPUTS: usize = 8;

fn observed(run: bool, inst: bool, diverge: bool) -> StreamLabel {
    if diverge {
        StreamLabel::Diverge
    } else if inst {
        StreamLabel::Inst
    } else if run {
        StreamLabel::Run
    } else {
        StreamLabel::Async
    }
}

fn render(inst: &PhysicalInstance, s: &[usize]) -> Vec<String> {
    s.iter().map(|c| inst.channel_name(*c)).collect()
}

fn render_sink(s: &SinkSet) -> Vec<String> {
    s.iter().map(|(stream, r)| format!("{stream}:{}", fmt_record(r))).collect()
}

struct Summary {
    schedules: u64,
    outputs: BTreeMap<SinkSet, Schedule>,
    disagreement: Option<Schedule>,
    divergence: Option<Schedule>,
    cmin: u64,
    cmax: u64,
}

fn prepend(c: usize, s: &Schedule) -> Schedule {
    let mut out = Vec::with_capacity(s.len() + 1);
    out.push(c);
    out.extend_from_slice(s);
    out
}

struct Explorer<'a> {
    inst: &'a PhysicalInstance,
    bound: usize,
    memo: HashMap<World, Rc<Summary>>,
}

impl Explorer<'_> {
    fn explore(&mut self, w: World, depth: usize) -> Result<Rc<Summary>> {
        if let Some(s) = self.memo.get(&w) {
            return Ok(s.clone());
        }
        let here = w.replicas_disagree(self.inst);
        let enabled = w.enabled();
        let summary = if enabled.is_empty() {
            w.check_progress(self.inst)?;
            Summary {
                schedules: 1,
                outputs: BTreeMap::from([(w.sink.clone(), Vec::new())]),
                disagreement: here.then(Vec::new),
                divergence: w.replicas_diverged(self.inst).then(Vec::new),
                cmin: w.coordination,
                cmax: w.coordination,
            }
        } else {
            if depth >= self.bound {
                return Err(Error::ExhaustiveBound { events: depth + 1, bound: self.bound });
            }
            let mut acc = Summary {
                schedules: 0,
                outputs: BTreeMap::new(),
                disagreement: here.then(Vec::new),
                divergence: None,
                cmin: u64::MAX,
                cmax: 0,
            };
            for c in enabled {
                let mut next = w.clone();
                next.step(self.inst, c)?;
                let child = self.explore(next, depth + 1)?;
                acc.schedules = acc.schedules.saturating_add(child.schedules);
                for (k, s) in &child.outputs {
                    acc.outputs.entry(k.clone()).or_insert_with(|| prepend(c, s));
                }
                if acc.disagreement.is_none() {
                    acc.disagreement = child.disagreement.as_ref().map(|s| prepend(c, s));
                }
                if acc.divergence.is_none() {
                    acc.divergence = child.divergence.as_ref().map(|s| prepend(c, s));
                }
                acc.cmin = acc.cmin.min(child.cmin);
                acc.cmax = acc.cmax.max(child.cmax);
            }
            acc
        };
        let summary = Rc::new(summary);
        self.memo.insert(w, summary.clone());
        Ok(summary)
    }
}

pub fn classify_anomalies(inst: &PhysicalInstance, mode: Mode, bound: usize) -> Result<AnomalyReport> {
    match mode {
        Mode::Exhaustive => classify_exhaustive(inst, bound),
        Mode::Sample { samples, seed } => classify_sampled(inst, samples, seed),
    }
}

fn classify_exhaustive(inst: &PhysicalInstance, bound: usize) -> Result<AnomalyReport> {
    let mut ex = Explorer { inst, bound, memo: HashMap::new() };
    let s = ex.explore(World::new(inst), 0)?;
    let run = s.outputs.len() > 1;
    let inst_flag = s.disagreement.is_some();
    let diverge = s.divergence.is_some();
    let mut witnesses = Vec::new();
    if run {
        for sched in s.outputs.values().take(2) {
            witnesses.push(Witness { kind: "run".into(), schedule: render(inst, sched) });
        }
    }
    if let Some(sched) = &s.disagreement {
        witnesses.push(Witness { kind: "inst".into(), schedule: render(inst, sched) });
    }
    if let Some(sched) = &s.divergence {
        witnesses.push(Witness { kind: "diverge".into(), schedule: render(inst, sched) });
    }
    Ok(AnomalyReport {
        mode: "exhaustive".into(),
        schedules: s.schedules,
        distinct_output_sets: s.outputs.len(),
        run,
        inst: inst_flag,
        diverge,
        coordination_min: s.cmin,
        coordination_max: s.cmax,
        observed: observed(run, inst_flag, diverge),
        witnesses,
        output_sets: s.outputs.keys().take(MAX_LISTED_OUTPUTS).map(render_sink).collect(),
    })
}

fn classify_sampled(inst: &PhysicalInstance, samples: usize, seed: u64) -> Result<AnomalyReport> {
    let runs = sample_runs(inst, samples, seed)?;
    let mut outputs: BTreeMap<&SinkSet, &Schedule> = BTreeMap::new();
    let mut disagreement = None;
    let mut divergence = None;
    let (mut cmin, mut cmax) = (u64::MAX, 0);
    for e in &runs {
        outputs.entry(&e.sink).or_insert(&e.schedule);
        if e.disagreement && disagreement.is_none() {
            disagreement = Some(&e.schedule);
        }
        if e.divergence && divergence.is_none() {
            divergence = Some(&e.schedule);
        }
        cmin = cmin.min(e.coordination_messages);
        cmax = cmax.max(e.coordination_messages);
    }
    if runs.is_empty() {
        cmin = 0;
    }
    let run = outputs.len() > 1;
    let mut witnesses = Vec::new();
    if run {
        for sched in outputs.values().take(2) {
            witnesses.push(Witness { kind: "run".into(), schedule: render(inst, sched) });
        }
    }
    if let Some(sched) = disagreement {
        witnesses.push(Witness { kind: "inst".into(), schedule: render(inst, sched) });
    }
    if let Some(sched) = divergence {
        witnesses.push(Witness { kind: "diverge".into(), schedule: render(inst, sched) });
    }
    Ok(AnomalyReport {
        mode: format!("sample(n={samples}, seed={seed})"),
        schedules: runs.len() as u64,
        distinct_output_sets: outputs.len(),
        run,
        inst: disagreement.is_some(),
        diverge: divergence.is_some(),
        coordination_min: cmin,
        coordination_max: cmax,
        observed: observed(run, disagreement.is_some(), divergence.is_some()),
        witnesses,
        output_sets: outputs.keys().take(MAX_LISTED_OUTPUTS).map(|s| render_sink(s)).collect(),
    })
}
