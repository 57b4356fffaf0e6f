//! Schedules: explicit enumeration, seeded sampling and replay.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::instance::PhysicalInstance;
use super::runtime::State;
use super::world::{SinkSet, World};
use crate::error::{Error, Result};

pub const DEFAULT_EXHAUSTIVE_BOUND: usize = 10;
pub const DEFAULT_SAMPLES: usize = 1000;

/// Safety cap on the length of one sampled run.
const MAX_STEPS: usize = 1_000_000;

/// A delivery order: the channel whose head is delivered at each step.
pub type Schedule = Vec<usize>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ModeRepr", into = "ModeRepr")]
pub enum Mode {
    Exhaustive,
    Sample { samples: usize, seed: u64 },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ModeRepr {
    Named(String),
    Sample { samples: usize, seed: u64 },
}

impl TryFrom<ModeRepr> for Mode {
    type Error = String;

    fn try_from(r: ModeRepr) -> std::result::Result<Self, String> {
        match r {
            ModeRepr::Named(n) if n == "exhaustive" => Ok(Mode::Exhaustive),
            ModeRepr::Named(n) => Err(format!("unknown mode `{n}`")),
            ModeRepr::Sample { samples, seed } => Ok(Mode::Sample { samples, seed }),
        }
    }
}

impl From<Mode> for ModeRepr {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exhaustive => ModeRepr::Named("exhaustive".into()),
            Mode::Sample { samples, seed } => ModeRepr::Sample { samples, seed },
        }
    }
}

/// Result of running one schedule to completion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Execution {
    pub schedule: Schedule,
    pub sink: SinkSet,
    pub final_states: Vec<State>,
    pub coordination_messages: u64,
    /// Replica outputs were incomparable at some step.
    pub disagreement: bool,
    pub divergence: bool,
}

fn finish(inst: &PhysicalInstance, world: World, schedule: Schedule, disagreement: bool) -> Result<Execution> {
    world.check_progress(inst)?;
    Ok(Execution {
        divergence: world.replicas_diverged(inst),
        sink: world.sink,
        final_states: world.states,
        coordination_messages: world.coordination,
        disagreement,
        schedule,
    })
}

/// Replay `schedule`. It must deliver every message.
pub fn execute(inst: &PhysicalInstance, schedule: &[usize]) -> Result<Execution> {
    let mut world = World::new(inst);
    let mut disagreement = false;
    for &c in schedule {
        world.step(inst, c)?;
        disagreement |= world.replicas_disagree(inst);
    }
    if !world.is_quiescent() {
        return Err(Error::Runtime {
            instance: "schedule".into(),
            message: format!("{} messages left undelivered", world.queues.iter().map(|q| q.len()).sum::<usize>()),
        });
    }
    finish(inst, world, schedule.to_vec(), disagreement)
}

/// Every complete schedule, each exactly once. Fails once a schedule would
/// exceed `bound` deliveries.
pub fn enumerate_schedules(inst: &PhysicalInstance, bound: usize) -> Result<Vec<Schedule>> {
    fn go(inst: &PhysicalInstance, w: &World, prefix: &mut Schedule, bound: usize, out: &mut Vec<Schedule>) -> Result<()> {
        let enabled = w.enabled();
        if enabled.is_empty() {
            out.push(prefix.clone());
            return Ok(());
        }
        if prefix.len() >= bound {
            return Err(Error::ExhaustiveBound { events: prefix.len() + 1, bound });
        }
        for c in enabled {
            let mut next = w.clone();
            next.step(inst, c)?;
            prefix.push(c);
            go(inst, &next, prefix, bound, out)?;
            prefix.pop();
        }
        Ok(())
    }
    let mut out = Vec::new();
    go(inst, &World::new(inst), &mut Vec::new(), bound, &mut out)?;
    Ok(out)
}

/// Per-sample seeds drawn from the main seed.
pub fn sample_seeds(n: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen()).collect()
}

/// One random walk: each step delivers from a uniformly chosen nonempty
/// channel.
pub fn random_run(inst: &PhysicalInstance, seed: u64) -> Result<Execution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = World::new(inst);
    let mut schedule = Vec::new();
    let mut disagreement = false;
    loop {
        let enabled = world.enabled();
        if enabled.is_empty() {
            break;
        }
        if schedule.len() >= MAX_STEPS {
            return Err(Error::Runtime { instance: "sampler".into(), message: "run does not terminate".into() });
        }
        let c = enabled[rng.gen_range(0..enabled.len())];
        world.step(inst, c)?;
        schedule.push(c);
        disagreement |= world.replicas_disagree(inst);
    }
    finish(inst, world, schedule, disagreement)
}

/// `n` sampled runs, executed in parallel and returned in sample order.
pub fn sample_runs(inst: &PhysicalInstance, n: usize, seed: u64) -> Result<Vec<Execution>> {
    sample_seeds(n, seed).into_par_iter().map(|s| random_run(inst, s)).collect()
}

/// `n` sampled schedules, deterministic in `seed`.
pub fn sample_schedules(inst: &PhysicalInstance, n: usize, seed: u64) -> Result<Vec<Schedule>> {
    Ok(sample_runs(inst, n, seed)?.into_iter().map(|e| e.schedule).collect())
}

/// Distinct sink sets over a collection of executions.
pub fn distinct_outputs<'a>(runs: impl IntoIterator<Item = &'a Execution>) -> BTreeSet<&'a SinkSet> {
    runs.into_iter().map(|e| &e.sink).collect()
}
