//! Interleaving simulator.
//!
//! A fixture fixes instance counts, routing, component runtimes and the
//! scripted source messages. The simulator instantiates the physical
//! dataflow, runs it under every (or a sample of) delivery orders, and
//! reports which anomaly classes were observed and how many coordination
//! messages the chosen protocol cost.

mod classify;
mod instance;
mod runtime;
mod schedule;
mod value;
mod world;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use classify::{classify_anomalies, AnomalyReport, Witness};
pub use instance::{instantiate, Channel, InstanceInfo, Node, PhysicalInstance, ProducerScript, Routing, ScriptItem, SealSetup, Topology};
pub use runtime::{Emit, Runtime, RuntimeKind, RuntimeSpec, State};
pub use schedule::{
    distinct_outputs, enumerate_schedules, execute, random_run, sample_runs, sample_schedules, sample_seeds, Execution,
    Mode, Schedule, DEFAULT_EXHAUSTIVE_BOUND, DEFAULT_SAMPLES,
};
pub use value::{fmt_record, fnv1a, partition_hash, project, record, Body, Message, Record, Value};
pub use world::{SinkSet, World};

use crate::analysis::{analyze, analyze_with, AnalysisOptions};
use crate::error::{Error, Result};
use crate::lineage::FdSet;
use crate::model::{LogicalDataflow, StreamLabel};
use crate::synthesis::{synthesize, CoordinationPlan, PlanEntry, SealProtocolSpec, Strategy};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinationMode {
    /// Raw delivery, no protocol.
    #[default]
    None,
    /// The synthesized plan.
    Plan,
    /// The synthesized plan with every sealing entry replaced by ordering.
    Ordering,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    #[serde(default)]
    pub coordination: CoordinationMode,
    /// Run only when this query variant is selected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(flatten)]
    pub topology: Topology,
    /// `None` enumerates exhaustively when the fixture fits the bound and
    /// samples otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exhaustive_bound: Option<usize>,
}

/// Command-line overrides for fixture settings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimOverrides {
    pub exhaustive_bound: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

impl SimOverrides {
    /// The mode to run `fixture` in; `None` means exhaustive with fallback
    /// to sampling.
    pub fn mode(&self, fixture: Option<Mode>) -> Option<Mode> {
        match (self.samples, fixture) {
            (Some(n), Some(Mode::Sample { seed, .. })) => Some(Mode::Sample { samples: n, seed: self.seed.unwrap_or(seed) }),
            (Some(n), _) => Some(Mode::Sample { samples: n, seed: self.seed.unwrap_or(0) }),
            (None, Some(Mode::Sample { samples, seed })) => Some(Mode::Sample { samples, seed: self.seed.unwrap_or(seed) }),
            (None, Some(Mode::Exhaustive)) => Some(Mode::Exhaustive),
            (None, None) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRun {
    pub fixture: String,
    pub coordination: CoordinationMode,
    pub plan: CoordinationPlan,
    /// Label the plan promises; observed anomalies must not exceed it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<StreamLabel>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub seal_protocols: BTreeMap<String, SealProtocolSpec>,
    pub report: AnomalyReport,
}

impl FixtureRun {
    /// Observed anomalies stay within the expected label.
    pub fn within_expectation(&self) -> bool {
        let limit = self.expected.as_ref().map_or(StreamLabel::Async.severity(), StreamLabel::severity);
        self.report.observed.severity() <= limit.max(StreamLabel::Async.severity())
    }
}

/// Replace sealing with ordering over the sealed streams and every input of
/// the component's order-sensitive paths.
pub fn ordering_instead_of_sealing(df: &LogicalDataflow, fds: &FdSet, plan: &CoordinationPlan) -> Result<CoordinationPlan> {
    let mut out = plan.clone();
    for (name, entry) in out.entries.iter_mut() {
        let Strategy::Sealing { streams, .. } = &entry.strategy else { continue };
        let mut scope: BTreeSet<String> = streams.clone();
        if let Some(c) = df.components.get(name) {
            for p in c.paths.iter().filter(|p| !p.kind.is_confluent()) {
                scope.extend(df.streams_into(name, &p.from).map(|s| s.name.clone()));
            }
        }
        *entry = PlanEntry { strategy: Strategy::Ordering { scope }, residual: None };
    }
    let opts = AnalysisOptions { ordered: out.ordered_components(), ..Default::default() };
    let report = analyze_with(df, fds, &opts)?;
    out.expected_label = report.dataflow_label.clone();
    for (name, entry) in out.entries.iter_mut() {
        entry.residual = report
            .derivations_for(name)
            .map(|d| d.reconciliation.label.clone())
            .max_by_key(StreamLabel::severity);
    }
    Ok(out)
}

/// The plan a fixture runs under, with the label it promises.
pub fn fixture_plan(
    df: &LogicalDataflow,
    fds: &FdSet,
    mode: CoordinationMode,
) -> Result<(CoordinationPlan, Option<StreamLabel>)> {
    let report = analyze(df, fds)?;
    Ok(match mode {
        CoordinationMode::None => (CoordinationPlan::uncoordinated(df), report.dataflow_label),
        CoordinationMode::Plan => {
            let plan = synthesize(df, &report, fds)?;
            let expected = plan.expected_label.clone();
            (plan, expected)
        }
        CoordinationMode::Ordering => {
            let plan = ordering_instead_of_sealing(df, fds, &synthesize(df, &report, fds)?)?;
            let expected = plan.expected_label.clone();
            (plan, expected)
        }
    })
}

pub fn run_fixture(df: &LogicalDataflow, fds: &FdSet, fixture: &Fixture, overrides: SimOverrides) -> Result<FixtureRun> {
    run_fixture_as(df, fds, fixture, fixture.coordination, overrides)
}

/// Run `fixture` under an explicit coordination mode.
pub fn run_fixture_as(
    df: &LogicalDataflow,
    fds: &FdSet,
    fixture: &Fixture,
    coordination: CoordinationMode,
    overrides: SimOverrides,
) -> Result<FixtureRun> {
    let (plan, expected) = fixture_plan(df, fds, coordination)?;
    let inst = instantiate(df, &fixture.topology, Some(&plan))?;
    let bound = overrides.exhaustive_bound.or(fixture.exhaustive_bound).unwrap_or(DEFAULT_EXHAUSTIVE_BOUND);
    let report = match overrides.mode(fixture.mode) {
        Some(mode) => classify_anomalies(&inst, mode, bound)?,
        None => match classify_anomalies(&inst, Mode::Exhaustive, bound) {
            Err(Error::ExhaustiveBound { .. }) => {
                let samples = Mode::Sample { samples: DEFAULT_SAMPLES, seed: overrides.seed.unwrap_or(0) };
                classify_anomalies(&inst, samples, bound)?
            }
            other => other?,
        },
    };
    Ok(FixtureRun {
        fixture: fixture.name.clone(),
        coordination,
        plan,
        expected,
        seal_protocols: inst.seal_specs.clone(),
        report,
    })
}
