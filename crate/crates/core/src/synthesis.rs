//! Coordination synthesis.
//!
//! Components whose reconciliation found Taint or an unprotected NDRead are
//! repaired upstream first: the first such component is given a sequencer,
//! the dataflow is re-analyzed, and the process repeats. Components that are
//! safe only because of a compatible seal get a sealing protocol; everything
//! else runs uncoordinated.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_with, AnalysisOptions, AnalysisReport, Derivation, Rule};
use crate::error::{Error, Result};
use crate::lineage::{compatible, FdSet};
use crate::model::{fmt_attrs, AttrSet, LogicalDataflow, PathKind, StreamLabel};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    NoCoordination,
    Sealing {
        key: AttrSet,
        /// Sealed input streams the component relies on.
        streams: BTreeSet<String>,
        /// Filled in once a physical topology is known.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        producers_per_partition: BTreeMap<String, BTreeSet<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        voting: Option<bool>,
    },
    Ordering {
        scope: BTreeSet<String>,
    },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::NoCoordination => "none",
            Strategy::Sealing { .. } => "sealing",
            Strategy::Ordering { .. } => "ordering",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::NoCoordination => f.write_str("NoCoordination"),
            Strategy::Sealing { key, streams, voting, .. } => {
                let streams: Vec<&str> = streams.iter().map(String::as_str).collect();
                write!(f, "Sealing(key={{{}}}, streams={{{}}}", fmt_attrs(key), streams.join(","))?;
                if let Some(v) = voting {
                    write!(f, ", voting={v}")?;
                }
                f.write_str(")")
            }
            Strategy::Ordering { scope } => {
                let scope: Vec<&str> = scope.iter().map(String::as_str).collect();
                write!(f, "Ordering(scope={{{}}})", scope.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub strategy: Strategy,
    /// Worst label still expected on the component's outputs under the plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<StreamLabel>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinationPlan {
    pub entries: BTreeMap<String, PlanEntry>,
    /// Dataflow label once the plan is in force.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_label: Option<StreamLabel>,
}

impl CoordinationPlan {
    pub fn strategy(&self, component: &str) -> Option<&Strategy> {
        self.entries.get(component).map(|e| &e.strategy)
    }

    /// An all-NoCoordination plan for `df`.
    pub fn uncoordinated(df: &LogicalDataflow) -> Self {
        let entries = df
            .components
            .keys()
            .map(|c| (c.clone(), PlanEntry { strategy: Strategy::NoCoordination, residual: None }))
            .collect();
        CoordinationPlan { entries, expected_label: None }
    }

    pub fn ordered_components(&self) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|(_, e)| matches!(e.strategy, Strategy::Ordering { .. }))
            .map(|(c, _)| c.clone())
            .collect()
    }

    pub fn is_uncoordinated(&self) -> bool {
        self.entries.values().all(|e| e.strategy == Strategy::NoCoordination)
    }
}

fn is_flagging(rule: Rule) -> bool {
    matches!(rule, Rule::NdRead | Rule::OrderedWrite | Rule::InstWrite | Rule::IncompatibleSeal)
}

/// Streams a sequencer must order for `component`: inputs of the paths that
/// raised an anomaly, plus every write-path input when a flagged read races
/// with writes.
fn ordering_scope(derivations: &[&Derivation]) -> BTreeSet<String> {
    let mut scope = BTreeSet::new();
    let mut read_flagged = false;
    for d in derivations {
        for inf in &d.inferences {
            if inf.rules.iter().any(|r| is_flagging(*r)) {
                scope.extend(inf.stream.clone());
                read_flagged |= inf.path.kind == PathKind::OR;
            }
        }
    }
    if read_flagged {
        for d in derivations {
            for inf in d.inferences.iter().filter(|i| i.path.kind.is_write()) {
                scope.extend(inf.stream.clone());
            }
        }
    }
    scope
}

/// Member components of a possibly collapsed analysis node.
fn members(report: &AnalysisReport, node: &str) -> Vec<String> {
    report
        .collapsed
        .iter()
        .find(|g| g.node == node)
        .map(|g| g.members.clone())
        .unwrap_or_else(|| vec![node.to_string()])
}

/// Choose a coordination strategy for every component of `df`.
///
/// `report` is the uncoordinated analysis of `df`.
pub fn synthesize(df: &LogicalDataflow, report: &AnalysisReport, fds: &FdSet) -> Result<CoordinationPlan> {
    let mut opts = AnalysisOptions::default();
    let mut scopes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut current = report.clone();
    loop {
        let next = current
            .derivations
            .iter()
            .find(|d| d.is_anomalous() && !opts.ordered.contains(&d.component))
            .map(|d| d.component.clone());
        let Some(node) = next else { break };
        let ds: Vec<&Derivation> = current.derivations_for(&node).collect();
        scopes.insert(node.clone(), ordering_scope(&ds));
        opts.ordered.insert(node);
        current = analyze_with(df, fds, &opts)?;
    }

    let mut residual: BTreeMap<String, StreamLabel> = BTreeMap::new();
    for d in &current.derivations {
        let slot = residual.entry(d.component.clone()).or_insert_with(|| d.reconciliation.label.clone());
        if d.reconciliation.label.severity() > slot.severity() {
            *slot = d.reconciliation.label.clone();
        }
    }

    let mut plan = CoordinationPlan::uncoordinated(df);
    for (node, d_label) in &residual {
        let strategy = if let Some(scope) = scopes.get(node) {
            Some(Strategy::Ordering { scope: scope.clone() })
        } else {
            sealing_for(current.derivations_for(node), fds)
        };
        for m in members(&current, node) {
            if let Some(entry) = plan.entries.get_mut(&m) {
                entry.residual = Some(d_label.clone());
                if let Some(s) = &strategy {
                    entry.strategy = s.clone();
                }
            }
        }
    }
    plan.expected_label = current.dataflow_label.clone();
    Ok(plan)
}

/// Sealing entry for a component whose safety rests on seals, if any.
fn sealing_for<'a>(derivations: impl Iterator<Item = &'a Derivation>, fds: &FdSet) -> Option<Strategy> {
    let mut keys: BTreeSet<AttrSet> = BTreeSet::new();
    let mut streams = BTreeSet::new();
    for d in derivations.filter(|d| d.relied_on_seal()) {
        for inf in &d.inferences {
            let StreamLabel::Seal(k) = &inf.input else { continue };
            let consumed = inf.rules.contains(&Rule::SealConsumed);
            let protecting = d.reconciliation.protected.iter().any(|g| compatible(g, k, fds));
            if consumed || protecting {
                keys.insert(k.clone());
                streams.extend(inf.stream.clone());
            }
        }
    }
    let key = keys.into_iter().next()?;
    Some(Strategy::Sealing { key, streams, producers_per_partition: BTreeMap::new(), voting: None })
}

/// Check the plan against the analysis it came from. Returns human-readable
/// problems; empty means the plan is consistent.
pub fn plan_violations(df: &LogicalDataflow, plan: &CoordinationPlan, fds: &FdSet) -> Vec<String> {
    let mut out = Vec::new();
    let seals: BTreeSet<&AttrSet> = df.streams.iter().filter_map(|s| s.seal.as_ref()).collect();
    for (name, entry) in &plan.entries {
        match &entry.strategy {
            Strategy::Sealing { key, .. } if !seals.contains(key) => {
                out.push(format!("{name}: sealing key {{{}}} is not a declared seal", fmt_attrs(key)));
            }
            Strategy::Ordering { .. } => {
                let Some(c) = df.components.get(name) else { continue };
                let gates: Vec<_> = c.paths.iter().filter(|p| !p.kind.is_confluent()).collect();
                let sealed_inputs: Vec<&AttrSet> = df
                    .streams
                    .iter()
                    .filter(|s| s.consumer.as_ref().is_some_and(|e| e.component == *name))
                    .filter_map(|s| s.seal.as_ref())
                    .collect();
                let coverable = !gates.is_empty()
                    && gates.iter().all(|p| {
                        df.streams_into(name, &p.from).all(|s| {
                            s.seal.as_ref().is_some_and(|k| compatible(&p.effective_gate(), k, fds))
                        })
                    })
                    && !sealed_inputs.is_empty();
                if coverable {
                    out.push(format!("{name}: ordered although a compatible seal covers every gate"));
                }
            }
            _ => {}
        }
    }
    out
}

/// Which producer instances emit records of each partition.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionTopology {
    pub producers: BTreeMap<String, BTreeSet<String>>,
}

impl PartitionTopology {
    /// Every partition is mastered by exactly one producer.
    pub fn mastered<P: AsRef<str>, Q: AsRef<str>>(pairs: &[(P, Q)]) -> Self {
        let producers = pairs
            .iter()
            .map(|(p, q)| (p.as_ref().to_string(), BTreeSet::from([q.as_ref().to_string()])))
            .collect();
        PartitionTopology { producers }
    }

    /// Every producer emits records of every partition.
    pub fn shared<P: AsRef<str>, Q: AsRef<str>>(partitions: &[P], producers: &[Q]) -> Self {
        let all: BTreeSet<String> = producers.iter().map(|q| q.as_ref().to_string()).collect();
        let producers = partitions.iter().map(|p| (p.as_ref().to_string(), all.clone())).collect();
        PartitionTopology { producers }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealProtocolSpec {
    pub component: String,
    /// Attributes carried by each punctuation.
    pub key: AttrSet,
    pub producers_per_partition: BTreeMap<String, BTreeSet<String>>,
    /// True when some partition has several producers, so release needs a
    /// unanimous vote.
    pub voting: bool,
}

impl SealProtocolSpec {
    /// A partition may be released once every producer has sealed it.
    pub fn ready(&self, partition: &str, sealed_by: &BTreeSet<String>) -> bool {
        self.producers_per_partition.get(partition).is_some_and(|p| p.is_subset(sealed_by))
    }
}

pub fn plan_sealing(component: &str, key: &AttrSet, topology: &PartitionTopology) -> Result<SealProtocolSpec> {
    if let Some((p, _)) = topology.producers.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::EmptyProducerSet { component: component.into(), partition: p.clone() });
    }
    let voting = topology.producers.values().any(|v| v.len() > 1);
    Ok(SealProtocolSpec {
        component: component.into(),
        key: key.clone(),
        producers_per_partition: topology.producers.clone(),
        voting,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingSpec {
    pub component: String,
    pub sequencer: String,
    pub scope: BTreeSet<String>,
    pub replicas: usize,
    /// One input and one replica: the sequencer is plain FIFO delivery.
    pub fifo: bool,
}

pub fn plan_ordering(component: &str, scope: &BTreeSet<String>, replicas: usize) -> OrderingSpec {
    OrderingSpec {
        component: component.into(),
        sequencer: format!("{component}#seq"),
        scope: scope.clone(),
        replicas,
        fifo: scope.len() <= 1 && replicas <= 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::analyze;
    use crate::fixtures::{self, Query};
    use crate::model::attrs;

    fn plan_for(df: &LogicalDataflow) -> CoordinationPlan {
        let fds = FdSet::new();
        let report = analyze(df, &fds).unwrap();
        synthesize(df, &report, &fds).unwrap()
    }

    #[test]
    fn sealed_wordcount_seals_count() {
        let plan = plan_for(&fixtures::wordcount(true));
        match plan.strategy("Count").unwrap() {
            Strategy::Sealing { key, streams, .. } => {
                assert_eq!(key, &attrs(["batch"]));
                assert_eq!(streams, &BTreeSet::from(["words".to_string()]));
            }
            other => panic!("{other}"),
        }
        assert_eq!(plan.strategy("Commit"), Some(&Strategy::NoCoordination));
        assert_eq!(plan.strategy("Splitter"), Some(&Strategy::NoCoordination));
        assert_eq!(plan.expected_label, Some(StreamLabel::Async));
    }

    #[test]
    fn poor_orders_report() {
        let plan = plan_for(&fixtures::ad_network(Query::Poor, None));
        let scope = BTreeSet::from(["c".to_string(), "q".to_string()]);
        assert_eq!(plan.strategy("Report"), Some(&Strategy::Ordering { scope }));
        assert_eq!(plan.strategy("Cache"), Some(&Strategy::NoCoordination));
        assert_eq!(plan.expected_label, Some(StreamLabel::Run));
        assert_eq!(plan.entries["Report"].residual, Some(StreamLabel::Run));
    }

    #[test]
    fn thresh_needs_nothing() {
        let plan = plan_for(&fixtures::ad_network(Query::Thresh, None));
        assert!(plan.is_uncoordinated());
        assert_eq!(plan.expected_label, Some(StreamLabel::Async));
    }

    #[test]
    fn campaign_sealed_on_campaign() {
        let df = fixtures::ad_network(Query::Campaign, Some(&["campaign"]));
        let plan = plan_for(&df);
        assert!(matches!(plan.strategy("Report"), Some(Strategy::Sealing { key, .. }) if key == &attrs(["campaign"])));
        assert!(plan_violations(&df, &plan, &FdSet::new()).is_empty());
    }

    #[test]
    fn unsealed_wordcount_orders_words() {
        let plan = plan_for(&fixtures::wordcount(false));
        let scope = BTreeSet::from(["words".to_string()]);
        assert_eq!(plan.strategy("Count"), Some(&Strategy::Ordering { scope }));
    }

    #[test]
    fn sealing_topologies() {
        let key = attrs(["campaign"]);
        let mastered = PartitionTopology::mastered(&[("1", "ad0"), ("2", "ad1")]);
        assert!(!plan_sealing("Report", &key, &mastered).unwrap().voting);
        let shared = PartitionTopology::shared(&["1", "2"], &["ad0", "ad1"]);
        let spec = plan_sealing("Report", &key, &shared).unwrap();
        assert!(spec.voting);
        assert_eq!(spec.producers_per_partition["1"].len(), 2);
        let single = PartitionTopology::mastered(&[("1", "ad0")]);
        assert!(!plan_sealing("Report", &key, &single).unwrap().voting);
        let mut empty = PartitionTopology::default();
        empty.producers.insert("9".into(), BTreeSet::new());
        assert!(plan_sealing("Report", &key, &empty).is_err());
    }

    #[test]
    fn ordering_specs() {
        let spec = plan_ordering("Report", &BTreeSet::from(["c".into(), "q".into()]), 2);
        assert!(!spec.fifo);
        assert_eq!(spec.scope.len(), 2);
        assert!(plan_ordering("X", &BTreeSet::from(["a".into()]), 1).fifo);
    }
}
