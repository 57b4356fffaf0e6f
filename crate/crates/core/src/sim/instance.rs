//! Physical instantiation: component instances, channels and routing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::runtime::{Runtime, RuntimeKind, RuntimeSpec};
use super::value::{fmt_record, partition_hash, project, Body, Record};
use crate::error::{Error, Result};
use crate::model::{AttrSet, LogicalDataflow};
use crate::synthesis::{plan_sealing, CoordinationPlan, PartitionTopology, SealProtocolSpec, Strategy};

/// How a stream's messages are spread over consumer instances.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RoutingRepr", into = "RoutingRepr")]
pub enum Routing {
    /// Every consumer instance receives every message.
    Fanout,
    /// Records go to one instance chosen by hashing the given attributes
    /// (all attributes when `None`); punctuations go to all.
    Hash(Option<AttrSet>),
    /// Producer instance `i` sends to consumer instance `i mod m`.
    Pairwise,
    /// Each instance sends to every other instance of the consumer.
    Others,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RoutingRepr {
    Named(String),
    Hash { hash: AttrSet },
}

impl TryFrom<RoutingRepr> for Routing {
    type Error = String;

    fn try_from(r: RoutingRepr) -> std::result::Result<Self, String> {
        match r {
            RoutingRepr::Hash { hash } => Ok(Routing::Hash(if hash.is_empty() { None } else { Some(hash) })),
            RoutingRepr::Named(n) => match n.as_str() {
                "fanout" => Ok(Routing::Fanout),
                "hash" => Ok(Routing::Hash(None)),
                "pairwise" => Ok(Routing::Pairwise),
                "others" => Ok(Routing::Others),
                other => Err(format!("unknown routing `{other}`")),
            },
        }
    }
}

impl From<Routing> for RoutingRepr {
    fn from(r: Routing) -> Self {
        match r {
            Routing::Fanout => RoutingRepr::Named("fanout".into()),
            Routing::Hash(None) => RoutingRepr::Named("hash".into()),
            Routing::Hash(Some(a)) => RoutingRepr::Hash { hash: a },
            Routing::Pairwise => RoutingRepr::Named("pairwise".into()),
            Routing::Others => RoutingRepr::Named("others".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptItem {
    Seal { seal: Record },
    Record(Record),
}

impl ScriptItem {
    fn body(&self) -> Body {
        match self {
            ScriptItem::Seal { seal } => Body::Punctuation(Arc::new(seal.clone())),
            ScriptItem::Record(r) => Body::Record(Arc::new(r.clone())),
        }
    }

    fn values(&self) -> &Record {
        match self {
            ScriptItem::Seal { seal } => seal,
            ScriptItem::Record(r) => r,
        }
    }
}

/// Messages one named producer injects into a source stream, in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProducerScript {
    pub producer: String,
    pub messages: Vec<ScriptItem>,
}

/// Physical layout of a fixture.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    #[serde(default)]
    pub instances: BTreeMap<String, usize>,
    #[serde(default)]
    pub routing: BTreeMap<String, Routing>,
    #[serde(default)]
    pub runtimes: BTreeMap<String, RuntimeSpec>,
    #[serde(default)]
    pub sources: BTreeMap<String, Vec<ProducerScript>>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Source(String),
    Instance(usize),
    Sequencer(String),
}

#[derive(Clone, Debug)]
pub struct Channel {
    pub stream: String,
    pub from: Node,
    pub to: Node,
}

#[derive(Clone, Debug)]
pub struct InstanceInfo {
    pub component: String,
    pub index: usize,
    pub name: String,
}

/// Consumer-side sealing setup for one instance.
#[derive(Clone, Debug)]
pub struct SealSetup {
    pub key: AttrSet,
    pub streams: BTreeSet<String>,
    /// Ports whose records wait for their partition to be released.
    pub buffered_ports: BTreeSet<String>,
    /// Producers that seal every partition (upstream component instances).
    pub fixed_producers: BTreeSet<String>,
    /// Producers of individual partitions on sealed source streams.
    pub partition_producers: BTreeMap<Record, BTreeSet<String>>,
    pub voting: bool,
}

impl SealSetup {
    pub fn producers(&self, partition: &Record) -> BTreeSet<String> {
        let mut out = self.fixed_producers.clone();
        out.extend(self.partition_producers.get(partition).into_iter().flatten().cloned());
        out
    }
}

pub struct PhysicalInstance {
    pub df: LogicalDataflow,
    pub instances: Vec<InstanceInfo>,
    pub runtimes: Vec<Arc<dyn Runtime>>,
    pub channels: Vec<Channel>,
    /// `(stream, sender)` to its target channels in consumer-index order.
    pub targets: BTreeMap<(String, Node), Vec<usize>>,
    pub routing: BTreeMap<String, Routing>,
    /// Sequencer node to its per-replica output channels.
    pub sequencer_out: BTreeMap<String, Vec<usize>>,
    pub seals: BTreeMap<usize, SealSetup>,
    pub seal_specs: BTreeMap<String, SealProtocolSpec>,
    /// Script messages and the channels they start in.
    pub initial: Vec<(usize, super::value::Message)>,
    /// Stream to the consumer port it delivers on.
    pub consumer_port: BTreeMap<String, String>,
    /// `(component, output port)` to the streams it feeds.
    pub outgoing: BTreeMap<(String, String), Vec<String>>,
    /// Replicated components with at least two instances.
    pub replica_groups: BTreeMap<String, Vec<usize>>,
}

impl fmt::Debug for PhysicalInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhysicalInstance")
            .field("instances", &self.instances.iter().map(|i| &i.name).collect::<Vec<_>>())
            .field("channels", &self.channels.len())
            .finish()
    }
}

impl PhysicalInstance {
    pub fn node_name(&self, n: &Node) -> String {
        match n {
            Node::Source(s) => s.clone(),
            Node::Instance(i) => self.instances[*i].name.clone(),
            Node::Sequencer(c) => format!("{c}#seq"),
        }
    }

    pub fn channel_name(&self, c: usize) -> String {
        let ch = &self.channels[c];
        format!("{}:{}->{}", ch.stream, self.node_name(&ch.from), self.node_name(&ch.to))
    }

    fn instance_index(&self, node: &Node) -> usize {
        match node {
            Node::Instance(i) => self.instances[*i].index,
            _ => 0,
        }
    }

    /// Channels a message from `from` on `stream` is placed in.
    pub fn route(&self, stream: &str, from: &Node, script_index: usize, body: &Body) -> Vec<usize> {
        let Some(targets) = self.targets.get(&(stream.to_string(), from.clone())) else {
            return Vec::new();
        };
        if targets.len() <= 1 {
            return targets.clone();
        }
        let sender = match from {
            Node::Source(_) => script_index,
            _ => self.instance_index(from),
        };
        match (self.routing.get(stream), body) {
            (Some(Routing::Fanout | Routing::Others), _) => targets.clone(),
            (Some(Routing::Pairwise), _) => vec![targets[sender % targets.len()]],
            (Some(Routing::Hash(_)), Body::Punctuation(_)) => targets.clone(),
            (Some(Routing::Hash(attrs)), Body::Record(r)) => {
                let h = partition_hash(r, attrs.as_ref());
                vec![targets[(h % targets.len() as u64) as usize]]
            }
            (None, _) => targets.clone(),
        }
    }
}

/// Build the physical dataflow for `topo`, with coordination from `plan`.
pub fn instantiate(df: &LogicalDataflow, topo: &Topology, plan: Option<&CoordinationPlan>) -> Result<PhysicalInstance> {
    let mut instances = Vec::new();
    let mut runtimes: Vec<Arc<dyn Runtime>> = Vec::new();
    let mut by_component: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for name in topo.instances.keys().chain(topo.runtimes.keys()).chain(topo.routing.keys()) {
        let known = df.components.contains_key(name) || df.stream(name).is_some();
        if !known {
            return Err(Error::Instantiate(format!("fixture names unknown component or stream {name}")));
        }
    }
    for (name, c) in &df.components {
        let m = topo.instances.get(name).copied().unwrap_or(1);
        if m == 0 {
            return Err(Error::Instantiate(format!("{name} has multiplicity 0")));
        }
        let spec = topo.runtimes.get(name).cloned().unwrap_or(RuntimeSpec::of(RuntimeKind::Passthrough));
        let rt = spec.build(c);
        for i in 0..m {
            by_component.entry(name.clone()).or_default().push(instances.len());
            instances.push(InstanceInfo { component: name.clone(), index: i, name: format!("{name}#{i}") });
            runtimes.push(rt.clone());
        }
    }

    let strategy = |c: &str| plan.and_then(|p| p.strategy(c)).cloned().unwrap_or(Strategy::NoCoordination);

    let mut channels = Vec::new();
    let mut targets: BTreeMap<(String, Node), Vec<usize>> = BTreeMap::new();
    let mut sequencer_out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut routing = BTreeMap::new();
    let mut consumer_port = BTreeMap::new();
    let mut outgoing: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();

    for s in &df.streams {
        if let Some(p) = &s.producer {
            outgoing.entry((p.component.clone(), p.port.clone())).or_default().push(s.name.clone());
        }
        let Some(consumer) = &s.consumer else { continue };
        consumer_port.insert(s.name.clone(), consumer.port.clone());
        let cspec = &df.components[&consumer.component];
        let consumers = &by_component[&consumer.component];
        let rule = topo.routing.get(&s.name).cloned().unwrap_or(if cspec.rep || s.rep {
            Routing::Fanout
        } else {
            Routing::Hash(None)
        });
        if consumers.len() > 1 && !cspec.rep && (rule == Routing::Fanout || s.rep) {
            return Err(Error::Instantiate(format!(
                "stream {} replicates into {} which has {} instances but is not replicated",
                s.name,
                consumer.component,
                consumers.len()
            )));
        }
        routing.insert(s.name.clone(), rule.clone());

        let senders: Vec<Node> = match &s.producer {
            None => topo
                .sources
                .get(&s.name)
                .into_iter()
                .flatten()
                .map(|p| Node::Source(p.producer.clone()))
                .collect(),
            Some(p) => by_component
                .get(&p.component)
                .into_iter()
                .flatten()
                .map(|i| Node::Instance(*i))
                .collect(),
        };

        let ordered = matches!(strategy(&consumer.component), Strategy::Ordering { ref scope } if scope.contains(&s.name));
        if ordered {
            let seq = consumer.component.clone();
            sequencer_out.entry(seq.clone()).or_insert_with(|| {
                consumers
                    .iter()
                    .map(|i| {
                        channels.push(Channel {
                            stream: "*".into(),
                            from: Node::Sequencer(seq.clone()),
                            to: Node::Instance(*i),
                        });
                        channels.len() - 1
                    })
                    .collect()
            });
            for from in senders {
                channels.push(Channel { stream: s.name.clone(), from: from.clone(), to: Node::Sequencer(seq.clone()) });
                targets.insert((s.name.clone(), from), vec![channels.len() - 1]);
            }
            continue;
        }
        for from in senders {
            let mut list = Vec::new();
            for &to in consumers {
                if rule == Routing::Others && from == Node::Instance(to) {
                    continue;
                }
                channels.push(Channel { stream: s.name.clone(), from: from.clone(), to: Node::Instance(to) });
                list.push(channels.len() - 1);
            }
            targets.insert((s.name.clone(), from), list);
        }
    }

    let mut inst = PhysicalInstance {
        df: df.clone(),
        instances,
        runtimes,
        channels,
        targets,
        routing,
        sequencer_out,
        seals: BTreeMap::new(),
        seal_specs: BTreeMap::new(),
        initial: Vec::new(),
        consumer_port,
        outgoing,
        replica_groups: BTreeMap::new(),
    };

    for s in df.sources() {
        for (idx, script) in topo.sources.get(&s.name).into_iter().flatten().enumerate() {
            let from = Node::Source(script.producer.clone());
            for item in &script.messages {
                let body = item.body();
                let msg = super::value::Message {
                    stream: Arc::from(s.name.as_str()),
                    producer: Arc::from(script.producer.as_str()),
                    body: body.clone(),
                };
                for c in inst.route(&s.name, &from, idx, &body) {
                    inst.initial.push((c, msg.clone()));
                }
            }
        }
    }
    for name in topo.sources.keys() {
        if !df.stream(name).is_some_and(|s| s.is_source()) {
            return Err(Error::Instantiate(format!("fixture scripts non-source stream {name}")));
        }
    }

    for (name, c) in &df.components {
        let members = &by_component[name];
        if c.rep && members.len() >= 2 {
            inst.replica_groups.insert(name.clone(), members.clone());
        }
        let Strategy::Sealing { key, streams, .. } = strategy(name) else { continue };
        let mut buffered_ports: BTreeSet<String> = c.paths.iter().filter(|p| !p.kind.is_confluent()).map(|p| p.from.clone()).collect();
        for s in &streams {
            if let Some(port) = inst.consumer_port.get(s) {
                buffered_ports.insert(port.clone());
            }
        }
        let mut voting = false;
        let mut merged = PartitionTopology::default();
        for &i in members {
            let mut fixed = BTreeSet::new();
            let mut by_partition: BTreeMap<Record, BTreeSet<String>> = BTreeMap::new();
            for sname in &streams {
                let Some(spec) = df.stream(sname) else { continue };
                match &spec.producer {
                    Some(_) => {
                        for ch in inst.channels.iter().filter(|ch| ch.stream == *sname && ch.to == Node::Instance(i)) {
                            fixed.insert(inst.node_name(&ch.from));
                        }
                    }
                    None => {
                        for script in topo.sources.get(sname).into_iter().flatten() {
                            for item in &script.messages {
                                if let Some(p) = project(item.values(), &key) {
                                    by_partition.entry(p).or_default().insert(script.producer.clone());
                                }
                            }
                        }
                    }
                }
            }
            let mut topo_i = PartitionTopology::default();
            if !fixed.is_empty() {
                topo_i.producers.insert("*".into(), fixed.clone());
            }
            for (p, prods) in &by_partition {
                let mut all = fixed.clone();
                all.extend(prods.iter().cloned());
                topo_i.producers.insert(fmt_record(p), all);
            }
            let spec = plan_sealing(name, &key, &topo_i)?;
            voting |= spec.voting;
            merged.producers.extend(spec.producers_per_partition);
            inst.seals.insert(
                i,
                SealSetup {
                    key: key.clone(),
                    streams: streams.clone(),
                    buffered_ports: buffered_ports.clone(),
                    fixed_producers: fixed,
                    partition_producers: by_partition,
                    voting: false,
                },
            );
        }
        for &i in members {
            if let Some(s) = inst.seals.get_mut(&i) {
                s.voting = voting;
            }
        }
        inst.seal_specs.insert(
            name.clone(),
            SealProtocolSpec { component: name.clone(), key, producers_per_partition: merged.producers, voting },
        );
    }
    Ok(inst)
}
