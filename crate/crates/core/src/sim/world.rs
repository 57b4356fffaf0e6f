//! Mutable simulation state and single delivery steps.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use super::instance::{Node, PhysicalInstance};
use super::runtime::State;
use super::value::{fmt_record, project, Body, Message, Record};
use crate::error::{Error, Result};

pub type SinkSet = BTreeSet<(Arc<str>, Arc<Record>)>;

/// Per-instance sealing progress.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SealState {
    pub buffers: BTreeMap<Record, Vec<(String, Message)>>,
    pub sealed: BTreeMap<Record, BTreeSet<String>>,
    pub released: BTreeSet<Record>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct World {
    pub queues: Vec<VecDeque<Message>>,
    pub states: Vec<State>,
    /// Records each instance emitted, per output port.
    pub outputs: Vec<BTreeMap<String, BTreeSet<Arc<Record>>>>,
    pub sink: SinkSet,
    pub seal: Vec<SealState>,
    pub coordination: u64,
}

impl World {
    pub fn new(inst: &PhysicalInstance) -> Self {
        let mut queues = vec![VecDeque::new(); inst.channels.len()];
        for (c, m) in &inst.initial {
            queues[*c].push_back(m.clone());
        }
        World {
            queues,
            states: inst.runtimes.iter().map(|r| r.initial_state()).collect(),
            outputs: vec![BTreeMap::new(); inst.instances.len()],
            sink: SinkSet::new(),
            seal: vec![SealState::default(); inst.instances.len()],
            coordination: 0,
        }
    }

    /// Channels with a deliverable message, in index order.
    pub fn enabled(&self) -> Vec<usize> {
        self.queues.iter().enumerate().filter(|(_, q)| !q.is_empty()).map(|(i, _)| i).collect()
    }

    pub fn is_quiescent(&self) -> bool {
        self.queues.iter().all(VecDeque::is_empty)
    }

    /// Deliver the head of channel `c`.
    pub fn step(&mut self, inst: &PhysicalInstance, c: usize) -> Result<()> {
        let msg = self.queues.get_mut(c).and_then(VecDeque::pop_front).ok_or_else(|| Error::Runtime {
            instance: format!("channel {c}"),
            message: "schedule delivers from an empty or unknown channel".into(),
        })?;
        match &inst.channels[c].to {
            Node::Sequencer(seq) => {
                self.coordination += 1;
                for &out in &inst.sequencer_out[seq] {
                    self.queues[out].push_back(msg.clone());
                }
                Ok(())
            }
            Node::Instance(i) => self.deliver(inst, *i, msg),
            Node::Source(_) => unreachable!("channels never end at a source"),
        }
    }

    fn deliver(&mut self, inst: &PhysicalInstance, i: usize, msg: Message) -> Result<()> {
        let port = inst.consumer_port.get(&*msg.stream).cloned().unwrap_or_default();
        let Some(setup) = inst.seals.get(&i) else {
            self.process(inst, i, &port, &msg.body);
            return Ok(());
        };
        let sealed_stream = setup.streams.contains(&*msg.stream);
        match &msg.body {
            Body::Punctuation(k) if sealed_stream => {
                self.coordination += 1;
                let Some(p) = project(k, &setup.key) else {
                    self.process(inst, i, &port, &msg.body);
                    return Ok(());
                };
                if self.seal[i].released.contains(&p) {
                    return Ok(());
                }
                self.seal[i].sealed.entry(p.clone()).or_default().insert(msg.producer.to_string());
                let producers = setup.producers(&p);
                if producers.is_subset(&self.seal[i].sealed[&p]) {
                    self.release(inst, i, p, &port);
                }
            }
            Body::Record(r) if sealed_stream || setup.buffered_ports.contains(&port) => {
                match project(r, &setup.key) {
                    None => self.process(inst, i, &port, &msg.body),
                    Some(p) if self.seal[i].released.contains(&p) => self.process(inst, i, &port, &msg.body),
                    Some(p) if setup.producers(&p).is_empty() => {
                        self.seal[i].released.insert(p);
                        self.process(inst, i, &port, &msg.body);
                    }
                    Some(p) => self.seal[i].buffers.entry(p).or_default().push((port, msg)),
                }
            }
            _ => self.process(inst, i, &port, &msg.body),
        }
        Ok(())
    }

    /// Process a partition atomically: sealed-stream records first, each
    /// group in canonical order, then one punctuation.
    fn release(&mut self, inst: &PhysicalInstance, i: usize, p: Record, seal_port: &str) {
        let setup = &inst.seals[&i];
        if setup.voting {
            self.coordination += 1;
        }
        self.seal[i].released.insert(p.clone());
        let mut buffered = self.seal[i].buffers.remove(&p).unwrap_or_default();
        buffered.sort_by(|(pa, a), (pb, b)| {
            let ka = !setup.streams.contains(&*a.stream);
            let kb = !setup.streams.contains(&*b.stream);
            (ka, &a.stream, pa, &a.body).cmp(&(kb, &b.stream, pb, &b.body))
        });
        for (port, m) in buffered {
            self.process(inst, i, &port, &m.body);
        }
        self.process(inst, i, seal_port, &Body::Punctuation(Arc::new(p)));
    }

    fn process(&mut self, inst: &PhysicalInstance, i: usize, port: &str, body: &Body) {
        let rt = &inst.runtimes[i];
        let emits = match body {
            Body::Record(r) => rt.on_record(&mut self.states[i], port, r),
            Body::Punctuation(k) => rt.on_punctuation(&mut self.states[i], port, k),
        };
        let component = &inst.instances[i].component;
        let sender = Node::Instance(i);
        let name: Arc<str> = Arc::from(inst.instances[i].name.as_str());
        for e in emits {
            if let Body::Record(r) = &e.body {
                self.outputs[i].entry(e.port.clone()).or_default().insert(r.clone());
            }
            let Some(streams) = inst.outgoing.get(&(component.clone(), e.port.clone())) else { continue };
            for s in streams {
                let spec = inst.df.stream(s).expect("outgoing stream exists");
                if spec.is_sink() {
                    if let Body::Record(r) = &e.body {
                        self.sink.insert((Arc::from(s.as_str()), r.clone()));
                    }
                    continue;
                }
                let msg = Message { stream: Arc::from(s.as_str()), producer: name.clone(), body: e.body.clone() };
                for c in inst.route(s, &sender, 0, &e.body) {
                    self.queues[c].push_back(msg.clone());
                }
            }
        }
    }

    /// Some replicated component has two instances whose outputs on one
    /// port are incomparable sets.
    pub fn replicas_disagree(&self, inst: &PhysicalInstance) -> bool {
        let empty = BTreeSet::new();
        inst.replica_groups.values().any(|members| {
            let ports: BTreeSet<&String> = members.iter().flat_map(|i| self.outputs[*i].keys()).collect();
            ports.into_iter().any(|port| {
                members.iter().enumerate().any(|(n, a)| {
                    members[n + 1..].iter().any(|b| {
                        let sa = self.outputs[*a].get(port).unwrap_or(&empty);
                        let sb = self.outputs[*b].get(port).unwrap_or(&empty);
                        !sa.is_subset(sb) && !sb.is_subset(sa)
                    })
                })
            })
        })
    }

    /// Some replicated component ends with differing instance states.
    pub fn replicas_diverged(&self, inst: &PhysicalInstance) -> bool {
        inst.replica_groups
            .values()
            .any(|members| members.windows(2).any(|w| self.states[w[0]] != self.states[w[1]]))
    }

    /// Error if any partition is still buffered.
    pub fn check_progress(&self, inst: &PhysicalInstance) -> Result<()> {
        for (i, s) in self.seal.iter().enumerate() {
            if let Some(p) = s.buffers.keys().next() {
                return Err(Error::StuckPartition { instance: inst.instances[i].name.clone(), partition: fmt_record(p) });
            }
        }
        Ok(())
    }
}
