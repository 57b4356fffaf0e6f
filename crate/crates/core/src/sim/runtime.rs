//! Deterministic component state machines.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::value::{Body, Record, Value};
use crate::fixtures::Query;
use crate::model::ComponentSpec;

/// Runtime state: a keyed table.
pub type State = BTreeMap<Record, Record>;

/// A message a runtime emits on one of its output ports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Emit {
    pub port: String,
    pub body: Body,
}

impl Emit {
    pub fn record(port: &str, r: Record) -> Self {
        Emit { port: port.into(), body: Body::Record(Arc::new(r)) }
    }

    pub fn punctuation(port: &str, key: Record) -> Self {
        Emit { port: port.into(), body: Body::Punctuation(Arc::new(key)) }
    }
}

/// Identical input sequences must give identical states and outputs.
pub trait Runtime: Send + Sync + fmt::Debug {
    fn initial_state(&self) -> State {
        State::new()
    }

    fn on_record(&self, state: &mut State, port: &str, rec: &Record) -> Vec<Emit>;

    fn on_punctuation(&self, _state: &mut State, _port: &str, _key: &Record) -> Vec<Emit> {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuntimeKind {
    Splitter,
    Count,
    Commit,
    Report,
    Cache,
    Passthrough,
}

/// Fixture-level description of a built-in runtime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeSpec {
    pub kind: RuntimeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<Query>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<i64>,
}

impl RuntimeSpec {
    pub fn of(kind: RuntimeKind) -> Self {
        RuntimeSpec { kind, query: None, threshold: None }
    }

    pub fn report(query: Query, threshold: i64) -> Self {
        RuntimeSpec { kind: RuntimeKind::Report, query: Some(query), threshold: Some(threshold) }
    }

    pub fn build(&self, component: &ComponentSpec) -> Arc<dyn Runtime> {
        match self.kind {
            RuntimeKind::Splitter => Arc::new(Splitter),
            RuntimeKind::Count => Arc::new(Count),
            RuntimeKind::Commit => Arc::new(Commit),
            RuntimeKind::Report => Arc::new(Report {
                query: self.query.unwrap_or(Query::Thresh),
                threshold: self.threshold.unwrap_or(1),
            }),
            RuntimeKind::Cache => Arc::new(Cache),
            RuntimeKind::Passthrough => {
                let mut routes: BTreeMap<String, Vec<String>> = BTreeMap::new();
                for p in &component.paths {
                    routes.entry(p.from.clone()).or_default().push(p.to.clone());
                }
                Arc::new(Passthrough { routes })
            }
        }
    }
}

fn key(pairs: &[(&str, Value)]) -> Record {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn int(r: &Record, attr: &str) -> i64 {
    r.get(attr).and_then(Value::as_int).unwrap_or(0)
}

/// Splits `{text, batch}` into one `{word, batch}` per whitespace token.
#[derive(Debug)]
pub struct Splitter;

impl Runtime for Splitter {
    fn on_record(&self, _state: &mut State, _port: &str, rec: &Record) -> Vec<Emit> {
        let batch = rec.get("batch").cloned().unwrap_or(Value::Int(0));
        let text = rec.get("text").and_then(Value::as_str).unwrap_or("");
        text.split_whitespace()
            .map(|w| Emit::record("words", key(&[("word", Value::from(w)), ("batch", batch.clone())])))
            .collect()
    }

    fn on_punctuation(&self, _state: &mut State, _port: &str, key: &Record) -> Vec<Emit> {
        vec![Emit::punctuation("words", key.clone())]
    }
}

/// Counts words per `(word, batch)`; a punctuation flushes the current
/// counts of its batch.
#[derive(Debug)]
pub struct Count;

impl Runtime for Count {
    fn on_record(&self, state: &mut State, _port: &str, rec: &Record) -> Vec<Emit> {
        let k = key(&[
            ("word", rec.get("word").cloned().unwrap_or(Value::from(""))),
            ("batch", rec.get("batch").cloned().unwrap_or(Value::Int(0))),
        ]);
        let entry = state.entry(k).or_default();
        let n = int(entry, "n") + 1;
        entry.insert("n".into(), Value::Int(n));
        Vec::new()
    }

    fn on_punctuation(&self, state: &mut State, _port: &str, key: &Record) -> Vec<Emit> {
        state
            .iter()
            .filter(|(k, _)| key.iter().all(|(a, v)| k.get(a) == Some(v)))
            .map(|(k, v)| {
                let mut out = k.clone();
                out.extend(v.clone());
                Emit::record("counts", out)
            })
            .collect()
    }
}

/// Appends every record to its store and to `db`.
#[derive(Debug)]
pub struct Commit;

impl Runtime for Commit {
    fn on_record(&self, state: &mut State, _port: &str, rec: &Record) -> Vec<Emit> {
        state.insert(rec.clone(), Record::new());
        vec![Emit::record("db", rec.clone())]
    }
}

/// Click log plus one continuous query answered on `response`.
///
/// Clicks are counted per `(id, campaign, window)`. THRESH remembers
/// requests and emits `{id}` once both a request exists and the id has more
/// than `threshold` clicks. The other queries answer each request at once
/// with `poor = 1` iff the matching click count is below `threshold`.
#[derive(Debug)]
pub struct Report {
    pub query: Query,
    pub threshold: i64,
}

impl Report {
    fn clicks(&self, state: &State, mut keep: impl FnMut(&Record) -> bool) -> i64 {
        state
            .iter()
            .filter(|(k, _)| k.get("t") == Some(&Value::from("click")) && keep(k))
            .map(|(_, v)| int(v, "n"))
            .sum()
    }

    fn thresh_emit(&self, state: &mut State, id: &Value) -> Vec<Emit> {
        let req = key(&[("t", Value::from("request")), ("id", id.clone())]);
        let done = key(&[("t", Value::from("emitted")), ("id", id.clone())]);
        if !state.contains_key(&req) || state.contains_key(&done) {
            return Vec::new();
        }
        if self.clicks(state, |k| k.get("id") == Some(id)) > self.threshold {
            state.insert(done, Record::new());
            return vec![Emit::record("response", key(&[("id", id.clone())]))];
        }
        Vec::new()
    }
}

impl Runtime for Report {
    fn on_record(&self, state: &mut State, port: &str, rec: &Record) -> Vec<Emit> {
        let id = rec.get("id").cloned().unwrap_or(Value::Int(0));
        if port == "click" {
            let mut k = key(&[("t", Value::from("click"))]);
            for a in ["id", "campaign", "window"] {
                if let Some(v) = rec.get(a) {
                    k.insert(a.into(), v.clone());
                }
            }
            let entry = state.entry(k).or_default();
            let n = int(entry, "n") + 1;
            entry.insert("n".into(), Value::Int(n));
            return match self.query {
                Query::Thresh => self.thresh_emit(state, &id),
                _ => Vec::new(),
            };
        }
        let group: &[&str] = match self.query {
            Query::Thresh => {
                state.insert(key(&[("t", Value::from("request")), ("id", id.clone())]), Record::new());
                return self.thresh_emit(state, &id);
            }
            Query::Poor => &["id"],
            Query::Window => &["id", "window"],
            Query::Campaign => &["id", "campaign"],
        };
        let n = self.clicks(state, |k| group.iter().all(|a| k.get(*a) == rec.get(*a)));
        let mut out: Record = group.iter().filter_map(|a| rec.get(*a).map(|v| (a.to_string(), v.clone()))).collect();
        out.insert("poor".into(), Value::Int(i64::from(n < self.threshold)));
        vec![Emit::record("response", out)]
    }
}

/// Keyed first-writer-wins answer cache.
///
/// A request is answered from the cache on a hit and forwarded on
/// `request` otherwise. A response is stored only if its key is absent, and
/// only then re-emitted on `response` (which reaches clients and peers).
#[derive(Debug)]
pub struct Cache;

impl Cache {
    fn answer_key(rec: &Record) -> Record {
        rec.iter().filter(|(k, _)| k.as_str() != "poor").map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

impl Runtime for Cache {
    fn on_record(&self, state: &mut State, port: &str, rec: &Record) -> Vec<Emit> {
        if port == "request" {
            return match state.get(rec) {
                Some(answer) => vec![Emit::record("response", answer.clone())],
                None => vec![Emit::record("request", rec.clone())],
            };
        }
        let k = Self::answer_key(rec);
        if state.contains_key(&k) {
            return Vec::new();
        }
        state.insert(k, rec.clone());
        vec![Emit::record("response", rec.clone())]
    }
}

/// Forwards records and punctuations along every annotated path.
#[derive(Debug)]
pub struct Passthrough {
    routes: BTreeMap<String, Vec<String>>,
}

impl Runtime for Passthrough {
    fn on_record(&self, _state: &mut State, port: &str, rec: &Record) -> Vec<Emit> {
        self.routes.get(port).into_iter().flatten().map(|to| Emit::record(to, rec.clone())).collect()
    }

    fn on_punctuation(&self, _state: &mut State, port: &str, key: &Record) -> Vec<Emit> {
        self.routes.get(port).into_iter().flatten().map(|to| Emit::punctuation(to, key.clone())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::value::record;

    fn click(id: i64, campaign: i64) -> Record {
        record([("id", id), ("campaign", campaign), ("window", 1)])
    }

    #[test]
    fn thresh_emits_once_after_threshold() {
        let r = Report { query: Query::Thresh, threshold: 1 };
        let mut s = r.initial_state();
        assert!(r.on_record(&mut s, "request", &record([("id", 1)])).is_empty());
        assert!(r.on_record(&mut s, "click", &click(1, 1)).is_empty());
        assert_eq!(r.on_record(&mut s, "click", &click(1, 1)).len(), 1);
        assert!(r.on_record(&mut s, "click", &click(1, 1)).is_empty());
    }

    #[test]
    fn poor_answer_depends_on_arrival() {
        let r = Report { query: Query::Poor, threshold: 1 };
        let mut early = r.initial_state();
        let a = r.on_record(&mut early, "request", &record([("id", 1)]));
        let mut late = r.initial_state();
        r.on_record(&mut late, "click", &click(1, 1));
        let b = r.on_record(&mut late, "request", &record([("id", 1)]));
        assert_ne!(a, b);
    }

    #[test]
    fn cache_keeps_first_answer() {
        let c = Cache;
        let mut s = c.initial_state();
        let req = record([("id", 1)]);
        assert_eq!(c.on_record(&mut s, "request", &req)[0].port, "request");
        assert_eq!(c.on_record(&mut s, "response", &record([("id", 1), ("poor", 1)])).len(), 1);
        assert!(c.on_record(&mut s, "response", &record([("id", 1), ("poor", 0)])).is_empty());
        let hit = c.on_record(&mut s, "request", &req);
        assert_eq!(hit, vec![Emit::record("response", record([("id", 1), ("poor", 1)]))]);
    }

    #[test]
    fn count_flushes_on_punctuation() {
        let c = Count;
        let mut s = c.initial_state();
        let w = record([("word", Value::from("a")), ("batch", Value::from(1))]);
        c.on_record(&mut s, "words", &w);
        c.on_record(&mut s, "words", &w);
        let out = c.on_punctuation(&mut s, "words", &record([("batch", 1)]));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].body.record().unwrap()["n"], Value::Int(2));
    }

    #[test]
    fn splitter_tokenizes() {
        let rec = record([("text", Value::from("a b a")), ("batch", Value::from(1))]);
        assert_eq!(Splitter.on_record(&mut State::new(), "tweets", &rec).len(), 3);
    }
}
