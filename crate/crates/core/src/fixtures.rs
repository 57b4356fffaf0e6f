//! Reference dataflows built in code: the wordcount topology and the ad
//! network with its four report queries, plus simulator fixtures for them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{attrs, ComponentSpec, Endpoint, Gate, LogicalDataflow, PathAnnotation, PathKind, StreamSpec};
use crate::sim::{
    record, CoordinationMode, Fixture, Mode, ProducerScript, Routing, RuntimeKind, RuntimeSpec, ScriptItem, Topology, Value,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Query {
    Thresh,
    Poor,
    Window,
    Campaign,
}

impl Query {
    pub const ALL: [Query; 4] = [Query::Thresh, Query::Poor, Query::Window, Query::Campaign];

    pub fn name(self) -> &'static str {
        match self {
            Query::Thresh => "THRESH",
            Query::Poor => "POOR",
            Query::Window => "WINDOW",
            Query::Campaign => "CAMPAIGN",
        }
    }

    /// Report's request-to-response annotation for this query.
    pub fn annotation(self) -> PathAnnotation {
        match self {
            Query::Thresh => PathAnnotation::confluent("request", "response", PathKind::CR),
            Query::Poor => PathAnnotation::ordered("request", "response", PathKind::OR, Gate::keys(["id"])),
            Query::Window => {
                PathAnnotation::ordered("request", "response", PathKind::OR, Gate::keys(["id", "window"]))
            }
            Query::Campaign => {
                PathAnnotation::ordered("request", "response", PathKind::OR, Gate::keys(["id", "campaign"]))
            }
        }
    }

    pub fn parse(s: &str) -> Option<Query> {
        Query::ALL.into_iter().find(|q| q.name().eq_ignore_ascii_case(s))
    }
}

/// tweets -> Splitter -> words -> Count -> counts -> Commit -> db
pub fn wordcount(sealed: bool) -> LogicalDataflow {
    let mut tweets = StreamSpec::source("tweets", Endpoint::new("Splitter", "tweets"));
    if sealed {
        tweets = tweets.sealed(["batch"]);
    }
    LogicalDataflow::new()
        .with_component(ComponentSpec::new(
            "Splitter",
            vec![PathAnnotation::confluent("tweets", "words", PathKind::CR)],
        ))
        .with_component(ComponentSpec::new(
            "Count",
            vec![PathAnnotation::ordered("words", "counts", PathKind::OW, Gate::keys(["word", "batch"]))],
        ))
        .with_component(ComponentSpec::new("Commit", vec![PathAnnotation::confluent("counts", "db", PathKind::CW)]))
        .with_stream(tweets)
        .with_stream(StreamSpec::edge("words", Endpoint::new("Splitter", "words"), Endpoint::new("Count", "words")))
        .with_stream(StreamSpec::edge("counts", Endpoint::new("Count", "counts"), Endpoint::new("Commit", "counts")))
        .with_stream(StreamSpec::sink("db", Endpoint::new("Commit", "db")))
}

/// Ad servers feed clicks `c` to a replicated Report; requests enter the
/// replicated Cache, misses go to Report as `q`, answers come back as `r`,
/// caches gossip answers among themselves.
pub fn ad_network(query: Query, seal: Option<&[&str]>) -> LogicalDataflow {
    let mut c = StreamSpec::source("c", Endpoint::new("Report", "click")).with_schema(["id", "campaign", "window"]);
    if let Some(key) = seal {
        c = c.sealed(key.iter().copied());
    }
    LogicalDataflow::new()
        .with_component(
            ComponentSpec::new(
                "Cache",
                vec![
                    PathAnnotation::confluent("request", "response", PathKind::CR),
                    PathAnnotation::confluent("response", "response", PathKind::CW),
                    PathAnnotation::confluent("request", "request", PathKind::CR),
                ],
            )
            .replicated(),
        )
        .with_component(
            ComponentSpec::new(
                "Report",
                vec![PathAnnotation::confluent("click", "response", PathKind::CW), query.annotation()],
            )
            .replicated(),
        )
        .with_stream(c)
        .with_stream(StreamSpec::source("request", Endpoint::new("Cache", "request")))
        .with_stream(StreamSpec::edge("q", Endpoint::new("Cache", "request"), Endpoint::new("Report", "request")))
        .with_stream(StreamSpec::edge("r", Endpoint::new("Report", "response"), Endpoint::new("Cache", "response")))
        .with_stream(StreamSpec::edge(
            "gossip",
            Endpoint::new("Cache", "response"),
            Endpoint::new("Cache", "response"),
        ))
        .with_stream(StreamSpec::sink("answer", Endpoint::new("Cache", "response")))
}

fn click(id: i64, campaign: i64, window: i64) -> ScriptItem {
    ScriptItem::Record(record([("id", id), ("campaign", campaign), ("window", window)]))
}

fn script(producer: &str, messages: Vec<ScriptItem>) -> ProducerScript {
    ProducerScript { producer: producer.into(), messages }
}

fn ad_topology(query: Query, threshold: i64, reports: usize, caches: usize) -> Topology {
    let routing = if caches > 1 {
        BTreeMap::from([("q".to_string(), Routing::Pairwise), ("r".to_string(), Routing::Pairwise)])
    } else {
        BTreeMap::new()
    };
    let mut routing = routing;
    routing.insert("gossip".into(), Routing::Others);
    Topology {
        instances: BTreeMap::from([("Report".to_string(), reports), ("Cache".to_string(), caches)]),
        routing,
        runtimes: BTreeMap::from([
            ("Report".to_string(), RuntimeSpec::report(query, threshold)),
            ("Cache".to_string(), RuntimeSpec::of(RuntimeKind::Cache)),
        ]),
        sources: BTreeMap::new(),
    }
}

fn fixture(name: &str, coordination: CoordinationMode, topology: Topology, mode: Mode, bound: Option<usize>) -> Fixture {
    Fixture { name: name.into(), coordination, query: None, topology, mode: Some(mode), exhaustive_bound: bound }
}

/// THRESH with two replicated reports, one cache, two clicks and one
/// request: nine deliveries.
pub fn thresh_confluence() -> (LogicalDataflow, Fixture) {
    let mut topo = ad_topology(Query::Thresh, 1, 2, 1);
    topo.sources.insert("c".into(), vec![script("ad0", vec![click(1, 1, 1), click(1, 1, 2)])]);
    topo.sources.insert("request".into(), vec![script("client", vec![ScriptItem::Record(record([("id", 1)]))])]);
    (ad_network(Query::Thresh, None), fixture("thresh", CoordinationMode::None, topo, Mode::Exhaustive, None))
}

/// POOR with two reports and two caches; one request races four clicks.
pub fn poor_race(coordination: CoordinationMode) -> (LogicalDataflow, Fixture) {
    let mut topo = ad_topology(Query::Poor, 2, 2, 2);
    topo.sources.insert(
        "c".into(),
        vec![script("ad0", vec![click(1, 1, 1), click(1, 1, 2), click(1, 2, 1), click(1, 2, 2)])],
    );
    topo.sources.insert("request".into(), vec![script("client", vec![ScriptItem::Record(record([("id", 1)]))])]);
    let bound = match coordination {
        CoordinationMode::None => 20,
        _ => 30,
    };
    (ad_network(Query::Poor, None), fixture("poor", coordination, topo, Mode::Exhaustive, Some(bound)))
}

/// CAMPAIGN with clicks sealed on campaign by two ad servers.
pub fn campaign_sealed(coordination: CoordinationMode) -> (LogicalDataflow, Fixture) {
    let mut topo = ad_topology(Query::Campaign, 2, 2, 2);
    let seal = || ScriptItem::Seal { seal: record([("campaign", 1)]) };
    topo.sources.insert(
        "c".into(),
        vec![script("ad0", vec![click(1, 1, 1), seal()]), script("ad1", vec![click(1, 1, 2), seal()])],
    );
    topo.sources.insert(
        "request".into(),
        vec![script("client", vec![ScriptItem::Record(record([("id", 1), ("campaign", 1)]))])],
    );
    (
        ad_network(Query::Campaign, Some(&["campaign"])),
        fixture("campaign", coordination, topo, Mode::Exhaustive, Some(24)),
    )
}

/// `clicks` payload messages over `partitions` campaigns, each produced and
/// sealed by all of `producers` ad servers.
pub fn seal_cost(clicks: usize, partitions: usize, producers: usize, coordination: CoordinationMode) -> (LogicalDataflow, Fixture) {
    let mut topo = ad_topology(Query::Campaign, 2, 1, 1);
    let mut scripts: Vec<ProducerScript> = (0..producers).map(|k| script(&format!("ad{k}"), Vec::new())).collect();
    for j in 0..clicks {
        let k = j % producers;
        scripts[k].messages.push(click((j % 7) as i64, (j % partitions) as i64, (j % 3) as i64));
    }
    for s in &mut scripts {
        let mut seen: Vec<i64> = s
            .messages
            .iter()
            .filter_map(|m| match m {
                ScriptItem::Record(r) => r.get("campaign").and_then(Value::as_int),
                ScriptItem::Seal { .. } => None,
            })
            .collect();
        seen.sort_unstable();
        seen.dedup();
        for c in seen {
            s.messages.push(ScriptItem::Seal { seal: record([("campaign", c)]) });
        }
    }
    topo.sources.insert("c".into(), scripts);
    (
        ad_network(Query::Campaign, Some(&["campaign"])),
        fixture("cost", coordination, topo, Mode::Sample { samples: 4, seed: 7 }, None),
    )
}

/// Wordcount with two splitters, two hash-partitioned counters and one
/// committer.
pub fn wordcount_run(sealed: bool, coordination: CoordinationMode) -> (LogicalDataflow, Fixture) {
    let tweet = |text: &str| ScriptItem::Record(record([("text", Value::from(text)), ("batch", Value::from(1))]));
    let topo = Topology {
        instances: BTreeMap::from([("Splitter".to_string(), 2), ("Count".to_string(), 2)]),
        routing: BTreeMap::from([("words".to_string(), Routing::Hash(Some(attrs(["word"]))))]),
        runtimes: BTreeMap::from([
            ("Splitter".to_string(), RuntimeSpec::of(RuntimeKind::Splitter)),
            ("Count".to_string(), RuntimeSpec::of(RuntimeKind::Count)),
            ("Commit".to_string(), RuntimeSpec::of(RuntimeKind::Commit)),
        ]),
        sources: BTreeMap::from([(
            "tweets".to_string(),
            vec![script("src", vec![tweet("a b"), tweet("b"), ScriptItem::Seal { seal: record([("batch", 1)]) }])],
        )]),
    };
    (wordcount(sealed), fixture("wordcount", coordination, topo, Mode::Exhaustive, Some(40)))
}
