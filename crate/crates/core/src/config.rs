//! YAML configuration documents.
//!
//! A document is a mapping. Every key that is not reserved names either a
//! component or a query variant:
//!
//! ```yaml
//! Report:
//!   Rep: true
//!   annotation:
//!     - { from: click, to: response, label: CW }
//! POOR: { from: request, to: response, label: OR, subscript: [id] }
//! streams:
//!   - { name: c, to: Report.click, seal: [campaign] }
//! query: POOR
//! ```
//!
//! A component entry carries `annotation` (one mapping or a list) and an
//! optional `Rep` flag. A variant entry is a bare annotation (or a list of
//! them) and attaches to the closest preceding component, or to the one
//! named by `component:`. The reserved keys are `streams`, `fds`,
//! `fixtures` and `query`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{self, DeserializeSeed, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer};
use serde_yaml::{Mapping, Value as Yaml};

use crate::error::{Error, Result};
use crate::lineage::{derive_subscript, FdSet, InjectiveFd, QueryDescriptor, Via};
use crate::model::{AttrSet, ComponentSpec, Endpoint, Gate, LogicalDataflow, PathAnnotation, PathKind, StreamSpec};
use crate::sim::Fixture;

/// How an order-sensitive path names its partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Subscript {
    Attributes(AttrSet),
    Wildcard,
    /// Derived from a query descriptor.
    Query(QueryDescriptor),
}

impl Subscript {
    pub fn gate(&self) -> Gate {
        match self {
            Subscript::Attributes(a) => Gate::Keys(a.clone()),
            Subscript::Wildcard => Gate::Wildcard,
            Subscript::Query(q) => derive_subscript(q),
        }
    }

    fn to_yaml(&self) -> Yaml {
        match self {
            Subscript::Attributes(a) => attr_list(a),
            Subscript::Wildcard => Yaml::from("*"),
            Subscript::Query(q) => {
                let mut m = Mapping::new();
                m.insert("query".into(), serde_yaml::to_value(q).expect("descriptor serializes"));
                Yaml::Mapping(m)
            }
        }
    }
}

impl<'de> Deserialize<'de> for Subscript {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Subscript;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of attributes, \"*\", or { query: ... }")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Subscript, E> {
                match s {
                    "*" => Ok(Subscript::Wildcard),
                    other => Ok(Subscript::Attributes(BTreeSet::from([other.to_string()]))),
                }
            }

            fn visit_seq<A: SeqAccess<'de>>(self, seq: A) -> std::result::Result<Subscript, A::Error> {
                let set = AttrSet::deserialize(de::value::SeqAccessDeserializer::new(seq))?;
                if set.is_empty() {
                    return Err(de::Error::custom("empty subscript; use \"*\" for a wildcard"));
                }
                Ok(Subscript::Attributes(set))
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> std::result::Result<Subscript, A::Error> {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct Q {
                    query: QueryDescriptor,
                }
                let q = Q::deserialize(de::value::MapAccessDeserializer::new(map))?;
                Ok(Subscript::Query(q.query))
            }
        }
        d.deserialize_any(V)
    }
}

fn attr_list(a: &AttrSet) -> Yaml {
    Yaml::Sequence(a.iter().map(|s| Yaml::from(s.as_str())).collect())
}

fn parse_kind<E: de::Error>(s: &str) -> std::result::Result<PathKind, E> {
    match s {
        "CR" => Ok(PathKind::CR),
        "CW" => Ok(PathKind::CW),
        "OR" => Ok(PathKind::OR),
        "OW" => Ok(PathKind::OW),
        other => Err(E::custom(format!("unknown label `{other}` (expected CR, CW, OR or OW)"))),
    }
}

/// One `{ from, to, label, subscript }` entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotationDecl {
    pub from: String,
    pub to: String,
    pub label: PathKind,
    pub subscript: Option<Subscript>,
}

impl AnnotationDecl {
    fn new<E: de::Error>(from: String, to: String, label: &str, subscript: Option<Subscript>) -> std::result::Result<Self, E> {
        let label = parse_kind(label)?;
        match (&subscript, label.needs_gate()) {
            (None, true) => Err(E::custom(format!("label {label} needs a subscript"))),
            (Some(_), false) => Err(E::custom(format!("label {label} takes no subscript"))),
            _ => Ok(AnnotationDecl { from, to, label, subscript }),
        }
    }

    pub fn path(&self) -> PathAnnotation {
        PathAnnotation {
            from: self.from.clone(),
            to: self.to.clone(),
            kind: self.label,
            gate: self.subscript.as_ref().map(Subscript::gate),
        }
    }

    fn to_yaml(&self) -> Yaml {
        let mut m = Mapping::new();
        m.insert("from".into(), self.from.as_str().into());
        m.insert("to".into(), self.to.as_str().into());
        m.insert("label".into(), self.label.to_string().into());
        if let Some(s) = &self.subscript {
            m.insert("subscript".into(), s.to_yaml());
        }
        Yaml::Mapping(m)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRepr {
    from: String,
    to: String,
    label: String,
    #[serde(default)]
    subscript: Option<Subscript>,
}

impl<'de> Deserialize<'de> for AnnotationDecl {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = AnnotationRepr::deserialize(d)?;
        AnnotationDecl::new(r.from, r.to, &r.label, r.subscript)
    }
}

/// A single mapping or a list of them.
fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<AnnotationDecl>, D::Error> {
    struct V;
    impl<'de> Visitor<'de> for V {
        type Value = Vec<AnnotationDecl>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("an annotation or a list of annotations")
        }

        fn visit_seq<A: SeqAccess<'de>>(self, seq: A) -> std::result::Result<Self::Value, A::Error> {
            Vec::deserialize(de::value::SeqAccessDeserializer::new(seq))
        }

        fn visit_map<A: MapAccess<'de>>(self, map: A) -> std::result::Result<Self::Value, A::Error> {
            Ok(vec![AnnotationDecl::deserialize(de::value::MapAccessDeserializer::new(map))?])
        }
    }
    d.deserialize_any(V)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentDecl {
    pub name: String,
    pub rep: bool,
    pub annotations: Vec<AnnotationDecl>,
}

/// Alternative annotations for one component, selected by name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariantDecl {
    pub name: String,
    pub component: String,
    pub annotations: Vec<AnnotationDecl>,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamDecl {
    pub name: String,
    #[serde(default, deserialize_with = "endpoint")]
    pub from: Option<Endpoint>,
    #[serde(default, deserialize_with = "endpoint")]
    pub to: Option<Endpoint>,
    #[serde(default)]
    pub seal: Option<AttrSet>,
    #[serde(default)]
    pub schema: Option<AttrSet>,
    #[serde(default, alias = "Rep")]
    pub rep: bool,
}

fn endpoint<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Endpoint>, D::Error> {
    let s = String::deserialize(d)?;
    match s.split_once('.') {
        Some((c, p)) if !c.is_empty() && !p.is_empty() => Ok(Some(Endpoint::new(c, p))),
        _ => Err(de::Error::custom(format!("endpoint `{s}` is not of the form Component.port"))),
    }
}

impl StreamDecl {
    pub fn spec(&self) -> StreamSpec {
        StreamSpec {
            name: self.name.clone(),
            producer: self.from.clone(),
            consumer: self.to.clone(),
            seal: self.seal.clone(),
            schema: self.schema.clone(),
            rep: self.rep,
        }
    }

    fn to_yaml(&self) -> Yaml {
        let mut m = Mapping::new();
        m.insert("name".into(), self.name.as_str().into());
        if let Some(e) = &self.from {
            m.insert("from".into(), e.to_string().into());
        }
        if let Some(e) = &self.to {
            m.insert("to".into(), e.to_string().into());
        }
        if let Some(s) = &self.seal {
            m.insert("seal".into(), attr_list(s));
        }
        if let Some(s) = &self.schema {
            m.insert("schema".into(), attr_list(s));
        }
        if self.rep {
            m.insert("rep".into(), true.into());
        }
        Yaml::Mapping(m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdDecl {
    pub from: AttrSet,
    pub to: AttrSet,
}

impl FdDecl {
    fn to_yaml(&self) -> Yaml {
        let mut m = Mapping::new();
        m.insert("from".into(), attr_list(&self.from));
        m.insert("to".into(), attr_list(&self.to));
        Yaml::Mapping(m)
    }
}

/// A parsed configuration document, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigDocument {
    pub components: Vec<ComponentDecl>,
    pub variants: Vec<VariantDecl>,
    pub streams: Vec<StreamDecl>,
    pub fds: Vec<FdDecl>,
    pub fixtures: Vec<Fixture>,
    pub query: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRepr {
    #[serde(default, deserialize_with = "opt_one_or_many")]
    annotation: Option<Vec<AnnotationDecl>>,
    #[serde(default, rename = "Rep", alias = "rep")]
    rep: Option<bool>,
    #[serde(default)]
    component: Option<String>,
    #[serde(default)]
    from: Option<String>,
    #[serde(default)]
    to: Option<String>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    subscript: Option<Subscript>,
}

fn opt_one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<AnnotationDecl>>, D::Error> {
    one_or_many(d).map(Some)
}

enum Entry {
    Component(ComponentDecl),
    Variant(VariantDecl),
}

/// Deserializes one non-reserved entry, knowing the closest preceding
/// component so variants can attach to it.
struct EntrySeed<'a> {
    name: &'a str,
    last_component: Option<&'a str>,
}

impl EntrySeed<'_> {
    fn variant<E: de::Error>(&self, component: Option<String>, annotations: Vec<AnnotationDecl>) -> std::result::Result<Entry, E> {
        let component = component.or_else(|| self.last_component.map(str::to_string)).ok_or_else(|| {
            E::custom(format!("variant {} has no preceding component; add `component:`", self.name))
        })?;
        Ok(Entry::Variant(VariantDecl { name: self.name.to_string(), component, annotations }))
    }
}

impl<'de> DeserializeSeed<'de> for EntrySeed<'_> {
    type Value = Entry;

    fn deserialize<D: Deserializer<'de>>(self, d: D) -> std::result::Result<Entry, D::Error> {
        struct V<'a>(EntrySeed<'a>);
        impl<'de> Visitor<'de> for V<'_> {
            type Value = Entry;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a component or a query variant")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, seq: A) -> std::result::Result<Entry, A::Error> {
                let list = Vec::deserialize(de::value::SeqAccessDeserializer::new(seq))?;
                self.0.variant(None, list)
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> std::result::Result<Entry, A::Error> {
                let r = EntryRepr::deserialize(de::value::MapAccessDeserializer::new(map))?;
                let inline = r.from.is_some() || r.to.is_some() || r.label.is_some() || r.subscript.is_some();
                if inline {
                    if r.annotation.is_some() || r.rep.is_some() {
                        return Err(de::Error::custom("an entry is either a component or an inline annotation"));
                    }
                    let missing = |f: &str| de::Error::custom(format!("missing field `{f}`"));
                    let a = AnnotationDecl::new(
                        r.from.ok_or_else(|| missing("from"))?,
                        r.to.ok_or_else(|| missing("to"))?,
                        &r.label.ok_or_else(|| missing("label"))?,
                        r.subscript,
                    )?;
                    return self.0.variant(r.component, vec![a]);
                }
                if r.component.is_some() {
                    if r.rep.is_some() {
                        return Err(de::Error::custom("a variant cannot set Rep"));
                    }
                    return self.0.variant(r.component, r.annotation.unwrap_or_default());
                }
                Ok(Entry::Component(ComponentDecl {
                    name: self.0.name.to_string(),
                    rep: r.rep.unwrap_or(false),
                    annotations: r.annotation.unwrap_or_default(),
                }))
            }
        }
        d.deserialize_any(V(self))
    }
}

impl<'de> Deserialize<'de> for ConfigDocument {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ConfigDocument;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a mapping of components, variants and sections")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<ConfigDocument, A::Error> {
                let mut doc = ConfigDocument::default();
                let mut seen = BTreeSet::new();
                let mut last: Option<String> = None;
                while let Some(key) = map.next_key::<String>()? {
                    if !seen.insert(key.clone()) {
                        return Err(de::Error::custom(format!("duplicate entry {key}")));
                    }
                    match key.as_str() {
                        "streams" => doc.streams = map.next_value()?,
                        "fds" => doc.fds = map.next_value()?,
                        "fixtures" => doc.fixtures = map.next_value()?,
                        "query" => doc.query = Some(map.next_value()?),
                        name => match map.next_value_seed(EntrySeed { name, last_component: last.as_deref() })? {
                            Entry::Component(c) => {
                                last = Some(c.name.clone());
                                doc.components.push(c);
                            }
                            Entry::Variant(v) => doc.variants.push(v),
                        },
                    }
                }
                Ok(doc)
            }
        }
        d.deserialize_map(V)
    }
}

fn parse_error(e: serde_yaml::Error) -> Error {
    let (line, column) = e.location().map_or((0, 0), |l| (l.line(), l.column()));
    let mut message = e.to_string();
    let suffix = format!(" at line {line} column {column}");
    if let Some(stripped) = message.strip_suffix(&suffix) {
        message = stripped.to_string();
    }
    Error::Parse { message, line, column }
}

/// Line and column (1-based) of the first whole-word occurrence of `needle`.
fn locate(text: &str, needle: &str) -> (usize, usize) {
    let word = |c: char| c.is_alphanumeric() || c == '_';
    for (n, line) in text.lines().enumerate() {
        let mut start = 0;
        while let Some(off) = line[start..].find(needle) {
            let at = start + off;
            let before = line[..at].chars().next_back().is_some_and(word);
            let after = line[at + needle.len()..].chars().next().is_some_and(word);
            if !before && !after {
                return (n + 1, line[..at].chars().count() + 1);
            }
            start = at + needle.len();
        }
    }
    (0, 0)
}

/// Parse a configuration document. Labels, subscripts and references are
/// checked here; structural validation of the resulting dataflow is left
/// to [`crate::model::validate`].
pub fn parse_config(text: &str) -> Result<ConfigDocument> {
    let doc: Option<ConfigDocument> = serde_yaml::from_str(text).map_err(parse_error)?;
    let doc = doc.unwrap_or_default();
    doc.check_references(text)?;
    Ok(doc)
}

impl ConfigDocument {
    fn check_references(&self, text: &str) -> Result<()> {
        let names: BTreeSet<&str> = self.components.iter().map(|c| c.name.as_str()).collect();
        let dangling = |what: String, name: &str| {
            let (line, column) = locate(text, name);
            Err(Error::Parse { message: what, line, column })
        };
        for v in &self.variants {
            if !names.contains(v.component.as_str()) {
                return dangling(format!("variant {} names unknown component {}", v.name, v.component), &v.component);
            }
        }
        for s in &self.streams {
            for e in s.from.iter().chain(&s.to) {
                if !names.contains(e.component.as_str()) {
                    return dangling(format!("stream {} names unknown component {}", s.name, e.component), &e.to_string());
                }
            }
            if s.from.is_none() && s.to.is_none() {
                return dangling(format!("stream {} has neither `from` nor `to`", s.name), &s.name);
            }
        }
        for f in &self.fds {
            if f.from.is_empty() || f.to.is_empty() {
                return Err(Error::Config("fd sides must be nonempty".into()));
            }
        }
        if let Some(q) = &self.query {
            if !self.variants.iter().any(|v| &v.name == q) {
                return dangling(format!("query {q} is not a declared variant"), q);
            }
        }
        Ok(())
    }

    /// Variant names, in declaration order.
    pub fn variant_names(&self) -> Vec<&str> {
        self.variants.iter().map(|v| v.name.as_str()).collect()
    }

    /// The variant in effect: `query` overrides the document's selection.
    pub fn selected<'a>(&'a self, query: Option<&'a str>) -> Result<Option<&'a str>> {
        let chosen = query.or(self.query.as_deref());
        match chosen {
            None if self.variants.is_empty() => Ok(None),
            None => Err(Error::Config(format!(
                "select one of the query variants: {}",
                self.variant_names().join(", ")
            ))),
            Some(q) => {
                let v = self
                    .variants
                    .iter()
                    .find(|v| v.name.eq_ignore_ascii_case(q))
                    .ok_or_else(|| Error::Config(format!("unknown query variant {q}")))?;
                Ok(Some(v.name.as_str()))
            }
        }
    }

    /// Build the dataflow with the selected variant applied. Ports no stream
    /// touches become source or sink streams of their own.
    pub fn dataflow(&self, query: Option<&str>) -> Result<LogicalDataflow> {
        let selected = self.selected(query)?;
        let mut df = LogicalDataflow::new();
        for c in &self.components {
            let mut paths: Vec<PathAnnotation> = c.annotations.iter().map(AnnotationDecl::path).collect();
            for v in self.variants.iter().filter(|v| Some(v.name.as_str()) == selected && v.component == c.name) {
                for a in &v.annotations {
                    let p = a.path();
                    paths.retain(|q| (q.from.as_str(), q.to.as_str()) != (p.from.as_str(), p.to.as_str()));
                    paths.push(p);
                }
            }
            df = df.with_component(ComponentSpec { name: c.name.clone(), paths, rep: c.rep });
        }
        for s in &self.streams {
            df = df.with_stream(s.spec());
        }
        let mut taken: BTreeSet<String> = df.streams.iter().map(|s| s.name.clone()).collect();
        let mut fresh = |port: &str, component: &str| {
            let name = if taken.contains(port) { format!("{component}.{port}") } else { port.to_string() };
            taken.insert(name.clone());
            name
        };
        let mut extra = Vec::new();
        for c in df.components.values() {
            for port in c.inputs() {
                if df.streams_into(&c.name, port).next().is_none() {
                    extra.push(StreamSpec::source(&fresh(port, &c.name), Endpoint::new(&c.name, port)));
                }
            }
            for port in c.outputs() {
                if df.streams_from(&c.name, port).next().is_none() {
                    extra.push(StreamSpec::sink(&fresh(port, &c.name), Endpoint::new(&c.name, port)));
                }
            }
        }
        df.streams.extend(extra);
        Ok(df)
    }

    pub fn fd_set(&self) -> FdSet {
        self.fds
            .iter()
            .map(|f| InjectiveFd { determinant: f.from.clone(), dependent: f.to.clone(), via: Via::Declared })
            .collect()
    }

    pub fn fixture(&self, name: &str) -> Result<&Fixture> {
        self.fixtures.iter().find(|f| f.name == name).ok_or_else(|| Error::UnknownFixture(name.into()))
    }

    /// Canonical YAML form. Parsing it yields an equal document.
    pub fn to_yaml(&self) -> String {
        let mut root = Mapping::new();
        let mut by_component: BTreeMap<&str, Vec<&VariantDecl>> = BTreeMap::new();
        for v in &self.variants {
            by_component.entry(v.component.as_str()).or_default().push(v);
        }
        for c in &self.components {
            let mut m = Mapping::new();
            if c.rep {
                m.insert("Rep".into(), true.into());
            }
            m.insert("annotation".into(), Yaml::Sequence(c.annotations.iter().map(AnnotationDecl::to_yaml).collect()));
            root.insert(c.name.as_str().into(), Yaml::Mapping(m));
            for v in by_component.remove(c.name.as_str()).unwrap_or_default() {
                let mut m = Mapping::new();
                m.insert("component".into(), v.component.as_str().into());
                m.insert(
                    "annotation".into(),
                    Yaml::Sequence(v.annotations.iter().map(AnnotationDecl::to_yaml).collect()),
                );
                root.insert(v.name.as_str().into(), Yaml::Mapping(m));
            }
        }
        if !self.streams.is_empty() {
            root.insert("streams".into(), Yaml::Sequence(self.streams.iter().map(StreamDecl::to_yaml).collect()));
        }
        if !self.fds.is_empty() {
            root.insert("fds".into(), Yaml::Sequence(self.fds.iter().map(FdDecl::to_yaml).collect()));
        }
        if !self.fixtures.is_empty() {
            root.insert("fixtures".into(), serde_yaml::to_value(&self.fixtures).expect("fixtures serialize"));
        }
        if let Some(q) = &self.query {
            root.insert("query".into(), q.as_str().into());
        }
        if root.is_empty() {
            return String::new();
        }
        serde_yaml::to_string(&Yaml::Mapping(root)).expect("yaml serializes")
    }
}

pub fn load_config(path: &std::path::Path) -> Result<ConfigDocument> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{attrs, validate, Violation};

    const WORDCOUNT: &str = "  Splitter:
    annotation:
      - { from: tweets, to: words, label: CR }
  Count:
    annotation:
      - { from: words, to: counts, label: OW,
        subscript: [word, batch] }
  Commit:
    annotation: { from: counts, to: db, label: CW }
";

    const AD: &str = "  Cache:
    annotation:
      - { from: request, to: response, label: CR }
      - { from: response, to: response, label: CW }
      - { from: request, to: request, label: CR }
  Report:
    Rep: true
    annotation:
      - { from: click, to: response, label: CW }
  POOR: { from: request, to: response, label: OR,
        subscript: [id] }
  THRESH: { from: request, to: response, label: CR }
  WINDOW: { from: request, to: response, label: OR,
        subscript: [id, window] }
  CAMPAIGN: { from: request, to: response, label: OR,
        subscript: [id, campaign] }
";

    fn dedent(text: &str) -> String {
        text.lines().map(|l| l.strip_prefix("  ").unwrap_or(l)).collect::<Vec<_>>().join("\n") + "\n"
    }

    #[test]
    fn wordcount_annotation_file() {
        let doc = parse_config(WORDCOUNT).unwrap();
        let df = doc.dataflow(None).unwrap();
        assert_eq!(df.components["Splitter"].paths, vec![PathAnnotation::confluent("tweets", "words", PathKind::CR)]);
        assert_eq!(
            df.components["Count"].paths,
            vec![PathAnnotation::ordered("words", "counts", PathKind::OW, Gate::keys(["word", "batch"]))]
        );
        assert_eq!(df.components["Commit"].paths, vec![PathAnnotation::confluent("counts", "db", PathKind::CW)]);
    }

    #[test]
    fn ad_annotation_file() {
        let doc = parse_config(AD).unwrap();
        assert_eq!(doc.variant_names(), vec!["POOR", "THRESH", "WINDOW", "CAMPAIGN"]);
        assert!(doc.variants.iter().all(|v| v.component == "Report"));
        let df = doc.dataflow(Some("CAMPAIGN")).unwrap();
        let report = &df.components["Report"];
        assert!(report.rep);
        assert!(report
            .paths
            .contains(&PathAnnotation::ordered("request", "response", PathKind::OR, Gate::keys(["id", "campaign"]))));
        assert!(!df.components["Cache"].rep);
    }

    #[test]
    fn variants_need_a_selection() {
        let doc = parse_config(AD).unwrap();
        assert!(matches!(doc.dataflow(None), Err(Error::Config(_))));
        assert!(matches!(doc.dataflow(Some("NOPE")), Err(Error::Config(_))));
        assert!(doc.dataflow(Some("poor")).is_ok());
    }

    #[test]
    fn empty_document() {
        let doc = parse_config("").unwrap();
        assert_eq!(doc, ConfigDocument::default());
        let df = doc.dataflow(None).unwrap();
        assert_eq!(validate(&df, &FdSet::new()), vec![Violation::NoComponents]);
        assert_eq!(parse_config("# nothing\n").unwrap(), ConfigDocument::default());
    }

    #[test]
    fn unknown_label_has_position() {
        let text = "A:\n  annotation:\n    - { from: x, to: y, label: XR }\n";
        let Err(Error::Parse { message, line, column }) = parse_config(text) else { panic!() };
        assert!(message.contains("unknown label `XR`"), "{message}");
        assert_eq!(line, 3);
        assert!(column > 0);
    }

    #[test]
    fn subscript_rules() {
        let missing = "A:\n  annotation: { from: x, to: y, label: OR }\n";
        assert!(matches!(parse_config(missing), Err(Error::Parse { line: 2, .. })));
        let extra = "A:\n  annotation: { from: x, to: y, label: CW, subscript: [k] }\n";
        assert!(matches!(parse_config(extra), Err(Error::Parse { .. })));
        let wild = "A:\n  annotation: { from: x, to: y, label: OW, subscript: \"*\" }\n";
        let df = parse_config(wild).unwrap().dataflow(None).unwrap();
        assert_eq!(df.components["A"].paths[0].gate, Some(Gate::Wildcard));
    }

    #[test]
    fn subscript_from_descriptor() {
        let text = "A:\n  annotation:\n    - { from: x, to: y, label: OR, subscript: { query: { kind: aggregation, grouping: [id] } } }\n    - { from: x, to: z, label: OR, subscript: { query: { kind: other } } }\n";
        let doc = parse_config(text).unwrap();
        let df = doc.dataflow(None).unwrap();
        assert_eq!(df.components["A"].paths[0].gate, Some(Gate::keys(["id"])));
        assert_eq!(df.components["A"].paths[1].gate, Some(Gate::Wildcard));
        assert_eq!(parse_config(&doc.to_yaml()).unwrap(), doc);
    }

    #[test]
    fn streams_and_fds() {
        let wc = dedent(WORDCOUNT);
        let text = format!(
            "{wc}streams:\n  - {{ name: tweets, to: Splitter.tweets, seal: [batch] }}\n  - {{ name: words, from: Splitter.words, to: Count.words }}\n  - {{ name: counts, from: Count.counts, to: Commit.counts }}\n  - {{ name: db, from: Commit.db }}\nfds:\n  - {{ from: [batch], to: [epoch] }}\n"
        );
        let doc = parse_config(&text).unwrap();
        let df = doc.dataflow(None).unwrap();
        assert_eq!(df, crate::fixtures::wordcount(true));
        assert_eq!(doc.fd_set().len(), 1);
        assert_eq!(doc.streams[0].seal, Some(attrs(["batch"])));
    }

    #[test]
    fn unconnected_ports_become_streams() {
        let df = parse_config(WORDCOUNT).unwrap().dataflow(None).unwrap();
        assert_eq!(df.streams.len(), 6);
        assert!(df.stream("tweets").unwrap().is_source());
        assert!(df.stream("db").unwrap().is_sink());
        assert!(df.stream("words").unwrap().is_source());
        assert!(df.stream("Splitter.words").unwrap().is_sink());
    }

    #[test]
    fn dangling_references() {
        let wc = dedent(WORDCOUNT);
        let text = format!("{wc}streams:\n  - {{ name: s, from: Nope.out, to: Count.words }}\n");
        let Err(Error::Parse { message, line, .. }) = parse_config(&text) else { panic!() };
        assert!(message.contains("Nope"));
        assert_eq!(line, 11);
        let text = "X: { from: a, to: b, label: CR }\n";
        assert!(matches!(parse_config(text), Err(Error::Parse { line: 1, .. })));
        let text = format!("{AD}  query: FAST\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn explicit_component_and_lowercase_rep() {
        let text = "A:\n  rep: true\n  annotation: { from: x, to: y, label: CR }\nB:\n  annotation: { from: x, to: y, label: CR }\nV: { component: A, from: x, to: y, label: OR, subscript: [k] }\nquery: V\n";
        let doc = parse_config(text).unwrap();
        assert_eq!(doc.variants[0].component, "A");
        let df = doc.dataflow(None).unwrap();
        assert!(df.components["A"].rep);
        assert_eq!(df.components["A"].paths.len(), 1);
        assert_eq!(df.components["A"].paths[0].kind, PathKind::OR);
    }

    #[test]
    fn canonical_form_is_a_fixpoint() {
        for text in [WORDCOUNT, AD] {
            let doc = parse_config(text).unwrap();
            let once = doc.to_yaml();
            let again = parse_config(&once).unwrap();
            assert_eq!(again, doc);
            assert_eq!(again.to_yaml(), once);
        }
    }

    #[test]
    fn duplicate_entries_rejected() {
        let text = "A:\n  annotation: { from: x, to: y, label: CR }\nA:\n  annotation: { from: x, to: y, label: CR }\n";
        assert!(parse_config(text).is_err());
    }
}
