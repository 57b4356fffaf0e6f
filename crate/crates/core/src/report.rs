//! Reports for the command-line driver: what each command computes, the
//! versioned JSON envelope, the text rendering and the exit status.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalysisReport, Rule};
use crate::config::ConfigDocument;
use crate::error::Result;
use crate::model::{validate, StreamLabel};
use crate::sim::{run_fixture, FixtureRun, SimOverrides};
use crate::synthesis::{plan_violations, synthesize, CoordinationPlan};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Analyze,
    Plan,
    Simulate,
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Plan => "plan",
            Command::Simulate => "simulate",
            Command::Check => "check",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

/// Results for one query variant (or the whole document when it has none).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    pub analysis: AnalysisReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<CoordinationPlan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plan_violations: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub simulations: Vec<FixtureRun>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckItem>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Every sink at most Async, or every guarantee held.
    Ok,
    /// Some sink carries an anomaly label.
    Anomalous,
    /// Simulation contradicted a guarantee, or a check failed.
    Failed,
    /// Input could not be read or is invalid.
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Error => 1,
            Status::Anomalous | Status::Failed => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub command: Command,
    pub config: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub query: Option<String>,
    pub overrides: SimOverrides,
}

impl Report {
    pub fn failure(command: Command, config: &str, error: impl ToString) -> Self {
        Report { schema: SCHEMA_VERSION, command, config: config.into(), sections: Vec::new(), error: Some(error.to_string()) }
    }

    /// Status derived from the report content alone.
    pub fn status(&self) -> Status {
        if self.error.is_some() {
            return Status::Error;
        }
        let sections = &self.sections;
        let anomalous = sections.iter().any(|s| !s.analysis.is_safe());
        let violated = sections.iter().any(|s| !s.plan_violations.is_empty());
        let contradicted = sections.iter().flat_map(|s| &s.simulations).any(|r| !r.within_expectation());
        let failed_check = sections.iter().flat_map(|s| &s.checks).any(|c| !c.passed);
        match self.command {
            Command::Analyze if anomalous => Status::Anomalous,
            Command::Plan if violated => Status::Failed,
            Command::Simulate if contradicted => Status::Failed,
            Command::Check if failed_check => Status::Failed,
            _ => Status::Ok,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.status().exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.command.name(), self.config);
        if let Some(e) = &self.error {
            let _ = writeln!(out, "error: {e}");
        }
        for s in &self.sections {
            render_section(&mut out, self.command, s);
        }
        let _ = writeln!(out, "status: {}", status_name(self.status()));
        out
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Ok => "ok",
        Status::Anomalous => "anomalous",
        Status::Failed => "failed",
        Status::Error => "error",
    }
}

fn label_or_none(l: Option<&StreamLabel>) -> String {
    l.map_or_else(|| "none".to_string(), ToString::to_string)
}

fn render_section(out: &mut String, command: Command, s: &Section) {
    if let Some(q) = &s.query {
        let _ = writeln!(out, "\n== query {q}");
    } else {
        out.push('\n');
    }
    let a = &s.analysis;
    let _ = writeln!(out, "streams:");
    let width = a.stream_labels.keys().map(String::len).max().unwrap_or(0);
    for (name, label) in &a.stream_labels {
        let sink = if a.sinks.contains(name) { "  (sink)" } else { "" };
        let _ = writeln!(out, "  {name:<width$}  {label}{sink}");
    }
    for u in &a.unlabeled {
        let _ = writeln!(out, "  {u:<width$}  (unlabeled)");
    }
    for g in &a.collapsed {
        let _ = writeln!(
            out,
            "cycle collapsed into {} (members {}; internal streams {})",
            g.node,
            g.members.join(", "),
            g.removed_streams.join(", ")
        );
    }
    let _ = writeln!(out, "dataflow label: {}", label_or_none(a.dataflow_label.as_ref()));
    if command == Command::Analyze || command == Command::Check {
        let _ = writeln!(out, "derivations:");
        for line in a.trace() {
            let _ = writeln!(out, "  {line}");
        }
        let legend: Vec<String> = Rule::ALL.iter().map(|r| format!("{} {}", r.tag(), r.summary())).collect();
        let _ = writeln!(out, "rules: {}", legend.join("; "));
    }
    if let Some(plan) = &s.plan {
        let _ = writeln!(out, "plan:");
        for (c, e) in &plan.entries {
            let residual = e.residual.as_ref().map(|r| format!("  residual {r}")).unwrap_or_default();
            let _ = writeln!(out, "  {c}: {}{residual}", e.strategy);
        }
        let _ = writeln!(out, "expected label: {}", label_or_none(plan.expected_label.as_ref()));
    }
    for v in &s.plan_violations {
        let _ = writeln!(out, "plan violation: {v}");
    }
    for r in &s.simulations {
        render_run(out, r);
    }
    for c in &s.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        let detail = if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) };
        let _ = writeln!(out, "check {mark} {}{detail}", c.name);
    }
}

fn render_run(out: &mut String, r: &FixtureRun) {
    let rep = &r.report;
    let yes = |b: bool| if b { "yes" } else { "no" };
    let coordination = serde_json::to_value(r.coordination).ok().and_then(|v| v.as_str().map(str::to_string));
    let _ = writeln!(out, "fixture {} [{}] {}:", r.fixture, coordination.unwrap_or_default(), rep.mode);
    let _ = writeln!(
        out,
        "  schedules {}, distinct outputs {}, run {}, inst {}, diverge {}",
        rep.schedules,
        rep.distinct_output_sets,
        yes(rep.run),
        yes(rep.inst),
        yes(rep.diverge)
    );
    let _ = writeln!(out, "  coordination messages {}..{}", rep.coordination_min, rep.coordination_max);
    for (c, p) in &r.seal_protocols {
        let _ = writeln!(out, "  seal protocol {c}: key {{{}}}, voting {}", p.key.iter().cloned().collect::<Vec<_>>().join(","), p.voting);
    }
    let verdict = if r.within_expectation() { "within" } else { "EXCEEDS" };
    let _ = writeln!(
        out,
        "  observed {} ({verdict} expected {})",
        rep.observed,
        label_or_none(r.expected.as_ref())
    );
    for w in &rep.witnesses {
        let _ = writeln!(out, "  witness {}: {}", w.kind, w.schedule.join(" "));
    }
}

/// Execute `command` over `doc`.
pub fn run(command: Command, config: &str, doc: &ConfigDocument, opts: &RunOptions) -> Result<Report> {
    let queries: Vec<Option<String>> = match doc.selected(opts.query.as_deref()) {
        Ok(q) => vec![q.map(str::to_string)],
        Err(_) if opts.query.is_none() => doc.variant_names().into_iter().map(|q| Some(q.to_string())).collect(),
        Err(e) => return Err(e),
    };
    let fds = doc.fd_set();
    let mut sections = Vec::new();
    for query in queries {
        let df = doc.dataflow(query.as_deref())?;
        let violations = validate(&df, &fds);
        if !violations.is_empty() {
            return Err(crate::Error::Invalid(violations));
        }
        let analysis = analyze(&df, &fds)?;
        let mut section = Section {
            query: query.clone(),
            analysis,
            plan: None,
            plan_violations: Vec::new(),
            simulations: Vec::new(),
            checks: Vec::new(),
        };
        if command != Command::Analyze {
            let plan = synthesize(&df, &section.analysis, &fds)?;
            section.plan_violations = plan_violations(&df, &plan, &fds);
            section.plan = Some(plan);
        }
        if matches!(command, Command::Simulate | Command::Check) {
            for f in doc.fixtures.iter().filter(|f| f.query.is_none() || f.query == query) {
                section.simulations.push(run_fixture(&df, &fds, f, opts.overrides)?);
            }
        }
        if command == Command::Check {
            section.checks = checks(&section);
        }
        sections.push(section);
    }
    Ok(Report { schema: SCHEMA_VERSION, command, config: config.into(), sections, error: None })
}

fn checks(s: &Section) -> Vec<CheckItem> {
    let mut out = Vec::new();
    let expected_plan = s.plan.as_ref().and_then(|p| p.expected_label.clone());
    out.push(CheckItem {
        name: "plan is well-formed".into(),
        passed: s.plan_violations.is_empty(),
        detail: s.plan_violations.join("; "),
    });
    out.push(CheckItem {
        name: "plan leaves at most Run".into(),
        passed: expected_plan.as_ref().is_none_or(|l| l.severity() <= StreamLabel::Run.severity()),
        detail: format!("expected {}", label_or_none(expected_plan.as_ref())),
    });
    for r in &s.simulations {
        out.push(CheckItem {
            name: format!("fixture {} observed within static bound", r.fixture),
            passed: r.within_expectation(),
            detail: format!("observed {}, expected {}", r.report.observed, label_or_none(r.expected.as_ref())),
        });
    }
    out
}
