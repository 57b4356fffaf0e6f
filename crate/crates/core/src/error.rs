//! Error type shared by the library.

use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{message} at line {line} column {column}")]
    Parse { message: String, line: usize, column: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid dataflow: {}", join(.0))]
    Invalid(Vec<Violation>),

    #[error("reconciliation at {component}.{port} produced no external label")]
    EmptyReconciliation { component: String, port: String },

    #[error("dataflow still has a cycle after collapsing")]
    Cyclic,

    #[error("partition {partition} of {component} has no producers")]
    EmptyProducerSet { component: String, partition: String },

    #[error("cannot instantiate: {0}")]
    Instantiate(String),

    #[error("exhaustive enumeration needs {events} events, above the bound of {bound}")]
    ExhaustiveBound { events: usize, bound: usize },

    #[error("partition {partition} at {instance} never received all its seals")]
    StuckPartition { instance: String, partition: String },

    #[error("runtime error at {instance}: {message}")]
    Runtime { instance: String, message: String },

    #[error("unknown fixture {0}")]
    UnknownFixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
