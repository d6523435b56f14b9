//! Typed property graph and its schema.

mod schema;
mod store;
mod value;

pub use schema::{
    find_placeholders, load_schema, EdgeTypeDef, GraphSchema, NodeTypeDef, PlaceholderClass, PlaceholderToken,
    PropertyDef,
};
pub use store::{
    load_graph, sample_entity, Edge, EdgeRecord, GraphFile, Node, NodeRecord, PropMap, PropertyGraph, Violation,
};
pub use value::{format_float, is_iso_date, Value, ValueKind, FLOAT_TOLERANCE};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what} file at line {line}, column {column}: {message}")]
    Parse { what: &'static str, line: usize, column: usize, message: String },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("{id}: {rule}")]
    Conformance { id: String, rule: String },
    #[error("no node of type {0:?} exists")]
    EmptyType(String),
}

impl GraphError {
    pub(crate) fn parse(what: &'static str, e: &serde_json::Error) -> Self {
        GraphError::Parse { what, line: e.line(), column: e.column(), message: e.to_string() }
    }
}
