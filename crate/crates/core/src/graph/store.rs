use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schema::GraphSchema;
use super::value::Value;
use super::GraphError;

pub type PropMap = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub label: String,
    #[serde(default)]
    pub props: PropMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: String,
    #[serde(rename = "type")]
    pub label: String,
    pub dst: String,
    #[serde(default)]
    pub props: PropMap,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    #[serde(default)]
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub label: String,
    pub props: PropMap,
}

impl Node {
    pub fn prop(&self, key: &str) -> &Value {
        self.props.get(key).unwrap_or(&Value::Null)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub label: String,
    pub props: PropMap,
}

impl Edge {
    pub fn prop(&self, key: &str) -> &Value {
        self.props.get(key).unwrap_or(&Value::Null)
    }
}

/// A rule broken by a node or edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub id: String,
    pub rule: String,
}

/// Immutable in-memory property graph. Nodes are kept sorted by id; edges
/// keep their file order and are addressed by index.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyGraph {
    schema: GraphSchema,
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    by_label: BTreeMap<String, Vec<usize>>,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

pub fn load_graph(schema: &GraphSchema, path: impl AsRef<Path>) -> Result<PropertyGraph, GraphError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| GraphError::Io { path: path.display().to_string(), source })?;
    PropertyGraph::from_json_str(schema, &text)
}

impl PropertyGraph {
    pub fn from_json_str(schema: &GraphSchema, text: &str) -> Result<PropertyGraph, GraphError> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| GraphError::parse("graph", &e))?;
        PropertyGraph::build(schema, file)
    }

    /// Builds and validates a graph. The first violation found is reported.
    pub fn build(schema: &GraphSchema, file: GraphFile) -> Result<PropertyGraph, GraphError> {
        let GraphFile { mut nodes, edges } = file;
        for n in &nodes {
            if let Some(v) = node_violation(schema, &n.label, &n.props) {
                return Err(GraphError::Conformance { id: n.id.clone(), rule: v });
            }
        }
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(GraphError::Conformance { id: pair[0].id.clone(), rule: "duplicate node id".into() });
            }
        }
        let nodes: Vec<Node> = nodes.into_iter().map(|n| Node { id: n.id, label: n.label, props: n.props }).collect();
        let index: HashMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        let mut by_label: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            by_label.entry(n.label.clone()).or_default().push(i);
        }

        let mut out_adj = vec![Vec::new(); nodes.len()];
        let mut in_adj = vec![Vec::new(); nodes.len()];
        let mut built = Vec::with_capacity(edges.len());
        for (k, e) in edges.into_iter().enumerate() {
            let edge_id = format!("{}-[{}]->{} (#{k})", e.src, e.label, e.dst);
            let fail = |rule: String| GraphError::Conformance { id: edge_id.clone(), rule };
            let Some(et) = schema.edge_type(&e.label) else {
                return Err(fail(format!("unknown edge type {:?}", e.label)));
            };
            let src = *index.get(&e.src).ok_or_else(|| fail(format!("source node {:?} does not exist", e.src)))?;
            let dst = *index.get(&e.dst).ok_or_else(|| fail(format!("target node {:?} does not exist", e.dst)))?;
            if nodes[src].label != et.source {
                return Err(fail(format!("source must be a {} node, found {}", et.source, nodes[src].label)));
            }
            if nodes[dst].label != et.target {
                return Err(fail(format!("target must be a {} node, found {}", et.target, nodes[dst].label)));
            }
            if let Some(rule) = props_violation(&et.properties, &e.props) {
                return Err(fail(rule));
            }
            out_adj[src].push(built.len());
            in_adj[dst].push(built.len());
            built.push(Edge { src, dst, label: e.label, props: e.props });
        }

        Ok(PropertyGraph { schema: schema.clone(), nodes, index, by_label, edges: built, out_adj, in_adj })
    }

    pub fn schema(&self) -> &GraphSchema {
        &self.schema
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn edge(&self, idx: usize) -> &Edge {
        &self.edges[idx]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node_by_id(&self, id: &str) -> Option<&Node> {
        self.node_index(id).map(|i| &self.nodes[i])
    }

    /// Node indices with this label, in id order.
    pub fn nodes_of(&self, label: &str) -> &[usize] {
        self.by_label.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_adj[node]
    }

    pub fn in_edges(&self, node: usize) -> &[usize] {
        &self.in_adj[node]
    }

    /// Neighbours over any edge in either direction, paired with the edge index.
    pub fn neighbours(&self, node: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let out = self.out_adj[node].iter().map(|&e| (e, self.edges[e].dst));
        let inc = self.in_adj[node].iter().map(|&e| (e, self.edges[e].src));
        out.chain(inc)
    }

    /// Finds a node of `label` whose `key` property equals `value`.
    pub fn find_node(&self, label: &str, key: &str, value: &Value) -> Option<usize> {
        self.nodes_of(label).iter().copied().find(|&i| self.nodes[i].prop(key) == value)
    }

    /// Re-checks every node and edge against the schema.
    pub fn check_conformance(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for n in &self.nodes {
            if let Some(rule) = node_violation(&self.schema, &n.label, &n.props) {
                out.push(Violation { id: n.id.clone(), rule });
            }
        }
        for (k, e) in self.edges.iter().enumerate() {
            let id = format!("e{k}");
            match self.schema.edge_type(&e.label) {
                None => out.push(Violation { id, rule: format!("unknown edge type {:?}", e.label) }),
                Some(et) => {
                    if e.src >= self.nodes.len() || e.dst >= self.nodes.len() {
                        out.push(Violation { id, rule: "dangling endpoint".into() });
                        continue;
                    }
                    if self.nodes[e.src].label != et.source || self.nodes[e.dst].label != et.target {
                        out.push(Violation { id: id.clone(), rule: "endpoint types do not match".into() });
                    }
                    if let Some(rule) = props_violation(&et.properties, &e.props) {
                        out.push(Violation { id, rule });
                    }
                }
            }
        }
        out
    }

    /// Serializable form, suitable for writing back to a graph file.
    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord { id: n.id.clone(), label: n.label.clone(), props: n.props.clone() })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    src: self.nodes[e.src].id.clone(),
                    label: e.label.clone(),
                    dst: self.nodes[e.dst].id.clone(),
                    props: e.props.clone(),
                })
                .collect(),
        }
    }

    /// The latest date value stored anywhere in the graph.
    pub fn latest_date(&self) -> Option<String> {
        let mut best: Option<&str> = None;
        for nt in &self.schema.node_types {
            for p in nt.properties.iter().filter(|p| p.kind == super::ValueKind::Date) {
                for &i in self.nodes_of(&nt.name) {
                    if let Some(d) = self.nodes[i].prop(&p.name).as_str() {
                        if best.is_none_or(|b| d > b) {
                            best = Some(d);
                        }
                    }
                }
            }
        }
        best.map(str::to_string)
    }
}

/// Deterministically picks a node of `node_type`.
pub fn sample_entity(graph: &PropertyGraph, node_type: &str, seed: u64) -> Result<String, GraphError> {
    let candidates = graph.nodes_of(node_type);
    if candidates.is_empty() {
        return Err(GraphError::EmptyType(node_type.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = candidates[rng.random_range(0..candidates.len())];
    Ok(graph.nodes[pick].id.clone())
}

fn node_violation(schema: &GraphSchema, label: &str, props: &PropMap) -> Option<String> {
    match schema.node_type(label) {
        None => Some(format!("unknown node type {label:?}")),
        Some(nt) => props_violation(&nt.properties, props),
    }
}

fn props_violation(declared: &[super::schema::PropertyDef], props: &PropMap) -> Option<String> {
    for (key, value) in props {
        match declared.iter().find(|p| &p.name == key) {
            None => return Some(format!("undeclared property {key:?}")),
            Some(p) if !p.kind.admits(value) => {
                return Some(format!("property {key:?} must be {}, found {value:?}", p.kind));
            }
            _ => {}
        }
    }
    None
}
