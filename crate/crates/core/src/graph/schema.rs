use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::value::ValueKind;
use super::GraphError;

/// One of the nine bracketed entity-class markers used in question templates
/// and masked queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PlaceholderToken {
    Stock,
    Chairman,
    Stockholder,
    Trade,
    PublicFund,
    FundManager,
    Industry,
    Time,
    Number,
}

impl PlaceholderToken {
    pub const ALL: [PlaceholderToken; 9] = [
        PlaceholderToken::Stock,
        PlaceholderToken::Chairman,
        PlaceholderToken::Stockholder,
        PlaceholderToken::Trade,
        PlaceholderToken::PublicFund,
        PlaceholderToken::FundManager,
        PlaceholderToken::Industry,
        PlaceholderToken::Time,
        PlaceholderToken::Number,
    ];

    pub fn letter(self) -> char {
        match self {
            PlaceholderToken::Stock => 's',
            PlaceholderToken::Chairman => 'c',
            PlaceholderToken::Stockholder => 'h',
            PlaceholderToken::Trade => 't',
            PlaceholderToken::PublicFund => 'p',
            PlaceholderToken::FundManager => 'f',
            PlaceholderToken::Industry => 'i',
            PlaceholderToken::Time => 'd',
            PlaceholderToken::Number => 'm',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.letter() == c)
    }

    /// The bracketed form, e.g. `[s]`.
    pub fn as_str(self) -> &'static str {
        match self {
            PlaceholderToken::Stock => "[s]",
            PlaceholderToken::Chairman => "[c]",
            PlaceholderToken::Stockholder => "[h]",
            PlaceholderToken::Trade => "[t]",
            PlaceholderToken::PublicFund => "[p]",
            PlaceholderToken::FundManager => "[f]",
            PlaceholderToken::Industry => "[i]",
            PlaceholderToken::Time => "[d]",
            PlaceholderToken::Number => "[m]",
        }
    }

    /// What the marker stands for, as listed in question-generation prompts.
    pub fn meaning(self) -> &'static str {
        match self {
            PlaceholderToken::Stock => "stock",
            PlaceholderToken::Chairman => "chairman",
            PlaceholderToken::Stockholder => "stockholder",
            PlaceholderToken::Trade => "trade",
            PlaceholderToken::PublicFund => "public offering fund",
            PlaceholderToken::FundManager => "fund manager",
            PlaceholderToken::Industry => "industry",
            PlaceholderToken::Time => "time",
            PlaceholderToken::Number => "numbers",
        }
    }
}

impl fmt::Display for PlaceholderToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlaceholderToken {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| format!("unknown placeholder token {s:?}"))?;
        let mut chars = inner.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => {
                PlaceholderToken::from_letter(c).ok_or_else(|| format!("unknown placeholder token {s:?}"))
            }
            _ => Err(format!("unknown placeholder token {s:?}")),
        }
    }
}

impl Serialize for PlaceholderToken {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for PlaceholderToken {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Every placeholder marker in `text`, with its byte offset, in order.
pub fn find_placeholders(text: &str) -> Vec<(usize, PlaceholderToken)> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i + 2 < b.len() {
        if b[i] == b'[' && b[i + 2] == b']' {
            if let Some(t) = PlaceholderToken::from_letter(b[i + 1] as char) {
                out.push((i, t));
                i += 3;
                continue;
            }
        }
        i += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyDef {
    pub name: String,
    pub kind: ValueKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceholderClass {
    pub token: PlaceholderToken,
    pub bound_property: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTypeDef {
    pub name: String,
    #[serde(default)]
    pub properties: Vec<PropertyDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placeholder: Option<PlaceholderClass>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeTypeDef {
    pub name: String,
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub properties: Vec<PropertyDef>,
}

impl NodeTypeDef {
    pub fn property(&self, name: &str) -> Option<&PropertyDef> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn bound_property(&self) -> Option<&PropertyDef> {
        self.placeholder.as_ref().and_then(|p| self.property(&p.bound_property))
    }

    /// True when the type's placeholder names entities by a plain string
    /// (a name), as opposed to a date key.
    pub fn is_nameable(&self) -> bool {
        self.bound_property().is_some_and(|p| p.kind == ValueKind::String)
    }

    pub fn is_date_keyed(&self) -> bool {
        self.bound_property().is_some_and(|p| p.kind == ValueKind::Date)
    }

    pub fn numeric_properties(&self) -> impl Iterator<Item = &PropertyDef> {
        self.properties.iter().filter(|p| p.kind == ValueKind::Number)
    }
}

impl EdgeTypeDef {
    pub fn property(&self, name: &str) -> Option<&PropertyDef> {
        self.properties.iter().find(|p| p.name == name)
    }

    /// The endpoint opposite to `node_type`, if the edge touches it.
    pub fn other_end(&self, node_type: &str) -> Option<&str> {
        if self.source == node_type {
            Some(&self.target)
        } else if self.target == node_type {
            Some(&self.source)
        } else {
            None
        }
    }
}

/// Typed description of node and edge types.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSchema {
    #[serde(default)]
    pub node_types: Vec<NodeTypeDef>,
    #[serde(default)]
    pub edge_types: Vec<EdgeTypeDef>,
}

#[derive(Deserialize)]
struct RawPlaceholder {
    token: String,
    bound_property: String,
}

#[derive(Deserialize)]
struct RawNodeType {
    name: String,
    #[serde(default)]
    properties: Vec<PropertyDef>,
    #[serde(default)]
    placeholder: Option<RawPlaceholder>,
}

#[derive(Deserialize)]
struct RawSchema {
    #[serde(default)]
    node_types: Vec<RawNodeType>,
    #[serde(default)]
    edge_types: Vec<EdgeTypeDef>,
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<GraphSchema, GraphError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| GraphError::Io { path: path.display().to_string(), source })?;
    GraphSchema::from_json_str(&text)
}

impl GraphSchema {
    /// Parses and validates a schema document.
    pub fn from_json_str(text: &str) -> Result<GraphSchema, GraphError> {
        let raw: RawSchema = serde_json::from_str(text).map_err(|e| GraphError::parse("schema", &e))?;
        let mut node_types = Vec::with_capacity(raw.node_types.len());
        for nt in raw.node_types {
            let placeholder = match nt.placeholder {
                None => None,
                Some(p) => Some(PlaceholderClass {
                    token: p
                        .token
                        .parse()
                        .map_err(|e: String| GraphError::Schema(format!("node type {:?}: {e}", nt.name)))?,
                    bound_property: p.bound_property,
                }),
            };
            node_types.push(NodeTypeDef { name: nt.name, properties: nt.properties, placeholder });
        }
        let schema = GraphSchema { node_types, edge_types: raw.edge_types };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let err = |m: String| Err(GraphError::Schema(m));
        let mut names = BTreeSet::new();
        let mut tokens = BTreeSet::new();
        for nt in &self.node_types {
            if nt.name.is_empty() {
                return err("node type with empty name".into());
            }
            if !names.insert(nt.name.as_str()) {
                return err(format!("duplicate node type {:?}", nt.name));
            }
            check_properties(&nt.name, &nt.properties)?;
            if let Some(ph) = &nt.placeholder {
                if ph.token == PlaceholderToken::Number {
                    return err(format!("node type {:?}: [m] is reserved for numbers", nt.name));
                }
                if !tokens.insert(ph.token) {
                    return err(format!("placeholder {} declared by more than one node type", ph.token));
                }
                if nt.property(&ph.bound_property).is_none() {
                    return err(format!(
                        "node type {:?}: placeholder bound to undeclared property {:?}",
                        nt.name, ph.bound_property
                    ));
                }
            }
        }
        let mut edge_names = BTreeSet::new();
        for et in &self.edge_types {
            if et.name.is_empty() {
                return err("edge type with empty name".into());
            }
            if !edge_names.insert(et.name.as_str()) {
                return err(format!("duplicate edge type {:?}", et.name));
            }
            for end in [&et.source, &et.target] {
                if !names.contains(end.as_str()) {
                    return err(format!("edge type {:?} references unknown node type {:?}", et.name, end));
                }
            }
            check_properties(&et.name, &et.properties)?;
        }
        Ok(())
    }

    pub fn node_type(&self, name: &str) -> Option<&NodeTypeDef> {
        self.node_types.iter().find(|n| n.name == name)
    }

    pub fn edge_type(&self, name: &str) -> Option<&EdgeTypeDef> {
        self.edge_types.iter().find(|e| e.name == name)
    }

    pub fn node_type_for_token(&self, token: PlaceholderToken) -> Option<&NodeTypeDef> {
        self.node_types.iter().find(|n| n.placeholder.as_ref().is_some_and(|p| p.token == token))
    }

    /// Edge types incident to `node_type`, in schema order.
    pub fn incident_edges<'a>(&'a self, node_type: &'a str) -> impl Iterator<Item = &'a EdgeTypeDef> + 'a {
        self.edge_types.iter().filter(move |e| e.source == node_type || e.target == node_type)
    }

    /// Node types declaring a property of this name.
    pub fn owners_of_property<'a>(&'a self, prop: &'a str) -> impl Iterator<Item = &'a NodeTypeDef> + 'a {
        self.node_types.iter().filter(move |n| n.property(prop).is_some())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// Hex SHA-256 of the compact JSON form; stable across runs.
    pub fn fingerprint(&self) -> String {
        let compact = serde_json::to_string(self).expect("schema serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }
}

fn check_properties(owner: &str, props: &[PropertyDef]) -> Result<(), GraphError> {
    let mut seen = BTreeSet::new();
    for p in props {
        if p.name.is_empty() {
            return Err(GraphError::Schema(format!("type {owner:?} has a property with empty name")));
        }
        if !seen.insert(p.name.as_str()) {
            return Err(GraphError::Schema(format!("type {owner:?} declares property {:?} twice", p.name)));
        }
    }
    Ok(())
}
