use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Pattern, Turn};
use crate::gql::AggFunc;
use crate::graph::{NodeTypeDef, PropertyGraph, Value};
use crate::textgen::{Focus, Form};

use super::{ForgeConfig, ForgeError};

/// Boost given to entities and relations of the previous turn.
const BOOST: f64 = 0.25;

/// What one round asks about: the expansion pattern (none for the opening
/// turn), the subject node and the structured hint for the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnPlan {
    pub pattern: Option<Pattern>,
    pub subject: String,
    pub focus: Focus,
}

/// Result of one pattern selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternChoice {
    pub pattern: Pattern,
    /// Node ids; the chosen subject comes first.
    pub entities: Vec<String>,
    pub relations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub history: Vec<Turn>,
    pub plans: Vec<TurnPlan>,
    pub entity_set: BTreeSet<String>,
    pub relation_set: BTreeSet<String>,
    /// (node type, property) pairs already asked about.
    pub asked: BTreeSet<(String, String)>,
    pub pattern_history: Vec<Pattern>,
    pub pattern_weights: [f64; 6],
    pub target_rounds: u32,
    pub seed: u64,
    pub rng: ChaCha8Rng,
}

pub fn new_session(config: &ForgeConfig, seed: u64) -> Result<SessionState, ForgeError> {
    if config.rounds_min == 0 || config.rounds_min > config.rounds_max {
        return Err(ForgeError::Config(format!("round range {}..={} is empty", config.rounds_min, config.rounds_max)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target_rounds = rng.random_range(config.rounds_min..=config.rounds_max);
    Ok(SessionState {
        history: Vec::new(),
        plans: Vec::new(),
        entity_set: BTreeSet::new(),
        relation_set: BTreeSet::new(),
        asked: BTreeSet::new(),
        pattern_history: Vec::new(),
        pattern_weights: [1.0 / 6.0; 6],
        target_rounds,
        seed,
        rng,
    })
}

impl SessionState {
    pub fn record(&mut self, turn: Turn, plan: TurnPlan, graph: &PropertyGraph) {
        self.entity_set.extend(turn.entities.iter().cloned());
        self.relation_set.extend(turn.relations.iter().cloned());
        if let Some(key) = asked_key(&plan, graph) {
            self.asked.insert(key);
        }
        if let Some(p) = turn.pattern {
            self.pattern_history.push(p);
        }
        self.history.push(turn);
        self.plans.push(plan);
    }

    fn previous_entities(&self) -> BTreeSet<String> {
        self.history.last().map(|t| t.entities.iter().cloned().collect()).unwrap_or_default()
    }

    fn previous_relations(&self) -> BTreeSet<String> {
        self.history.last().map(|t| t.relations.iter().cloned().collect()).unwrap_or_default()
    }
}

fn asked_key(plan: &TurnPlan, graph: &PropertyGraph) -> Option<(String, String)> {
    let subject_type = graph.node_by_id(&plan.subject)?.label.clone();
    match &plan.focus.form {
        Form::Attribute { property } => Some((subject_type, property.clone())),
        Form::Dated { property, .. } => {
            let schema = graph.schema();
            let d = schema
                .incident_edges(&subject_type)
                .filter_map(|e| schema.node_type(e.other_end(&subject_type)?))
                .find(|n| n.is_date_keyed() && n.property(property).is_some())?;
            Some((d.name.clone(), property.clone()))
        }
        Form::Superlative { target, property, .. } => Some((target.clone(), property.clone())),
        Form::Aggregate { target, property: Some(p), .. } => Some((target.clone(), p.clone())),
        _ => None,
    }
}

/// Uniform weights over `candidates`, with `BOOST` added to each boosted
/// one and the added mass taken evenly from the rest (never below zero).
/// Uniform when there is one candidate or when none or all are boosted.
pub fn entity_weights(candidates: &[String], boosted: &BTreeSet<String>) -> Vec<f64> {
    let n = candidates.len();
    if n == 0 {
        return Vec::new();
    }
    let base = 1.0 / n as f64;
    let k = candidates.iter().filter(|c| boosted.contains(*c)).count();
    if n == 1 || k == 0 || k == n {
        return vec![base; n];
    }
    let take = BOOST * k as f64 / (n - k) as f64;
    candidates.iter().map(|c| if boosted.contains(c) { base + BOOST } else { (base - take).max(0.0) }).collect()
}

/// Highest weight; ties go to the smallest id.
fn weighted_pick(candidates: &[String], boosted: &BTreeSet<String>) -> Option<String> {
    let mut sorted = candidates.to_vec();
    sorted.sort();
    let w = entity_weights(&sorted, boosted);
    let mut best: Option<usize> = None;
    for (i, x) in w.iter().enumerate() {
        if best.is_none_or(|b| *x > w[b] + 1e-12) {
            best = Some(i);
        }
    }
    best.map(|i| sorted[i].clone())
}

fn type_of(graph: &PropertyGraph, idx: usize) -> Option<&NodeTypeDef> {
    graph.schema().node_type(&graph.node(idx).label)
}

/// Neighbours of `idx` grouped by (edge label, neighbour type).
fn grouped_neighbours(graph: &PropertyGraph, idx: usize) -> BTreeMap<(String, String), Vec<usize>> {
    let mut out: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (e, other) in graph.neighbours(idx) {
        out.entry((graph.edge(e).label.clone(), graph.node(other).label.clone())).or_default().push(other);
    }
    for v in out.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    out
}

fn has_prop(graph: &PropertyGraph, nodes: &[usize], prop: &str) -> bool {
    nodes.iter().any(|&n| !graph.node(n).prop(prop).is_null())
}

fn distinct_numbers(graph: &PropertyGraph, nodes: &[usize], prop: &str) -> usize {
    let mut vals: Vec<f64> = nodes.iter().filter_map(|&n| graph.node(n).prop(prop).as_f64()).collect();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    vals.len()
}

/// Unasked, non-naming properties the node actually holds.
fn p1_properties(state: &SessionState, graph: &PropertyGraph, idx: usize) -> Vec<String> {
    let Some(t) = type_of(graph, idx) else { return Vec::new() };
    let bound = t.bound_property().map(|p| p.name.as_str());
    t.properties
        .iter()
        .filter(|p| Some(p.name.as_str()) != bound)
        .filter(|p| !state.asked.contains(&(t.name.clone(), p.name.clone())))
        .filter(|p| !graph.node(idx).prop(&p.name).is_null())
        .map(|p| p.name.clone())
        .collect()
}

/// (relation, neighbour type, numeric properties present) for neighbour
/// groups satisfying `keep`.
fn numeric_groups(
    graph: &PropertyGraph,
    idx: usize,
    keep: impl Fn(&NodeTypeDef) -> bool,
    min_distinct: usize,
) -> Vec<(String, String, Vec<String>)> {
    let schema = graph.schema();
    grouped_neighbours(graph, idx)
        .into_iter()
        .filter_map(|((rel, ty), nodes)| {
            let t = schema.node_type(&ty)?;
            if !keep(t) {
                return None;
            }
            let props: Vec<String> = t
                .numeric_properties()
                .filter(|p| has_prop(graph, &nodes, &p.name))
                .filter(|p| distinct_numbers(graph, &nodes, &p.name) >= min_distinct)
                .map(|p| p.name.clone())
                .collect();
            (!props.is_empty()).then_some((rel, ty, props))
        })
        .collect()
}

fn dated_groups(graph: &PropertyGraph, idx: usize) -> Vec<(String, String, Vec<String>)> {
    numeric_groups(graph, idx, |t| t.is_date_keyed(), 1)
}

fn aggregate_groups(graph: &PropertyGraph, idx: usize) -> Vec<(String, String, Vec<String>)> {
    numeric_groups(graph, idx, |t| t.bound_property().is_some(), 1)
}

/// Edges to named neighbours whose label has not been traversed yet.
fn untraversed(state: &SessionState, graph: &PropertyGraph, idx: usize) -> Vec<(String, String)> {
    let schema = graph.schema();
    grouped_neighbours(graph, idx)
        .into_keys()
        .filter(|(rel, ty)| {
            !state.relation_set.contains(rel) && schema.node_type(ty).is_some_and(|t| t.bound_property().is_some())
        })
        .collect()
}

fn nameable_scope(state: &SessionState, graph: &PropertyGraph) -> Vec<usize> {
    state
        .entity_set
        .iter()
        .filter_map(|id| graph.node_index(id))
        .filter(|&i| type_of(graph, i).is_some_and(|t| t.is_nameable()))
        .collect()
}

fn last_plan(state: &SessionState) -> Option<&TurnPlan> {
    state.plans.last()
}

/// P4 candidates: nodes of an already seen named type that has at least
/// two nodes, other than the seen ones when possible. The previous
/// subject's type comes first.
fn same_type_alternatives(state: &SessionState, graph: &PropertyGraph) -> Vec<usize> {
    let mut types: Vec<String> = Vec::new();
    if let Some(t) = last_plan(state).and_then(|p| graph.node_by_id(&p.subject)) {
        types.push(t.label.clone());
    }
    for i in nameable_scope(state, graph) {
        let l = &graph.node(i).label;
        if !types.contains(l) {
            types.push(l.clone());
        }
    }
    for label in types {
        let all = graph.nodes_of(&label);
        if all.len() < 2 {
            continue;
        }
        let prev = last_plan(state).map(|p| p.subject.as_str());
        let others: Vec<usize> = all.iter().copied().filter(|&i| Some(graph.node(i).id.as_str()) != prev).collect();
        let unseen: Vec<usize> =
            others.iter().copied().filter(|&i| !state.entity_set.contains(&graph.node(i).id)).collect();
        return if unseen.is_empty() { others } else { unseen };
    }
    Vec::new()
}

/// For P6: the previous subject, relation and listed type, when the last
/// answer was a list of two or more rows that a numeric condition can narrow.
fn narrowable_list(state: &SessionState, graph: &PropertyGraph) -> Option<(usize, String, String, Vec<String>)> {
    let plan = last_plan(state)?;
    let turn = state.history.last()?;
    let (target, relation) = match &plan.focus.form {
        Form::Neighbour { target, relation } | Form::Filter { target, relation, .. } => (target, relation),
        _ => return None,
    };
    if turn.answer.len() < 2 {
        return None;
    }
    let anchor = graph.node_index(&plan.subject)?;
    let (_, _, props) = numeric_groups(graph, anchor, |t| t.bound_property().is_some(), 2)
        .into_iter()
        .find(|(r, t, _)| r == relation && t == target)?;
    Some((anchor, relation.clone(), target.clone(), props))
}

fn entity_candidates(state: &SessionState, graph: &PropertyGraph, pattern: Pattern) -> Vec<usize> {
    let scope = nameable_scope(state, graph);
    match pattern {
        Pattern::P1 => scope.into_iter().filter(|&i| !p1_properties(state, graph, i).is_empty()).collect(),
        Pattern::P2 => scope.into_iter().filter(|&i| !dated_groups(graph, i).is_empty()).collect(),
        Pattern::P3 => scope.into_iter().filter(|&i| !untraversed(state, graph, i).is_empty()).collect(),
        Pattern::P4 => same_type_alternatives(state, graph),
        Pattern::P5 => scope.into_iter().filter(|&i| !aggregate_groups(graph, i).is_empty()).collect(),
        Pattern::P6 => narrowable_list(state, graph).map(|(a, ..)| vec![a]).unwrap_or_default(),
    }
}

/// Patterns realizable from the current state, in index order. Empty before
/// the first turn.
pub fn applicable_patterns(state: &SessionState, graph: &PropertyGraph) -> Vec<Pattern> {
    if state.history.is_empty() {
        return Vec::new();
    }
    Pattern::ALL.into_iter().filter(|&p| !entity_candidates(state, graph, p).is_empty()).collect()
}

fn relation_candidates(state: &SessionState, graph: &PropertyGraph, pattern: Pattern, idx: usize) -> Vec<String> {
    let mut rels: Vec<String> = match pattern {
        Pattern::P2 => dated_groups(graph, idx).into_iter().map(|(r, ..)| r).collect(),
        Pattern::P3 => untraversed(state, graph, idx).into_iter().map(|(r, _)| r).collect(),
        Pattern::P5 => aggregate_groups(graph, idx).into_iter().map(|(r, ..)| r).collect(),
        Pattern::P6 => narrowable_list(state, graph).map(|(_, r, ..)| vec![r]).unwrap_or_default(),
        Pattern::P1 | Pattern::P4 => Vec::new(),
    };
    rels.sort();
    rels.dedup();
    rels
}

/// Halves weight `chosen` and shares the removed half equally among the
/// other five.
pub fn reweight(weights: &mut [f64; 6], chosen: usize) {
    let removed = weights[chosen] / 2.0;
    for (j, w) in weights.iter_mut().enumerate() {
        if j == chosen {
            *w -= removed;
        } else {
            *w += removed / 5.0;
        }
    }
}

/// One selection step: the applicable pattern with the largest weight
/// (lowest index on ties), whose weight is then halved with the removed
/// mass shared equally by the other five; then subject and relation by
/// boosted weights.
pub fn select_pattern(state: &mut SessionState, graph: &PropertyGraph) -> Result<PatternChoice, ForgeError> {
    let applicable = applicable_patterns(state, graph);
    let mut best: Option<Pattern> = None;
    for p in applicable {
        if best.is_none_or(|b| state.pattern_weights[p.index()] > state.pattern_weights[b.index()]) {
            best = Some(p);
        }
    }
    let pattern = best.ok_or(ForgeError::NoApplicablePattern)?;
    reweight(&mut state.pattern_weights, pattern.index());

    let candidates: Vec<String> =
        entity_candidates(state, graph, pattern).into_iter().map(|i| graph.node(i).id.clone()).collect();
    let prev_entities = state.previous_entities();
    let subject = weighted_pick(&candidates, &prev_entities).ok_or(ForgeError::NoApplicablePattern)?;
    let idx = graph.node_index(&subject).expect("candidate exists");
    let rels = relation_candidates(state, graph, pattern, idx);
    let prev_relations = state.previous_relations();
    let relations = weighted_pick(&rels, &prev_relations).into_iter().collect();
    Ok(PatternChoice { pattern, entities: vec![subject], relations })
}

fn other_end(graph: &PropertyGraph, idx: usize, relation: &str) -> Option<String> {
    grouped_neighbours(graph, idx).into_keys().find(|(r, _)| r == relation).map(|(_, t)| t)
}

/// Turns a selection into a concrete question focus.
pub fn plan_turn(
    state: &mut SessionState,
    graph: &PropertyGraph,
    choice: &PatternChoice,
) -> Result<TurnPlan, ForgeError> {
    let subject = choice.entities.first().ok_or(ForgeError::NoApplicablePattern)?.clone();
    let idx = graph.node_index(&subject).ok_or(ForgeError::NoApplicablePattern)?;
    let entity_type = graph.node(idx).label.clone();
    let relation = choice.relations.first().cloned();
    let rng = &mut state.rng.clone();
    let form = match choice.pattern {
        Pattern::P1 => {
            let props = p1_properties(state, graph, idx);
            Form::Attribute { property: props.choose(rng).ok_or(ForgeError::NoApplicablePattern)?.clone() }
        }
        Pattern::P2 => {
            let rel = relation.ok_or(ForgeError::NoApplicablePattern)?;
            let (_, _, props) = dated_groups(graph, idx)
                .into_iter()
                .find(|(r, ..)| *r == rel)
                .ok_or(ForgeError::NoApplicablePattern)?;
            let prev = last_plan(state).and_then(|p| p.focus.form.asked_property()).map(str::to_string);
            let property = match prev.filter(|p| props.contains(p)) {
                Some(p) => p,
                None => props.choose(rng).expect("non-empty").clone(),
            };
            Form::Dated { property, date: "[d]".into() }
        }
        Pattern::P3 => {
            let rel = relation.ok_or(ForgeError::NoApplicablePattern)?;
            let target = other_end(graph, idx, &rel).ok_or(ForgeError::NoApplicablePattern)?;
            Form::Neighbour { target, relation: rel }
        }
        Pattern::P4 => {
            // repeat the latest question asked about this type, else ask
            // for one of its properties
            let earlier = state.plans.iter().rev().find(|p| p.focus.entity_type == entity_type);
            match earlier {
                Some(p) => p.focus.form.clone(),
                None => {
                    let t = type_of(graph, idx).ok_or(ForgeError::NoApplicablePattern)?;
                    let bound = t.bound_property().map(|p| p.name.clone());
                    let props: Vec<String> = t
                        .properties
                        .iter()
                        .filter(|p| Some(&p.name) != bound.as_ref() && !graph.node(idx).prop(&p.name).is_null())
                        .map(|p| p.name.clone())
                        .collect();
                    Form::Attribute { property: props.choose(rng).ok_or(ForgeError::NoApplicablePattern)?.clone() }
                }
            }
        }
        Pattern::P5 => {
            let rel = relation.ok_or(ForgeError::NoApplicablePattern)?;
            let (_, target, props) = aggregate_groups(graph, idx)
                .into_iter()
                .find(|(r, ..)| *r == rel)
                .ok_or(ForgeError::NoApplicablePattern)?;
            let func = *[AggFunc::Avg, AggFunc::Sum, AggFunc::Max, AggFunc::Min, AggFunc::Count]
                .choose(rng)
                .expect("non-empty");
            let property = (func != AggFunc::Count).then(|| props.choose(rng).expect("non-empty").clone());
            Form::Aggregate { func, property, target, relation: rel }
        }
        Pattern::P6 => {
            let (_, rel, target, props) = narrowable_list(state, graph).ok_or(ForgeError::NoApplicablePattern)?;
            let q = props.choose(rng).expect("non-empty").clone();
            Form::Filter { target, relation: rel, conditions: vec![(q, "[m]".into())] }
        }
    };
    state.rng = rng.clone();
    Ok(TurnPlan { pattern: Some(choice.pattern), subject, focus: Focus { entity_type, form } })
}

/// The opening question: a random nameable type, form and supporting node.
pub fn initial_choice(state: &mut SessionState, graph: &PropertyGraph) -> Result<TurnPlan, ForgeError> {
    let schema = graph.schema();
    let rng = &mut state.rng;
    let mut options: Vec<(&NodeTypeDef, &'static str)> = Vec::new();
    for t in schema.node_types.iter().filter(|t| t.is_nameable() && !graph.nodes_of(&t.name).is_empty()) {
        options.push((t, "attribute"));
        let adjacent: Vec<&NodeTypeDef> =
            schema.incident_edges(&t.name).filter_map(|e| schema.node_type(e.other_end(&t.name)?)).collect();
        if adjacent.iter().any(|n| n.is_date_keyed() && n.numeric_properties().next().is_some()) {
            options.push((t, "dated"));
        }
        if adjacent.iter().any(|n| n.is_nameable() && n.name != t.name && n.numeric_properties().next().is_some()) {
            options.push((t, "superlative"));
        }
    }
    let &(t, kind) = options.choose(rng).ok_or(ForgeError::NoApplicablePattern)?;
    let nodes = graph.nodes_of(&t.name);
    let (subject, form) = match kind {
        "attribute" => {
            let bound = t.bound_property().map(|p| p.name.clone());
            let props: Vec<&str> =
                t.properties.iter().filter(|p| Some(&p.name) != bound.as_ref()).map(|p| p.name.as_str()).collect();
            let property = props.choose(rng).ok_or(ForgeError::NoApplicablePattern)?.to_string();
            let holders: Vec<usize> =
                nodes.iter().copied().filter(|&i| !graph.node(i).prop(&property).is_null()).collect();
            let pick = *holders.choose(rng).ok_or(ForgeError::NoApplicablePattern)?;
            (pick, Form::Attribute { property })
        }
        "dated" => {
            let holders: Vec<(usize, Vec<String>)> = nodes
                .iter()
                .filter_map(|&i| {
                    let props: Vec<String> = dated_groups(graph, i).into_iter().flat_map(|(.., p)| p).collect();
                    (!props.is_empty()).then_some((i, props))
                })
                .collect();
            let (pick, props) = holders.choose(rng).ok_or(ForgeError::NoApplicablePattern)?;
            (*pick, Form::Dated { property: props.choose(rng).expect("non-empty").clone(), date: "[d]".into() })
        }
        _ => {
            let holders: Vec<(usize, String, Vec<String>)> = nodes
                .iter()
                .flat_map(|&i| {
                    numeric_groups(graph, i, |n| n.is_nameable() && n.name != t.name, 1)
                        .into_iter()
                        .map(move |(_, ty, props)| (i, ty, props))
                })
                .collect();
            let (pick, target, props) = holders.choose(rng).ok_or(ForgeError::NoApplicablePattern)?;
            let property = props.choose(rng).expect("non-empty").clone();
            (*pick, Form::Superlative { target: target.clone(), highest: rng.random_bool(0.5), property })
        }
    };
    Ok(TurnPlan {
        pattern: None,
        subject: graph.node(subject).id.clone(),
        focus: Focus { entity_type: t.name.clone(), form },
    })
}

/// Values a node holds, used when a threshold has to be picked.
pub(crate) fn numeric_values(graph: &PropertyGraph, nodes: &[usize], prop: &str) -> Vec<Value> {
    let mut vals: Vec<Value> =
        nodes.iter().map(|&n| graph.node(n).prop(prop).clone()).filter(|v| v.as_f64().is_some()).collect();
    vals.sort();
    vals.dedup_by(|a, b| a.approx_eq(b));
    vals
}
