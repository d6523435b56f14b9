use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Dialogue;
use crate::gql::{self, mask_entities};
use crate::graph::GraphSchema;

use super::{cosine, Embedder, QualityError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Discard a dialogue sharing more than `limit` templates with one kept dialogue.
    #[default]
    Pairwise,
    /// Discard a dialogue that would push any template past `limit` uses among kept dialogues.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscardReason {
    MaskedGqlOverlap { partner: String, shared: usize },
    EmbeddingSimilarity { partner: String, cosine: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discarded {
    pub id: String,
    pub reason: DiscardReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: Vec<String>,
    pub discarded: Vec<Discarded>,
}

impl FilterReport {
    /// The kept dialogues, in their original order.
    pub fn apply(&self, dialogues: &[Dialogue]) -> Vec<Dialogue> {
        let mut keep: BTreeMap<&str, usize> = BTreeMap::new();
        for id in &self.kept {
            *keep.entry(id).or_default() += 1;
        }
        dialogues
            .iter()
            .filter(|d| match keep.get_mut(d.id.as_str()) {
                Some(n) if *n > 0 => {
                    *n -= 1;
                    true
                }
                _ => false,
            })
            .cloned()
            .collect()
    }
}

/// Indices in scan order: by id, ties in input order.
fn scan_order(dialogues: &[Dialogue]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dialogues.len()).collect();
    idx.sort_by(|a, b| dialogues[*a].id.cmp(&dialogues[*b].id));
    idx
}

pub fn filter_masked_gql(
    dialogues: &[Dialogue],
    schema: &GraphSchema,
    limit: usize,
    mode: MaskMode,
) -> Result<FilterReport, QualityError> {
    let templates: Vec<BTreeSet<String>> = dialogues
        .iter()
        .map(|d| {
            d.turns
                .iter()
                .map(|t| {
                    gql::parse(&t.gql).map(|q| mask_entities(&q, schema)).map_err(|source| QualityError::Parse {
                        id: d.id.clone(),
                        round: t.round,
                        source,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut report = FilterReport::default();
    let mut kept: Vec<usize> = Vec::new();
    let mut uses: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for i in scan_order(dialogues) {
        let mine = &templates[i];
        let clash = match mode {
            MaskMode::Pairwise => kept.iter().find_map(|&k| {
                let shared = mine.intersection(&templates[k]).count();
                (shared > limit).then(|| (dialogues[k].id.clone(), shared))
            }),
            MaskMode::Global => mine.iter().find_map(|t| {
                uses.get(t.as_str())
                    .filter(|(n, _)| n + 1 > limit)
                    .map(|(n, first)| (dialogues[*first].id.clone(), n + 1))
            }),
        };
        match clash {
            Some((partner, shared)) => report.discarded.push(Discarded {
                id: dialogues[i].id.clone(),
                reason: DiscardReason::MaskedGqlOverlap { partner, shared },
            }),
            None => {
                for t in mine {
                    uses.entry(t.as_str()).or_insert((0, i)).0 += 1;
                }
                kept.push(i);
                report.kept.push(dialogues[i].id.clone());
            }
        }
    }
    Ok(report)
}

/// Complete questions in round order, joined by single spaces.
pub fn dialogue_text(d: &Dialogue) -> String {
    d.turns.iter().map(|t| t.question_complete.as_str()).collect::<Vec<_>>().join(" ")
}

pub fn filter_embedding(
    dialogues: &[Dialogue],
    embedder: &dyn Embedder,
    threshold: f64,
) -> Result<FilterReport, QualityError> {
    let vectors: Vec<Vec<f32>> =
        dialogues.par_iter().map(|d| embedder.embed(&dialogue_text(d))).collect::<Result<_, _>>()?;
    let mut report = FilterReport::default();
    let mut kept: Vec<usize> = Vec::new();
    for i in scan_order(dialogues) {
        let clash = kept.iter().find_map(|&k| {
            let c = cosine(&vectors[i], &vectors[k]);
            (c > threshold).then(|| (dialogues[k].id.clone(), c))
        });
        match clash {
            Some((partner, cosine)) => report.discarded.push(Discarded {
                id: dialogues[i].id.clone(),
                reason: DiscardReason::EmbeddingSimilarity { partner, cosine },
            }),
            None => {
                kept.push(i);
                report.kept.push(dialogues[i].id.clone());
            }
        }
    }
    Ok(report)
}
