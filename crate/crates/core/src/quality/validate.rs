use serde::{Deserialize, Serialize};

use crate::gql::{self, ResultTable};
use crate::graph::PropertyGraph;
use crate::textgen::{
    PromptArgs, PromptKind, PromptTemplates, TextGenError, TextGenerator, EMPTY_RESULT, SEMANTIC_MISMATCH,
};

use super::{cosine, Embedder, QualityConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegenerateReason {
    /// The last execution error after the syntax loop ran out.
    SyntaxExhausted(String),
    /// The last mismatch or execution error after the semantic loop ran out.
    SemanticExhausted(String),
    GeneratorUnavailable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationOutcome {
    Accepted {
        gql: String,
        result: ResultTable,
    },
    /// Repair calls are counted per loop; each is at most the configured cap.
    Repaired {
        gql: String,
        syntax_attempts: u32,
        semantic_attempts: u32,
        result: ResultTable,
    },
    RegenerateQuestion(RegenerateReason),
}

impl ValidationOutcome {
    pub fn accepted(&self) -> Option<(&str, &ResultTable)> {
        match self {
            ValidationOutcome::Accepted { gql, result } | ValidationOutcome::Repaired { gql, result, .. } => {
                Some((gql, result))
            }
            ValidationOutcome::RegenerateQuestion(_) => None,
        }
    }

    pub fn attempts(&self) -> u32 {
        match self {
            ValidationOutcome::Repaired { syntax_attempts, semantic_attempts, .. } => {
                syntax_attempts + semantic_attempts
            }
            _ => 0,
        }
    }
}

fn run(gql: &str, graph: &PropertyGraph) -> Result<ResultTable, String> {
    let table = gql::execute_text(gql, graph).map_err(|e| e.to_string())?;
    if table.is_empty() {
        return Err(format!("{EMPTY_RESULT}: the query returned no rows"));
    }
    Ok(table)
}

/// Syntax check (parse and execute, non-empty result) with up to
/// `repair_attempts` repairs, then the reverse-generation check with its own
/// budget. Repairs go through the Repair prompt in both loops.
#[allow(clippy::too_many_arguments)]
pub fn validate_and_optimize(
    question: &str,
    gql: &str,
    graph: &PropertyGraph,
    generator: &dyn TextGenerator,
    embedder: &dyn Embedder,
    config: &QualityConfig,
    templates: &PromptTemplates,
    seed: u64,
) -> ValidationOutcome {
    match optimize(question, gql, graph, generator, embedder, config, templates, seed) {
        Ok(outcome) => outcome,
        Err(e) => ValidationOutcome::RegenerateQuestion(RegenerateReason::GeneratorUnavailable(e.to_string())),
    }
}

#[allow(clippy::too_many_arguments)]
fn optimize(
    question: &str,
    gql: &str,
    graph: &PropertyGraph,
    generator: &dyn TextGenerator,
    embedder: &dyn Embedder,
    config: &QualityConfig,
    templates: &PromptTemplates,
    seed: u64,
) -> Result<ValidationOutcome, TextGenError> {
    let schema = graph.schema();
    let cap = config.repair_attempts;
    let repair = |current: &str, error: &str, salt: u64| -> Result<String, TextGenError> {
        let args = PromptArgs {
            schema: Some(schema),
            question: Some(question),
            gql: Some(current),
            error: Some(error),
            ..Default::default()
        };
        let prompt = templates.build(PromptKind::Repair, &args)?;
        Ok(generator.generate(&prompt, seed.wrapping_add(salt))?.into_text())
    };

    let mut current = gql.trim().to_string();
    let mut syntax_attempts = 0;
    loop {
        match run(&current, graph) {
            Ok(_) => break,
            Err(e) if syntax_attempts >= cap => {
                return Ok(ValidationOutcome::RegenerateQuestion(RegenerateReason::SyntaxExhausted(e)));
            }
            Err(e) => {
                tracing::debug!(error = %e, "syntax repair");
                syntax_attempts += 1;
                current = repair(&current, &e, syntax_attempts as u64)?;
            }
        }
    }

    let target = embedder.embed(question)?;
    let mut semantic_attempts = 0;
    loop {
        let error = match run(&current, graph) {
            Err(e) => e,
            Ok(result) => {
                let args = PromptArgs { schema: Some(schema), gql: Some(&current), ..Default::default() };
                let prompt = templates.build(PromptKind::Reverse, &args)?;
                let inferred = generator.generate(&prompt, seed)?.into_text();
                let sim = cosine(&embedder.embed(&inferred)?, &target);
                if sim >= config.tau_sem {
                    return Ok(if syntax_attempts + semantic_attempts == 0 {
                        ValidationOutcome::Accepted { gql: current, result }
                    } else {
                        ValidationOutcome::Repaired { gql: current, syntax_attempts, semantic_attempts, result }
                    });
                }
                format!("{SEMANTIC_MISMATCH}: the query reads as \"{inferred}\" (similarity {sim:.3})")
            }
        };
        if semantic_attempts >= cap {
            return Ok(ValidationOutcome::RegenerateQuestion(RegenerateReason::SemanticExhausted(error)));
        }
        tracing::debug!(error = %error, "semantic repair");
        semantic_attempts += 1;
        current = repair(&current, &error, 100 + semantic_attempts as u64)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::quality::HashEmbedder;
    use crate::textgen::{FaultKind, FaultPlan, MockGenerator};

    const Q: &str = "What is the opening price of CITIC Securities on 2025-01-08?";
    const GOOD: &str = "MATCH (s:stock {name: 'CITIC Securities'})-[:has_data]->(d:stock_data {date: '2025-01-08'}) RETURN d.opening_price";

    fn check(question: &str, gql: &str, m: &MockGenerator) -> ValidationOutcome {
        validate_and_optimize(
            question,
            gql,
            &fixture::graph(),
            m,
            &HashEmbedder,
            &QualityConfig::default(),
            &PromptTemplates::builtin(),
            0,
        )
    }

    #[test]
    fn valid_query_is_accepted() {
        let m = MockGenerator::for_graph(&fixture::graph());
        assert!(matches!(check(Q, GOOD, &m), ValidationOutcome::Accepted { .. }));
    }

    #[test]
    fn token_fault_is_repaired_once() {
        let m = MockGenerator::for_graph(&fixture::graph());
        let broken = GOOD.replace("RETURN", "RETRUN");
        match check(Q, &broken, &m) {
            ValidationOutcome::Repaired { gql, syntax_attempts: 1, semantic_attempts: 0, .. } => assert_eq!(gql, GOOD),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unrepairable_fault_exhausts() {
        let m = MockGenerator::for_graph(&fixture::graph());
        let broken = GOOD.replace("(s:stock", "(s:stock_unknown");
        assert!(matches!(
            check(Q, &broken, &m),
            ValidationOutcome::RegenerateQuestion(RegenerateReason::SyntaxExhausted(_))
        ));
    }

    #[test]
    fn wrong_property_is_caught_by_reverse_check() {
        let g = fixture::graph();
        let q = "What is the market cap of CITIC Securities?";
        let clean = MockGenerator::for_graph(&g).translate(q, g.schema());
        let m = MockGenerator::for_graph(&g).with_faults(FaultPlan::always(FaultKind::WrongProperty));
        let prompt = crate::textgen::build_prompt(
            PromptKind::Gql,
            &PromptArgs { schema: Some(g.schema()), question: Some(q), ..Default::default() },
        )
        .unwrap();
        let wrong = m.generate(&prompt, 0).unwrap().into_text();
        assert_ne!(wrong, clean);
        match check(q, &wrong, &MockGenerator::for_graph(&g)) {
            ValidationOutcome::Repaired { gql, syntax_attempts: 0, semantic_attempts: 1, .. } => assert_eq!(gql, clean),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_result_counts_as_failure() {
        let m = MockGenerator::new();
        let q = "What is the opening price of CITIC Securities on 1999-01-01?";
        let gql = GOOD.replace("2025-01-08", "1999-01-01");
        match check(q, &gql, &m) {
            ValidationOutcome::RegenerateQuestion(RegenerateReason::SyntaxExhausted(e)) => {
                assert!(e.starts_with(EMPTY_RESULT))
            }
            other => panic!("{other:?}"),
        }
    }

    struct Down;

    impl TextGenerator for Down {
        fn generate(
            &self,
            _: &crate::textgen::Prompt,
            _: u64,
        ) -> Result<crate::textgen::GeneratorOutput, TextGenError> {
            Err(TextGenError::Transport("connection refused".into()))
        }
    }

    #[test]
    fn transport_failure_asks_for_a_new_question() {
        let out = validate_and_optimize(
            Q,
            GOOD,
            &fixture::graph(),
            &Down,
            &HashEmbedder,
            &QualityConfig::default(),
            &PromptTemplates::builtin(),
            0,
        );
        assert!(matches!(out, ValidationOutcome::RegenerateQuestion(RegenerateReason::GeneratorUnavailable(_))));
    }
}
