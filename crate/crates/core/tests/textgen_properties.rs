use gqlforge_core::corpus::Pattern;
use gqlforge_core::fixture;
use gqlforge_core::gql;
use gqlforge_core::textgen::{
    build_prompt, parse_sections, render_sections, GeneratorOutput, MockGenerator, PromptArgs, PromptKind,
    TextGenerator,
};
use proptest::prelude::*;

fn patterns() -> Vec<Option<Pattern>> {
    std::iter::once(None).chain(Pattern::ALL.into_iter().map(Some)).collect()
}

fn question_for(m: &MockGenerator, pattern: Option<Pattern>, seed: u64) -> (String, String) {
    let schema = fixture::schema();
    let args = PromptArgs { schema: Some(&schema), pattern, ..Default::default() };
    match m.generate(&build_prompt(PromptKind::Question, &args).unwrap(), seed).unwrap() {
        GeneratorOutput::Question { raw, complete } => (raw, complete),
        other => panic!("{other:?}"),
    }
}

#[test]
fn every_template_question_translates_to_a_parseable_query() {
    let schema = fixture::schema();
    let m = MockGenerator::for_graph(&fixture::graph());
    let mut seen = std::collections::BTreeSet::new();
    for pattern in patterns() {
        for seed in 0..150 {
            let (raw, complete) = question_for(&m, pattern, seed);
            assert!(!raw.is_empty() && !complete.is_empty());
            if !seen.insert(complete.clone()) {
                continue;
            }
            let args = PromptArgs { schema: Some(&schema), question: Some(&complete), ..Default::default() };
            let text = m.generate(&build_prompt(PromptKind::Gql, &args).unwrap(), seed).unwrap().into_text();
            gql::parse(&text).unwrap_or_else(|e| panic!("{complete} -> {text}: {e}"));
        }
    }
    assert!(seen.len() > 20, "only {} distinct templates", seen.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mock_is_a_function_of_prompt_and_seed(p in 0usize..7, seed in any::<u64>()) {
        let m = MockGenerator::for_graph(&fixture::graph());
        let pattern = patterns()[p];
        prop_assert_eq!(question_for(&m, pattern, seed), question_for(&m, pattern, seed));
    }

    #[test]
    fn sections_round_trip(raw in "[A-Za-z0-9 ,'?\\[\\]-]{1,60}", complete in "[A-Za-z0-9 ,'?\\[\\]-]{1,60}") {
        prop_assume!(!raw.trim().is_empty() && !complete.trim().is_empty());
        let text = render_sections(raw.trim(), complete.trim());
        let (r, c) = parse_sections(&text).unwrap();
        prop_assert_eq!(r, raw.trim());
        prop_assert_eq!(c, complete.trim());
    }

    #[test]
    fn prompts_render_deterministically_with_all_mandatory_slots(
        kind in 0usize..4,
        q in "[A-Za-z ]{1,40}",
        g in "MATCH \\(n:stock\\) RETURN n\\.[a-z_]{1,12}",
    ) {
        let schema = fixture::schema();
        let history = fixture::golden_dialogue().turns;
        let kind = [PromptKind::Question, PromptKind::Gql, PromptKind::Reverse, PromptKind::Repair][kind];
        let args = PromptArgs {
            schema: Some(&schema),
            history: &history,
            pattern: Some(Pattern::P2),
            gql: Some(&g),
            error: Some("syntax error"),
            question: Some(&q),
            ..Default::default()
        };
        let a = build_prompt(kind, &args).unwrap();
        let b = build_prompt(kind, &args).unwrap();
        prop_assert_eq!(&a, &b);
        for slot in kind.mandatory_slots() {
            let value = a.slot(slot);
            prop_assert!(value.is_some(), "{} missing", slot);
            prop_assert!(a.rendered_text.contains(value.unwrap()), "{} not rendered", slot);
        }
    }
}
