mod common;

use common::{ast_strategy, gen, oracle};
use gqlforge_core::fixture;
use gqlforge_core::gql::{count_keywords, execute, mask_entities, parse, print_canonical, ResultTable};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn executor_agrees_with_brute_force() {
    for seed in 0..1000u64 {
        let g = gen::random_graph(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let text = gen::random_query(&mut rng);
        let q = parse(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        let got = execute(&q, &g).unwrap_or_else(|e| panic!("seed {seed} {text}: {e}"));
        let want = oracle::brute_force(&q, &g).unwrap_or_else(|e| panic!("seed {seed} {text}: {e}"));
        let want = ResultTable { columns: got.columns.clone(), rows: want };
        assert!(got.approx_eq(&want, true), "seed {seed}: {text}\n got {:?}\nwant {:?}", got.rows, want.rows);
    }
}

#[test]
fn limit_output_is_a_prefix() {
    for seed in 0..300u64 {
        let g = gen::random_graph(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = parse(&gen::random_query(&mut rng)).unwrap();
        let Some(_) = q.limit.take() else { continue };
        let full = execute(&q, &g).unwrap();
        for k in 0..4 {
            q.limit = Some(k);
            let cut = execute(&q, &g).unwrap();
            assert_eq!(cut.rows[..], full.rows[..full.rows.len().min(k as usize)]);
        }
    }
}

#[test]
fn masking_is_idempotent_and_keeps_the_skeleton() {
    let schema = fixture::schema();
    for seed in 0..500u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = parse(&gen::random_query(&mut rng)).unwrap();
        let once = mask_entities(&q, &schema);
        let reparsed = parse(&once).unwrap();
        assert_eq!(mask_entities(&reparsed, &schema), once);
        let c = q.canonicalize();
        let m = reparsed.canonicalize();
        assert_eq!(c.paths.len(), m.paths.len());
        for (a, b) in c.paths.iter().zip(&m.paths) {
            assert_eq!(a.steps.len(), b.steps.len());
            let labels = |p: &gqlforge_core::gql::PathPattern| {
                std::iter::once(p.start.label.clone())
                    .chain(p.steps.iter().flat_map(|(e, n)| [Some(e.label.clone()), n.label.clone()]))
                    .collect::<Vec<_>>()
            };
            assert_eq!(labels(a), labels(b));
        }
        assert_eq!(c.where_clause.is_some(), m.where_clause.is_some());
        assert_eq!((c.returns.len(), c.order_by.len(), c.limit), (m.returns.len(), m.order_by.len(), m.limit));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn print_then_parse_is_canonical_identity(q in ast_strategy::query()) {
        let text = print_canonical(&q);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(back, q.canonicalize());
    }

    #[test]
    fn canonical_print_is_idempotent(q in ast_strategy::query()) {
        let once = print_canonical(&q);
        let twice = print_canonical(&parse(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn keyword_counts_survive_canonicalization(q in ast_strategy::query()) {
        let raw = q.to_string();
        prop_assert_eq!(count_keywords(&raw), count_keywords(&print_canonical(&q)));
    }
}
