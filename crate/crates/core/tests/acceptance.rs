//! One PASS/FAIL line per acceptance criterion; the process exits non-zero
//! when any of them fails. Runs without the libtest harness so the report
//! is always printed.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::scenarios::{composed_query, dialogue, mock_forge, random_predictions, turn, Recorder};
use common::{ast_strategy, embed_oracle, gen, oracle};
use gqlforge_core::corpus::{Dialogue, Pattern};
use gqlforge_core::da::{infer_turn, DaCollaborators, DaConfig, StructuredContext};
use gqlforge_core::eval::{analyze_dataset, compute_metrics, execution_match, PredictionSet};
use gqlforge_core::fixture;
use gqlforge_core::forge::{new_session, reweight, select_pattern, ForgeConfig, TurnPlan};
use gqlforge_core::gql::{self, mask_entities, ResultTable};
use gqlforge_core::graph::Value;
use gqlforge_core::quality::{
    dialogue_text, filter_embedding, filter_masked_gql, validate_and_optimize, HashEmbedder, MaskMode, QualityConfig,
    RegenerateReason, ValidationOutcome,
};
use gqlforge_core::textgen::{
    build_prompt, FaultKind, FaultPlan, Focus, Form, Lexicon, MockGenerator, PromptArgs, PromptKind, PromptTemplates,
    TextGenerator,
};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn c1_golden() -> Check {
    let g = fixture::graph();
    let expected = [Value::from("CITIC Securities"), Value::Float(30.26), Value::Float(36.25), Value::Float(20.00)];
    for (q, want) in fixture::GOLDEN_GQL.iter().zip(expected) {
        let got = gql::execute_text(q, &g).map_err(|e| e.to_string())?.answer_values();
        ensure(got == vec![want.clone()], || format!("{q}: {got:?} != {want:?}"))?;
    }
    Ok(())
}

fn c2_executor_oracle() -> Check {
    for seed in 0..1000u64 {
        let g = gen::random_graph(seed);
        ensure(g.nodes().len() <= 30, || format!("seed {seed}: graph too large"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00ac_ce97);
        let text = gen::random_query(&mut rng);
        let q = gql::parse(&text).map_err(|e| format!("{text}: {e}"))?;
        let got = gql::execute(&q, &g).map_err(|e| format!("seed {seed}: {e}"))?;
        let want = oracle::brute_force(&q, &g).map_err(|e| format!("seed {seed}: {e}"))?;
        let want = ResultTable { columns: got.columns.clone(), rows: want };
        ensure(got.approx_eq(&want, true), || format!("seed {seed}: {text}"))?;
    }
    Ok(())
}

fn c3_parser_round_trip() -> Check {
    runner(1000)
        .run(&ast_strategy::query(), |q| {
            let back = gql::parse(&q.to_string())
                .map_err(|e| proptest::test_runner::TestCaseError::fail(format!("{q}: {e}")))?;
            proptest::prop_assert_eq!(back, q);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn after_opening() -> (gqlforge_core::graph::PropertyGraph, gqlforge_core::forge::SessionState) {
    let g = fixture::graph();
    let mut state = new_session(&ForgeConfig::default(), 1).expect("default config");
    let plan = TurnPlan {
        pattern: None,
        subject: "industry:securities".into(),
        focus: Focus {
            entity_type: "industry".into(),
            form: Form::Superlative { target: "stock".into(), highest: true, property: "opening_price".into() },
        },
    };
    state.record(fixture::golden_dialogue().turns[0].clone(), plan, &g);
    (g, state)
}

/// The first update in exact fractions: 1/6 halves to 1/12 and each other
/// weight gains a fifth of the removed 1/12.
fn first_step_exact() -> (f64, f64) {
    let reduce = |(n, d): (u64, u64)| (n / gcd(n, d), d / gcd(n, d));
    let chosen = reduce((1, 6 * 2));
    let gain = reduce((1, 12 * 5));
    let other = reduce((6 * gain.1 / 6 + gain.0 * 6, 6 * gain.1));
    assert_eq!((chosen, other), ((1, 12), (11, 60)));
    (chosen.0 as f64 / chosen.1 as f64, other.0 as f64 / other.1 as f64)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn c4_selection_arithmetic() -> Check {
    let (g, mut state) = after_opening();
    let choice = select_pattern(&mut state, &g).map_err(|e| e.to_string())?;
    let (chosen, other) = first_step_exact();
    let w = state.pattern_weights;
    let i = choice.pattern.index();
    ensure((w[i] - chosen).abs() <= 1e-12, || format!("chosen weight {}", w[i]))?;
    for (j, x) in w.iter().enumerate().filter(|(j, _)| *j != i) {
        ensure((x - other).abs() <= 1e-12, || format!("weight {j} is {x}"))?;
    }
    for _ in 0..99 {
        select_pattern(&mut state, &g).map_err(|e| e.to_string())?;
        let s: f64 = state.pattern_weights.iter().sum();
        ensure((s - 1.0).abs() <= 1e-9, || format!("sum {s}"))?;
    }
    runner(500)
        .run(&proptest::collection::vec(0usize..6, 100), |steps| {
            let mut w = [1.0 / 6.0; 6];
            for &k in &steps {
                reweight(&mut w, k);
                proptest::prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                proptest::prop_assert!(w.iter().all(|x| *x >= 0.0));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn interdependent(d: &Dialogue) -> bool {
    let mut seen = BTreeSet::new();
    d.turns.iter().enumerate().all(|(k, t)| {
        let linked = k == 0 || t.pattern == Some(Pattern::P4) || t.entities.iter().any(|e| seen.contains(e));
        seen.extend(t.entities.iter().cloned());
        linked
    })
}

fn c5_mock_forge(batch: &[Dialogue], abandoned: usize) -> Check {
    let g = fixture::graph();
    ensure(batch.len() == 100 && abandoned == 0, || format!("{} dialogues, {abandoned} abandoned", batch.len()))?;
    for d in batch {
        ensure((5..=8).contains(&d.turns.len()), || format!("{}: {} rounds", d.id, d.turns.len()))?;
        ensure(interdependent(d), || format!("{}: turns not linked", d.id))?;
        for t in &d.turns {
            let q = gql::parse(&t.gql).map_err(|e| format!("{} r{}: {e}", d.id, t.round))?;
            gql::execute(&q, &g).map_err(|e| format!("{} r{}: {e}", d.id, t.round))?;
        }
    }
    let r = compute_metrics(&PredictionSet::from_gold(batch), batch, &g).map_err(|e| e.to_string())?;
    ensure([r.em, r.aem, r.ex, r.aex] == [1.0; 4], || format!("self evaluation {r:?}"))
}

fn c6_filters(batch: &[Dialogue]) -> Check {
    let schema = fixture::schema();
    let templates = |d: &Dialogue| -> BTreeSet<String> {
        d.turns.iter().map(|t| mask_entities(&gql::parse(&t.gql).unwrap(), &schema)).collect()
    };
    let masked = filter_masked_gql(batch, &schema, 3, MaskMode::Pairwise).map_err(|e| e.to_string())?;
    let kept = masked.apply(batch);
    for (i, a) in kept.iter().enumerate() {
        for b in &kept[i + 1..] {
            let n = templates(a).intersection(&templates(b)).count();
            ensure(n <= 3, || format!("{} and {} share {n}", a.id, b.id))?;
        }
    }
    let again = filter_masked_gql(&kept, &schema, 3, MaskMode::Pairwise).map_err(|e| e.to_string())?;
    ensure(again.kept == masked.kept, || "masked filter not idempotent".into())?;
    let emb = filter_embedding(&kept, &HashEmbedder, 0.6).map_err(|e| e.to_string())?;
    let fin = emb.apply(&kept);
    for (i, a) in fin.iter().enumerate() {
        for b in &fin[i + 1..] {
            let c = embed_oracle::cosine(&dialogue_text(a), &dialogue_text(b));
            ensure(c <= 0.6 + 1e-6, || format!("{} and {} at {c}", a.id, b.id))?;
        }
    }
    let again = filter_embedding(&fin, &HashEmbedder, 0.6).map_err(|e| e.to_string())?;
    ensure(again.kept == emb.kept, || "embedding filter not idempotent".into())?;

    let attr = |name: &str, p: &str| format!("MATCH (s:stock) WHERE s.name = '{name}' RETURN s.{p}");
    let four = |id: &str, name: &str, props: [&str; 4]| {
        dialogue(id, props.iter().enumerate().map(|(k, p)| turn(k as u32 + 1, id, &attr(name, p))).collect())
    };
    let a = four("a", "CITIC Securities", ["opening_price", "closing_price", "market_cap", "code"]);
    let b = four("b", "Guotai Junan Securities", ["opening_price", "closing_price", "market_cap", "listing_date"]);
    let r = filter_masked_gql(&[a, b], &schema, 3, MaskMode::Pairwise).map_err(|e| e.to_string())?;
    ensure(r.kept.len() == 2, || "three shared templates were not kept".into())?;

    let one = |id: &str, q: &str| dialogue(id, vec![turn(1, q, &attr("CITIC Securities", "code"))]);
    let low =
        ("What is the listing date of CITIC Securities?", "Which stock in securities has the highest listing date?");
    let high = ("What is the closing price of securities?", "What is the opening price of Ping An?");
    let (cl, ch) = (embed_oracle::cosine(low.0, low.1), embed_oracle::cosine(high.0, high.1));
    ensure((cl - 0.59).abs() < 0.005 && (ch - 0.61).abs() < 0.005, || format!("boundary pairs at {cl}, {ch}"))?;
    let r = filter_embedding(&[one("a", low.0), one("b", low.1)], &HashEmbedder, 0.6).map_err(|e| e.to_string())?;
    ensure(r.kept.len() == 2, || format!("pair at {cl} discarded"))?;
    let r = filter_embedding(&[one("a", high.0), one("b", high.1)], &HashEmbedder, 0.6).map_err(|e| e.to_string())?;
    ensure(r.kept.len() == 1, || format!("pair at {ch} kept"))
}

fn c7_validator(batch: &[Dialogue]) -> Check {
    let g = fixture::graph();
    let templates = PromptTemplates::builtin();
    let config = QualityConfig::default();
    let repairer = Recorder::new(MockGenerator::for_graph(&g));
    let (mut repaired, mut exhausted) = (0, 0);
    for (n, q) in batch.iter().take(15).flat_map(|d| &d.turns).map(|t| &t.question_complete).enumerate() {
        for kind in FaultKind::ALL {
            let m = MockGenerator::for_graph(&g).with_faults(FaultPlan::always(kind));
            let args = PromptArgs { schema: Some(g.schema()), question: Some(q), ..Default::default() };
            let prompt = build_prompt(PromptKind::Gql, &args).map_err(|e| e.to_string())?;
            let broken = m.generate(&prompt, 0).map_err(|e| e.to_string())?.into_text();
            repairer.take();
            let out = validate_and_optimize(q, &broken, &g, &repairer, &HashEmbedder, &config, &templates, n as u64);
            let calls = repairer.take().iter().filter(|(k, _)| *k == PromptKind::Repair).count() as u32;
            match &out {
                ValidationOutcome::Repaired { syntax_attempts, semantic_attempts, .. } => {
                    ensure(*syntax_attempts <= 3 && *semantic_attempts <= 3 && calls == out.attempts(), || {
                        format!("{q}: {out:?} after {calls} calls")
                    })?;
                    repaired += 1;
                }
                ValidationOutcome::RegenerateQuestion(RegenerateReason::SyntaxExhausted(_))
                | ValidationOutcome::RegenerateQuestion(RegenerateReason::SemanticExhausted(_)) => exhausted += 1,
                ValidationOutcome::Accepted { .. } => {}
                other => return Err(format!("{q}: {other:?}")),
            }
            if kind == FaultKind::UnknownLabel {
                ensure(matches!(out, ValidationOutcome::RegenerateQuestion(_)) && calls == 3, || {
                    format!("{q}: unrepairable fault gave {out:?} after {calls} calls")
                })?;
            }
        }
    }
    ensure(repaired > 0 && exhausted > 0, || format!("{repaired} repaired, {exhausted} exhausted"))
}

fn c8_metrics(gold: &[Dialogue]) -> Check {
    let g = fixture::graph();
    for seed in 0..500 {
        let r = compute_metrics(&random_predictions(gold, seed), gold, &g).map_err(|e| e.to_string())?;
        ensure(r.aem <= r.em && r.aex <= r.ex, || format!("seed {seed}: {r:?}"))?;
    }
    let q = fixture::GOLDEN_GQL;
    let gold = vec![
        dialogue("x", vec![turn(1, "a", q[0]), turn(2, "b", q[1]), turn(3, "c", q[2])]),
        dialogue("y", vec![turn(1, "a", q[1]), turn(2, "b", q[2]), turn(3, "c", q[3])]),
    ];
    let mut p = PredictionSet::default();
    for (id, round, text) in [("x", 1, q[0]), ("x", 2, q[1]), ("x", 3, q[2]), ("y", 1, q[1]), ("y", 3, q[0])] {
        p.insert(id, round, text).map_err(|e| e.to_string())?;
    }
    let r = compute_metrics(&p, &gold, &g).map_err(|e| e.to_string())?;
    ensure(r.em == 4.0 / 6.0 && r.aem == 0.5, || format!("hand-counted example gave em {} aem {}", r.em, r.aem))
}

fn c9_da_control_flow() -> Check {
    let g = fixture::graph();
    let gold = fixture::golden_dialogue();
    let lex = Lexicon::from_graph(&g);
    let templates = PromptTemplates::builtin();
    let mut plans = vec![FaultPlan::none()];
    plans.extend(FaultKind::ALL.map(|k| FaultPlan { rate: 0.5, rounds: BTreeSet::new(), kinds: vec![k] }));
    let mut cases = 0;
    for plan in &plans {
        for seed in 0..10u64 {
            cases += 1;
            let rec = Recorder::new(MockGenerator::for_graph(&g).with_faults(plan.clone()));
            let collab =
                DaCollaborators { generator: &rec, embedder: &HashEmbedder, templates: &templates, lexicon: &lex };
            let mut ctx = StructuredContext::new();
            for t in &gold.turns {
                let inf = infer_turn(
                    &t.question_raw,
                    t.round,
                    &ctx,
                    &g,
                    &collab,
                    &DaConfig::default(),
                    seed * 31 + t.round as u64,
                )
                .map_err(|e| e.to_string())?;
                let calls = rec.take();
                let candidate = &calls.iter().find(|(k, _)| *k == PromptKind::Gql).ok_or("no query prompt")?.1;
                let refines = calls.iter().filter(|(k, _)| *k == PromptKind::Repair).count();
                let aligned = match gql::execute_text(candidate, &g) {
                    Ok(r) if !r.is_empty() => execution_match(candidate, &t.gql, &g).map_err(|e| e.to_string())?,
                    _ => false,
                };
                ensure(inf.refined == !aligned && refines == !aligned as usize, || {
                    format!("{:?} seed {seed} round {}: refined {} for {candidate}", plan.kinds, t.round, inf.refined)
                })?;
                ctx.record(&t.question_raw, &t.question_complete, &t.gql, t.answer.clone());
            }
        }
    }
    ensure(cases == 50, || format!("{cases} cases"))?;

    let m = MockGenerator::for_graph(&g);
    let collab = DaCollaborators { generator: &m, embedder: &HashEmbedder, templates: &templates, lexicon: &lex };
    let mut ctx = StructuredContext::new();
    for t in &gold.turns {
        let inf = infer_turn(&t.question_raw, t.round, &ctx, &g, &collab, &DaConfig::default(), 0)
            .map_err(|e| e.to_string())?;
        ensure(execution_match(&inf.gql, &t.gql, &g).map_err(|e| e.to_string())?, || {
            format!("round {}: {}", t.round, inf.gql)
        })?;
        ctx.record(&t.question_raw, &inf.explicit, &inf.gql, inf.answer.clone());
    }
    Ok(())
}

fn c10_keywords() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut total = 0;
    let mut structural = 0;
    let mut dialogues = Vec::new();
    let mut n = 0usize;
    for d in 0..40 {
        let rounds = rng.random_range(1..=6);
        let mut turns = Vec::new();
        for r in 1..=rounds {
            let (text, counts) = composed_query(&mut rng);
            total += counts.values().sum::<usize>();
            structural += counts.get("MATCH").unwrap_or(&0) + counts.get("RETURN").unwrap_or(&0);
            turns.push(turn(r, "q", &text));
            n += 1;
        }
        dialogues.push(dialogue(&format!("k{d}"), turns));
    }
    let a = analyze_dataset(&dialogues);
    let informative = total - structural;
    ensure(a.gql_count == n && a.total_keywords == total && a.informative_keywords == informative, || {
        format!("{} / {} / {} vs {n} / {total} / {informative}", a.gql_count, a.total_keywords, a.informative_keywords)
    })?;
    ensure(a.average_per_gql == informative as f64 / n as f64, || format!("average {}", a.average_per_gql))
}

fn main() {
    let mut results: Vec<(u32, &str, Check, Duration, Option<Duration>)> = Vec::new();
    let mut run = |id: u32, name: &'static str, limit: Option<Duration>, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(&mut *f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let took = start.elapsed();
        let out = match (out, limit) {
            (Ok(()), Some(l)) if took > l => Err(format!("took {took:?}, limit {l:?}")),
            (o, _) => o,
        };
        results.push((id, name, out, took, limit));
    };

    run(1, "golden dialogue answers", Some(Duration::from_secs(1)), &mut c1_golden);
    run(2, "executor vs brute force, 1000 cases", Some(Duration::from_secs(60)), &mut c2_executor_oracle);
    run(3, "parser round trip, 1000 cases", None, &mut c3_parser_round_trip);
    run(4, "pattern weight arithmetic", None, &mut c4_selection_arithmetic);
    let mut batch = Vec::new();
    run(5, "mock forge, 100 dialogues", Some(Duration::from_secs(120)), &mut || {
        let out = mock_forge(100, 2025, 4);
        batch = out.dialogues;
        c5_mock_forge(&batch, out.abandoned.len())
    });
    run(6, "dedup filters", None, &mut || c6_filters(&batch));
    run(7, "validator fault suite", None, &mut || c7_validator(&batch));
    let gold: Vec<Dialogue> = batch.iter().take(15).cloned().collect();
    run(8, "metric identities", None, &mut || c8_metrics(&gold));
    run(9, "DA control flow", None, &mut c9_da_control_flow);
    run(10, "keyword analytics", None, &mut c10_keywords);

    let mut failed = Vec::new();
    for (id, name, out, took, _) in &results {
        match out {
            Ok(()) => println!("PASS {id:>2} {name} ({took:.2?})"),
            Err(e) => {
                println!("FAIL {id:>2} {name} ({took:.2?}): {e}");
                failed.push(*id);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
