//! Acceptance suite: nine end-to-end criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the summary is always printed.

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maieutic_core::builder::{build_tree, prune};
use maieutic_core::compile::{
    belief_weight, clause_dump, compile, consistency_weight, CompileMode, DumpClause, Relations,
};
use maieutic_core::harness::run::RunInfo;
use maieutic_core::harness::{compute_metrics, evaluate, Engine, EngineSettings, Method};
use maieutic_core::lm::{
    CachedBackend, FixtureBuilder, Lm, LmBackend, LmError, LmReply, LmRequest, LmResponse,
    RequestKind, ResponseCache, TraceSink, FALSE_TOKEN, TRUE_TOKEN,
};
use maieutic_core::maxsat::wcnf::{export_wcnf, import_wcnf};
use maieutic_core::maxsat::{solve, solve_brute};
use maieutic_core::types::{
    ClauseOrigin, Literal, NodeId, PromptLibrary, TreeConfig, Var, WeightedClause, WeightedCnf,
};
use maieutic_core::verifier::RelationOptions;
use maieutic_core::MaieuticTree;

use common::*;

fn random_cnf(rng: &mut ChaCha8Rng, max_vars: usize, max_clauses: usize) -> WeightedCnf {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(1..=max_clauses);
    let variables = (0..n)
        .map(|i| NodeId::from(format!("v{i}").as_str()))
        .collect();
    let mut clauses = Vec::with_capacity(m);
    for _ in 0..m {
        let len = rng.gen_range(1..=3.min(n));
        let mut vars: Vec<u32> = Vec::new();
        while vars.len() < len {
            let v = rng.gen_range(0..n as u32);
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let literals = vars
            .into_iter()
            .map(|v| Literal {
                var: Var(v),
                positive: rng.gen(),
            })
            .collect();
        // Uniform on (0, 1].
        let weight = 1.0 - rng.gen::<f64>();
        let origin = [
            ClauseOrigin::Belief,
            ClauseOrigin::Consistency,
            ClauseOrigin::Nli,
        ][rng.gen_range(0..3)];
        clauses.push(WeightedClause::new(literals, weight, origin).unwrap());
    }
    WeightedCnf::new(variables, clauses).unwrap()
}

/// Independent optimum: plain enumeration, no shared code with the solvers.
fn enumerate_best(cnf: &WeightedCnf) -> f64 {
    let n = cnf.num_vars();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u64..(1 << n) {
        let mut w = 0.0;
        for c in &cnf.clauses {
            if c.literals
                .iter()
                .any(|l| ((mask >> l.var.0) & 1 == 1) == l.positive)
            {
                w += c.weight;
            }
        }
        best = best.max(w);
    }
    best
}

fn criterion_1_maxsat() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut instances = 0;
    for k in 0..200 {
        // Every tenth instance uses the full 18 variables.
        let cnf = if k % 10 == 0 {
            loop {
                let c = random_cnf(&mut rng, 18, 60);
                if c.num_vars() == 18 {
                    break c;
                }
            }
        } else {
            random_cnf(&mut rng, 18, 60)
        };
        let fast = solve(&cnf);
        let slow = solve_brute(&cnf).unwrap();
        assert_eq!(fast.values, slow.values, "instance {k}: assignments differ");
        assert_eq!(
            fast.satisfied_weight, slow.satisfied_weight,
            "instance {k}: weights differ"
        );
        instances += 1;
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    format!(
        "{instances} instances agree with enumeration in {:.2}s",
        elapsed.as_secs_f64()
    )
}

fn criterion_2_weights() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let (p, q): (f64, f64) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        // About one pair in four is equal on purpose.
        let q = if rng.gen_range(0..4) == 0 { p } else { q };
        let w = belief_weight(p, q).unwrap();
        assert_eq!(w == 0.0, p == q, "belief ({p}, {q}) = {w}");
        assert!((-1.0..=1.0).contains(&w), "belief {w} out of range");
        assert!((w - (p - q) / (p + q)).abs() <= 1e-15);
        if p > 0.5 && q < 0.5 {
            assert!(w > 0.0, "integral-true ({p}, {q}) has belief {w}");
        }
        if p < 0.5 && q > 0.5 {
            assert!(w < 0.0, "integral-false ({p}, {q}) has belief {w}");
        }

        let (a, b): (f64, f64) = (-rng.gen_range(0.0..60.0), -rng.gen_range(0.0..60.0));
        let (wa, wb) = (consistency_weight(a, b), consistency_weight(b, a));
        assert!(wa > 0.0 && wa < 1.0 && wb > 0.0 && wb < 1.0);
        assert!((wa + wb - 1.0).abs() <= 1e-12, "{wa} + {wb}");
        let direct = a.exp() / (a.exp() + b.exp());
        if direct.is_finite() {
            assert!((wa - direct).abs() <= 1e-12);
        }
    }
    for (a, b) in [(0.0, -700.0), (-700.0, 0.0), (-5.0, -705.0), (-705.0, -5.0)] {
        let w = consistency_weight(a, b);
        assert!(w.is_finite() && w > 0.0 && w < 1.0, "|Δ| = 700 gave {w}");
    }
    "1000 random pairs in range, signed by integrity, complementary; |Δ|=700 finite".into()
}

fn criterion_3_trees() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let config = TreeConfig::default();
    let mut total_nodes = 0;
    for k in 0..100 {
        let q = format!("Scenario {k} holds.");
        let backend = random_scenario(
            &mut rng,
            FixtureBuilder::new(PromptLibrary::default()),
            &q,
            &config,
        )
        .build("random");
        let lm = Lm::new(&backend);
        let tree = build_tree(&lm, &q, &config, &PromptLibrary::default()).unwrap();
        assert!(
            tree.len() - 1 <= 18,
            "scenario {k}: {} generated nodes",
            tree.len() - 1
        );
        total_nodes += tree.len() - 1;
        let pruned = prune(&tree);
        for leaf in pruned.leaves() {
            assert!(
                leaf.is_root() || leaf.integrity.is_integral(),
                "scenario {k}: leaf {} kept",
                leaf.id
            );
        }
        assert_eq!(
            prune(&pruned).to_json(),
            pruned.to_json(),
            "scenario {k}: prune not idempotent"
        );
        // Nothing with an integral descendant (or itself integral) is lost.
        for n in tree.nodes() {
            if has_integral_at_or_below(&tree, &n.id) {
                assert!(
                    pruned.node(&n.id).is_some(),
                    "scenario {k}: {} pruned",
                    n.id
                );
            }
        }
    }
    format!("100 scenarios, {total_nodes} generated nodes, pruned trees have integral leaves")
}

fn has_integral_at_or_below(tree: &MaieuticTree, id: &NodeId) -> bool {
    let node = tree.node(id).unwrap();
    (!node.is_root() && node.integrity.is_integral())
        || tree
            .children_of(id)
            .iter()
            .any(|(_, c)| has_integral_at_or_below(tree, c))
}

/// Answers every statement and its negation alike.
struct EchoingBackend;

impl LmBackend for EchoingBackend {
    fn id(&self) -> &str {
        "negation-invariant"
    }

    fn call(&self, request: &LmRequest) -> Result<LmReply, LmError> {
        let response = match &request.kind {
            RequestKind::AnswerDistribution { .. } => {
                let mut tokens = BTreeMap::new();
                tokens.insert(TRUE_TOKEN.to_string(), 0.7);
                tokens.insert(FALSE_TOKEN.to_string(), 0.3);
                LmResponse::Distribution { tokens }
            }
            RequestKind::Generate { decoding, .. } => {
                let tag = &request.kind.digest()[..10];
                LmResponse::Samples {
                    texts: (0..decoding.sample_count)
                        .map(|i| format!("Claim {tag}-{i}."))
                        .collect(),
                }
            }
            RequestKind::Score { .. } => LmResponse::LogProb { value: -3.0 },
        };
        Ok(LmReply {
            response,
            cached: false,
        })
    }
}

fn criterion_4_degenerate() -> String {
    let backend = EchoingBackend;
    let config = TreeConfig::default();
    let tree = build_tree(
        &Lm::new(&backend),
        "Is this degenerate?",
        &config,
        &PromptLibrary::default(),
    )
    .unwrap();
    assert_eq!(
        tree.len() - 1,
        config.max_generated_nodes(),
        "expected a full tree"
    );
    let integral = tree
        .nodes()
        .iter()
        .filter(|n| n.integrity.is_integral())
        .count();
    assert_eq!(integral, 0);
    assert!(prune(&tree).is_trivial());

    let engine = Engine::new(&backend, EngineSettings::default());
    let result = engine
        .infer("Is this degenerate?", Method::Maieutic)
        .unwrap();
    assert!(result.fallback_used && result.fallback_reason.is_some());
    let standard = engine
        .infer("Is this degenerate?", Method::Standard)
        .unwrap();
    assert_eq!(result.answer, standard.answer);
    format!(
        "{} nodes, 0 integral, pruned to root, fallback flagged",
        tree.len() - 1
    )
}

fn criterion_5_war() -> String {
    let backend = war_fixtures().build("scripted:war");
    let verifier = war_verifier();
    let settings = EngineSettings {
        mode: CompileMode::Verifier,
        ..EngineSettings::default()
    };
    let run = || {
        Engine::new(&backend, settings.clone())
            .with_verifier(&verifier)
            .infer(WAR_Q, Method::Maieutic)
            .unwrap()
    };
    let result = run();
    assert!(!result.fallback_used);
    assert!(result.answer, "war question answered False");
    let tree = result.tree.as_ref().unwrap();
    let ids: Vec<&str> = tree.nodes().iter().map(|n| n.id.as_str()).collect();
    assert_eq!(ids, ["root", "T.0", "T.0.T.0", "T.0.F.0", "F.0"]);
    let cnf = result.cnf.as_ref().unwrap();
    let assignment = result.assignment.as_ref().unwrap();
    let truth = assignment.by_node(cnf);
    assert!(!truth[&NodeId::from("F.0")], "E_F should be false");
    assert!(!truth[&NodeId::from("T.0.F.0")], "E_TF should be false");
    let best = enumerate_best(cnf);
    assert!(
        (assignment.satisfied_weight - best).abs() <= 1e-12,
        "{} vs {best}",
        assignment.satisfied_weight
    );
    assert_eq!(run().to_json(), result.to_json(), "runs differ");

    // The likelihood relations reach the same answer.
    let likely = Engine::new(&backend, EngineSettings::default())
        .infer(WAR_Q, Method::Maieutic)
        .unwrap();
    assert!(likely.answer);
    let lt = likely
        .assignment
        .as_ref()
        .unwrap()
        .by_node(likely.cnf.as_ref().unwrap());
    assert!(!lt[&NodeId::from("F.0")] && !lt[&NodeId::from("T.0.F.0")]);
    format!(
        "answer True, E_F and E_TF false, satisfied weight {best} is optimal, output reproducible"
    )
}

fn criterion_6_golden_clauses() -> String {
    let tree = war_tree_by_hand();
    let verifier = war_verifier();
    let cnf = compile(
        &tree,
        Relations::Verifier {
            verifier: &verifier,
            options: RelationOptions::default(),
        },
    )
    .unwrap();
    let golden: Vec<DumpClause> =
        serde_json::from_str(include_str!("golden/war_clauses.json")).unwrap();
    assert_eq!(clause_dump(&cnf, None), golden);

    // Likelihood relations: consistency clauses against the direct ratio.
    let backend = war_fixtures().build("scripted:war");
    let lm = Lm::new(&backend);
    let prompts = PromptLibrary::default();
    let cnf = compile(
        &tree,
        Relations::Likelihood {
            lm: &lm,
            prompts: &prompts.abductive,
        },
    )
    .unwrap();
    let ratio = |own: f64, other: f64| own.exp() / (own.exp() + other.exp());
    let n = |s: &str| cnf.var_of(&NodeId::from(s)).unwrap();
    let expected = [
        (vec![Literal::pos(n("T.0.T.0"))], 0.75, ClauseOrigin::Belief),
        (vec![Literal::neg(n("T.0.F.0"))], 0.5, ClauseOrigin::Belief),
        (vec![Literal::neg(n("F.0"))], 0.25, ClauseOrigin::Belief),
        (
            vec![Literal::pos(n("root")), Literal::neg(n("T.0"))],
            ratio(-8.0, -10.0),
            ClauseOrigin::Consistency,
        ),
        (
            vec![Literal::pos(n("T.0")), Literal::neg(n("T.0.T.0"))],
            ratio(-6.0, -9.0),
            ClauseOrigin::Consistency,
        ),
        (
            vec![Literal::neg(n("T.0")), Literal::neg(n("T.0.F.0"))],
            ratio(-7.0, -7.5),
            ClauseOrigin::Consistency,
        ),
        (
            vec![Literal::neg(n("root")), Literal::neg(n("F.0"))],
            ratio(-9.0, -8.0),
            ClauseOrigin::Consistency,
        ),
    ];
    assert_eq!(cnf.clauses.len(), expected.len());
    for (c, (lits, w, origin)) in cnf.clauses.iter().zip(expected) {
        let mut lits = lits;
        lits.sort();
        assert_eq!(c.literal_set(), lits);
        assert_eq!(c.origin, origin);
        assert!((c.weight - w).abs() <= 1e-12, "{} vs {w}", c.weight);
    }
    format!(
        "{} verifier clauses match the golden dump; likelihood clauses match",
        golden.len()
    )
}

fn criterion_7_wcnf() -> String {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..50 {
        let cnf = random_cnf(&mut rng, 18, 60);
        let path = dir.path().join(format!("r{k}.wcnf"));
        export_wcnf(&cnf, &path).unwrap();
        let back = import_wcnf(&path).unwrap();
        assert_eq!(back.variables, cnf.variables);
        assert_eq!(back.clauses.len(), cnf.clauses.len());
        for (a, b) in cnf.clauses.iter().zip(&back.clauses) {
            assert_eq!(a.literal_set(), b.literal_set());
            assert_eq!(a.origin, b.origin);
            assert!(
                (a.weight - b.weight).abs() <= 1e-6,
                "{} vs {}",
                a.weight,
                b.weight
            );
        }
    }
    let two = WeightedCnf::new(
        vec![NodeId::root(), NodeId::from("T.0")],
        vec![
            WeightedClause::new(
                vec![Literal::neg(Var(1)), Literal::pos(Var(0))],
                0.75,
                ClauseOrigin::Consistency,
            )
            .unwrap(),
            WeightedClause::new(vec![Literal::pos(Var(1))], 0.5, ClauseOrigin::Belief).unwrap(),
        ],
    )
    .unwrap();
    let path = dir.path().join("two.wcnf");
    export_wcnf(&two, &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        include_str!("golden/two_clauses.wcnf")
    );
    "50 random round trips within 1e-6; golden file byte-identical".into()
}

fn criterion_8_metrics() -> String {
    let records = paired_records();
    let correct: Vec<bool> = (0..records.len())
        .map(|i| !PLANTED_ERRORS.contains(&i))
        .collect();
    let m = compute_metrics(&records, &correct).unwrap();
    // Hand count: 9 of 12 right; pairs 0, 2 and 5 each hold one error.
    assert_eq!(
        (m.total, m.correct, m.pairs, m.pairs_correct),
        (12, 9, 6, 3)
    );
    assert_eq!(m.accuracy, 0.75);
    assert_eq!(m.pairwise_accuracy, Some(0.5));

    // The same pattern produced end to end.
    let backend = paired_fixtures(&records).build("scripted:paired");
    let engine = Engine::new(&backend, EngineSettings::default());
    let report = evaluate(&engine, &records, Method::Maieutic, 4, &RunInfo::default()).unwrap();
    assert_eq!(report.metrics.errors, 0);
    let got: Vec<bool> = report.outcomes.iter().map(|o| o.correct).collect();
    assert_eq!(got, correct);
    assert_eq!(report.metrics.accuracy, 0.75);
    assert_eq!(report.metrics.pairwise_accuracy, Some(0.5));

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let v: Vec<bool> = (0..records.len()).map(|_| rng.gen()).collect();
        let m = compute_metrics(&records, &v).unwrap();
        assert!(m.pairwise_accuracy.unwrap() <= m.accuracy + 1e-12);
    }
    "accuracy 0.75 and pairwise 0.5 as hand-counted; pairwise <= accuracy on 100 vectors".into()
}

fn criterion_9_cache() -> String {
    let records = paired_records();
    let fixtures = paired_fixtures(&records);
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        let backend = CachedBackend::new(
            fixtures.build("scripted:paired"),
            ResponseCache::open(dir.path()).unwrap(),
            Some(11),
        );
        let engine = Engine::new(&backend, EngineSettings::default());
        let info = RunInfo {
            config_hash: None,
            seed: Some(11),
        };
        evaluate(&engine, &records, Method::Maieutic, 3, &info).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first.results_jsonl(), second.results_jsonl());
    let uncached = |r: &maieutic_core::harness::EvalReport| {
        let sink = TraceSink::new();
        sink.extend(r.trace.clone());
        sink.uncached_calls()
    };
    assert!(uncached(&first) > 0);
    assert_eq!(uncached(&second), 0, "second run reached the backend");
    format!(
        "identical results; {} calls on the first run, 0 uncached on the second",
        first.trace.len()
    )
}

type Criterion = (&'static str, fn() -> String);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 max-sat exactness", criterion_1_maxsat),
        ("2 weight formulas", criterion_2_weights),
        ("3 tree bounds and pruning", criterion_3_trees),
        ("4 negation-invariant model", criterion_4_degenerate),
        ("5 war question end to end", criterion_5_war),
        ("6 golden clause dump", criterion_6_golden_clauses),
        ("7 wcnf round trip", criterion_7_wcnf),
        ("8 metrics", criterion_8_metrics),
        ("9 cached replay", criterion_9_cache),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(payload) => {
                failed += 1;
                let msg = payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into());
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    let _ = panic::take_hook();
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
