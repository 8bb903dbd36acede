//! Scenarios shared by the integration tests.
#![allow(dead_code)]

use maieutic_core::harness::DatasetRecord;
use maieutic_core::lm::prompt::prefix_negation;
use maieutic_core::lm::FixtureBuilder;
use maieutic_core::types::{
    Answer, Integrity, NodeId, PathLabel, PromptLibrary, Proposition, TreeConfig,
};
use maieutic_core::verifier::{LabelProbs, NliJudgment, NliLabel, ScriptedVerifier};
use maieutic_core::MaieuticTree;
use rand::Rng;

pub const WAR_Q: &str = "War cannot have a tie?";
pub const WAR_T: &str = "In a context of war, there's always a victor and a loser.";
pub const WAR_TT: &str = "Every war ends once one side is defeated or surrenders.";
pub const WAR_TF: &str = "A war can end in a draw when neither side gives up.";
pub const WAR_F: &str = "Some wars end in an armistice with no winner at all.";

/// Node texts in pre-order: Q, E_T, E_TT, E_TF, E_F.
pub const WAR_TEXTS: [&str; 5] = [WAR_Q, WAR_T, WAR_TT, WAR_TF, WAR_F];

/// (P(True | E), P(True | ¬E)) per node, in pre-order. Dyadic values keep
/// every belief weight exact.
pub const WAR_PROBS: [(f64, f64); 5] = [
    (0.625, 0.5625), // Q: not integral
    (0.75, 0.625),   // E_T: not integral
    (0.875, 0.125),  // E_TT: integral, true, belief 0.75
    (0.25, 0.75),    // E_TF: integral, false, belief -0.5
    (0.375, 0.625),  // E_F: integral, false, belief -0.25
];

/// Language-model fixtures that grow the war tree under the default config:
/// three depth-1 samples per label (with repeats), one greedy sample at
/// depth 2 below the non-integral E_T only.
pub fn war_fixtures() -> FixtureBuilder {
    let config = TreeConfig::default();
    let d1 = config.decoding_at(1);
    let d2 = config.decoding_at(2);
    let mut b = FixtureBuilder::new(PromptLibrary::default())
        .abduction(WAR_Q, Answer::True, &d1, &[WAR_T, WAR_T, WAR_T])
        .abduction(WAR_Q, Answer::False, &d1, &[WAR_F, " ", WAR_F])
        .abduction(WAR_T, Answer::True, &d2, &[WAR_TT])
        .abduction(WAR_T, Answer::False, &d2, &[WAR_TF])
        // Log-likelihoods for the consistency weights.
        .logprob(WAR_T, WAR_Q, Answer::True, -8.0)
        .logprob(WAR_T, WAR_Q, Answer::False, -10.0)
        .logprob(WAR_TT, WAR_T, Answer::True, -6.0)
        .logprob(WAR_TT, WAR_T, Answer::False, -9.0)
        .logprob(WAR_TF, WAR_T, Answer::False, -7.0)
        .logprob(WAR_TF, WAR_T, Answer::True, -7.5)
        .logprob(WAR_F, WAR_Q, Answer::False, -9.0)
        .logprob(WAR_F, WAR_Q, Answer::True, -8.0);
    for (text, (p, q)) in WAR_TEXTS.iter().zip(WAR_PROBS) {
        b = b.truth_pair(text, p, q);
    }
    b
}

/// NLI judgments for all 20 ordered pairs of the war tree.
pub fn war_judgments() -> Vec<NliJudgment> {
    use NliLabel::*;
    let table: [(usize, usize, NliLabel); 20] = [
        (0, 1, Neutral),
        (0, 2, Neutral),
        (0, 3, Contradict),
        (0, 4, Contradict),
        (1, 0, Entail),
        (1, 2, Neutral),
        (1, 3, Contradict),
        (1, 4, Contradict),
        (2, 0, Entail),
        (2, 1, Entail),
        (2, 3, Contradict),
        (2, 4, Neutral),
        (3, 0, Contradict),
        (3, 1, Contradict),
        (3, 2, Contradict),
        (3, 4, Entail),
        (4, 0, Contradict),
        (4, 1, Neutral),
        (4, 2, Neutral),
        (4, 3, Neutral),
    ];
    table
        .iter()
        .map(|&(i, j, label)| NliJudgment {
            premise: WAR_TEXTS[i].to_string(),
            hypothesis: WAR_TEXTS[j].to_string(),
            label,
            probs: LabelProbs::certain(label),
        })
        .collect()
}

pub fn war_verifier() -> ScriptedVerifier {
    ScriptedVerifier::new("scripted-nli:war", war_judgments()).unwrap()
}

fn node(id: &str, text: &str, path: &[Answer], probs: (f64, f64)) -> Proposition {
    let mut label = PathLabel::root();
    for &a in path {
        label = label.extended(a);
    }
    let mut p = Proposition::unchecked(NodeId::from(id), text, label);
    let (t, n) = probs;
    p.negated_text = prefix_negation(text);
    p.true_prob = Some(t);
    p.neg_true_prob = Some(n);
    p.belief = Some((t - n) / (t + n));
    p.integrity = match (t > 0.5, n > 0.5) {
        (true, false) => Integrity::IntegralTrue,
        (false, true) => Integrity::IntegralFalse,
        _ => Integrity::NotIntegral,
    };
    p
}

/// The war tree assembled by hand, with the same probabilities as the
/// fixtures.
pub fn war_tree_by_hand() -> MaieuticTree {
    use Answer::{False as F, True as T};
    let mut tree = MaieuticTree::new(
        node("root", WAR_Q, &[], WAR_PROBS[0]),
        TreeConfig::default(),
    );
    let root = NodeId::root();
    let et = NodeId::from("T.0");
    tree.add_child(&root, T, node("T.0", WAR_T, &[T], WAR_PROBS[1]))
        .unwrap();
    tree.add_child(&et, T, node("T.0.T.0", WAR_TT, &[T, T], WAR_PROBS[2]))
        .unwrap();
    tree.add_child(&et, F, node("T.0.F.0", WAR_TF, &[T, F], WAR_PROBS[3]))
        .unwrap();
    tree.add_child(&root, F, node("F.0", WAR_F, &[F], WAR_PROBS[4]))
        .unwrap();
    tree
}

/// Scripts a random tree under `config` for `question` into `b`.
///
/// Each expansion draws up to `width` samples per label, with repeats,
/// blanks and echoes of the parent mixed in; every distinct child gets random
/// truth probabilities (ties at 0.5 included) and random log-likelihoods.
pub fn random_scenario(
    rng: &mut impl Rng,
    mut b: FixtureBuilder,
    question: &str,
    config: &TreeConfig,
) -> FixtureBuilder {
    b = b.truth_pair(question, random_prob(rng), random_prob(rng));
    let mut frontier = vec![question.to_string()];
    for depth in 1..=config.depth_limit {
        let decoding = config.decoding_at(depth);
        let mut next = Vec::new();
        for parent in &frontier {
            for label in [Answer::True, Answer::False] {
                let n = rng.gen_range(0..=decoding.sample_count);
                let mut samples: Vec<String> = Vec::new();
                for k in 0..n {
                    let s = match rng.gen_range(0..10) {
                        0 => String::new(),
                        1 => parent.clone(),
                        2 if !samples.is_empty() => samples[0].clone(),
                        _ => format!("{parent} / {}{k}", label.letter()),
                    };
                    samples.push(s);
                }
                let refs: Vec<&str> = samples.iter().map(String::as_str).collect();
                b = b.abduction(parent, label, &decoding, &refs);
                let mut seen = Vec::new();
                for s in samples {
                    if s.trim().is_empty() || s == *parent || seen.contains(&s) {
                        continue;
                    }
                    seen.push(s.clone());
                    let (p, q) = (random_prob(rng), random_prob(rng));
                    b = b
                        .truth_pair(&s, p, q)
                        .logprob(&s, parent, label, -rng.gen_range(0.5..20.0))
                        .logprob(&s, parent, label.flip(), -rng.gen_range(0.5..20.0));
                    if !((p > 0.5 && q < 0.5) || (p < 0.5 && q > 0.5)) {
                        next.push(s);
                    }
                }
            }
        }
        frontier = next;
    }
    b
}

fn random_prob(rng: &mut impl Rng) -> f64 {
    if rng.gen_range(0..20) == 0 {
        0.5
    } else {
        rng.gen_range(0.01..0.99)
    }
}

/// Questions for the paired dataset: six statements and their negated
/// counterparts.
pub const PAIRED_STATEMENTS: [&str; 6] = [
    "Glass is a liquid at room temperature.",
    "Penguins live at the North Pole.",
    "Copper conducts electricity.",
    "The moon has its own light.",
    "Salt dissolves in water.",
    "Bats are blind.",
];

/// Gold truth of each statement; counterparts carry the opposite label.
pub const PAIRED_GOLD: [bool; 6] = [false, false, true, false, true, false];

/// Records the engine answers wrongly, by record index (0-based).
/// Errors fall in three different pairs: 1 (pair 0), 4 (pair 2), 11 (pair 5).
pub const PLANTED_ERRORS: [usize; 3] = [1, 4, 11];

pub fn paired_records() -> Vec<DatasetRecord> {
    let mut out = Vec::new();
    for (i, (s, gold)) in PAIRED_STATEMENTS.iter().zip(PAIRED_GOLD).enumerate() {
        let (a, b) = (format!("s{i}"), format!("n{i}"));
        out.push(DatasetRecord {
            id: a.clone(),
            question: s.to_string(),
            label: gold,
            pair_id: Some(b.clone()),
            split: Some("dev".into()),
        });
        out.push(DatasetRecord {
            id: b,
            question: format!(
                "It is not true that {}",
                s.trim_end_matches('.').to_lowercase()
            ),
            label: !gold,
            pair_id: Some(a),
            split: Some("dev".into()),
        });
    }
    out
}

/// Fixtures steering each record's maieutic answer: gold everywhere except
/// at [`PLANTED_ERRORS`]. Every root is non-integral; one integral child
/// per label decides the answer.
pub fn paired_fixtures(records: &[DatasetRecord]) -> FixtureBuilder {
    let config = TreeConfig::default();
    let d1 = config.decoding_at(1);
    let mut b = FixtureBuilder::new(PromptLibrary::default());
    for (i, r) in records.iter().enumerate() {
        let answer = r.label != PLANTED_ERRORS.contains(&i);
        let q = r.question.as_str();
        let pro = format!("{} (reason for)", q.trim_end_matches('.'));
        let con = format!("{} (reason against)", q.trim_end_matches('.'));
        // The explanation for the wanted answer is believed; the other is not.
        let (pro_probs, con_probs) = if answer {
            ((0.9, 0.2), (0.3, 0.8))
        } else {
            ((0.3, 0.8), (0.9, 0.2))
        };
        b = b
            .truth_pair(q, 0.6, 0.6)
            .abduction(q, Answer::True, &d1, &[&pro, &pro, ""])
            .abduction(q, Answer::False, &d1, &[&con])
            .truth_pair(&pro, pro_probs.0, pro_probs.1)
            .truth_pair(&con, con_probs.0, con_probs.1)
            .logprob(&pro, q, Answer::True, -5.0)
            .logprob(&pro, q, Answer::False, -7.0)
            .logprob(&con, q, Answer::False, -5.0)
            .logprob(&con, q, Answer::True, -7.0);
    }
    b
}
