//! Domain types shared across the engine: answer labels, demonstration sets,
//! propositions, decoding and tree configuration, and weighted clauses.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Validation failures for domain values.
#[derive(Debug, Error, PartialEq)]
pub enum InvalidValue {
    #[error("prompt set has no demonstrations")]
    EmptyPromptSet,
    #[error("demonstration {index}: {reason}")]
    Demonstration { index: usize, reason: String },
    #[error("invalid tree config: {0}")]
    TreeConfig(String),
    #[error("invalid decoding params: {0}")]
    Decoding(String),
    #[error("invalid clause: {0}")]
    Clause(String),
    #[error("non-finite probability {0}")]
    NonFinite(f64),
    #[error("probability {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// A binary answer label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Answer {
    True,
    False,
}

impl Answer {
    pub const BOTH: [Answer; 2] = [Answer::True, Answer::False];

    pub fn from_bool(value: bool) -> Self {
        if value {
            Answer::True
        } else {
            Answer::False
        }
    }

    pub fn as_bool(self) -> bool {
        self == Answer::True
    }

    pub fn flip(self) -> Self {
        match self {
            Answer::True => Answer::False,
            Answer::False => Answer::True,
        }
    }

    /// Single-letter form used in path labels and node ids.
    pub fn letter(self) -> char {
        match self {
            Answer::True => 'T',
            Answer::False => 'F',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'T' => Some(Answer::True),
            'F' => Some(Answer::False),
            _ => None,
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::True => f.write_str("True"),
            Answer::False => f.write_str("False"),
        }
    }
}

/// Rejects NaN/infinite values and anything outside `[0, 1]`.
pub fn checked_probability(p: f64) -> Result<f64, InvalidValue> {
    if !p.is_finite() {
        return Err(InvalidValue::NonFinite(p));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(InvalidValue::OutOfRange(p));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    QaPairs,
    QaExplanationTriples,
    AbductiveTriples,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    pub answer: Answer,
}

/// The in-context demonstrations used to render prompts for one query shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPromptSet")]
pub struct PromptSet {
    mode: PromptMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    examples: Vec<Demonstration>,
}

#[derive(Deserialize)]
struct RawPromptSet {
    mode: PromptMode,
    #[serde(default)]
    note: Option<String>,
    examples: Vec<Demonstration>,
}

impl TryFrom<RawPromptSet> for PromptSet {
    type Error = InvalidValue;

    fn try_from(raw: RawPromptSet) -> Result<Self, Self::Error> {
        let mut set = PromptSet::new(raw.mode, raw.examples)?;
        set.note = raw.note;
        Ok(set)
    }
}

const DEFAULT_QA_PAIRS: &str = include_str!("../prompts/qa_pairs.json");
const DEFAULT_QA_EXPLANATION: &str = include_str!("../prompts/qa_explanation.json");
const DEFAULT_ABDUCTIVE: &str = include_str!("../prompts/abductive.json");

impl PromptSet {
    pub fn new(mode: PromptMode, examples: Vec<Demonstration>) -> Result<Self, InvalidValue> {
        if examples.is_empty() {
            return Err(InvalidValue::EmptyPromptSet);
        }
        for (index, ex) in examples.iter().enumerate() {
            let bad = |reason: &str| InvalidValue::Demonstration {
                index,
                reason: reason.to_string(),
            };
            if ex.question.trim().is_empty() {
                return Err(bad("empty question"));
            }
            match (mode, &ex.explanation) {
                (PromptMode::QaPairs, Some(_)) => {
                    return Err(bad("question/answer pairs carry no explanation"))
                }
                (PromptMode::QaPairs, None) => {}
                (_, None) => return Err(bad("explanation required")),
                (_, Some(e)) if e.trim().is_empty() => return Err(bad("empty explanation")),
                _ => {}
            }
        }
        Ok(PromptSet {
            mode,
            note: None,
            examples,
        })
    }

    pub fn mode(&self) -> PromptMode {
        self.mode
    }

    pub fn examples(&self) -> &[Demonstration] {
        &self.examples
    }

    pub fn note(&self) -> Option<&str> {
        self.note.as_deref()
    }

    /// Built-in demonstration set for `mode`. These six examples per mode
    /// were written for this project and are not a published benchmark set.
    pub fn builtin(mode: PromptMode) -> Self {
        let raw = match mode {
            PromptMode::QaPairs => DEFAULT_QA_PAIRS,
            PromptMode::QaExplanationTriples => DEFAULT_QA_EXPLANATION,
            PromptMode::AbductiveTriples => DEFAULT_ABDUCTIVE,
        };
        let set: PromptSet = serde_json::from_str(raw).expect("built-in prompt set is valid");
        assert_eq!(set.mode, mode, "built-in prompt set mode mismatch");
        set
    }

    pub fn load(path: &Path) -> Result<Self, std::io::Error> {
        let raw = std::fs::read_to_string(path)?;
        serde_json::from_str(&raw)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("prompt set serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// The three demonstration sets a run needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptLibrary {
    pub qa: PromptSet,
    pub explanation: PromptSet,
    pub abductive: PromptSet,
}

impl Default for PromptLibrary {
    fn default() -> Self {
        PromptLibrary {
            qa: PromptSet::builtin(PromptMode::QaPairs),
            explanation: PromptSet::builtin(PromptMode::QaExplanationTriples),
            abductive: PromptSet::builtin(PromptMode::AbductiveTriples),
        }
    }
}

impl PromptLibrary {
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("prompt library serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Stable node identifier: `root`, or the path labels interleaved with
/// sibling indices (`T.0`, `F.1`, `T.0.F.0`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn root() -> Self {
        NodeId("root".to_string())
    }

    pub fn is_root(&self) -> bool {
        self.0 == "root"
    }

    pub fn child(&self, label: Answer, sibling: usize) -> Self {
        if self.is_root() {
            NodeId(format!("{}.{}", label.letter(), sibling))
        } else {
            NodeId(format!("{}.{}.{}", self.0, label.letter(), sibling))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Sequence of branch labels from the root. Serialized as a string such as `"TF"`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PathLabel(Vec<Answer>);

impl PathLabel {
    pub fn root() -> Self {
        PathLabel(Vec::new())
    }

    pub fn extended(&self, label: Answer) -> Self {
        let mut labels = self.0.clone();
        labels.push(label);
        PathLabel(labels)
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn last(&self) -> Option<Answer> {
        self.0.last().copied()
    }

    pub fn labels(&self) -> &[Answer] {
        &self.0
    }
}

impl fmt::Display for PathLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.0 {
            write!(f, "{}", a.letter())?;
        }
        Ok(())
    }
}

impl Serialize for PathLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PathLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.chars()
            .map(|c| {
                Answer::from_letter(c)
                    .ok_or_else(|| serde::de::Error::custom(format!("bad path label char {c:?}")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(PathLabel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrity {
    IntegralTrue,
    IntegralFalse,
    NotIntegral,
    Unchecked,
}

impl Integrity {
    pub fn is_integral(self) -> bool {
        matches!(self, Integrity::IntegralTrue | Integrity::IntegralFalse)
    }
}

/// One node of the explanation tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposition {
    pub id: NodeId,
    pub text: String,
    pub negated_text: String,
    pub path_label: PathLabel,
    pub source_answer: Option<Answer>,
    pub integrity: Integrity,
    pub belief: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_true_prob: Option<f64>,
}

impl Proposition {
    /// An unchecked node; `negated_text` is filled in by the integrity check.
    pub fn unchecked(id: NodeId, text: impl Into<String>, path_label: PathLabel) -> Self {
        let source_answer = path_label.last();
        Proposition {
            id,
            text: text.into(),
            negated_text: String::new(),
            path_label,
            source_answer,
            integrity: Integrity::Unchecked,
            belief: None,
            true_prob: None,
            neg_true_prob: None,
        }
    }

    pub fn depth(&self) -> usize {
        self.path_label.depth()
    }

    pub fn is_root(&self) -> bool {
        self.id.is_root()
    }

    /// Checks the per-node invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.text.trim().is_empty() {
            return Err(format!("node {}: empty text", self.id));
        }
        if self.integrity != Integrity::Unchecked && self.negated_text.trim().is_empty() {
            return Err(format!("node {}: checked node without negation", self.id));
        }
        if self.source_answer != self.path_label.last() {
            return Err(format!(
                "node {}: source answer disagrees with path",
                self.id
            ));
        }
        for p in [self.true_prob, self.neg_true_prob].into_iter().flatten() {
            checked_probability(p).map_err(|e| format!("node {}: {e}", self.id))?;
        }
        if let Some(b) = self.belief {
            if !b.is_finite() || !(-1.0..=1.0).contains(&b) {
                return Err(format!("node {}: belief {b} outside [-1, 1]", self.id));
            }
        }
        match (self.integrity, self.belief) {
            (Integrity::IntegralTrue, b) if !b.is_some_and(|b| b > 0.0) => Err(format!(
                "node {}: integral/true requires positive belief",
                self.id
            )),
            (Integrity::IntegralFalse, b) if !b.is_some_and(|b| b < 0.0) => Err(format!(
                "node {}: integral/false requires negative belief",
                self.id
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodingStrategy {
    Greedy,
    Nucleus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub strategy: DecodingStrategy,
    #[serde(default = "one")]
    pub nucleus_p: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_stops")]
    pub stop_sequences: Vec<String>,
    #[serde(default = "one_usize")]
    pub sample_count: usize,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_max_tokens() -> u32 {
    64
}
fn default_stops() -> Vec<String> {
    vec!["\n".to_string()]
}

impl DecodingParams {
    pub fn greedy() -> Self {
        DecodingParams {
            strategy: DecodingStrategy::Greedy,
            nucleus_p: 1.0,
            max_tokens: default_max_tokens(),
            stop_sequences: default_stops(),
            sample_count: 1,
        }
    }

    pub fn nucleus(p: f64, sample_count: usize) -> Self {
        DecodingParams {
            strategy: DecodingStrategy::Nucleus,
            nucleus_p: p,
            sample_count,
            ..DecodingParams::greedy()
        }
    }

    pub fn with_samples(&self, sample_count: usize) -> Self {
        DecodingParams {
            sample_count,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), InvalidValue> {
        if self.sample_count == 0 {
            return Err(InvalidValue::Decoding("sample_count must be >= 1".into()));
        }
        match self.strategy {
            DecodingStrategy::Greedy if self.sample_count != 1 => Err(InvalidValue::Decoding(
                "greedy decoding yields exactly one sample".into(),
            )),
            DecodingStrategy::Nucleus if !(self.nucleus_p > 0.0 && self.nucleus_p <= 1.0) => Err(
                InvalidValue::Decoding(format!("nucleus p {} outside (0, 1]", self.nucleus_p)),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_stochastic(&self) -> bool {
        self.strategy == DecodingStrategy::Nucleus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegationStrategy {
    Prefix,
    LmGenerated,
}

/// Shape of the explanation tree: how deep, how many samples per label at
/// each depth, and how they are decoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub depth_limit: usize,
    pub width_schedule: Vec<usize>,
    pub decoding_schedule: Vec<DecodingParams>,
    pub negation_strategy: NegationStrategy,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            depth_limit: 2,
            width_schedule: vec![3, 1],
            decoding_schedule: vec![DecodingParams::nucleus(1.0, 3), DecodingParams::greedy()],
            negation_strategy: NegationStrategy::Prefix,
        }
    }
}

impl TreeConfig {
    /// Samples per label at `depth` (1-based). The last entry repeats.
    pub fn width_at(&self, depth: usize) -> usize {
        schedule_at(&self.width_schedule, depth)
            .copied()
            .unwrap_or(1)
    }

    /// Decoding parameters at `depth` (1-based), with the sample count taken
    /// from the width schedule.
    pub fn decoding_at(&self, depth: usize) -> DecodingParams {
        let base = schedule_at(&self.decoding_schedule, depth)
            .cloned()
            .unwrap_or_else(DecodingParams::greedy);
        base.with_samples(self.width_at(depth))
    }

    pub fn validate(&self) -> Result<(), InvalidValue> {
        if self.depth_limit < 1 {
            return Err(InvalidValue::TreeConfig("depth_limit must be >= 1".into()));
        }
        if self.width_schedule.is_empty() || self.width_schedule.contains(&0) {
            return Err(InvalidValue::TreeConfig(
                "width schedule must be non-empty with widths >= 1".into(),
            ));
        }
        if self.decoding_schedule.is_empty() {
            return Err(InvalidValue::TreeConfig(
                "decoding schedule is empty".into(),
            ));
        }
        for depth in 1..=self.depth_limit {
            self.decoding_at(depth)
                .validate()
                .map_err(|e| InvalidValue::TreeConfig(format!("depth {depth}: {e}")))?;
        }
        Ok(())
    }

    /// Upper bound on the number of non-root nodes this config can produce.
    pub fn max_generated_nodes(&self) -> usize {
        let mut total = 0;
        let mut frontier = 1;
        for depth in 1..=self.depth_limit {
            frontier *= 2 * self.width_at(depth);
            total += frontier;
        }
        total
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

fn schedule_at<T>(schedule: &[T], depth: usize) -> Option<&T> {
    if schedule.is_empty() || depth == 0 {
        return None;
    }
    schedule.get(depth - 1).or_else(|| schedule.last())
}

/// Index of a boolean variable in a [`WeightedCnf`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(pub u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: Var,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: Var) -> Self {
        Literal {
            var,
            positive: true,
        }
    }

    pub fn neg(var: Var) -> Self {
        Literal {
            var,
            positive: false,
        }
    }

    pub fn is_satisfied_by(self, value: bool) -> bool {
        value == self.positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseOrigin {
    Belief,
    Consistency,
    Nli,
}

/// A soft clause: a disjunction of literals with a positive weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedClause {
    pub literals: Vec<Literal>,
    pub weight: f64,
    pub origin: ClauseOrigin,
}

impl WeightedClause {
    pub fn new(
        literals: Vec<Literal>,
        weight: f64,
        origin: ClauseOrigin,
    ) -> Result<Self, InvalidValue> {
        if literals.is_empty() {
            return Err(InvalidValue::Clause("empty clause".into()));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(InvalidValue::Clause(format!(
                "weight {weight} is not positive"
            )));
        }
        for (i, a) in literals.iter().enumerate() {
            if literals[..i].iter().any(|b| b.var == a.var) {
                return Err(InvalidValue::Clause(format!(
                    "variable {} repeated",
                    a.var.0
                )));
            }
        }
        Ok(WeightedClause {
            literals,
            weight,
            origin,
        })
    }

    pub fn is_satisfied(&self, values: &[bool]) -> bool {
        self.literals
            .iter()
            .any(|l| l.is_satisfied_by(values[l.var.index()]))
    }

    /// Literals sorted, for set comparisons.
    pub fn literal_set(&self) -> Vec<Literal> {
        let mut lits = self.literals.clone();
        lits.sort();
        lits
    }
}

/// Weighted MAX-SAT instance over tree nodes. Variable `i` is `variables[i]`;
/// the root, when present, is variable 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCnf {
    pub variables: Vec<NodeId>,
    pub clauses: Vec<WeightedClause>,
}

impl WeightedCnf {
    pub fn new(variables: Vec<NodeId>, clauses: Vec<WeightedClause>) -> Result<Self, InvalidValue> {
        let cnf = WeightedCnf { variables, clauses };
        cnf.validate()?;
        Ok(cnf)
    }

    pub fn validate(&self) -> Result<(), InvalidValue> {
        let n = self.variables.len();
        for (i, c) in self.clauses.iter().enumerate() {
            WeightedClause::new(c.literals.clone(), c.weight, c.origin)
                .map_err(|e| InvalidValue::Clause(format!("clause {i}: {e}")))?;
            if let Some(l) = c.literals.iter().find(|l| l.var.index() >= n) {
                return Err(InvalidValue::Clause(format!(
                    "clause {i} references undeclared variable {}",
                    l.var.0
                )));
            }
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var_of(&self, node: &NodeId) -> Option<Var> {
        self.variables
            .iter()
            .position(|v| v == node)
            .map(|i| Var(i as u32))
    }

    pub fn total_weight(&self) -> f64 {
        self.clauses.iter().map(|c| c.weight).sum()
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        WeightedCnf {
            variables: self.variables.clone(),
            clauses: self
                .clauses
                .iter()
                .map(|c| WeightedClause {
                    weight: c.weight * factor,
                    ..c.clone()
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_ids_follow_path_and_sibling() {
        let t0 = NodeId::root().child(Answer::True, 0);
        assert_eq!(t0.as_str(), "T.0");
        assert_eq!(t0.child(Answer::False, 0).as_str(), "T.0.F.0");
        assert_eq!(NodeId::root().child(Answer::False, 1).as_str(), "F.1");
    }

    #[test]
    fn prompt_set_mode_rules() {
        let pair = Demonstration {
            question: "Fish can fly".into(),
            explanation: None,
            answer: Answer::False,
        };
        assert!(PromptSet::new(PromptMode::QaPairs, vec![pair.clone()]).is_ok());
        assert!(PromptSet::new(PromptMode::AbductiveTriples, vec![pair]).is_err());
        assert_eq!(
            PromptSet::new(PromptMode::QaPairs, vec![]),
            Err(InvalidValue::EmptyPromptSet)
        );
        let with_expl = Demonstration {
            question: "Fish can fly".into(),
            explanation: Some("Fish swim.".into()),
            answer: Answer::False,
        };
        assert!(PromptSet::new(PromptMode::QaPairs, vec![with_expl]).is_err());
    }

    #[test]
    fn builtin_prompt_sets_have_six_examples() {
        for mode in [
            PromptMode::QaPairs,
            PromptMode::QaExplanationTriples,
            PromptMode::AbductiveTriples,
        ] {
            let set = PromptSet::builtin(mode);
            assert_eq!(set.examples().len(), 6);
            assert!(set.note().is_some());
        }
    }

    #[test]
    fn default_tree_config() {
        let cfg = TreeConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.decoding_at(1).sample_count, 3);
        assert_eq!(cfg.decoding_at(1).strategy, DecodingStrategy::Nucleus);
        assert_eq!(cfg.decoding_at(2).strategy, DecodingStrategy::Greedy);
        assert_eq!(cfg.decoding_at(2).sample_count, 1);
        assert_eq!(cfg.max_generated_nodes(), 18);
    }

    #[test]
    fn tree_config_rejects_greedy_with_width() {
        let cfg = TreeConfig {
            width_schedule: vec![3, 2],
            ..TreeConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TreeConfig {
            depth_limit: 0,
            ..TreeConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn clause_rejects_duplicates_and_bad_weight() {
        let x = Var(0);
        assert!(WeightedClause::new(
            vec![Literal::pos(x), Literal::neg(x)],
            1.0,
            ClauseOrigin::Nli
        )
        .is_err());
        assert!(WeightedClause::new(vec![Literal::pos(x)], 0.0, ClauseOrigin::Nli).is_err());
        assert!(WeightedClause::new(vec![], 1.0, ClauseOrigin::Nli).is_err());
        assert!(WeightedClause::new(vec![Literal::pos(x)], f64::NAN, ClauseOrigin::Nli).is_err());
    }

    #[test]
    fn cnf_rejects_undeclared_variable() {
        let clause =
            WeightedClause::new(vec![Literal::pos(Var(3))], 1.0, ClauseOrigin::Belief).unwrap();
        assert!(WeightedCnf::new(vec![NodeId::root()], vec![clause]).is_err());
    }

    #[test]
    fn probabilities_reject_non_finite() {
        assert!(checked_probability(f64::NAN).is_err());
        assert!(checked_probability(f64::INFINITY).is_err());
        assert!(checked_probability(1.5).is_err());
        assert_eq!(checked_probability(0.25), Ok(0.25));
    }

    #[test]
    fn path_label_serializes_as_letters() {
        let p = PathLabel::root()
            .extended(Answer::True)
            .extended(Answer::False);
        assert_eq!(serde_json::to_string(&p).unwrap(), "\"TF\"");
        let back: PathLabel = serde_json::from_str("\"TF\"").unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<PathLabel>("\"TX\"").is_err());
    }
}
