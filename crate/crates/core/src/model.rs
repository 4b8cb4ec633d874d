// SPDX-License-Identifier: Apache-2.0

//! Shared domain types: problems, solutions, test cases, verdicts and the
//! per-iteration state of the refinement loop.
//!
//! Program I/O is stored as raw bytes ([`Bytes`]). On disk a byte string is a
//! plain JSON string when it is valid UTF-8 and `{"b64": "..."}` otherwise, so
//! serialization never loses or rewrites bytes.

use std::fmt;

use base64::Engine;
use indexmap::IndexMap;
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

/// An owned byte string with a lossless JSON encoding.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bytes(pub Vec<u8>);

impl Bytes {
    pub fn new(data: impl Into<Vec<u8>>) -> Self {
        Bytes(data.into())
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Lossy text rendering used in prompts and logs.
    pub fn to_text(&self) -> String {
        String::from_utf8_lossy(&self.0).into_owned()
    }
}

impl fmt::Debug for Bytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(&self.0) {
            Ok(s) => write!(f, "b{s:?}"),
            Err(_) => write!(f, "Bytes({:?})", self.0),
        }
    }
}

impl From<&str> for Bytes {
    fn from(s: &str) -> Self {
        Bytes(s.as_bytes().to_vec())
    }
}

impl From<String> for Bytes {
    fn from(s: String) -> Self {
        Bytes(s.into_bytes())
    }
}

impl From<Vec<u8>> for Bytes {
    fn from(v: Vec<u8>) -> Self {
        Bytes(v)
    }
}

impl From<&[u8]> for Bytes {
    fn from(v: &[u8]) -> Self {
        Bytes(v.to_vec())
    }
}

impl Serialize for Bytes {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match std::str::from_utf8(&self.0) {
            Ok(s) => serializer.serialize_str(s),
            Err(_) => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry(
                    "b64",
                    &base64::engine::general_purpose::STANDARD.encode(&self.0),
                )?;
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Bytes {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct BytesVisitor;

        impl<'de> Visitor<'de> for BytesVisitor {
            type Value = Bytes;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a string or an object with a \"b64\" field")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Bytes, E> {
                Ok(Bytes(v.as_bytes().to_vec()))
            }

            fn visit_string<E: de::Error>(self, v: String) -> Result<Bytes, E> {
                Ok(Bytes(v.into_bytes()))
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Bytes, A::Error> {
                let mut out = None;
                while let Some(key) = map.next_key::<String>()? {
                    if key == "b64" {
                        let encoded: String = map.next_value()?;
                        let decoded = base64::engine::general_purpose::STANDARD
                            .decode(encoded.as_bytes())
                            .map_err(de::Error::custom)?;
                        out = Some(Bytes(decoded));
                    } else {
                        map.next_value::<de::IgnoredAny>()?;
                    }
                }
                out.ok_or_else(|| de::Error::missing_field("b64"))
            }
        }

        deserializer.deserialize_any(BytesVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Cpp,
    Python,
    Java,
    Other(String),
}

impl Language {
    /// Key into the toolchain table.
    pub fn tag(&self) -> &str {
        match self {
            Language::Cpp => "cpp",
            Language::Python => "python",
            Language::Java => "java",
            Language::Other(tag) => tag,
        }
    }

    pub fn from_tag(tag: &str) -> Self {
        match tag {
            "cpp" | "c++" => Language::Cpp,
            "python" | "python3" | "py" => Language::Python,
            "java" => Language::Java,
            other => Language::Other(other.to_string()),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Correct,
    Incorrect,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solution {
    pub source: String,
    pub language: Language,
    label: Label,
    /// Cleared by pool purification; never set back.
    #[serde(default = "default_alive")]
    pub alive: bool,
}

fn default_alive() -> bool {
    true
}

impl Solution {
    pub fn new(source: impl Into<String>, language: Language, label: Label) -> Self {
        Solution {
            source: source.into(),
            language,
            label,
            alive: true,
        }
    }

    pub fn label(&self) -> Label {
        self.label
    }

    /// Copy of this solution relabeled as the trusted reference.
    pub fn as_reference(&self) -> Solution {
        Solution {
            label: Label::Reference,
            alive: true,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Public,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub input: Bytes,
    pub expected_output: Bytes,
    pub provenance: Provenance,
}

impl TestCase {
    pub fn public(input: impl Into<Bytes>, expected_output: impl Into<Bytes>) -> Self {
        TestCase {
            input: input.into(),
            expected_output: expected_output.into(),
            provenance: Provenance {
                origin: Origin::Public,
                command_index: None,
                iteration: None,
            },
        }
    }

    pub fn generated(
        input: impl Into<Bytes>,
        expected_output: impl Into<Bytes>,
        command_index: usize,
        iteration: u32,
    ) -> Self {
        TestCase {
            input: input.into(),
            expected_output: expected_output.into(),
            provenance: Provenance {
                origin: Origin::Generated,
                command_index: Some(command_index),
                iteration: Some(iteration),
            },
        }
    }
}

/// Problem-level fields carried through the pipeline untouched.
///
/// Values are kept as raw JSON text so that export reproduces them byte for
/// byte.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PassThrough(pub IndexMap<String, Box<RawValue>>);

impl PartialEq for PassThrough {
    fn eq(&self, other: &Self) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(other.0.iter())
                .all(|((ka, va), (kb, vb))| ka == kb && va.get() == vb.get())
    }
}

impl PassThrough {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub statement: String,
    #[serde(default)]
    pub reference_solution: Option<Solution>,
    #[serde(default)]
    pub correct_pool: Vec<Solution>,
    #[serde(default)]
    pub incorrect_pool: Vec<Solution>,
    #[serde(default)]
    pub public_tests: Vec<TestCase>,
    /// Milliseconds.
    pub time_limit: u64,
    /// Mebibytes.
    pub memory_limit: u64,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub difficulty: Option<i64>,
    #[serde(default, skip_serializing_if = "PassThrough::is_empty")]
    pub extra: PassThrough,
}

impl Problem {
    pub fn alive_correct(&self) -> impl Iterator<Item = &Solution> {
        self.correct_pool.iter().filter(|s| s.alive)
    }

    pub fn alive_incorrect(&self) -> impl Iterator<Item = &Solution> {
        self.incorrect_pool.iter().filter(|s| s.alive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Accepted,
    WrongAnswer,
    TimeLimit,
    MemoryLimit,
    RuntimeError,
    CompileError,
    CheckerError,
    InfrastructureError,
}

impl VerdictKind {
    pub const ALL: [VerdictKind; 8] = [
        VerdictKind::Accepted,
        VerdictKind::WrongAnswer,
        VerdictKind::TimeLimit,
        VerdictKind::MemoryLimit,
        VerdictKind::RuntimeError,
        VerdictKind::CompileError,
        VerdictKind::CheckerError,
        VerdictKind::InfrastructureError,
    ];

    pub fn is_accepted(self) -> bool {
        self == VerdictKind::Accepted
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VerdictKind::Accepted => "accepted",
            VerdictKind::WrongAnswer => "wrong_answer",
            VerdictKind::TimeLimit => "time_limit",
            VerdictKind::MemoryLimit => "memory_limit",
            VerdictKind::RuntimeError => "runtime_error",
            VerdictKind::CompileError => "compile_error",
            VerdictKind::CheckerError => "checker_error",
            VerdictKind::InfrastructureError => "infrastructure_error",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    #[serde(default)]
    pub detail: String,
    /// Milliseconds.
    #[serde(default)]
    pub wall_time: u64,
    /// Mebibytes.
    #[serde(default)]
    pub peak_memory: f64,
}

impl Verdict {
    pub fn new(kind: VerdictKind) -> Self {
        Verdict {
            kind,
            detail: String::new(),
            wall_time: 0,
            peak_memory: 0.0,
        }
    }

    pub fn with_detail(kind: VerdictKind, detail: impl Into<String>) -> Self {
        Verdict {
            detail: detail.into(),
            ..Verdict::new(kind)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStat {
    pub case_index: usize,
    pub pass_count_correct: usize,
    pub fail_count_incorrect: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    pub tpr: f64,
    pub tnr: f64,
    #[serde(default)]
    pub per_case_stats: Vec<CaseStat>,
}

impl QualityMetrics {
    pub fn meets(&self, alpha: f64, beta: f64) -> bool {
        self.tpr >= alpha && self.tnr >= beta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub iteration: u32,
    pub generator_source: String,
    #[serde(default)]
    pub checker_source: Option<String>,
    pub commands: Vec<String>,
    pub suite: Vec<TestCase>,
    #[serde(default)]
    pub constraints_summary: String,
    pub metrics: QualityMetrics,
}

/// Returns every broken [`Problem`] invariant as a human readable line.
pub fn validate_problem(p: &Problem) -> Vec<String> {
    let mut violations = Vec::new();
    if p.id.trim().is_empty() {
        violations.push("id empty".to_string());
    }
    if p.statement.trim().is_empty() {
        violations.push("statement empty".to_string());
    }
    match &p.reference_solution {
        None => violations.push("reference solution missing".to_string()),
        Some(s) if s.label() != Label::Reference => {
            violations.push(format!(
                "reference solution labeled {:?}, expected Reference",
                s.label()
            ));
        }
        Some(_) => {}
    }
    let pools = [
        ("correct_pool", &p.correct_pool, Label::Correct),
        ("incorrect_pool", &p.incorrect_pool, Label::Incorrect),
    ];
    for (name, pool, want) in pools {
        for (i, s) in pool.iter().enumerate() {
            if s.label() != want {
                violations.push(format!(
                    "{name}[{i}] labeled {:?}, expected {want:?}",
                    s.label()
                ));
            }
        }
    }
    let all = p
        .reference_solution
        .iter()
        .chain(&p.correct_pool)
        .chain(&p.incorrect_pool);
    for s in all {
        if s.source.trim().is_empty() {
            violations.push(format!("{:?} solution with empty source", s.label()));
        }
    }
    if p.public_tests.is_empty() {
        violations.push("no public tests".to_string());
    }
    if p.time_limit == 0 {
        violations.push("time_limit is zero".to_string());
    }
    if p.memory_limit == 0 {
        violations.push("memory_limit is zero".to_string());
    }
    violations
}

/// Rejects duplicate problem ids in a dataset.
pub fn duplicate_ids<'a>(problems: impl IntoIterator<Item = &'a Problem>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut dups = Vec::new();
    for p in problems {
        if !seen.insert(p.id.as_str()) {
            dups.push(p.id.clone());
        }
    }
    dups
}


#[cfg(test)]
mod tests {
    use super::fixtures::ab_problem;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn well_formed_problem_has_no_violations() {
        assert_eq!(validate_problem(&ab_problem()), Vec::<String>::new());
    }

    #[test]
    fn empty_statement_is_reported() {
        let mut p = ab_problem();
        p.statement.clear();
        assert_eq!(validate_problem(&p), vec!["statement empty".to_string()]);
    }

    #[test]
    fn mislabeled_pool_member_is_reported_once() {
        let mut p = ab_problem();
        p.incorrect_pool
            .push(Solution::new("print(0)", Language::Python, Label::Correct));
        let v = validate_problem(&p);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].starts_with("incorrect_pool[1]"));
    }

    #[test]
    fn duplicate_ids_detected() {
        let a = ab_problem();
        let b = ab_problem();
        assert_eq!(duplicate_ids([&a, &b]), vec!["ab".to_string()]);
    }

    #[test]
    fn non_utf8_bytes_use_base64_form() {
        let b = Bytes(vec![0xff, 0x00, b'a']);
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, r#"{"b64":"/wBh"}"#);
        let back: Bytes = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn pass_through_values_keep_their_text() {
        let raw = r#"{"id":"x","statement":"s","time_limit":1,"memory_limit":1,"extra":{"cf_rating":1.50,"src":{"b":[1, 2]}}}"#;
        let p: Problem = serde_json::from_str(raw).unwrap();
        let out = serde_json::to_string(&p.extra).unwrap();
        assert_eq!(out, r#"{"cf_rating":1.50,"src":{"b":[1, 2]}}"#);
    }

    fn arb_bytes() -> impl Strategy<Value = Bytes> {
        prop::collection::vec(any::<u8>(), 0..40).prop_map(Bytes)
    }

    fn arb_case() -> impl Strategy<Value = TestCase> {
        (arb_bytes(), arb_bytes(), any::<bool>(), 0usize..50, 0u32..5).prop_map(
            |(i, o, public, c, it)| {
                if public {
                    TestCase::public(i, o)
                } else {
                    TestCase::generated(i, o, c, it)
                }
            },
        )
    }

    fn arb_solution() -> impl Strategy<Value = Solution> {
        (
            "[ -~]{1,30}",
            prop_oneof![
                Just(Language::Cpp),
                Just(Language::Python),
                Just(Language::Java),
                "[a-z]{1,6}".prop_map(Language::Other),
            ],
            prop_oneof![
                Just(Label::Correct),
                Just(Label::Incorrect),
                Just(Label::Reference)
            ],
            any::<bool>(),
        )
            .prop_map(|(src, lang, label, alive)| {
                let mut s = Solution::new(src, lang, label);
                s.alive = alive;
                s
            })
    }

    prop_compose! {
        fn arb_problem()(
            id in "[a-z0-9]{1,8}",
            statement in "\\PC{0,60}",
            reference in proptest::option::of(arb_solution()),
            correct in prop::collection::vec(arb_solution(), 0..3),
            incorrect in prop::collection::vec(arb_solution(), 0..3),
            tests in prop::collection::vec(arb_case(), 0..3),
            time_limit in 1u64..10_000,
            memory_limit in 1u64..4096,
            tags in prop::collection::vec("[a-z]{1,5}", 0..3),
            difficulty in proptest::option::of(-5i64..4000),
        ) -> Problem {
            Problem {
                id, statement, reference_solution: reference, correct_pool: correct,
                incorrect_pool: incorrect, public_tests: tests, time_limit, memory_limit,
                tags, difficulty, extra: PassThrough::default(),
            }
        }
    }

    proptest! {
        #[test]
        fn problem_json_round_trip_is_byte_identical(p in arb_problem()) {
            let first = serde_json::to_string(&p).unwrap();
            let back: Problem = serde_json::from_str(&first).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), first);
        }

        #[test]
        fn iteration_state_round_trip(
            cases in prop::collection::vec(arb_case(), 0..4),
            cmds in prop::collection::vec("\\./gen [a-z0-9 -]{0,12}", 0..4),
            tpr in 0.0f64..=1.0, tnr in 0.0f64..=1.0,
        ) {
            let state = IterationState {
                iteration: 2,
                generator_source: "int main(){}".into(),
                checker_source: None,
                commands: cmds,
                suite: cases,
                constraints_summary: "1 <= n".into(),
                metrics: QualityMetrics { tpr, tnr, per_case_stats: vec![] },
            };
            let first = serde_json::to_string(&state).unwrap();
            let back: IterationState = serde_json::from_str(&first).unwrap();
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), first);
        }

        #[test]
        fn verdict_round_trip(kind in prop::sample::select(VerdictKind::ALL.to_vec()),
                              detail in "\\PC{0,20}", wall in 0u64..100_000) {
            let v = Verdict { kind, detail, wall_time: wall, peak_memory: 1.5 };
            let first = serde_json::to_string(&v).unwrap();
            let back: Verdict = serde_json::from_str(&first).unwrap();
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), first);
        }
    }
}
