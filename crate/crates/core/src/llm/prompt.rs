// SPDX-License-Identifier: Apache-2.0

//! Prompt assembly for initial generation and feedback-guided refinement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::genkit::CommandRun;
use crate::judge::{ErrorSource, FeedbackReport};
use crate::model::{Bytes, IterationState, Problem, TestCase};

pub const INITIAL_TEMPLATE: &str = include_str!("../../assets/prompts/initial.txt");
pub const REFINEMENT_TEMPLATE: &str = include_str!("../../assets/prompts/refinement.txt");

/// Which program a prompt asks the model to edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactRole {
    Generator,
    Checker,
}

const BOOTSTRAP_NOTE: &str = "\n\nNote: no generation program exists yet for this problem, so the generator above is empty. \
Write a complete testlib-based generator as a single search-replace block whose SEARCH section is empty \
(the whole block replaces the empty file), then design `command_list` against that new generator.";

const CHECKER_NOTE: &str = "\n\nNote: the program being edited is a testlib checker, not an input generator. \
It is invoked as `./checker <input-file> <output-file> <answer-file>` after `registerTestlibCmd(argc, argv)`, \
reads the test input from `inf`, the participant output from `ouf` and the reference output from `ans`, \
and must exit through `quitf(_ok, ...)` when the participant output is a valid answer and `quitf(_wa, ...)` otherwise. \
It must accept every output that is equivalent to the reference output. \
Return an empty command list; commands are not used for the checker.";

/// Substitutes `{slot}` placeholders in one left-to-right pass. Substituted
/// values are never rescanned, and braces that do not name a slot are kept.
pub fn fill_template(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + slots.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replaced = after.find('}').and_then(|close| {
            let name = &after[..close];
            slots
                .iter()
                .find(|(slot, _)| *slot == name)
                .map(|(_, value)| (close, *value))
        });
        match replaced {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Rewrites generator wording into checker wording.
fn swap_role_words(text: &str) -> String {
    text.replace("corner case generation programs", "checker programs")
        .replace("generation program", "checker program")
        .replace("Generation Program", "Checker Program")
        .replace("generators", "checkers")
        .replace("generator", "checker")
}

fn role_template(template: &str, role: ArtifactRole) -> String {
    match role {
        ArtifactRole::Generator => template.to_string(),
        ArtifactRole::Checker => swap_role_words(template),
    }
}

pub fn build_initial_prompt(p: &Problem, generator_source: &str) -> String {
    build_initial_prompt_for(ArtifactRole::Generator, p, generator_source)
}

pub fn build_initial_prompt_for(role: ArtifactRole, p: &Problem, source: &str) -> String {
    let template = role_template(INITIAL_TEMPLATE, role);
    let slot = match role {
        ArtifactRole::Generator => "generator",
        ArtifactRole::Checker => "checker",
    };
    let mut prompt = fill_template(&template, &[("problem_statement", &p.statement), (slot, source)]);
    if source.is_empty() {
        prompt.push_str(&role_template(BOOTSTRAP_NOTE, role));
    }
    if role == ArtifactRole::Checker {
        prompt.push_str(CHECKER_NOTE);
    }
    prompt
}

/// Size thresholds and exemplar caps for refinement prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationPolicy {
    pub max_input_bytes: usize,
    pub max_output_bytes: usize,
    pub max_false_negatives: usize,
    pub max_false_positives: usize,
    pub max_error_logs: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            max_input_bytes: 4096,
            max_output_bytes: 4096,
            max_false_negatives: 10,
            max_false_positives: 10,
            max_error_logs: 10,
        }
    }
}

pub const INPUT_TOKEN: &str = "[input]";
pub const OUTPUT_TOKEN: &str = "[output]";
pub const EXPECTED_OUTPUT_TOKEN: &str = "[expected output]";
pub const COMMAND_TAG: &str = " [command]";

/// Picks up to `cap` items, cycling over distinct keys (in order of first
/// appearance) so that every kind is represented before any repeats.
pub fn select_diverse<T, K: Ord + Clone>(items: &[T], key: impl Fn(&T) -> K, cap: usize) -> Vec<&T> {
    let mut order: Vec<K> = Vec::new();
    let mut groups: BTreeMap<K, Vec<&T>> = BTreeMap::new();
    for item in items {
        let k = key(item);
        if !groups.contains_key(&k) {
            order.push(k.clone());
        }
        groups.entry(k).or_default().push(item);
    }
    let mut picked = Vec::new();
    let mut round = 0;
    while picked.len() < cap {
        let mut any = false;
        for k in &order {
            if let Some(item) = groups[k].get(round) {
                any = true;
                if picked.len() < cap {
                    picked.push(*item);
                }
            }
        }
        if !any {
            break;
        }
        round += 1;
    }
    picked
}

struct Renderer<'a> {
    commands: &'a [String],
    policy: TruncationPolicy,
}

impl Renderer<'_> {
    fn stdin(&self, input: &Bytes, command_index: Option<usize>) -> String {
        if input.len() <= self.policy.max_input_bytes {
            return input.to_text();
        }
        match command_index.and_then(|i| self.commands.get(i)) {
            Some(cmd) => format!("{cmd}{COMMAND_TAG}"),
            None => INPUT_TOKEN.to_string(),
        }
    }

    fn output(&self, out: &Bytes, token: &str) -> String {
        if out.len() <= self.policy.max_output_bytes {
            out.to_text()
        } else {
            token.to_string()
        }
    }

    fn case_stdin(&self, case: &TestCase) -> String {
        self.stdin(&case.input, case.provenance.command_index)
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize")
}

/// Renders the refinement prompt for one iteration.
///
/// `runs` are the generator command results that produced `state.suite`.
pub fn build_refinement_prompt(
    state: &IterationState,
    runs: &[CommandRun],
    report: &FeedbackReport,
    policy: &TruncationPolicy,
) -> String {
    build_refinement_prompt_for(ArtifactRole::Generator, state, runs, report, policy)
}

pub fn build_refinement_prompt_for(
    role: ArtifactRole,
    state: &IterationState,
    runs: &[CommandRun],
    report: &FeedbackReport,
    policy: &TruncationPolicy,
) -> String {
    let r = Renderer {
        commands: &state.commands,
        policy: *policy,
    };

    let source = match role {
        ArtifactRole::Generator => state.generator_source.as_str(),
        ArtifactRole::Checker => state.checker_source.as_deref().unwrap_or(""),
    };

    let mut input_map = serde_json::Map::new();
    for run in runs {
        if let Some(input) = run.inputs.first() {
            let shown = if input.len() > policy.max_input_bytes {
                INPUT_TOKEN.to_string()
            } else {
                input.to_text()
            };
            input_map.insert(run.command.clone(), Value::String(shown));
        }
    }

    let wanted_source = match role {
        ArtifactRole::Generator => ErrorSource::Generator,
        ArtifactRole::Checker => ErrorSource::Checker,
    };
    let run_errors: Vec<_> = report
        .error_logs
        .iter()
        .filter(|e| e.source == wanted_source)
        .collect();
    let run_errors = select_diverse(&run_errors, |e| e.subject.clone(), policy.max_error_logs);
    let run_errors: Vec<Value> = run_errors
        .iter()
        .map(|e| {
            let mut obj = json!({ "command": e.subject, "error": e.log });
            if role == ArtifactRole::Checker {
                if let Some(input) = &e.input {
                    obj["stdin"] = Value::String(r.stdin(input, e.command_index));
                }
            }
            obj
        })
        .collect();

    let correct: Vec<Value> = select_diverse(
        &report.false_negatives,
        |f| f.verdict.kind,
        policy.max_false_negatives,
    )
    .into_iter()
    .map(|f| {
        let case = &state.suite[f.case_index];
        json!({
            "solution": f.source,
            "stdin": r.case_stdin(case),
            "stdout": r.output(&f.stdout, OUTPUT_TOKEN),
            "expected_output": r.output(&case.expected_output, EXPECTED_OUTPUT_TOKEN),
            "passed": false,
            "verdict": f.verdict.kind.to_string(),
        })
    })
    .collect();

    let incorrect: Vec<Value> = report
        .false_positives
        .iter()
        .take(policy.max_false_positives)
        .map(|f| {
            let case = &state.suite[f.case_index];
            json!({
                "solution": f.source,
                "stdin": r.case_stdin(case),
                "stdout": r.output(&f.stdout, OUTPUT_TOKEN),
                "expected_output": r.output(&case.expected_output, EXPECTED_OUTPUT_TOKEN),
                "passed": true,
            })
        })
        .collect();

    let reference_failures: Vec<_> = report
        .error_logs
        .iter()
        .filter(|e| e.source == ErrorSource::Reference)
        .collect();
    let outputs: Vec<Value> = select_diverse(&reference_failures, |e| e.subject.clone(), policy.max_error_logs)
        .into_iter()
        .map(|e| {
            let stdin = e
                .input
                .as_ref()
                .map(|i| r.stdin(i, e.command_index))
                .unwrap_or_default();
            let stdout = e
                .stdout
                .as_ref()
                .map(|o| r.output(o, OUTPUT_TOKEN))
                .unwrap_or_default();
            json!({ "stdin": stdin, "stdout": stdout, "error": e.log })
        })
        .collect();

    let template = role_template(REFINEMENT_TEMPLATE, role);
    let slot = match role {
        ArtifactRole::Generator => "improved_generator",
        ArtifactRole::Checker => "improved_checker",
    };
    let commands = serde_json::to_string(&state.commands).expect("strings serialize");
    let map = pretty(&Value::Object(input_map));
    let errors = pretty(&Value::Array(run_errors));
    let correct = pretty(&Value::Array(correct));
    let incorrect = pretty(&Value::Array(incorrect));
    let outputs = pretty(&Value::Array(outputs));
    let mut prompt = fill_template(
        &template,
        &[
            (slot, source),
            ("current_command_list", &commands),
            ("command_to_input_map", &map),
            ("command_run_errors", &errors),
            ("correct_results", &correct),
            ("incorrect_results", &incorrect),
            ("outputs", &outputs),
            ("input_constraints_summary", &state.constraints_summary),
        ],
    );
    if role == ArtifactRole::Checker {
        prompt.push_str(CHECKER_NOTE);
    }
    prompt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::{ErrorLog, FalseNegative, FalsePositive};
    use crate::model::fixtures::ab_problem;
    use crate::model::{QualityMetrics, Verdict, VerdictKind};

    fn state(suite: Vec<TestCase>, commands: Vec<&str>) -> IterationState {
        IterationState {
            iteration: 0,
            generator_source: "int main() {}".into(),
            checker_source: None,
            commands: commands.into_iter().map(String::from).collect(),
            suite,
            constraints_summary: "1 <= a, b <= 10^9".into(),
            metrics: QualityMetrics {
                tpr: 1.0,
                tnr: 0.0,
                per_case_stats: vec![],
            },
        }
    }

    #[test]
    fn slots_are_filled_once() {
        let out = fill_template("a {x} b {y} {z} {1,100}", &[("x", "{y}"), ("y", "Y")]);
        assert_eq!(out, "a {y} b Y {z} {1,100}");
    }

    #[test]
    fn statement_with_braces_is_verbatim() {
        let mut p = ab_problem();
        p.statement = "Print {generator} and {problem_statement} literally {}".into();
        let prompt = build_initial_prompt(&p, "GEN");
        assert!(prompt.contains("Print {generator} and {problem_statement} literally {}"));
        assert!(prompt.contains("Generation Program (C++):\nGEN\n"));
        assert!(!prompt.contains(BOOTSTRAP_NOTE));
    }

    #[test]
    fn empty_generator_triggers_bootstrap() {
        let prompt = build_initial_prompt(&ab_problem(), "");
        assert!(prompt.contains("Generation Program (C++):\n\n"));
        assert!(prompt.ends_with(BOOTSTRAP_NOTE));
    }

    #[test]
    fn checker_prompt_swaps_role_words() {
        let prompt = build_initial_prompt_for(ArtifactRole::Checker, &ab_problem(), "CHK");
        assert!(prompt.contains("Checker Program (C++):\nCHK\n"));
        assert!(prompt.contains("search_replace_checker_blocks"));
        assert!(prompt.ends_with(CHECKER_NOTE));
    }

    #[test]
    fn long_input_becomes_command_and_long_output_a_token() {
        let big = "9".repeat(5000);
        let suite = vec![TestCase::generated(big.clone(), big.clone(), 1, 0)];
        let st = state(suite, vec!["./gen --n 1", "./gen --n 100000"]);
        let report = FeedbackReport {
            false_negatives: vec![FalseNegative {
                solution_index: 0,
                source: "print(1)".into(),
                case_index: 0,
                verdict: Verdict::new(VerdictKind::WrongAnswer),
                stdout: Bytes::from("1\n"),
            }],
            ..Default::default()
        };
        let runs = vec![CommandRun {
            command: "./gen --n 100000".into(),
            inputs: vec![Bytes::from(big)],
            error: None,
        }];
        let prompt = build_refinement_prompt(&st, &runs, &report, &TruncationPolicy::default());
        assert!(prompt.contains("\"stdin\": \"./gen --n 100000 [command]\""));
        assert!(prompt.contains("\"expected_output\": \"[expected output]\""));
        assert!(prompt.contains("\"./gen --n 100000\": \"[input]\""));
        assert!(prompt.contains("\"stdout\": \"1\\n\""));
    }

    #[test]
    fn short_feedback_has_no_substitution_tokens() {
        let suite = vec![TestCase::generated("2 3\n", "5\n", 0, 0)];
        let st = state(suite, vec!["./gen --n 1"]);
        let report = FeedbackReport {
            false_positives: vec![FalsePositive {
                solution_index: 0,
                source: "print(5)".into(),
                case_index: 0,
                stdout: Bytes::from("5\n"),
            }],
            error_logs: vec![ErrorLog {
                source: ErrorSource::Generator,
                subject: "./gen --bad".into(),
                log: "unknown option".into(),
                command_index: None,
                input: None,
                stdout: None,
            }],
            ..Default::default()
        };
        let runs = vec![CommandRun {
            command: "./gen --n 1".into(),
            inputs: vec![Bytes::from("2 3\n")],
            error: None,
        }];
        let prompt = build_refinement_prompt(&st, &runs, &report, &TruncationPolicy::default());
        // The template itself explains the tokens, so only count extra uses.
        for token in [INPUT_TOKEN, OUTPUT_TOKEN, EXPECTED_OUTPUT_TOKEN, COMMAND_TAG] {
            assert_eq!(
                prompt.matches(token).count(),
                REFINEMENT_TEMPLATE.matches(token).count(),
                "unexpected {token}"
            );
        }
        assert!(prompt.contains("\"stdin\": \"2 3\\n\""));
        assert!(prompt.contains("\"expected_output\": \"5\\n\""));
        assert!(prompt.contains("Current command list: [\"./gen --n 1\"]"));
        assert!(prompt.contains("\"command\": \"./gen --bad\""));
        assert!(prompt.contains("1 <= a, b <= 10^9"));
    }

    #[test]
    fn diverse_selection_covers_each_kind_first() {
        let items = ["a1", "a2", "a3", "b1", "c1", "b2"];
        let picked = select_diverse(&items, |s| s.as_bytes()[0], 4);
        assert_eq!(picked, vec![&"a1", &"b1", &"c1", &"a2"]);
        assert_eq!(select_diverse(&items, |s| s.as_bytes()[0], 100).len(), 6);
    }

    #[test]
    fn prompt_is_deterministic() {
        let suite = vec![TestCase::generated("1\n", "1\n", 0, 0)];
        let st = state(suite, vec!["./gen"]);
        let report = FeedbackReport::default();
        let a = build_refinement_prompt(&st, &[], &report, &TruncationPolicy::default());
        let b = build_refinement_prompt(&st, &[], &report, &TruncationPolicy::default());
        assert_eq!(a, b);
    }
}
