// SPDX-License-Identifier: Apache-2.0

//! Problem filtering and solution-pool purification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::judge::compare_string;
use crate::model::{Problem, Solution};
use crate::sandbox::{CompileOutcome, ExecSpec, Limits, Sandbox, SandboxError};

/// Exclusion rules in the order they are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectRule {
    IncompleteDescription,
    NoReferenceSolution,
    Multimodal,
    FunctionOnly,
    Interactive,
}

impl RejectRule {
    pub const ALL: [RejectRule; 5] = [
        RejectRule::IncompleteDescription,
        RejectRule::NoReferenceSolution,
        RejectRule::Multimodal,
        RejectRule::FunctionOnly,
        RejectRule::Interactive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RejectRule::IncompleteDescription => "incomplete_description",
            RejectRule::NoReferenceSolution => "no_reference_solution",
            RejectRule::Multimodal => "multimodal",
            RejectRule::FunctionOnly => "function_only",
            RejectRule::Interactive => "interactive",
        }
    }
}

impl std::fmt::Display for RejectRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Heuristics behind the exclusion rules. All matching is case-insensitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    pub min_statement_chars: usize,
    /// At least one must appear for the statement to count as having an
    /// input section.
    pub input_headings: Vec<String>,
    pub output_headings: Vec<String>,
    pub image_markers: Vec<String>,
    pub interactive_tags: Vec<String>,
    pub interactive_keywords: Vec<String>,
    pub function_only_tags: Vec<String>,
    pub function_only_keywords: Vec<String>,
}

impl Default for CurationConfig {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        CurationConfig {
            min_statement_chars: 50,
            input_headings: v(&["input"]),
            output_headings: v(&["output"]),
            image_markers: v(&["<image>", "![", "<img", ".png", ".jpg", ".jpeg", ".gif", ".svg"]),
            interactive_tags: v(&["interactive"]),
            interactive_keywords: v(&[
                "this is an interactive problem",
                "interactive problem",
                "flush the output",
                "fflush(stdout)",
            ]),
            function_only_tags: v(&["function_only", "functional"]),
            function_only_keywords: v(&[
                "implement the function",
                "complete the function",
                "you do not need to read input",
                "your function should return",
            ]),
        }
    }
}

fn contains_any(haystack: &str, needles: &[String]) -> bool {
    needles.iter().any(|n| haystack.contains(&n.to_lowercase()))
}

fn has_tag(p: &Problem, tags: &[String]) -> bool {
    p.tags
        .iter()
        .any(|t| tags.iter().any(|x| x.eq_ignore_ascii_case(t)))
}

/// First matching exclusion rule, if any.
pub fn first_violation(p: &Problem, cfg: &CurationConfig) -> Option<RejectRule> {
    let text = p.statement.to_lowercase();
    if p.statement.trim().chars().count() < cfg.min_statement_chars
        || !contains_any(&text, &cfg.input_headings)
        || !contains_any(&text, &cfg.output_headings)
    {
        return Some(RejectRule::IncompleteDescription);
    }
    if p.reference_solution.is_none() {
        return Some(RejectRule::NoReferenceSolution);
    }
    if contains_any(&text, &cfg.image_markers) {
        return Some(RejectRule::Multimodal);
    }
    if has_tag(p, &cfg.function_only_tags) || contains_any(&text, &cfg.function_only_keywords) {
        return Some(RejectRule::FunctionOnly);
    }
    if has_tag(p, &cfg.interactive_tags) || contains_any(&text, &cfg.interactive_keywords) {
        return Some(RejectRule::Interactive);
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub rule: RejectRule,
}

pub fn filter_problems(
    dataset: Vec<Problem>,
    cfg: &CurationConfig,
) -> (Vec<Problem>, Vec<Rejection>) {
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for p in dataset {
        match first_violation(&p, cfg) {
            None => kept.push(p),
            Some(rule) => rejected.push(Rejection { id: p.id, rule }),
        }
    }
    (kept, rejected)
}

#[derive(Debug, thiserror::Error)]
pub enum CurationError {
    #[error("problem {0} has no public tests to purify against")]
    NoPublicTests(String),
    #[error("problem {0} has no reference solution")]
    NoReference(String),
    #[error("reference solution of {id} is unusable: {detail}")]
    ReferenceFailed { id: String, detail: String },
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// Why a solution was marked dead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathCause {
    CompileError,
    RunFailure { test: usize },
    WrongAnswer { test: usize },
}

enum Check {
    RunsCleanly,
    MatchesExpected,
}

fn check_solution(
    sandbox: &Sandbox,
    p: &Problem,
    s: &Solution,
    check: Check,
) -> Result<Option<DeathCause>, SandboxError> {
    let artifact = match sandbox.compile(&s.source, &s.language)? {
        CompileOutcome::Ready(a) => a,
        CompileOutcome::Failed(_) => return Ok(Some(DeathCause::CompileError)),
    };
    let limits = Limits::new(p.time_limit, p.memory_limit);
    let specs: Vec<ExecSpec> = p
        .public_tests
        .iter()
        .map(|t| ExecSpec::new(&artifact, t.input.clone(), limits))
        .collect();
    let records = sandbox.run_batch(&specs, sandbox.workers());
    for (i, (rec, test)) in records.iter().zip(&p.public_tests).enumerate() {
        if !rec.succeeded() {
            return Ok(Some(DeathCause::RunFailure { test: i }));
        }
        if matches!(check, Check::MatchesExpected)
            && (rec.stdout_truncated
                || !compare_string(test.expected_output.as_slice(), rec.stdout.as_slice())
                    .is_accepted())
        {
            return Ok(Some(DeathCause::WrongAnswer { test: i }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PurifyLog {
    pub correct_deaths: Vec<(usize, DeathCause)>,
    pub incorrect_deaths: Vec<(usize, DeathCause)>,
}

/// Marks pool members dead when they fail to compile or to run cleanly on
/// every public input. Correct solutions must additionally reproduce every
/// public output. Already-dead members are not re-run and never revived.
pub fn purify_pools(sandbox: &Sandbox, p: &Problem) -> Result<(Problem, PurifyLog), CurationError> {
    if p.public_tests.is_empty() {
        return Err(CurationError::NoPublicTests(p.id.clone()));
    }
    let reference = p
        .reference_solution
        .as_ref()
        .ok_or_else(|| CurationError::NoReference(p.id.clone()))?;
    if let Some(cause) = check_solution(sandbox, p, reference, Check::MatchesExpected)? {
        return Err(CurationError::ReferenceFailed {
            id: p.id.clone(),
            detail: format!("{cause:?}"),
        });
    }

    let mut out = p.clone();
    let mut log = PurifyLog::default();
    for (i, s) in out.correct_pool.iter_mut().enumerate().filter(|(_, s)| s.alive) {
        if let Some(cause) = check_solution(sandbox, p, s, Check::MatchesExpected)? {
            s.alive = false;
            log.correct_deaths.push((i, cause));
        }
    }
    for (i, s) in out.incorrect_pool.iter_mut().enumerate().filter(|(_, s)| s.alive) {
        if let Some(cause) = check_solution(sandbox, p, s, Check::RunsCleanly)? {
            s.alive = false;
            log.incorrect_deaths.push((i, cause));
        }
    }
    Ok((out, log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSizes {
    pub id: String,
    pub correct_alive: usize,
    pub incorrect_alive: usize,
}

/// JSON curation report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub kept: usize,
    pub rejected: BTreeMap<String, usize>,
    /// Problems whose reference solution failed its own public tests.
    pub unusable: Vec<String>,
    pub pools: Vec<PoolSizes>,
}

impl CurationReport {
    pub fn record_rejections(&mut self, rejections: &[Rejection]) {
        for r in rejections {
            *self.rejected.entry(r.rule.name().to_string()).or_default() += 1;
        }
    }

    pub fn record_pools(&mut self, p: &Problem) {
        self.pools.push(PoolSizes {
            id: p.id.clone(),
            correct_alive: p.alive_correct().count(),
            incorrect_alive: p.alive_incorrect().count(),
        });
    }
}
