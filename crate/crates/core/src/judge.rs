// SPDX-License-Identifier: Apache-2.0

//! Judging of solution pools against a test suite: output comparison,
//! TPR/TNR metrics and the feedback report that drives refinement.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Bytes, CaseStat, Problem, QualityMetrics, Solution, TestCase, Verdict, VerdictKind};
use crate::sandbox::{Artifact, CompileOutcome, ExecRecord, ExecSpec, Limits, Outcome, Sandbox, SandboxError};

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("no test cases")]
    EmptySuite,
    #[error("no alive solutions in the {0} pool")]
    EmptyPool(Pool),
    #[error("cannot aggregate an empty list of metrics")]
    NothingToAggregate,
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    Correct,
    Incorrect,
}

impl std::fmt::Display for Pool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pool::Correct => "correct",
            Pool::Incorrect => "incorrect",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    String,
    Checker,
}

/// How outputs are compared during one evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Comparison<'a> {
    String,
    Checker { checker: &'a Artifact, limits: Limits },
}

impl Comparison<'_> {
    pub fn mode(&self) -> EvalMode {
        match self {
            Comparison::String => EvalMode::String,
            Comparison::Checker { .. } => EvalMode::Checker,
        }
    }
}

fn trim_line_end(line: &[u8]) -> &[u8] {
    let end = line
        .iter()
        .rposition(|b| !matches!(b, b' ' | b'\t' | b'\r'))
        .map_or(0, |i| i + 1);
    &line[..end]
}

/// Output lines with trailing whitespace removed and trailing blank lines
/// dropped.
pub fn normalized_lines(out: &[u8]) -> Vec<&[u8]> {
    let mut lines: Vec<&[u8]> = out.split(|&b| b == b'\n').map(trim_line_end).collect();
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines
}

pub fn compare_string(expected: &[u8], actual: &[u8]) -> VerdictKind {
    if normalized_lines(expected) == normalized_lines(actual) {
        VerdictKind::Accepted
    } else {
        VerdictKind::WrongAnswer
    }
}

fn checker_spec(
    checker: &Artifact,
    input: &Bytes,
    expected: &Bytes,
    actual: &Bytes,
    limits: Limits,
) -> ExecSpec {
    ExecSpec::new(checker, Bytes::default(), limits)
        .with_file("input.txt", input.clone())
        .with_file("output.txt", actual.clone())
        .with_file("answer.txt", expected.clone())
        .with_argv(vec![
            "input.txt".into(),
            "output.txt".into(),
            "answer.txt".into(),
        ])
}

/// Maps a checker run onto a verdict using the testlib exit-code protocol.
fn checker_verdict(rec: &ExecRecord) -> Verdict {
    use crate::sandbox::ExitStatus::Code;
    match (rec.outcome, rec.exit_status) {
        (Outcome::Ok, Code(0)) => Verdict::new(VerdictKind::Accepted),
        (Outcome::NonzeroExit, Code(1 | 2)) => {
            Verdict::with_detail(VerdictKind::WrongAnswer, rec.stderr.to_text().trim().to_string())
        }
        _ => Verdict::with_detail(VerdictKind::CheckerError, rec.describe()),
    }
}

/// Checker comparison. Outputs that already match as strings are accepted
/// without running the checker.
pub fn compare_checker(
    sandbox: &Sandbox,
    checker: &Artifact,
    input: &Bytes,
    expected: &Bytes,
    actual: &Bytes,
    limits: Limits,
) -> Verdict {
    if compare_string(expected.as_slice(), actual.as_slice()).is_accepted() {
        return Verdict::new(VerdictKind::Accepted);
    }
    checker_verdict(&sandbox.run(&checker_spec(checker, input, expected, actual, limits)))
}

fn exec_verdict(rec: &ExecRecord) -> Option<Verdict> {
    let kind = match rec.outcome {
        Outcome::Ok if rec.stdout_truncated => {
            return Some(Verdict {
                kind: VerdictKind::WrongAnswer,
                detail: "output limit exceeded".into(),
                wall_time: rec.wall_time,
                peak_memory: rec.peak_memory,
            })
        }
        Outcome::Ok => return None,
        Outcome::Timeout => VerdictKind::TimeLimit,
        Outcome::Oom => VerdictKind::MemoryLimit,
        Outcome::NonzeroExit => VerdictKind::RuntimeError,
        Outcome::SpawnFailure => VerdictKind::InfrastructureError,
    };
    let mut detail = rec.stderr.to_text();
    detail.truncate(detail.floor_char_boundary(2048));
    Some(Verdict {
        kind,
        detail,
        wall_time: rec.wall_time,
        peak_memory: rec.peak_memory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionOutcome {
    pub pool: Pool,
    /// Index into the problem's pool (dead members keep their slots).
    pub index: usize,
    pub per_case: Vec<Verdict>,
    pub overall: Overall,
}

impl SolutionOutcome {
    pub fn new(pool: Pool, index: usize, per_case: Vec<Verdict>) -> Self {
        let overall = if per_case.iter().all(|v| v.kind.is_accepted()) {
            Overall::Accepted
        } else {
            Overall::Rejected
        };
        SolutionOutcome {
            pool,
            index,
            per_case,
            overall,
        }
    }

    pub fn first_failure(&self) -> Option<(usize, &Verdict)> {
        self.per_case
            .iter()
            .enumerate()
            .find(|(_, v)| !v.kind.is_accepted())
    }

    /// Per-case pass bits as a `'1'`/`'0'` string.
    pub fn pass_bits(&self) -> String {
        self.per_case
            .iter()
            .map(|v| if v.kind.is_accepted() { '1' } else { '0' })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSource {
    Generator,
    Reference,
    Checker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorLog {
    pub source: ErrorSource,
    /// Command string or case label the log is about.
    pub subject: String,
    pub log: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<Bytes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stdout: Option<Bytes>,
}

/// A correct solution rejected by the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseNegative {
    pub solution_index: usize,
    pub source: String,
    pub case_index: usize,
    pub verdict: Verdict,
    pub stdout: Bytes,
}

/// An incorrect solution the suite failed to reject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsePositive {
    pub solution_index: usize,
    pub source: String,
    /// Case shown as an example of the unexposed bug.
    pub case_index: usize,
    pub stdout: Bytes,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub false_negatives: Vec<FalseNegative>,
    pub false_positives: Vec<FalsePositive>,
    pub error_logs: Vec<ErrorLog>,
}

impl FeedbackReport {
    pub fn is_empty(&self) -> bool {
        self.false_negatives.is_empty() && self.false_positives.is_empty() && self.error_logs.is_empty()
    }

    /// Copy with wall time and memory zeroed in every verdict.
    pub fn without_timing(&self) -> FeedbackReport {
        let mut out = self.clone();
        for f in &mut out.false_negatives {
            f.verdict.wall_time = 0;
            f.verdict.peak_memory = 0.0;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mode: EvalMode,
    pub outcomes: Vec<SolutionOutcome>,
    pub metrics: QualityMetrics,
    pub report: FeedbackReport,
}

/// Computes TPR/TNR and per-case counts from finished outcomes.
pub fn metrics_from_outcomes(outcomes: &[SolutionOutcome], n_cases: usize) -> QualityMetrics {
    let mut correct = (0usize, 0usize);
    let mut incorrect = (0usize, 0usize);
    let mut stats: Vec<CaseStat> = (0..n_cases)
        .map(|case_index| CaseStat {
            case_index,
            pass_count_correct: 0,
            fail_count_incorrect: 0,
        })
        .collect();
    for o in outcomes {
        match o.pool {
            Pool::Correct => {
                correct.1 += 1;
                if o.overall == Overall::Accepted {
                    correct.0 += 1;
                }
                for (s, v) in stats.iter_mut().zip(&o.per_case) {
                    if v.kind.is_accepted() {
                        s.pass_count_correct += 1;
                    }
                }
            }
            Pool::Incorrect => {
                incorrect.1 += 1;
                if o.overall == Overall::Rejected {
                    incorrect.0 += 1;
                }
                for (s, v) in stats.iter_mut().zip(&o.per_case) {
                    if !v.kind.is_accepted() {
                        s.fail_count_incorrect += 1;
                    }
                }
            }
        }
    }
    QualityMetrics {
        tpr: ratio(correct.0, correct.1),
        tnr: ratio(incorrect.0, incorrect.1),
        per_case_stats: stats,
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

struct Candidate<'a> {
    pool: Pool,
    index: usize,
    solution: &'a Solution,
    artifact: Result<Artifact, String>,
}

/// Runs every alive solution on every case and scores the grid.
pub fn evaluate(
    sandbox: &Sandbox,
    p: &Problem,
    suite: &[TestCase],
    comparison: Comparison<'_>,
) -> Result<Evaluation, JudgeError> {
    if suite.is_empty() {
        return Err(JudgeError::EmptySuite);
    }
    if p.alive_correct().next().is_none() {
        return Err(JudgeError::EmptyPool(Pool::Correct));
    }
    if p.alive_incorrect().next().is_none() {
        return Err(JudgeError::EmptyPool(Pool::Incorrect));
    }

    let mut candidates = Vec::new();
    let pools = [(Pool::Correct, &p.correct_pool), (Pool::Incorrect, &p.incorrect_pool)];
    for (pool, members) in pools {
        for (index, solution) in members.iter().enumerate().filter(|(_, s)| s.alive) {
            let artifact = match sandbox.compile(&solution.source, &solution.language)? {
                CompileOutcome::Ready(a) => Ok(a),
                CompileOutcome::Failed(diag) => Err(diag),
            };
            candidates.push(Candidate {
                pool,
                index,
                solution,
                artifact,
            });
        }
    }

    let limits = Limits::new(p.time_limit, p.memory_limit);
    let mut specs = Vec::new();
    for cand in &candidates {
        if let Ok(a) = &cand.artifact {
            for case in suite {
                specs.push(ExecSpec::new(a, case.input.clone(), limits));
            }
        }
    }
    let mut records = sandbox.run_batch(&specs, sandbox.workers()).into_iter();

    // (candidate, case) -> verdict, with checker work deferred.
    let mut grid: Vec<Vec<Option<Verdict>>> = Vec::with_capacity(candidates.len());
    let mut stdouts: Vec<Vec<Bytes>> = Vec::with_capacity(candidates.len());
    let mut pending = Vec::new();
    for (ci, cand) in candidates.iter().enumerate() {
        let mut row = Vec::with_capacity(suite.len());
        let mut outs = Vec::with_capacity(suite.len());
        match &cand.artifact {
            Err(diag) => {
                for _ in suite {
                    row.push(Some(Verdict::with_detail(VerdictKind::CompileError, diag.clone())));
                    outs.push(Bytes::default());
                }
            }
            Ok(_) => {
                for (k, case) in suite.iter().enumerate() {
                    let rec = records.next().expect("one record per spec");
                    let verdict = exec_verdict(&rec).or_else(|| {
                        let kind = compare_string(case.expected_output.as_slice(), rec.stdout.as_slice());
                        match (kind, comparison) {
                            (VerdictKind::Accepted, _) | (_, Comparison::String) => Some(Verdict {
                                kind,
                                detail: String::new(),
                                wall_time: rec.wall_time,
                                peak_memory: rec.peak_memory,
                            }),
                            (_, Comparison::Checker { .. }) => {
                                pending.push((ci, k));
                                None
                            }
                        }
                    });
                    row.push(verdict);
                    outs.push(rec.stdout);
                }
            }
        }
        grid.push(row);
        stdouts.push(outs);
    }

    let mut checker_logs = Vec::new();
    if let Comparison::Checker { checker, limits } = comparison {
        let specs: Vec<ExecSpec> = pending
            .iter()
            .map(|&(ci, k)| {
                checker_spec(checker, &suite[k].input, &suite[k].expected_output, &stdouts[ci][k], limits)
            })
            .collect();
        let results = sandbox.run_batch(&specs, sandbox.workers());
        let mut logged = BTreeSet::new();
        for (&(ci, k), rec) in pending.iter().zip(results) {
            let v = checker_verdict(&rec);
            if v.kind == VerdictKind::CheckerError && logged.insert(k) {
                checker_logs.push(ErrorLog {
                    source: ErrorSource::Checker,
                    subject: format!("case {k}"),
                    log: v.detail.clone(),
                    command_index: suite[k].provenance.command_index,
                    input: Some(suite[k].input.clone()),
                    stdout: Some(stdouts[ci][k].clone()),
                });
            }
            grid[ci][k] = Some(v);
        }
    }

    let outcomes: Vec<SolutionOutcome> = candidates
        .iter()
        .zip(grid)
        .map(|(cand, row)| {
            SolutionOutcome::new(
                cand.pool,
                cand.index,
                row.into_iter().map(|v| v.expect("verdict resolved")).collect(),
            )
        })
        .collect();

    let metrics = metrics_from_outcomes(&outcomes, suite.len());

    let mut report = FeedbackReport {
        error_logs: checker_logs,
        ..Default::default()
    };
    for ((o, cand), outs) in outcomes.iter().zip(&candidates).zip(&stdouts) {
        match (o.pool, o.overall) {
            (Pool::Correct, Overall::Rejected) => {
                let (k, v) = o.first_failure().expect("rejected has a failure");
                report.false_negatives.push(FalseNegative {
                    solution_index: o.index,
                    source: cand.solution.source.clone(),
                    case_index: k,
                    verdict: v.clone(),
                    stdout: outs[k].clone(),
                });
            }
            (Pool::Incorrect, Overall::Accepted) => {
                report.false_positives.push(FalsePositive {
                    solution_index: o.index,
                    source: cand.solution.source.clone(),
                    case_index: 0,
                    stdout: outs[0].clone(),
                });
            }
            _ => {}
        }
    }

    Ok(Evaluation {
        mode: comparison.mode(),
        outcomes,
        metrics,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean over problems.
    #[default]
    Macro,
    /// Pooled over all solutions of all problems.
    Micro,
}

/// Dataset-level TPR/TNR as an unweighted mean over problems.
pub fn aggregate_dataset(per_problem: &[QualityMetrics]) -> Result<(f64, f64), JudgeError> {
    if per_problem.is_empty() {
        return Err(JudgeError::NothingToAggregate);
    }
    let n = per_problem.len() as f64;
    let tpr = per_problem.iter().map(|m| m.tpr).sum::<f64>() / n;
    let tnr = per_problem.iter().map(|m| m.tnr).sum::<f64>() / n;
    Ok((tpr, tnr))
}

/// Solution-weighted variant over full evaluations.
pub fn aggregate_micro(evals: &[Evaluation]) -> Result<(f64, f64), JudgeError> {
    if evals.is_empty() {
        return Err(JudgeError::NothingToAggregate);
    }
    let mut c = (0usize, 0usize);
    let mut i = (0usize, 0usize);
    for o in evals.iter().flat_map(|e| &e.outcomes) {
        match o.pool {
            Pool::Correct => {
                c.1 += 1;
                c.0 += usize::from(o.overall == Overall::Accepted);
            }
            Pool::Incorrect => {
                i.1 += 1;
                i.0 += usize::from(o.overall == Overall::Rejected);
            }
        }
    }
    Ok((ratio(c.0, c.1), ratio(i.0, i.1)))
}

/// `0.8937` -> `"89.37%"`.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

/// Serializable per-problem evaluation export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationExport {
    pub problem_id: String,
    pub mode: EvalMode,
    pub num_cases: usize,
    pub metrics: QualityMetrics,
    /// Per alive correct solution, one pass bit per case.
    pub correct_pass: Vec<String>,
    /// Per alive incorrect solution, one pass bit per case.
    pub incorrect_pass: Vec<String>,
    pub report: FeedbackReport,
}

impl EvaluationExport {
    pub fn new(problem_id: &str, num_cases: usize, eval: &Evaluation) -> Self {
        let bits = |pool| {
            eval.outcomes
                .iter()
                .filter(|o| o.pool == pool)
                .map(SolutionOutcome::pass_bits)
                .collect()
        };
        EvaluationExport {
            problem_id: problem_id.to_string(),
            mode: eval.mode,
            num_cases,
            metrics: eval.metrics.clone(),
            correct_pass: bits(Pool::Correct),
            incorrect_pass: bits(Pool::Incorrect),
            report: eval.report.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_newline_is_ignored() {
        assert_eq!(compare_string(b"5\n", b"5"), VerdictKind::Accepted);
    }

    #[test]
    fn different_value_is_wrong() {
        assert_eq!(compare_string(b"5\n", b"6\n"), VerdictKind::WrongAnswer);
    }

    #[test]
    fn trailing_spaces_and_blank_lines_are_ignored() {
        assert_eq!(compare_string(b"a b \n", b"a b\n"), VerdictKind::Accepted);
        assert_eq!(compare_string(b"a\r\nb\r\n", b"a\nb\n\n\n"), VerdictKind::Accepted);
        assert_eq!(compare_string(b"a  b\n", b"a b\n"), VerdictKind::WrongAnswer);
        assert_eq!(compare_string(b"\na\n", b"a\n"), VerdictKind::WrongAnswer);
    }

    fn outcome(pool: Pool, index: usize, pass: &[bool]) -> SolutionOutcome {
        SolutionOutcome::new(
            pool,
            index,
            pass.iter()
                .map(|&ok| {
                    Verdict::new(if ok {
                        VerdictKind::Accepted
                    } else {
                        VerdictKind::WrongAnswer
                    })
                })
                .collect(),
        )
    }

    #[test]
    fn two_of_three_correct_accepted() {
        let outcomes = vec![
            outcome(Pool::Correct, 0, &[true, true]),
            outcome(Pool::Correct, 1, &[true, false]),
            outcome(Pool::Correct, 2, &[true, true]),
            outcome(Pool::Incorrect, 0, &[false, true]),
        ];
        let m = metrics_from_outcomes(&outcomes, 2);
        assert_eq!(m.tpr, 2.0 / 3.0);
        assert_eq!(m.tnr, 1.0);
        assert_eq!(m.per_case_stats[1].pass_count_correct, 2);
        assert_eq!(m.per_case_stats[0].fail_count_incorrect, 1);
    }

    #[test]
    fn macro_average_and_format() {
        let m = |tpr, tnr| QualityMetrics {
            tpr,
            tnr,
            per_case_stats: vec![],
        };
        assert_eq!(aggregate_dataset(&[m(1.0, 1.0), m(0.5, 0.5)]).unwrap(), (0.75, 0.75));
        assert_eq!(aggregate_dataset(&[m(0.3, 0.7)]).unwrap(), (0.3, 0.7));
        assert!(aggregate_dataset(&[]).is_err());
        assert_eq!(format_percent(0.8937), "89.37%");
    }

    #[test]
    fn overall_follows_every_case() {
        let o = outcome(Pool::Incorrect, 0, &[true, true, false]);
        assert_eq!(o.overall, Overall::Rejected);
        assert_eq!(o.first_failure().unwrap().0, 2);
        assert_eq!(o.pass_bits(), "110");
    }
}
