// SPDX-License-Identifier: Apache-2.0

//! The per-problem refinement loop: initial generation, evaluation, and
//! feedback-guided updates of the generator and command list.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::genkit::{
    apply_patches, dedupe_suite, default_generator_limits, ground_truth, materialize_inputs,
    pending_inputs, CommandRun, GenkitError, SkipReason,
};
use crate::judge::{
    evaluate, Comparison, ErrorLog, ErrorSource, EvalMode, EvaluationExport, FeedbackReport, JudgeError,
};
use crate::llm::{
    apply_commands, build_initial_prompt_for, build_refinement_prompt_for, compress_context, parse_generation,
    parse_refinement, ArtifactRole, Gateway, GatewayError, Message, TruncationPolicy,
};
use crate::model::{IterationState, Language, Problem, QualityMetrics};
use crate::sandbox::{Artifact, CompileOutcome, Limits, Sandbox, SandboxError};

/// Which comparison the loop evaluates with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    /// Checker when one was synthesized and compiles, string otherwise.
    #[default]
    Auto,
    String,
    Checker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub alpha: f64,
    pub beta: f64,
    pub n_max: u32,
    pub mode: LoopMode,
    pub compression_enabled: bool,
    /// Ask the model for a checker alongside the generator.
    pub synthesize_checker: bool,
    /// Extra model turns spent fixing a generator that does not compile.
    pub compile_repairs: u32,
    pub generator_language: Language,
    pub generator_limits: Limits,
    pub checker_limits: Limits,
    pub truncation: TruncationPolicy,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            alpha: 0.95,
            beta: 0.90,
            n_max: 3,
            mode: LoopMode::Auto,
            compression_enabled: true,
            synthesize_checker: false,
            compile_repairs: 2,
            generator_language: Language::Cpp,
            generator_limits: default_generator_limits(),
            checker_limits: default_generator_limits(),
            truncation: TruncationPolicy::default(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), String> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.alpha) {
            return Err(format!("alpha must be in (0, 1], got {}", self.alpha));
        }
        if !unit(self.beta) {
            return Err(format!("beta must be in (0, 1], got {}", self.beta));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoopError {
    #[error("empty command list")]
    EmptyCommandList,
    #[error("generator does not compile after {attempts} repair attempts:\n{diagnostics}")]
    GeneratorCompile { attempts: u32, diagnostics: String },
    #[error("no usable test case was produced")]
    EmptySuite,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Genkit(#[from] GenkitError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    ThresholdsMet,
    IterationCap,
    UnrecoverableError,
}

/// What happened to one batch of search/replace blocks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PatchLog {
    pub applied: Vec<usize>,
    pub skipped: Vec<(usize, SkipReason)>,
    /// Set when the patched program failed to compile and the edits were
    /// discarded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile_error: Option<String>,
}

/// One evaluated iteration as recorded in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub state: IterationState,
    pub mode: EvalMode,
    pub report: FeedbackReport,
    /// Per alive correct / incorrect solution, one pass bit per case.
    pub correct_pass: Vec<String>,
    pub incorrect_pass: Vec<String>,
    pub generator_patch: PatchLog,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checker_patch: Option<PatchLog>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unknown_replacements: Vec<String>,
}

impl Snapshot {
    /// The snapshot as a judge export, for analytics.
    pub fn export(&self, problem_id: &str) -> EvaluationExport {
        EvaluationExport {
            problem_id: problem_id.to_string(),
            mode: self.mode,
            num_cases: self.state.suite.len(),
            metrics: self.state.metrics.clone(),
            correct_pass: self.correct_pass.clone(),
            incorrect_pass: self.incorrect_pass.clone(),
            report: self.report.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub problem_id: String,
    pub alpha: f64,
    pub beta: f64,
    pub n_max: u32,
    pub snapshots: Vec<Snapshot>,
    pub termination: TerminationReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub llm_calls: u64,
}

impl LoopTrace {
    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn final_metrics(&self) -> Option<&QualityMetrics> {
        self.last().map(|s| &s.state.metrics)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(self).expect("trace serializes"))?;
        std::fs::rename(tmp, path)
    }

    /// Loads a previously completed trace; `None` if absent or unreadable.
    pub fn load(path: &Path) -> Option<LoopTrace> {
        let text = std::fs::read(path).ok()?;
        serde_json::from_slice(&text).ok()
    }
}

/// In-memory state of an iteration, including what is needed to continue.
#[derive(Clone)]
pub struct Working {
    pub state: IterationState,
    pub runs: Vec<CommandRun>,
    /// Generator and reference errors gathered while building the suite.
    pub build_errors: Vec<ErrorLog>,
    pub report: FeedbackReport,
    pub mode: EvalMode,
    pub correct_pass: Vec<String>,
    pub incorrect_pass: Vec<String>,
    pub history: Vec<Message>,
    pub checker_history: Vec<Message>,
    pub generator: Artifact,
    pub checker: Option<Artifact>,
    pub generator_patch: PatchLog,
    pub checker_patch: Option<PatchLog>,
    pub unknown_replacements: Vec<String>,
}

impl Working {
    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            state: self.state.clone(),
            mode: self.mode,
            report: self.report.without_timing(),
            correct_pass: self.correct_pass.clone(),
            incorrect_pass: self.incorrect_pass.clone(),
            generator_patch: self.generator_patch.clone(),
            checker_patch: self.checker_patch.clone(),
            unknown_replacements: self.unknown_replacements.clone(),
        }
    }
}

const REPAIR_NOTE: &str = "The generator produced by applying your search_replace_generator_blocks does not compile. \
Compiler output:\n{diagnostics}\n\nThe current generator source is:\n{source}\n\n\
Reply in the same JSON structure as before, with search_replace_generator_blocks that fix the compile error \
against the source above, and the full command_list.";

fn repair_message(diagnostics: &str, source: &str) -> Message {
    Message::user(crate::llm::prompt::fill_template(
        REPAIR_NOTE,
        &[("diagnostics", diagnostics), ("source", source)],
    ))
}

/// Single-turn history for the next refinement. The result depends only on
/// the problem and the current artifacts, so a step resumed from a saved
/// trace sends the same request as an uninterrupted run.
pub fn compress_history(history: &[Message], role: ArtifactRole, p: &Problem, state: &IterationState) -> Vec<Message> {
    if history.is_empty() {
        return Vec::new();
    }
    let source = match role {
        ArtifactRole::Generator => state.generator_source.as_str(),
        ArtifactRole::Checker => state.checker_source.as_deref().unwrap_or(""),
    };
    let commands: &[String] = match role {
        ArtifactRole::Generator => &state.commands,
        ArtifactRole::Checker => &[],
    };
    compress_context(role, p, source, commands, &state.constraints_summary)
}

pub struct Refiner<'a> {
    pub sandbox: &'a Sandbox,
    pub gateway: &'a Gateway,
    pub cfg: &'a LoopConfig,
}

fn compile(sandbox: &Sandbox, source: &str, lang: &Language) -> Result<Result<Artifact, String>, SandboxError> {
    Ok(match sandbox.compile(source, lang)? {
        CompileOutcome::Ready(a) => Ok(a),
        CompileOutcome::Failed(diag) => Err(diag),
    })
}

fn patch_log(outcome: &crate::genkit::PatchOutcome) -> PatchLog {
    PatchLog {
        applied: outcome.applied.clone(),
        skipped: outcome.skipped.clone(),
        compile_error: None,
    }
}

struct Suite {
    runs: Vec<CommandRun>,
    cases: Vec<crate::model::TestCase>,
    errors: Vec<ErrorLog>,
}

impl Refiner<'_> {
    fn build_suite(&self, p: &Problem, generator: &Artifact, commands: &[String], iteration: u32) -> Result<Suite, LoopError> {
        let runs = materialize_inputs(self.sandbox, generator, commands, self.cfg.generator_limits);
        let mut errors: Vec<ErrorLog> = runs
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                r.error.as_ref().map(|e| ErrorLog {
                    source: ErrorSource::Generator,
                    subject: r.command.clone(),
                    log: e.clone(),
                    command_index: Some(i),
                    input: None,
                    stdout: None,
                })
            })
            .collect();
        let truth = ground_truth(self.sandbox, p, &pending_inputs(&runs, iteration))?;
        errors.extend(truth.failures.into_iter().map(|f| ErrorLog {
            source: ErrorSource::Reference,
            subject: commands[f.command_index].clone(),
            log: f.detail,
            command_index: Some(f.command_index),
            input: Some(f.input),
            stdout: Some(f.stdout),
        }));
        Ok(Suite {
            runs,
            cases: dedupe_suite(truth.cases),
            errors,
        })
    }

    /// Asks for a checker and returns its source, compiled artifact, and
    /// the conversation so far. Failures leave the loop without a checker.
    fn initial_checker(&self, p: &Problem) -> Result<Option<(String, Artifact, Vec<Message>, PatchLog)>, LoopError> {
        let mut history = vec![Message::user(build_initial_prompt_for(ArtifactRole::Checker, p, ""))];
        let reply = match self.gateway.call(&history, parse_generation) {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(problem = %p.id, error = %e, "checker synthesis failed");
                return Ok(None);
            }
        };
        history.push(Message::assistant(reply.text));
        let outcome = apply_patches("", &reply.value.blocks);
        let mut log = patch_log(&outcome);
        match compile(self.sandbox, &outcome.patched_source, &self.cfg.generator_language)? {
            Ok(a) => Ok(Some((outcome.patched_source, a, history, log))),
            Err(diag) => {
                log.compile_error = Some(diag);
                tracing::warn!(problem = %p.id, "synthesized checker does not compile");
                Ok(None)
            }
        }
    }

    /// Initial generation: prompt, patch the seed generator, materialize
    /// commands and pair inputs with reference outputs. Not yet evaluated.
    pub fn run_initial(&self, p: &Problem, seed_generator: Option<&str>) -> Result<Working, LoopError> {
        let seed = seed_generator.unwrap_or("");
        let mut history = vec![Message::user(build_initial_prompt_for(ArtifactRole::Generator, p, seed))];
        let reply = self.gateway.call(&history, parse_generation)?;
        history.push(Message::assistant(reply.text));
        let mut response = reply.value;
        if response.commands.is_empty() {
            return Err(LoopError::EmptyCommandList);
        }

        let mut outcome = apply_patches(seed, &response.blocks);
        let generator_patch = patch_log(&outcome);
        let mut source = outcome.patched_source.clone();
        let mut repairs = 0;
        let generator = loop {
            match compile(self.sandbox, &source, &self.cfg.generator_language)? {
                Ok(a) => break a,
                Err(diag) if repairs < self.cfg.compile_repairs => {
                    repairs += 1;
                    tracing::info!(problem = %p.id, repairs, "asking for a generator compile fix");
                    history.push(repair_message(&diag, &source));
                    let fix = self.gateway.call(&history, parse_generation)?;
                    history.push(Message::assistant(fix.text));
                    outcome = apply_patches(&source, &fix.value.blocks);
                    source = outcome.patched_source.clone();
                    if !fix.value.commands.is_empty() {
                        response.commands = fix.value.commands;
                    }
                }
                Err(diag) => {
                    return Err(LoopError::GeneratorCompile {
                        attempts: repairs,
                        diagnostics: diag,
                    })
                }
            }
        };

        let (checker_source, checker, checker_history, checker_patch) = if self.cfg.synthesize_checker {
            match self.initial_checker(p)? {
                Some((src, a, h, log)) => (Some(src), Some(a), h, Some(log)),
                None => (None, None, Vec::new(), None),
            }
        } else {
            (None, None, Vec::new(), None)
        };

        let suite = self.build_suite(p, &generator, &response.commands, 0)?;
        Ok(Working {
            state: IterationState {
                iteration: 0,
                generator_source: source,
                checker_source,
                commands: response.commands,
                suite: suite.cases,
                constraints_summary: response.input_constraints_summary,
                metrics: QualityMetrics::default(),
            },
            runs: suite.runs,
            build_errors: suite.errors,
            report: FeedbackReport::default(),
            mode: EvalMode::String,
            correct_pass: Vec::new(),
            incorrect_pass: Vec::new(),
            history,
            checker_history,
            generator,
            checker,
            generator_patch,
            checker_patch,
            unknown_replacements: Vec::new(),
        })
    }

    /// Evaluates the suite and fills metrics, pass bits and the feedback
    /// report. An empty suite gets vacuous metrics and a report holding only
    /// the build errors.
    pub fn evaluate(&self, p: &Problem, w: &mut Working) -> Result<(), LoopError> {
        let checker = match self.cfg.mode {
            LoopMode::String => None,
            LoopMode::Auto | LoopMode::Checker => w.checker.clone(),
        };
        if self.cfg.mode == LoopMode::Checker && checker.is_none() {
            tracing::warn!(problem = %p.id, "checker mode requested but no checker is available; using string comparison");
        }
        let comparison = match &checker {
            Some(checker) => Comparison::Checker {
                checker,
                limits: self.cfg.checker_limits,
            },
            None => Comparison::String,
        };
        w.mode = comparison.mode();
        if w.state.suite.is_empty() {
            if p.alive_correct().next().is_none() {
                return Err(JudgeError::EmptyPool(crate::judge::Pool::Correct).into());
            }
            if p.alive_incorrect().next().is_none() {
                return Err(JudgeError::EmptyPool(crate::judge::Pool::Incorrect).into());
            }
            w.state.metrics = QualityMetrics {
                tpr: 1.0,
                tnr: 0.0,
                per_case_stats: Vec::new(),
            };
            w.correct_pass = vec![String::new(); p.alive_correct().count()];
            w.incorrect_pass = vec![String::new(); p.alive_incorrect().count()];
            w.report = FeedbackReport {
                error_logs: w.build_errors.clone(),
                ..Default::default()
            };
            return Ok(());
        }
        let eval = evaluate(self.sandbox, p, &w.state.suite, comparison)?;
        let export = EvaluationExport::new(&p.id, w.state.suite.len(), &eval);
        w.state.metrics = eval.metrics;
        w.correct_pass = export.correct_pass;
        w.incorrect_pass = export.incorrect_pass;
        let mut report = eval.report;
        let mut logs = w.build_errors.clone();
        logs.append(&mut report.error_logs);
        report.error_logs = logs;
        w.report = report;
        Ok(())
    }

    fn refine_checker(&self, p: &Problem, w: &Working) -> Result<(Option<String>, Option<Artifact>, Vec<Message>, Option<PatchLog>), LoopError> {
        let (Some(source), Some(artifact)) = (&w.state.checker_source, &w.checker) else {
            return Ok((None, None, Vec::new(), None));
        };
        let mut history = if self.cfg.compression_enabled {
            compress_history(&w.checker_history, ArtifactRole::Checker, p, &w.state)
        } else {
            w.checker_history.clone()
        };
        history.push(Message::user(build_refinement_prompt_for(
            ArtifactRole::Checker,
            &w.state,
            &w.runs,
            &w.report,
            &self.cfg.truncation,
        )));
        let reply = self.gateway.call(&history, parse_refinement)?;
        history.push(Message::assistant(reply.text));
        let outcome = apply_patches(source, &reply.value.blocks);
        let mut log = patch_log(&outcome);
        if outcome.applied.is_empty() {
            return Ok((Some(source.clone()), Some(artifact.clone()), history, Some(log)));
        }
        match compile(self.sandbox, &outcome.patched_source, &self.cfg.generator_language)? {
            Ok(a) => Ok((Some(outcome.patched_source), Some(a), history, Some(log))),
            Err(diag) => {
                log.compile_error = Some(diag);
                Ok((Some(source.clone()), Some(artifact.clone()), history, Some(log)))
            }
        }
    }

    /// One refinement: patch the generator, edit the command list, rebuild
    /// the suite from scratch. The result is not yet evaluated.
    pub fn step(&self, p: &Problem, w: &Working) -> Result<Working, LoopError> {
        let mut history = if self.cfg.compression_enabled {
            compress_history(&w.history, ArtifactRole::Generator, p, &w.state)
        } else {
            w.history.clone()
        };
        history.push(Message::user(build_refinement_prompt_for(
            ArtifactRole::Generator,
            &w.state,
            &w.runs,
            &w.report,
            &self.cfg.truncation,
        )));
        let reply = self.gateway.call(&history, parse_refinement)?;
        history.push(Message::assistant(reply.text));
        let response = reply.value;

        let outcome = apply_patches(&w.state.generator_source, &response.blocks);
        let mut generator_patch = patch_log(&outcome);
        let mut build_errors = Vec::new();
        let (source, generator) = if outcome.applied.is_empty() {
            (w.state.generator_source.clone(), w.generator.clone())
        } else {
            match compile(self.sandbox, &outcome.patched_source, &self.cfg.generator_language)? {
                Ok(a) => (outcome.patched_source, a),
                Err(diag) => {
                    build_errors.push(ErrorLog {
                        source: ErrorSource::Generator,
                        subject: "generator".into(),
                        log: format!("patched generator failed to compile, edits were discarded:\n{diag}"),
                        command_index: None,
                        input: None,
                        stdout: None,
                    });
                    generator_patch.compile_error = Some(diag);
                    (w.state.generator_source.clone(), w.generator.clone())
                }
            }
        };

        let update = apply_commands(&w.state.commands, &response.replace, &response.add);
        if !update.unknown_replacements.is_empty() {
            tracing::warn!(
                problem = %p.id,
                unknown = ?update.unknown_replacements,
                "replace_command_list entries match no current command"
            );
        }

        let (checker_source, checker, checker_history, checker_patch) = self.refine_checker(p, w)?;

        let iteration = w.state.iteration + 1;
        let suite = self.build_suite(p, &generator, &update.commands, iteration)?;
        build_errors.extend(suite.errors);
        Ok(Working {
            state: IterationState {
                iteration,
                generator_source: source,
                checker_source,
                commands: update.commands,
                suite: suite.cases,
                constraints_summary: w.state.constraints_summary.clone(),
                metrics: QualityMetrics::default(),
            },
            runs: suite.runs,
            build_errors,
            report: FeedbackReport::default(),
            mode: w.mode,
            correct_pass: Vec::new(),
            incorrect_pass: Vec::new(),
            history,
            checker_history,
            generator,
            checker,
            generator_patch,
            checker_patch,
            unknown_replacements: update.unknown_replacements,
        })
    }

    /// Rebuilds working state from a recorded snapshot. The conversation is
    /// restored in compressed form; generator runs are re-materialized.
    pub fn resume(&self, p: &Problem, snap: &Snapshot) -> Result<Working, LoopError> {
        let s = &snap.state;
        let generator = match compile(self.sandbox, &s.generator_source, &self.cfg.generator_language)? {
            Ok(a) => a,
            Err(diag) => {
                return Err(LoopError::GeneratorCompile {
                    attempts: 0,
                    diagnostics: diag,
                })
            }
        };
        let checker = match &s.checker_source {
            Some(src) => compile(self.sandbox, src, &self.cfg.generator_language)?.ok(),
            None => None,
        };
        let runs = materialize_inputs(self.sandbox, &generator, &s.commands, self.cfg.generator_limits);
        let history = compress_context(
            ArtifactRole::Generator,
            p,
            &s.generator_source,
            &s.commands,
            &s.constraints_summary,
        );
        let checker_history = match &s.checker_source {
            Some(src) => compress_context(ArtifactRole::Checker, p, src, &[], &s.constraints_summary),
            None => Vec::new(),
        };
        Ok(Working {
            state: s.clone(),
            runs,
            build_errors: Vec::new(),
            report: snap.report.clone(),
            mode: snap.mode,
            correct_pass: snap.correct_pass.clone(),
            incorrect_pass: snap.incorrect_pass.clone(),
            history,
            checker_history,
            generator,
            checker,
            generator_patch: snap.generator_patch.clone(),
            checker_patch: snap.checker_patch.clone(),
            unknown_replacements: snap.unknown_replacements.clone(),
        })
    }

    /// Extends a recorded trace by one refinement step and its evaluation.
    /// The iteration cap is not consulted.
    pub fn refine_once(&self, p: &Problem, trace: &LoopTrace) -> LoopTrace {
        let calls_before = self.gateway.calls();
        let mut out = trace.clone();
        let result = (|| {
            let last = trace.last().ok_or(LoopError::EmptySuite)?;
            let w = self.resume(p, last)?;
            let mut next = self.step(p, &w)?;
            self.evaluate(p, &mut next)?;
            Ok::<_, LoopError>(next.snapshot())
        })();
        out.llm_calls += self.gateway.calls() - calls_before;
        match result {
            Ok(snap) => {
                let met = !snap.state.suite.is_empty() && snap.state.metrics.meets(self.cfg.alpha, self.cfg.beta);
                out.snapshots.push(snap);
                out.error = None;
                out.termination = if met {
                    TerminationReason::ThresholdsMet
                } else {
                    TerminationReason::IterationCap
                };
            }
            Err(e) => {
                tracing::warn!(problem = %p.id, error = %e, "refinement step failed");
                out.termination = TerminationReason::UnrecoverableError;
                out.error = Some(e.to_string());
            }
        }
        out
    }

    /// Runs the loop to completion. Errors end the loop with
    /// `unrecoverable_error`; the last evaluated iteration is kept.
    pub fn run_loop(&self, p: &Problem, seed_generator: Option<&str>) -> LoopTrace {
        let calls_before = self.gateway.calls();
        let mut trace = LoopTrace {
            problem_id: p.id.clone(),
            alpha: self.cfg.alpha,
            beta: self.cfg.beta,
            n_max: self.cfg.n_max,
            snapshots: Vec::new(),
            termination: TerminationReason::UnrecoverableError,
            error: None,
            llm_calls: 0,
        };
        let result = self.drive(p, seed_generator, &mut trace);
        trace.llm_calls = self.gateway.calls() - calls_before;
        match result {
            Ok(reason) => trace.termination = reason,
            Err(e) => {
                tracing::warn!(problem = %p.id, error = %e, "loop ended with an error");
                trace.termination = TerminationReason::UnrecoverableError;
                trace.error = Some(e.to_string());
            }
        }
        trace
    }

    fn drive(&self, p: &Problem, seed: Option<&str>, trace: &mut LoopTrace) -> Result<TerminationReason, LoopError> {
        let mut w = self.run_initial(p, seed)?;
        loop {
            self.evaluate(p, &mut w)?;
            let m = &w.state.metrics;
            tracing::info!(
                problem = %p.id,
                iteration = w.state.iteration,
                cases = w.state.suite.len(),
                tpr = m.tpr,
                tnr = m.tnr,
                "iteration evaluated"
            );
            trace.snapshots.push(w.snapshot());
            if !w.state.suite.is_empty() && m.meets(self.cfg.alpha, self.cfg.beta) {
                return Ok(TerminationReason::ThresholdsMet);
            }
            if w.state.iteration >= self.cfg.n_max {
                if w.state.suite.is_empty() {
                    return Err(LoopError::EmptySuite);
                }
                return Ok(TerminationReason::IterationCap);
            }
            w = self.step(p, &w)?;
        }
    }
}
