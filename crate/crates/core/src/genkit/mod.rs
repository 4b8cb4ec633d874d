// SPDX-License-Identifier: Apache-2.0

//! Generator and checker artifacts: search/replace patching, command
//! execution, input materialization and reference outputs.

pub mod command;
pub mod patch;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::model::{Bytes, Language, Problem, TestCase};
use crate::sandbox::{Artifact, CompileOutcome, ExecSpec, Limits, Sandbox, SandboxError};

pub use command::{generator_args, normalize, tokenize, CommandError, GENERATOR_PROGRAM};
pub use patch::{apply_patches, parse_block, parse_blocks, BlockError, PatchBlock, PatchOutcome, SkipReason};

/// Bundled testlib-compatible header, placed on the include path of every
/// C++ compilation.
pub const TESTLIB_H: &str = include_str!("../../assets/testlib.h");

#[derive(Debug, thiserror::Error)]
pub enum GenkitError {
    #[error("generator failed to compile:\n{0}")]
    GeneratorCompile(String),
    #[error("reference solution failed to compile:\n{0}")]
    ReferenceCompile(String),
    #[error("problem has no reference solution")]
    NoReference,
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// Default limits for generator runs: 10 s and 1 GiB.
pub fn default_generator_limits() -> Limits {
    Limits::new(10_000, 1024)
}

pub fn compile_generator(
    sandbox: &Sandbox,
    source: &str,
    language: &Language,
) -> Result<Artifact, GenkitError> {
    match sandbox.compile(source, language)? {
        CompileOutcome::Ready(a) => Ok(a),
        CompileOutcome::Failed(diag) => Err(GenkitError::GeneratorCompile(diag)),
    }
}

/// Result of running one generator command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRun {
    pub command: String,
    /// Zero or one input: each invocation yields exactly one test input.
    pub inputs: Vec<Bytes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs every command once against the compiled generator. Failures are
/// recorded per command and never abort the batch.
pub fn materialize_inputs(
    sandbox: &Sandbox,
    generator: &Artifact,
    commands: &[String],
    limits: Limits,
) -> Vec<CommandRun> {
    let parsed: Vec<Result<Vec<String>, CommandError>> =
        commands.iter().map(|c| generator_args(c)).collect();
    let specs: Vec<ExecSpec> = parsed
        .iter()
        .filter_map(|p| p.as_ref().ok())
        .map(|args| ExecSpec::new(generator, Bytes::default(), limits).with_argv(args.clone()))
        .collect();
    let mut records = sandbox.run_batch(&specs, sandbox.workers()).into_iter();

    commands
        .iter()
        .zip(parsed)
        .map(|(cmd, args)| {
            let command = cmd.clone();
            if let Err(e) = args {
                return CommandRun {
                    command,
                    inputs: Vec::new(),
                    error: Some(format!("invalid command: {e}")),
                };
            }
            let rec = records.next().expect("one record per valid command");
            if !rec.succeeded() {
                CommandRun {
                    command,
                    inputs: Vec::new(),
                    error: Some(format!("generator failed: {}", rec.describe())),
                }
            } else if rec.stdout_truncated {
                CommandRun {
                    command,
                    inputs: Vec::new(),
                    error: Some(format!(
                        "generated input exceeds the {} byte cap",
                        limits.output_cap
                    )),
                }
            } else {
                CommandRun {
                    command,
                    inputs: vec![rec.stdout],
                    error: None,
                }
            }
        })
        .collect()
}

/// An input waiting for its reference output.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingInput {
    pub input: Bytes,
    pub command_index: usize,
    pub iteration: u32,
}

/// Flattens command runs into pending inputs, keeping command positions.
pub fn pending_inputs(runs: &[CommandRun], iteration: u32) -> Vec<PendingInput> {
    runs.iter()
        .enumerate()
        .flat_map(|(i, run)| {
            run.inputs.iter().map(move |input| PendingInput {
                input: input.clone(),
                command_index: i,
                iteration,
            })
        })
        .collect()
}

/// The reference solution could not produce an output for an input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFailure {
    pub input: Bytes,
    pub command_index: usize,
    pub stdout: Bytes,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub cases: Vec<TestCase>,
    pub failures: Vec<ReferenceFailure>,
}

pub fn compile_reference(sandbox: &Sandbox, p: &Problem) -> Result<Artifact, GenkitError> {
    let reference = p.reference_solution.as_ref().ok_or(GenkitError::NoReference)?;
    match sandbox.compile(&reference.source, &reference.language)? {
        CompileOutcome::Ready(a) => Ok(a),
        CompileOutcome::Failed(diag) => Err(GenkitError::ReferenceCompile(diag)),
    }
}

/// Pairs each input with the reference solution's output under the problem's
/// limits. Inputs the reference cannot handle are dropped and reported.
pub fn ground_truth(
    sandbox: &Sandbox,
    p: &Problem,
    inputs: &[PendingInput],
) -> Result<GroundTruth, GenkitError> {
    if inputs.is_empty() {
        return Ok(GroundTruth::default());
    }
    let reference = compile_reference(sandbox, p)?;
    let limits = Limits::new(p.time_limit, p.memory_limit);
    let specs: Vec<ExecSpec> = inputs
        .iter()
        .map(|pi| ExecSpec::new(&reference, pi.input.clone(), limits))
        .collect();
    let records = sandbox.run_batch(&specs, sandbox.workers());

    let mut out = GroundTruth::default();
    for (pi, rec) in inputs.iter().zip(records) {
        if rec.succeeded() && !rec.stdout_truncated {
            out.cases.push(TestCase::generated(
                pi.input.clone(),
                rec.stdout,
                pi.command_index,
                pi.iteration,
            ));
        } else {
            let detail = if rec.stdout_truncated {
                "reference output exceeds the output cap".to_string()
            } else {
                rec.describe()
            };
            out.failures.push(ReferenceFailure {
                input: pi.input.clone(),
                command_index: pi.command_index,
                stdout: rec.stdout,
                detail,
            });
        }
    }
    Ok(out)
}

/// Drops cases whose input bytes repeat an earlier case.
pub fn dedupe_suite(suite: Vec<TestCase>) -> Vec<TestCase> {
    let mut seen = HashSet::new();
    suite
        .into_iter()
        .filter(|c| seen.insert(c.input.clone()))
        .collect()
}
