// SPDX-License-Identifier: Apache-2.0

//! Client for an HTTP execution service.
//!
//! Each run is one `POST {endpoint}` with a JSON body:
//!
//! ```json
//! {"source": "...", "language": "cpp", "stdin": "...", "argv": [],
//!  "files": {"name": "..."}, "compile_only": false,
//!  "limits": {"time_ms": 1000, "memory_mib": 256, "output_cap": 65536}}
//! ```
//!
//! and the service answers with
//!
//! ```json
//! {"status": "ok|timeout|oom|nonzero_exit|compile_error", "stdout": "...",
//!  "stderr": "...", "exit_code": 0, "signal": null, "stdout_truncated": false,
//!  "timing": {"wall_ms": 12, "peak_memory_mib": 3.5}}
//! ```
//!
//! Byte fields use the same string-or-`{"b64": ...}` encoding as dataset
//! files. The bearer token is read from the environment variable named in
//! [`RemoteConfig::token_env`].

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    Artifact, ArtifactInner, Backend, CompileOutcome, ExecRecord, ExecSpec, ExitStatus, Outcome,
    SandboxError,
};
use crate::model::{Bytes, Language};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub request_timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    120_000
}

#[derive(Debug, Serialize)]
struct RunRequest<'a> {
    source: &'a str,
    language: &'a str,
    stdin: &'a Bytes,
    argv: &'a [String],
    files: BTreeMap<&'a str, &'a Bytes>,
    compile_only: bool,
    limits: RequestLimits,
}

#[derive(Debug, Serialize)]
struct RequestLimits {
    time_ms: u64,
    memory_mib: u64,
    output_cap: usize,
}

#[derive(Debug, Deserialize)]
struct RunResponse {
    status: String,
    #[serde(default)]
    stdout: Bytes,
    #[serde(default)]
    stderr: Bytes,
    #[serde(default)]
    exit_code: Option<i32>,
    #[serde(default)]
    signal: Option<i32>,
    #[serde(default)]
    stdout_truncated: bool,
    #[serde(default)]
    timing: Timing,
}

#[derive(Debug, Default, Deserialize)]
struct Timing {
    #[serde(default)]
    wall_ms: u64,
    #[serde(default)]
    peak_memory_mib: f64,
}

pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    token: Option<String>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let token = config
            .token_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.request_timeout_ms))
            .build();
        RemoteBackend {
            config,
            agent,
            token,
        }
    }

    fn post(&self, req: &RunRequest<'_>) -> Result<RunResponse, SandboxError> {
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.token {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        let body = serde_json::to_value(req).map_err(|e| SandboxError::Remote(e.to_string()))?;
        let resp = call
            .send_json(body)
            .map_err(|e| SandboxError::Remote(e.to_string()))?;
        resp.into_json::<RunResponse>()
            .map_err(|e| SandboxError::Remote(format!("malformed response: {e}")))
    }
}

impl Backend for RemoteBackend {
    fn toolchain_version(&self, _language: &Language) -> Result<String, SandboxError> {
        Ok(format!("remote:{}", self.config.endpoint))
    }

    fn compile(
        &self,
        key: &str,
        source: &str,
        language: &Language,
    ) -> Result<CompileOutcome, SandboxError> {
        let empty = Bytes::default();
        let resp = self.post(&RunRequest {
            source,
            language: language.tag(),
            stdin: &empty,
            argv: &[],
            files: BTreeMap::new(),
            compile_only: true,
            limits: RequestLimits {
                time_ms: 60_000,
                memory_mib: 4096,
                output_cap: 1 << 20,
            },
        })?;
        match resp.status.as_str() {
            "compile_error" => Ok(CompileOutcome::Failed(resp.stderr.to_text())),
            "unsupported_language" => Err(SandboxError::ToolchainMissing(language.tag().into())),
            _ => Ok(CompileOutcome::Ready(Artifact(Arc::new(ArtifactInner {
                key: key.to_string(),
                language: language.clone(),
                source: source.to_string(),
                command: Vec::new(),
                _dir: None,
            })))),
        }
    }

    fn run(&self, spec: &ExecSpec) -> ExecRecord {
        let req = RunRequest {
            source: spec.program.source(),
            language: spec.program.language().tag(),
            stdin: &spec.stdin,
            argv: &spec.argv,
            files: spec.files.iter().map(|(n, c)| (n.as_str(), c)).collect(),
            compile_only: false,
            limits: RequestLimits {
                time_ms: spec.time_limit,
                memory_mib: spec.memory_limit,
                output_cap: spec.output_cap,
            },
        };
        let resp = match self.post(&req) {
            Ok(r) => r,
            Err(e) => return ExecRecord::spawn_failure(e.to_string()),
        };
        let outcome = match resp.status.as_str() {
            "ok" => Outcome::Ok,
            "timeout" => Outcome::Timeout,
            "oom" => Outcome::Oom,
            "nonzero_exit" | "runtime_error" => Outcome::NonzeroExit,
            other => {
                return ExecRecord::spawn_failure(format!("remote status {other:?}"));
            }
        };
        let exit_status = match (resp.exit_code, resp.signal) {
            (_, Some(sig)) => ExitStatus::Signal(sig),
            (Some(code), None) => ExitStatus::Code(code),
            (None, None) if outcome == Outcome::Ok => ExitStatus::Code(0),
            (None, None) => ExitStatus::Unknown,
        };
        let mut stdout = resp.stdout;
        let mut truncated = resp.stdout_truncated;
        if stdout.len() > spec.output_cap {
            stdout.0.truncate(spec.output_cap);
            truncated = true;
        }
        let mut stderr = resp.stderr;
        stderr.0.truncate(spec.output_cap);
        ExecRecord {
            stdout,
            stdout_truncated: truncated,
            stderr,
            exit_status,
            wall_time: resp.timing.wall_ms,
            peak_memory: resp.timing.peak_memory_mib,
            outcome,
        }
    }
}
