// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    hex_digest, Artifact, ArtifactInner, Backend, CompileOutcome, ExecRecord, ExecSpec,
    ExitStatus, Outcome, SandboxError,
};
use crate::model::{Bytes, Language};

/// How to build and launch programs of one language.
///
/// Templates are split on whitespace and then have `{src}`, `{exe}`, `{dir}`
/// and `{include}` substituted per token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toolchain {
    pub source_file: String,
    #[serde(default)]
    pub compile: Option<String>,
    pub run: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ToolchainTable(pub BTreeMap<String, Toolchain>);

impl Default for ToolchainTable {
    fn default() -> Self {
        let mut table = BTreeMap::new();
        table.insert(
            "cpp".to_string(),
            Toolchain {
                source_file: "main.cpp".into(),
                compile: Some("g++ -O2 -std=gnu++17 -I{include} -o {exe} {src}".into()),
                run: "{exe}".into(),
            },
        );
        table.insert(
            "python".to_string(),
            Toolchain {
                source_file: "main.py".into(),
                compile: Some("python3 -m py_compile {src}".into()),
                run: "python3 {src}".into(),
            },
        );
        table.insert(
            "java".to_string(),
            Toolchain {
                source_file: "Main.java".into(),
                compile: Some("javac -d {dir} {src}".into()),
                run: "java -Xss64m -cp {dir} Main".into(),
            },
        );
        ToolchainTable(table)
    }
}

pub struct LocalBackend {
    table: ToolchainTable,
    root: tempfile::TempDir,
    include_dir: PathBuf,
    compile_time_ms: u64,
    compile_memory_mib: u64,
    versions: Mutex<HashMap<String, String>>,
}

impl LocalBackend {
    pub fn new(table: ToolchainTable) -> Result<Self, SandboxError> {
        let root = tempfile::Builder::new().prefix("tcforge-sandbox-").tempdir()?;
        let include_dir = super::write_include_dir(root.path())?;
        std::fs::create_dir_all(root.path().join("runs"))?;
        std::fs::create_dir_all(root.path().join("artifacts"))?;
        Ok(LocalBackend {
            table,
            root,
            include_dir,
            compile_time_ms: 60_000,
            compile_memory_mib: 4096,
            versions: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_compile_limits(mut self, time_ms: u64, memory_mib: u64) -> Self {
        self.compile_time_ms = time_ms;
        self.compile_memory_mib = memory_mib;
        self
    }

    fn toolchain(&self, language: &Language) -> Result<&Toolchain, SandboxError> {
        self.table
            .0
            .get(language.tag())
            .ok_or_else(|| SandboxError::ToolchainMissing(language.tag().to_string()))
    }
}

fn expand(template: &str, vars: &[(&str, &Path)]) -> Vec<String> {
    template
        .split_whitespace()
        .map(|tok| {
            let mut out = tok.to_string();
            for (name, value) in vars {
                out = out.replace(&format!("{{{name}}}"), &value.to_string_lossy());
            }
            out
        })
        .collect()
}

impl Backend for LocalBackend {
    fn toolchain_version(&self, language: &Language) -> Result<String, SandboxError> {
        let mut cache = self.versions.lock().unwrap();
        if let Some(v) = cache.get(language.tag()) {
            return Ok(v.clone());
        }
        let tc = self.toolchain(language)?;
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(tc).expect("toolchain serializes"));
        let v = hex_digest(hasher);
        cache.insert(language.tag().to_string(), v.clone());
        Ok(v)
    }

    fn compile(
        &self,
        key: &str,
        source: &str,
        language: &Language,
    ) -> Result<CompileOutcome, SandboxError> {
        let tc = self.toolchain(language)?;
        let dir = tempfile::Builder::new()
            .prefix(&format!("{}-", &key[..12.min(key.len())]))
            .tempdir_in(self.root.path().join("artifacts"))?;
        let src = dir.path().join(&tc.source_file);
        std::fs::write(&src, source)?;
        let exe = dir.path().join("prog");
        let vars: [(&str, &Path); 4] = [
            ("src", &src),
            ("exe", &exe),
            ("dir", dir.path()),
            ("include", &self.include_dir),
        ];

        if let Some(compile) = &tc.compile {
            let cmd = expand(compile, &vars);
            let rec = execute(
                &cmd,
                dir.path(),
                &[],
                self.compile_time_ms,
                self.compile_memory_mib,
                1 << 20,
            );
            match rec.outcome {
                Outcome::SpawnFailure => {
                    return Err(SandboxError::ToolchainBroken {
                        language: language.tag().to_string(),
                        detail: rec.stderr.to_text(),
                    })
                }
                Outcome::Ok if rec.exit_status == ExitStatus::Code(0) => {}
                _ => {
                    let mut diag = rec.stderr.to_text();
                    let out = rec.stdout.to_text();
                    if !out.trim().is_empty() {
                        diag.push_str(&out);
                    }
                    if rec.outcome != Outcome::NonzeroExit {
                        diag.push_str(&format!("\ncompiler stopped: {:?}", rec.outcome));
                    }
                    return Ok(CompileOutcome::Failed(diag));
                }
            }
        }

        let command = expand(&tc.run, &vars);
        Ok(CompileOutcome::Ready(Artifact(Arc::new(ArtifactInner {
            key: key.to_string(),
            language: language.clone(),
            source: source.to_string(),
            command,
            _dir: Some(Arc::new(dir)),
        }))))
    }

    fn run(&self, spec: &ExecSpec) -> ExecRecord {
        let dir = match tempfile::Builder::new()
            .prefix("run-")
            .tempdir_in(self.root.path().join("runs"))
        {
            Ok(d) => d,
            Err(e) => return ExecRecord::spawn_failure(format!("cannot create run dir: {e}")),
        };
        for (name, content) in &spec.files {
            if name.contains('/') || name.starts_with('.') {
                return ExecRecord::spawn_failure(format!("invalid file name {name:?}"));
            }
            if let Err(e) = std::fs::write(dir.path().join(name), content.as_slice()) {
                return ExecRecord::spawn_failure(format!("cannot write {name}: {e}"));
            }
        }
        let mut cmd = spec.program.command().to_vec();
        if cmd.is_empty() {
            return ExecRecord::spawn_failure("artifact has no run command");
        }
        cmd.extend(spec.argv.iter().cloned());
        execute(
            &cmd,
            dir.path(),
            spec.stdin.as_slice(),
            spec.time_limit,
            spec.memory_limit,
            spec.output_cap,
        )
    }
}

fn page_size() -> u64 {
    // SAFETY: sysconf has no preconditions.
    let v = unsafe { libc::sysconf(libc::_SC_PAGESIZE) };
    if v > 0 {
        v as u64
    } else {
        4096
    }
}

/// Peak resident set since exec, in KiB.
fn read_hwm_kib(pid: i32) -> Option<u64> {
    let status = std::fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}

fn read_rss_bytes(pid: i32) -> Option<u64> {
    let statm = std::fs::read_to_string(format!("/proc/{pid}/statm")).ok()?;
    let resident: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    Some(resident * page_size())
}

fn self_rss_kib() -> u64 {
    read_hwm_kib(std::process::id() as i32).unwrap_or(0)
}

fn capped_reader<R: Read + Send + 'static>(
    mut src: R,
    cap: usize,
) -> thread::JoinHandle<(Vec<u8>, bool)> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut truncated = false;
        let mut buf = [0u8; 64 * 1024];
        loop {
            match src.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    if n > room {
                        truncated = true;
                    }
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                Err(_) => break,
            }
        }
        (kept, truncated)
    })
}

/// Runs `cmd` in its own process group under wall-clock and resident-memory
/// limits. The whole group is killed once the direct child exits or a limit
/// trips, so no descendant outlives the call.
pub(crate) fn execute(
    cmd: &[String],
    cwd: &Path,
    stdin: &[u8],
    time_limit_ms: u64,
    memory_limit_mib: u64,
    output_cap: usize,
) -> ExecRecord {
    let cpu_secs = time_limit_ms.div_ceil(1000) + 1;
    let mut command = Command::new(&cmd[0]);
    command
        .args(&cmd[1..])
        .current_dir(cwd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    // SAFETY: only async-signal-safe libc calls between fork and exec.
    unsafe {
        command.pre_exec(move || {
            libc::setpgid(0, 0);
            let cpu = libc::rlimit {
                rlim_cur: cpu_secs,
                rlim_max: cpu_secs + 1,
            };
            libc::setrlimit(libc::RLIMIT_CPU, &cpu);
            let core = libc::rlimit {
                rlim_cur: 0,
                rlim_max: 0,
            };
            libc::setrlimit(libc::RLIMIT_CORE, &core);
            Ok(())
        });
    }

    let parent_kib = self_rss_kib();
    let start = Instant::now();
    let mut child = match command.spawn() {
        Ok(c) => c,
        Err(e) => return ExecRecord::spawn_failure(format!("failed to spawn {:?}: {e}", cmd[0])),
    };
    let pid = child.id() as i32;

    let stdin_data = stdin.to_vec();
    let mut child_stdin = child.stdin.take().expect("piped stdin");
    let writer = thread::spawn(move || {
        let _ = child_stdin.write_all(&stdin_data);
    });
    let out_reader = capped_reader(child.stdout.take().expect("piped stdout"), output_cap);
    let err_reader = capped_reader(child.stderr.take().expect("piped stderr"), output_cap);

    let limit_bytes = memory_limit_mib * 1024 * 1024;
    let deadline = Duration::from_millis(time_limit_ms);
    let mut timed_out = false;
    let mut oom_killed = false;
    let mut polled_hwm_kib = 0u64;
    let mut status: libc::c_int = 0;
    // SAFETY: rusage is plain old data.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };

    loop {
        // SAFETY: pid is our direct, not yet reaped child.
        let r = unsafe { libc::wait4(pid, &mut status, libc::WNOHANG, &mut usage) };
        if r == pid {
            break;
        }
        if r < 0 {
            let err = std::io::Error::last_os_error();
            if err.kind() == std::io::ErrorKind::Interrupted {
                continue;
            }
            kill_group(pid);
            return ExecRecord::spawn_failure(format!("wait4 failed: {err}"));
        }
        if let Some(hwm) = read_hwm_kib(pid) {
            polled_hwm_kib = polled_hwm_kib.max(hwm);
        }
        let elapsed = start.elapsed();
        if elapsed >= deadline {
            timed_out = true;
        } else if read_rss_bytes(pid).is_some_and(|rss| rss > limit_bytes) {
            oom_killed = true;
        }
        if timed_out || oom_killed {
            kill_group(pid);
            // SAFETY: as above; blocking reap after SIGKILL.
            unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
            break;
        }
        let nap = if elapsed < Duration::from_millis(20) { 1 } else { 3 };
        thread::sleep(Duration::from_millis(nap));
    }
    let wall_time = start.elapsed().as_millis() as u64;
    kill_group(pid);

    let _ = writer.join();
    let (stdout, stdout_truncated) = out_reader.join().unwrap_or_default();
    let (stderr, _) = err_reader.join().unwrap_or_default();

    let exit_status = if libc::WIFEXITED(status) {
        ExitStatus::Code(libc::WEXITSTATUS(status))
    } else if libc::WIFSIGNALED(status) {
        ExitStatus::Signal(libc::WTERMSIG(status))
    } else {
        ExitStatus::Unknown
    };

    // ru_maxrss also counts the pre-exec copy of this process, so it is only
    // trusted when it exceeds what the fork could have inherited.
    let ru_kib = usage.ru_maxrss.max(0) as u64;
    let mut peak_kib = polled_hwm_kib;
    if ru_kib > parent_kib + 2048 {
        peak_kib = peak_kib.max(ru_kib);
    }
    let peak_memory = peak_kib as f64 / 1024.0;

    let outcome = if timed_out || exit_status == ExitStatus::Signal(libc::SIGXCPU) {
        Outcome::Timeout
    } else if oom_killed || peak_memory > memory_limit_mib as f64 {
        Outcome::Oom
    } else if exit_status == ExitStatus::Code(0) {
        Outcome::Ok
    } else {
        Outcome::NonzeroExit
    };

    ExecRecord {
        stdout: Bytes(stdout),
        stdout_truncated,
        stderr: Bytes(stderr),
        exit_status,
        wall_time,
        peak_memory,
        outcome,
    }
}

fn kill_group(pid: i32) {
    // SAFETY: signalling our own process group; ESRCH is harmless.
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
    }
}
