//! Line-delimited JSON client for external generator and verifier
//! processes. One request is in flight at a time; responses carry the
//! request id so a late answer to a timed-out request is discarded.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookRole {
    Generator,
    Verifier,
}

impl HookRole {
    pub fn as_str(self) -> &'static str {
        match self {
            HookRole::Generator => "generator",
            HookRole::Verifier => "verifier",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HookCommand {
    Builtin,
    /// Program followed by its arguments.
    External(Vec<String>),
}

impl HookCommand {
    /// `builtin`, or `cmd:<program> <args...>` split on whitespace.
    pub fn parse(spec: &str) -> Result<Self, HookError> {
        let spec = spec.trim();
        if spec == "builtin" {
            return Ok(HookCommand::Builtin);
        }
        let Some(cmd) = spec.strip_prefix("cmd:") else {
            return Err(HookError::BadSpec(spec.to_string()));
        };
        let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        if argv.is_empty() {
            return Err(HookError::BadSpec(spec.to_string()));
        }
        Ok(HookCommand::External(argv))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HookConfig {
    pub command: HookCommand,
    pub timeout: Duration,
    pub role: HookRole,
}

pub const DEFAULT_HOOK_TIMEOUT: Duration = Duration::from_secs(30);

impl HookConfig {
    pub fn builtin(role: HookRole) -> Self {
        HookConfig {
            command: HookCommand::Builtin,
            timeout: DEFAULT_HOOK_TIMEOUT,
            role,
        }
    }

    pub fn new(command: HookCommand, timeout: Duration, role: HookRole) -> Result<Self, HookError> {
        if timeout.is_zero() {
            return Err(HookError::BadSpec("timeout must be positive".into()));
        }
        Ok(HookConfig { command, timeout, role })
    }

    pub fn is_builtin(&self) -> bool {
        self.command == HookCommand::Builtin
    }
}

#[derive(Debug, Error)]
pub enum HookError {
    #[error("invalid hook spec {0:?}: expected \"builtin\" or \"cmd:<command>\"")]
    BadSpec(String),
    #[error("cannot launch {role} hook {program:?}: {source}")]
    Launch {
        role: &'static str,
        program: String,
        #[source]
        source: std::io::Error,
    },
}

/// Why a single request produced no usable answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallFailure {
    Timeout,
    Malformed(String),
    /// The process closed its output or stopped reading input.
    Exited,
}

pub struct HookProcess {
    role: HookRole,
    program: String,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    timeout: Duration,
}

impl HookProcess {
    pub fn spawn(argv: &[String], timeout: Duration, role: HookRole) -> Result<Self, HookError> {
        let launch_err = |source| HookError::Launch {
            role: role.as_str(),
            program: argv.first().cloned().unwrap_or_default(),
            source,
        };
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(launch_err)?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(HookProcess {
            role,
            program: argv[0].clone(),
            child,
            stdin,
            lines: rx,
            timeout,
        })
    }

    pub fn role(&self) -> HookRole {
        self.role
    }

    pub fn program(&self) -> &str {
        &self.program
    }

    /// Sends `request` (which must carry `id`) and waits for the response
    /// with the same id.
    pub fn call(&mut self, id: &str, request: &Value) -> Result<Value, CallFailure> {
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        if self
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .is_err()
        {
            return Err(CallFailure::Exited);
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(remaining) {
                Ok(text) => {
                    let value: Value = match serde_json::from_str(&text) {
                        Ok(v @ Value::Object(_)) => v,
                        _ => return Err(CallFailure::Malformed(text)),
                    };
                    match value.get("id").and_then(Value::as_str) {
                        Some(got) if got == id => return Ok(value),
                        Some(_) => {
                            log::debug!("{} hook: discarding stale response {text}", self.role.as_str());
                            continue;
                        }
                        None => return Err(CallFailure::Malformed(text)),
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Err(CallFailure::Timeout),
                Err(RecvTimeoutError::Disconnected) => return Err(CallFailure::Exited),
            }
        }
    }
}

impl Drop for HookProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
