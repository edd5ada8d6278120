//! The JSON record every command leaves in its output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

pub const MANIFEST_FILE: &str = "manifest.json";

/// How a command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Converged,
    MaxIter,
    CertificateViolation,
    UsageError,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok | Status::Converged => 0,
            Status::UsageError | Status::Error => 1,
            Status::MaxIter => 2,
            Status::CertificateViolation => 3,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::CertificateViolation => "certificate_violation",
            Status::UsageError => "usage_error",
            Status::Error => "error",
        }
    }
}

pub struct RunManifest {
    started: Instant,
    dir: PathBuf,
    command: Vec<String>,
    subcommand: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
    pub instance: Value,
    pub outputs: Vec<PathBuf>,
    pub solve_seconds: Option<f64>,
    pub iterations: Option<usize>,
    pub final_metrics: Value,
    pub extra: Map<String, Value>,
}

impl RunManifest {
    pub fn new(dir: &Path, command: Vec<String>, subcommand: &'static str) -> Self {
        Self {
            started: Instant::now(),
            dir: dir.to_path_buf(),
            command,
            subcommand,
            config: Value::Null,
            seed: None,
            instance: Value::Null,
            outputs: Vec::new(),
            solve_seconds: None,
            iterations: None,
            final_metrics: Value::Null,
            extra: Map::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path inside the output directory, recorded as an output.
    pub fn output(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.outputs.push(path.clone());
        path
    }

    pub fn finish(self, status: Status, error: Option<&str>) -> std::io::Result<PathBuf> {
        let mut doc = json!({
            "command": self.command,
            "subcommand": self.subcommand,
            "status": status.label(),
            "exit_code": status.exit_code(),
            "config": self.config,
            "seed": self.seed,
            "instance": self.instance,
            "outputs": self.outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "wall_clock_seconds": self.started.elapsed().as_secs_f64(),
            "solve_seconds": self.solve_seconds,
            "iterations": self.iterations,
            "final_metrics": self.final_metrics,
            "error": error,
        });
        if let Value::Object(map) = &mut doc {
            map.extend(self.extra);
        }
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
