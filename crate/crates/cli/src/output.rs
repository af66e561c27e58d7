//! Output directory with a JSON sidecar next to every CSV.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;

pub const SNAPSHOT: &str = "resolved_config.toml";

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    file: &'a str,
    command: &'a str,
    scenario: &'a str,
    seed: u64,
    version: &'a str,
    params_digest: &'a str,
    columns: Vec<&'a str>,
    rows: usize,
}

pub struct OutputDir {
    pub dir: PathBuf,
    command: String,
    scenario: String,
    seed: u64,
    digest: String,
}

/// SHA-256 of the resolved config snapshot, hex encoded.
pub fn config_digest(cfg: &ScenarioConfig) -> String {
    let mut h = Sha256::new();
    h.update(cfg.to_toml().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl OutputDir {
    pub fn create(dir: &Path, command: &str, cfg: &ScenarioConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            scenario: cfg.scenario.clone(),
            seed: cfg.seed,
            digest: config_digest(cfg),
        })
    }

    pub fn write_snapshot(&self, cfg: &ScenarioConfig) -> Result<()> {
        let path = self.dir.join(SNAPSHOT);
        std::fs::write(&path, cfg.to_toml()).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes `name` from a CSV body and its `name.json` sidecar.
    pub fn csv(&self, name: &str, body: Vec<u8>) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let text = std::str::from_utf8(&body).context("csv output is not utf-8")?;
        let mut lines = text.lines();
        let columns = lines.next().map(|h| h.split(',').collect()).unwrap_or_default();
        let sidecar = Sidecar {
            file: name,
            command: &self.command,
            scenario: &self.scenario,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            params_digest: &self.digest,
            columns,
            rows: lines.count(),
        };
        std::fs::write(&path, &body).with_context(|| format!("writing {}", path.display()))?;
        let json = serde_json::to_string_pretty(&sidecar)? + "\n";
        std::fs::write(self.dir.join(format!("{name}.json")), json)?;
        Ok(path)
    }

    /// Builds a CSV with `header` and one record per row.
    pub fn table(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf> {
        let mut body = header.join(",");
        body.push('\n');
        for r in rows {
            body.push_str(&r.join(","));
            body.push('\n');
        }
        self.csv(name, body.into_bytes())
    }

    /// Raw file without sidecar (binary caches).
    pub fn raw(&self, name: &str, body: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Fixed-format float for table cells; non-finite values print as inf/nan.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.10e}")
    } else {
        format!("{x}")
    }
}
