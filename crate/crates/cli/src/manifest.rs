//! Run manifest: parameter echo, provenance, warnings, artifact list.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use roucir::config::{RunConfig, MANIFEST_HEADER};
use roucir::noise::{Generator, NoisePath};

pub struct Manifest {
    command: String,
    started: Instant,
    entries: Vec<String>,
    warnings: Vec<String>,
    artifacts: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let mut entries = vec![format!("version = {}", env!("CARGO_PKG_VERSION"))];
        entries.extend(config.manifest_lines());
        Self {
            command: command.to_string(),
            started: Instant::now(),
            entries,
            warnings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push(format!("{key} = {value}"));
    }

    pub fn extend(&mut self, lines: impl IntoIterator<Item = String>) {
        self.entries.extend(lines);
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let message = message.into();
        if !self.warnings.contains(&message) {
            self.warnings.push(message);
        }
    }

    /// Records the generator of `noise` and warns on a Hosking fallback.
    pub fn record_noise(&mut self, label: &str, noise: &NoisePath) {
        let generator = match noise.generator() {
            Generator::Gaussian => "gaussian".to_string(),
            Generator::DaviesHarte { half_size } => format!("davies-harte (half size {half_size})"),
            Generator::Hosking { fallback } => {
                if fallback {
                    self.warn(format!(
                        "{label}: circulant embedding failed, fell back to Hosking recursion"
                    ));
                }
                "hosking".to_string()
            }
            Generator::External => "external".to_string(),
        };
        self.set(&format!("{label}.generator"), generator);
    }

    /// Writes `contents` to `dir/name` and lists it.
    pub fn write_artifact(&mut self, dir: &Path, name: &str, contents: &str) -> io::Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        self.artifacts.push(name.to_string());
        Ok(path)
    }

    pub fn render(&self) -> String {
        let mut lines = vec![MANIFEST_HEADER.to_string(), format!("command = {}", self.command)];
        lines.extend(self.entries.iter().cloned());
        lines.extend(self.warnings.iter().map(|w| format!("warning = {w}")));
        lines.extend(self.artifacts.iter().map(|a| format!("artifact = {a}")));
        lines.push("artifact = manifest.txt".to_string());
        lines.push(format!("wall_time_s = {:.3}", self.started.elapsed().as_secs_f64()));
        lines.join("\n") + "\n"
    }

    pub fn finish(self, dir: &Path) -> io::Result<()> {
        fs::write(dir.join("manifest.txt"), self.render())
    }
}
