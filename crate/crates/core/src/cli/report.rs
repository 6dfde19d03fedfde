//! Run reports: a readable summary followed by a tab-separated block for scripts.

use std::fmt::Write as _;

/// Outcome of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: String,
    /// Resolved configuration, in config-file syntax.
    pub config_echo: String,
    /// Ordered `(name, value)` pairs.
    pub metrics: Vec<(String, String)>,
    /// Emitted files, relative to the output directory.
    pub artifact_paths: Vec<String>,
    /// Excluded from [`RunReport::render`] so report files stay reproducible.
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn new(command: &str, config_echo: String) -> Self {
        Self {
            command: command.to_string(),
            config_echo,
            metrics: Vec::new(),
            artifact_paths: Vec::new(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn metric(&mut self, name: &str, value: impl std::fmt::Display) {
        self.metrics.push((name.to_string(), value.to_string()));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.metrics
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(|v| v.parse().ok())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        writeln!(w, "sbdl {}", self.command).unwrap();
        writeln!(w, "\n[config]").unwrap();
        w.push_str(&self.config_echo);
        writeln!(w, "\n[metrics]").unwrap();
        for (k, v) in &self.metrics {
            writeln!(w, "{k:<24} {v}").unwrap();
        }
        writeln!(w, "\n[artifacts]").unwrap();
        for a in &self.artifact_paths {
            writeln!(w, "{a}").unwrap();
        }
        writeln!(w, "\n[machine]").unwrap();
        writeln!(w, "command\t{}", self.command).unwrap();
        for (k, v) in &self.metrics {
            writeln!(w, "metric\t{k}\t{v}").unwrap();
        }
        for a in &self.artifact_paths {
            writeln!(w, "artifact\t{a}").unwrap();
        }
        writeln!(w, "[end]").unwrap();
        s
    }

    /// Reads the `[machine]` block of a rendered report back into metrics.
    pub fn parse_machine_block(text: &str) -> Vec<(String, String)> {
        text.lines()
            .skip_while(|l| *l != "[machine]")
            .filter_map(|l| l.strip_prefix("metric\t"))
            .filter_map(|l| l.split_once('\t'))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}
