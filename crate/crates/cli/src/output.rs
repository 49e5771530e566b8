//! Artifact rendering: a `# `-prefixed header block followed by CSV.

use crate::config::Scenario;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats a float so that it parses back to the same value. Moderate
/// magnitudes use plain decimal notation, the rest scientific.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// One output file: header facts, summary lines and a table.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub command: &'static str,
    pub input_sha256: Option<String>,
    pub summary: Vec<(&'static str, String)>,
    pub table: Table,
}

impl Artifact {
    pub fn new(command: &'static str, table: Table) -> Self {
        Self {
            command,
            input_sha256: None,
            summary: Vec::new(),
            table,
        }
    }

    pub fn note(&mut self, key: &'static str, value: impl Into<String>) {
        self.summary.push((key, value.into()));
    }

    pub fn render(&self, scenario: &Scenario) -> String {
        let mut out = String::new();
        let mut line = |s: &str| {
            out.push_str(s);
            out.push('\n');
        };
        for l in header_lines(self.command, scenario, self.input_sha256.as_deref()) {
            line(&l);
        }
        for (k, v) in &self.summary {
            line(&format!("# {k}: {v}"));
        }
        line(&self.table.columns.join(","));
        for row in &self.table.rows {
            line(&row.join(","));
        }
        out
    }
}

/// Tool version, command, seed, config hash and the echoed resolved config.
pub fn header_lines(command: &str, scenario: &Scenario, input_sha256: Option<&str>) -> Vec<String> {
    let mut lines = vec![
        format!("# opo {VERSION}"),
        format!("# command: {command}"),
        format!("# seed: {}", scenario.seed),
        format!("# config_sha256: {}", scenario.config_sha256()),
    ];
    if let Some(h) = input_sha256 {
        lines.push(format!("# input_sha256: {h}"));
    }
    lines.push("# config:".to_string());
    for l in scenario.resolved.lines() {
        lines.push(if l.is_empty() {
            "#".to_string()
        } else {
            format!("#   {l}")
        });
    }
    lines
}
