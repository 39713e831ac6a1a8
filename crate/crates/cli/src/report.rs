use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary<'a> {
    pub scenario: &'a str,
    pub seed: u64,
    pub checks: &'a [Check],
}

/// Checks and artifacts collected by one scenario run.
#[derive(Debug)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// `(file name, contents)` in emission order.
    pub files: Vec<(String, String)>,
}

impl Report {
    pub fn new(scenario: &str, seed: u64) -> Self {
        Report {
            scenario: scenario.to_string(),
            seed,
            checks: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, pass: bool, value: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            value,
            tolerance,
        });
    }

    /// Passes iff `value <= tolerance`.
    pub fn at_most(&mut self, name: &str, value: f64, tolerance: f64) {
        self.check(name, value <= tolerance, value, tolerance);
    }

    /// Boolean outcome reported as value 1 (true) or 0 (false).
    pub fn holds(&mut self, name: &str, ok: bool) {
        self.check(name, ok, if ok { 1.0 } else { 0.0 }, 0.0);
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Two-column whitespace-separated file with a commented header.
    pub fn plot(&mut self, name: &str, columns: [&str; 2], rows: impl IntoIterator<Item = (f64, f64)>) {
        let mut out = format!("# {} {}\n", columns[0], columns[1]);
        for (x, y) in rows {
            writeln!(out, "{x} {y}").expect("string write");
        }
        self.file(name, out);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary_json(&self) -> String {
        let s = Summary {
            scenario: &self.scenario,
            seed: self.seed,
            checks: &self.checks,
        };
        let mut text = serde_json::to_string_pretty(&s).expect("summary serializes");
        text.push('\n');
        text
    }

    /// Writes every artifact and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        }
        let path = dir.join("summary.json");
        std::fs::write(&path, self.summary_json()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn render_checks(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            writeln!(out, "{mark}  {:<32} value {:<24e} tolerance {:e}", c.name, c.value, c.tolerance).expect("string write");
        }
        out
    }
}

/// CSV text from a header and rows of displayable cells.
pub fn csv<R, C>(header: &[&str], rows: R) -> String
where
    R: IntoIterator<Item = Vec<C>>,
    C: std::fmt::Display,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
