use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

/// Summary block: free-form `key = value` lines followed by one
/// `PASS`/`FAIL` line per check.
#[derive(Debug, Default)]
pub struct Summary {
    lines: Vec<String>,
    checks: Vec<(String, bool, String)>,
}

impl Summary {
    pub fn value(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key} = {value}"));
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push((name.to_string(), pass, detail.into()));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let _ = writeln!(s, "{l}");
        }
        for (name, pass, detail) in &self.checks {
            let _ = writeln!(s, "{} {name}: {detail}", if *pass { "PASS" } else { "FAIL" });
        }
        let _ = writeln!(s, "result = {}", if self.passed() { "pass" } else { "fail" });
        s
    }

    /// Writes `summary.txt` into `dir` and echoes it to stdout.
    pub fn finish(&self, dir: &Path) -> Result<bool> {
        let text = self.render();
        write_file(dir, "summary.txt", text.as_bytes())?;
        print!("{text}");
        Ok(self.passed())
    }
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Full-precision float for CSV cells.
pub fn cell(v: f64) -> String {
    format!("{v:.16e}")
}
