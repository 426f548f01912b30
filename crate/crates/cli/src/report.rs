//! Command reports and their text, JSON and CSV renderings.

use std::io::Write;
use std::path::Path;

use serde_json::Value;

/// Output of one command. `violation` selects exit status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub lines: Vec<String>,
    pub json: Value,
    pub csv: Option<String>,
    pub violation: bool,
}

impl Report {
    pub fn new(command: &str) -> Report {
        Report { command: command.into(), lines: Vec::new(), json: Value::Null, csv: None, violation: false }
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }

    pub fn json_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.json).expect("report JSON is always serializable");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// Prints the report in `format` and, with `out`, writes `<command>.txt` and
/// `<command>.json` there. The CSV dump goes to `csv` when both are present.
pub fn emit(report: &Report, format: Format, out: Option<&Path>, csv: Option<&Path>) -> std::io::Result<()> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match format {
        Format::Text => lock.write_all(report.text().as_bytes())?,
        Format::Json => lock.write_all(report.json_text().as_bytes())?,
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.txt", report.command)), report.text())?;
        std::fs::write(dir.join(format!("{}.json", report.command)), report.json_text())?;
    }
    if let (Some(path), Some(body)) = (csv, &report.csv) {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, body)?;
    }
    Ok(())
}

/// `(1, 0.5, -2)` style rendering of a price vector.
pub fn fmt_prices(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|x| fmt_num(*x)).collect();
    format!("({})", parts.join(", "))
}

pub fn fmt_num(x: f64) -> String {
    let r = (x * 1e9).round() / 1e9;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}
