//! Reading inputs, writing reports, and the error split behind exit codes.

use std::fs;
use std::path::Path;

use scottbench_core::logic::{parse_formula, FiniteStructure, Formula, Signature};
use scottbench_core::orders::{AdditivityTable, ColoredOrder};
use scottbench_core::Error;
use serde_json::Value;

/// Exit 2 for anything wrong with the invocation or its inputs, exit 1 for
/// failures while running.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Inconsistent(_) | Error::ResourceLimit(_) => Failure::Run(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub struct Outcome {
    pub value: Value,
    /// False when the report records a failed check; the exit code is 1.
    pub ok: bool,
    pub message: Option<String>,
}

impl Outcome {
    pub fn ok(value: Value) -> Self {
        Outcome { value, ok: true, message: None }
    }

    pub fn check(value: Value, ok: bool, message: impl Into<String>) -> Self {
        Outcome {
            value,
            ok,
            message: (!ok).then(|| message.into()),
        }
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::Usage(format!(
            "{}: malformed JSON at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn in_file<T>(path: &Path, r: scottbench_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        f => f,
    })
}

pub fn read_structure(path: &Path) -> CliResult<FiniteStructure> {
    let v = read_json(path)?;
    in_file(path, FiniteStructure::from_value(&v))
}

pub fn read_order(path: &Path) -> CliResult<(ColoredOrder, AdditivityTable)> {
    let v = read_json(path)?;
    in_file(path, ColoredOrder::from_value(&v))
}

/// A signature file: `{"relations": {...}}`, or any object carrying one
/// under `"signature"` (a structure file works).
pub fn read_signature(path: &Path) -> CliResult<Signature> {
    let v = read_json(path)?;
    let s = v.get("signature").cloned().unwrap_or(v);
    serde_json::from_value(s).map_err(|e| Failure::Usage(format!("{}: not a signature: {e}", path.display())))
}

pub fn read_formula(path: &Path, sig: &Signature) -> CliResult<Formula> {
    let text = read_text(path)?;
    in_file(path, parse_formula(&text, sig))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Pretty JSON with sorted keys (maps are ordered) and a trailing newline.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn emit(v: &Value, json_out: Option<&Path>) -> std::io::Result<()> {
    let text = render(v);
    if let Some(p) = json_out {
        fs::write(p, &text)?;
    }
    use std::io::Write;
    std::io::stdout().write_all(text.as_bytes())
}

/// Parse `0,2,5`.
pub fn parse_list(s: &str) -> CliResult<Vec<u32>> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',')
        .map(|x| x.trim().parse::<u32>().map_err(|_| Failure::Usage(format!("`{x}` in `{s}` is not a natural"))))
        .collect()
}
