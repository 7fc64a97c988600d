//! Deterministic JSON reports: config echo, results, invariant checks and
//! the exit status. Given identical inputs and seed the bytes are
//! identical; infinities serialize as the string "inf" since JSON has no
//! infinity literal.

use serde::Serialize;
use serde_json::{json, Value};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: Value,
    pub threshold: Value,
}

impl Check {
    pub fn bound(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            pass: value <= threshold,
            value: ext_real(value),
            threshold: ext_real(threshold),
        }
    }

    pub fn flag(name: &str, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            pass,
            value: Value::Bool(pass),
            threshold: Value::Bool(true),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub library_version: String,
    pub command: String,
    pub config: Value,
    pub result: Value,
    pub checks: Vec<Check>,
    pub status: String,
}

impl Report {
    pub fn new(command: &str, config: Value, result: Value, checks: Vec<Check>) -> Self {
        let ok = checks.iter().all(|c| c.pass);
        Self {
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            result,
            checks,
            status: if ok { "ok" } else { "assertion_failure" }.to_string(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.status == "ok"
    }

    pub fn to_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization");
        text.push('\n');
        text
    }

    /// Write atomically: temp file in the target directory, then rename.
    pub fn write(&self, out: Option<&Path>) -> std::io::Result<()> {
        let text = self.to_pretty();
        match out {
            None => {
                print!("{text}");
                Ok(())
            }
            Some(path) => {
                let tmp = path.with_extension("tmp");
                {
                    let mut file = std::fs::File::create(&tmp)?;
                    file.write_all(text.as_bytes())?;
                    file.sync_all()?;
                }
                std::fs::rename(&tmp, path)
            }
        }
    }
}

/// Extended-real JSON value: numbers stay numbers, infinities become the
/// strings "inf" / "-inf".
pub fn ext_real(x: f64) -> Value {
    if x == f64::INFINITY {
        Value::String("inf".into())
    } else if x == f64::NEG_INFINITY {
        Value::String("-inf".into())
    } else {
        json!(x)
    }
}
