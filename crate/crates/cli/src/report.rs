//! Report assembly, output files and exit codes.

use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

pub struct Ctx {
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// A failure with an explicit exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn validation(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }
    pub fn tolerance(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for Failure {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(f) = e.downcast_ref::<Failure>() {
        return f.code;
    }
    if let Some(err) = e.downcast_ref::<circle_lab::Error>() {
        return match err.class() {
            circle_lab::ErrorClass::Validation => 2,
            circle_lab::ErrorClass::Budget => 3,
            circle_lab::ErrorClass::Numerical => 1,
        };
    }
    1
}

impl Ctx {
    fn path(&self, name: &str) -> Result<Option<PathBuf>> {
        match &self.out_dir {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                Ok(Some(d.join(name)))
            }
            None => Ok(None),
        }
    }

    /// Buffered file in the output directory, if one was given.
    pub fn file(&self, name: &str) -> Result<Option<BufWriter<File>>> {
        Ok(match self.path(name)? {
            Some(p) => Some(BufWriter::new(File::create(p)?)),
            None => None,
        })
    }

    pub fn csv<R: Serialize>(&self, name: &str, rows: &[R]) -> Result<()> {
        if let Some(p) = self.path(name)? {
            let mut w = csv::Writer::from_path(p)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Ok(())
    }

    /// Writes report.json (or prints it) after a one-line summary.
    pub fn emit<P: Serialize>(&self, op: &str, params: &P, values: Value, fits: Value, summary: &str) -> Result<()> {
        let mut p = serde_json::to_value(params)?;
        if let Value::Object(m) = &mut p {
            m.insert("seed".into(), json!(self.seed));
            m.insert("threads".into(), json!(self.threads));
        }
        let rep = json!({ "op": op, "params": p, "values": values, "fits": fits });
        let text = serde_json::to_string_pretty(&rep)?;
        let mut out = std::io::stdout().lock();
        let mut lines = format!("{op}: {summary}\n");
        match self.path("report.json")? {
            Some(path) => std::fs::write(path, text + "\n")?,
            None => lines += &(text + "\n"),
        }
        // a closed pipe downstream is not an error of the computation
        match out.write_all(lines.as_bytes()).and_then(|_| out.flush()) {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
            r => Ok(r?),
        }
    }
}
