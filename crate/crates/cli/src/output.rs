use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use selfsim_core::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Structured result of one subcommand.
#[derive(Debug, Serialize)]
pub struct Envelope {
    pub schema_version: u32,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub result: Value,
    pub artifacts: Vec<PathBuf>,
}

impl Envelope {
    pub fn new<C: Serialize, R: Serialize>(command: &'static str, config: &C, result: &R) -> Result<Self> {
        Ok(Envelope {
            schema_version: SCHEMA_VERSION,
            version: VERSION,
            command,
            config: serde_json::to_value(config)?,
            result: serde_json::to_value(result)?,
            artifacts: Vec::new(),
        })
    }
}

pub fn error_json(err: &Error) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "version": VERSION,
        "error": { "kind": err.kind(), "message": err.to_string() },
    })
}

/// Writes a CSV artifact whose first line is a `#` comment carrying the
/// schema version, library version, command and full config.
pub fn write_csv_artifact<F>(
    dir: &Path,
    name: &str,
    envelope: &mut Envelope,
    body: F,
) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut out = BufWriter::new(File::create(&path)?);
    writeln!(
        out,
        "# selfsim {} schema_version={} command={} config={}",
        VERSION,
        SCHEMA_VERSION,
        envelope.command,
        serde_json::to_string(&envelope.config)?
    )?;
    body(&mut out)?;
    out.flush()?;
    envelope.artifacts.push(path);
    Ok(())
}
