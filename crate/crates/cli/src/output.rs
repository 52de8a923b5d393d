//! One directory per run. It always starts with `config.json` and ends with
//! `summary.json` on success or `error.json` on failure.

use manyscat_core::{Error, ErrorKind, Result};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Solver => EXIT_SOLVER,
        ErrorKind::Io => EXIT_IO,
    }
}

fn stage(e: &Error) -> Option<&'static str> {
    match e {
        Error::Stage { stage, .. } => Some(stage),
        _ => None,
    }
}

pub fn error_record(command: &str, e: &Error) -> Value {
    json!({
        "status": "error",
        "command": command,
        "exit_code": exit_code(e),
        "kind": format!("{:?}", e.kind()).to_lowercase(),
        "error": e.tag(),
        "stage": stage(e),
        "message": e.to_string(),
    })
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.root.join(name), bytes)?;
        Ok(())
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}
