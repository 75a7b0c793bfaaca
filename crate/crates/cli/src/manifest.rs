//! Run manifests: the exact command line plus content digests of every file
//! read or written, enough to repeat a run and check its outputs.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Default)]
pub struct Manifest {
    command: String,
    argv: Vec<String>,
    settings: Vec<(String, String)>,
    inputs: Vec<(String, PathBuf, String)>,
    outputs: Vec<(PathBuf, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            argv: std::env::args().collect(),
            ..Self::default()
        }
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) {
        self.settings.push((key.into(), value.to_string()));
    }

    pub fn input(&mut self, role: &str, path: &Path, bytes: &[u8]) {
        self.inputs.push((role.into(), path.to_path_buf(), digest(bytes)));
    }

    /// Writes `text` to `path` and records it.
    pub fn output(&mut self, path: &Path, text: &str) -> io::Result<()> {
        fs::write(path, text)?;
        self.outputs.push((path.to_path_buf(), digest(text.as_bytes())));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = format!("manifest {}\n", self.command);
        let _ = writeln!(out, "argv {}", self.argv.join(" "));
        for (k, v) in &self.settings {
            let _ = writeln!(out, "{k} {v}");
        }
        for (role, path, d) in &self.inputs {
            let _ = writeln!(out, "input {role} {} sha256 {d}", path.display());
        }
        for (path, d) in &self.outputs {
            let _ = writeln!(out, "output {} sha256 {d}", path.display());
        }
        out
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(format!("{}.manifest", self.command));
        fs::write(&path, self.render())?;
        Ok(path)
    }
}
