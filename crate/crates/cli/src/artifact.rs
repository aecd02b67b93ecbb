//! JSON-lines artifacts: one header line echoing the effective config, then
//! one record per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub command: String,
    pub config: RunConfig,
}

impl Header {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            kind: "header".into(),
            command: command.into(),
            config: config.clone(),
        }
    }
}

/// Reads an artifact, returning its header (if the first line is one) and
/// the records.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Option<Header>, Vec<T>), CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(h) = serde_json::from_str::<Header>(&line) {
                if h.kind == "header" {
                    header = Some(h);
                    continue;
                }
            }
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        records.push(rec);
    }
    Ok((header, records))
}

/// Writes to a sibling temporary file and renames on `finish`, so a failed
/// command never leaves a partial artifact behind.
pub struct ArtifactWriter {
    target: PathBuf,
    tmp: PathBuf,
    out: Option<BufWriter<File>>,
}

impl ArtifactWriter {
    pub fn create(target: &Path, header: &Header) -> Result<Self, CliError> {
        let mut name = target.file_name().unwrap_or_default().to_os_string();
        name.push(".partial");
        let tmp = target.with_file_name(name);
        let file = File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        let mut w = Self {
            target: target.to_path_buf(),
            tmp,
            out: Some(BufWriter::new(file)),
        };
        w.record(header)?;
        Ok(w)
    }

    pub fn record<T: Serialize>(&mut self, rec: &T) -> Result<(), CliError> {
        let line = serde_json::to_string(rec).map_err(|e| CliError::Data(e.to_string()))?;
        let out = self.out.as_mut().expect("writer used after finish");
        writeln!(out, "{line}").map_err(|e| CliError::io(&self.tmp, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        let mut out = self.out.take().expect("finish called twice");
        out.flush().map_err(|e| CliError::io(&self.tmp, e))?;
        drop(out);
        std::fs::rename(&self.tmp, &self.target).map_err(|e| CliError::io(&self.target, e))
    }
}

impl Drop for ArtifactWriter {
    fn drop(&mut self) {
        if self.out.take().is_some() {
            let _ = std::fs::remove_file(&self.tmp);
        }
    }
}
