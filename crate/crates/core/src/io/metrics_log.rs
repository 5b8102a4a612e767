use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

/// One training epoch as logged to `metrics.jsonl`, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_bpr: f64,
    pub loss_mmbpr: f64,
    pub loss_c: f64,
    pub recall: f64,
    pub ndcg: f64,
}

/// Appends records as they arrive so a crash keeps earlier epochs on disk.
pub struct MetricsLogger {
    file: fs::File,
}

impl MetricsLogger {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(Self {
            file: fs::File::create(path)?,
        })
    }

    pub fn log(&mut self, record: &MetricsRecord) -> Result<()> {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Format(format!("metrics encode: {e}")))?;
        self.file.write_all(line.as_bytes())?;
        self.file.write_all(b"\n")?;
        Ok(())
    }
}

pub fn load_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            msg: format!("metrics decode: {e}"),
        })?;
        out.push(rec);
    }
    Ok(out)
}
