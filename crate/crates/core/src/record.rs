//! Persisted experiment records and plot-data files.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Content id of a byte string in the style of a git blob id, with SHA-256.
pub fn content_id(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// One persisted experiment. Wall-clock times are logged, not stored, so
/// that reruns produce identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    /// Content id of the canonical JSON of the inputs.
    pub input_id: String,
    /// Set when the run finished without meeting its tolerance or aborted.
    pub flagged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub payload: serde_json::Value,
}

impl ExperimentRecord {
    pub fn new(
        kind: &str,
        config_hash: &str,
        seed: u64,
        inputs: &impl Serialize,
        payload: &impl Serialize,
    ) -> Result<Self> {
        let input_bytes = serde_json::to_vec(inputs)?;
        Ok(Self {
            kind: kind.into(),
            config_hash: config_hash.into(),
            seed,
            input_id: content_id(&input_bytes),
            flagged: false,
            diagnostic: None,
            payload: serde_json::to_value(payload)?,
        })
    }

    pub fn flag(mut self, diagnostic: impl Into<String>) -> Self {
        self.flagged = true;
        self.diagnostic = Some(diagnostic.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Write `(x, y)` columns as whitespace-separated text with a comment header.
pub fn write_plot_data(path: &Path, config_hash: &str, labels: (&str, &str), points: &[(f64, f64)]) -> Result<()> {
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::NonFinite(format!("plot data for {}", path.display())));
    }
    let mut out = Vec::new();
    writeln!(out, "# config_hash {config_hash}")?;
    writeln!(out, "# {} {}", labels.0, labels.1)?;
    for (x, y) in points {
        writeln!(out, "{x:?} {y:?}")?;
    }
    write_atomic(path, &out)
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_id_matches_blob_convention() {
        let mut hasher = Sha256::new();
        hasher.update(b"blob 5\0hello");
        assert_eq!(content_id(b"hello"), hex::encode(hasher.finalize()));
        assert_ne!(content_id(b"hello"), content_id(b"hellp"));
    }

    #[test]
    fn record_round_trip() {
        let dir = std::env::temp_dir().join(format!("rodlab-record-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let rec = ExperimentRecord::new("gamma", "abc", 7, &[1.0, 2.0], &serde_json::json!({"energy": 0.1}))
            .unwrap()
            .flag("did not converge");
        let path = dir.join("r.json");
        rec.write(&path).unwrap();
        assert_eq!(ExperimentRecord::read(&path).unwrap(), rec);
        write_plot_data(&dir.join("p.dat"), "abc", ("r", "e"), &[(1.0, 0.5)]).unwrap();
        let text = std::fs::read_to_string(dir.join("p.dat")).unwrap();
        assert_eq!(text, "# config_hash abc\n# r e\n1.0 0.5\n");
        assert!(write_plot_data(&dir.join("q.dat"), "abc", ("r", "e"), &[(1.0, f64::NAN)]).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
