//! Output directory bookkeeping: every file written is recorded so the
//! manifest can list it with a digest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::svg::Chart;
use crate::error::{Error, Result};

/// Shortest round-trip decimal; infinities and NaN as words.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "+inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:?}")
    }
}

/// Moment order for file names: `2`, `2.5`.
pub fn fmt_p(p: f64) -> String {
    if p.fract() == 0.0 && p.abs() < 1e15 {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

/// JSON number, or the extended-real string when not finite.
pub fn ext(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else {
        Value::from(fmt_num(v))
    }
}

pub struct Out {
    root: PathBuf,
    files: Vec<String>,
}

impl Out {
    pub fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root.join("tables"))?;
        std::fs::create_dir_all(root.join("plots"))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn target(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        if !self.files.iter().any(|f| f == rel) {
            self.files.push(rel.to_string());
        }
        Ok(path)
    }

    pub fn csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.target(rel)?;
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn svg(&mut self, rel: &str, chart: &Chart) -> Result<()> {
        let path = self.target(rel)?;
        std::fs::write(path, chart.render())?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let path = self.target(rel)?;
        std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    /// Written last and not listed in itself.
    pub fn json_untracked<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        std::fs::write(
            self.root.join(rel),
            serde_json::to_string_pretty(value)? + "\n",
        )?;
        Ok(())
    }

    /// A binary file plus the `.json` sidecar the writer puts next to it.
    pub fn binary<F: FnOnce(&Path) -> Result<()>>(&mut self, rel: &str, write: F) -> Result<()> {
        let path = self.target(rel)?;
        write(&path)?;
        let side = Path::new(rel).with_extension("json");
        self.files.push(side.to_string_lossy().into_owned());
        Ok(())
    }

    pub fn file_digests(&self) -> Result<Vec<Value>> {
        self.files
            .iter()
            .map(|rel| {
                let bytes = std::fs::read(self.root.join(rel))?;
                let digest: String = Sha256::digest(&bytes)
                    .iter()
                    .map(|b| format!("{b:02x}"))
                    .collect();
                Ok(serde_json::json!({"path": rel, "bytes": bytes.len(), "sha256": digest}))
            })
            .collect()
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
