use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::input_error;

/// Identifies the run in every output file.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Stamp {
    fn seed_field(&self) -> String {
        self.seed.map(|s| s.to_string()).unwrap_or_default()
    }
}

pub struct OutDir {
    dir: PathBuf,
    pub stamp: Stamp,
}

impl OutDir {
    pub fn create(dir: &Path, stamp: Stamp) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))
            .map_err(input_error)?;
        Ok(OutDir { dir: dir.to_path_buf(), stamp })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes a CSV with `config_hash,seed` appended to the header and to every row.
    pub fn csv(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
        let path = self.path(name);
        let write = || -> anyhow::Result<()> {
            let mut w = csv::Writer::from_path(&path)?;
            let mut h: Vec<&str> = header.to_vec();
            h.extend(["config_hash", "seed"]);
            w.write_record(&h)?;
            let seed = self.stamp.seed_field();
            for mut row in rows {
                row.push(self.stamp.config_hash.clone());
                row.push(seed.clone());
                w.write_record(&row)?;
            }
            w.flush()?;
            Ok(())
        };
        write().with_context(|| format!("writing {}", path.display())).map_err(input_error)
    }

    /// Writes pretty JSON with `config_hash` and `seed` as the leading fields.
    /// Wall-clock fields are removed so that reruns are byte-identical.
    pub fn json(&self, name: &str, body: &impl Serialize) -> anyhow::Result<()> {
        let path = self.path(name);
        let mut v = serde_json::to_value(body)?;
        strip_timing(&mut v);
        let mut doc = serde_json::Map::new();
        doc.insert("config_hash".into(), json!(self.stamp.config_hash));
        doc.insert("seed".into(), json!(self.stamp.seed));
        match v {
            Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display())).map_err(input_error)
    }
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("elapsed_secs");
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
