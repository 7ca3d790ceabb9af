//! Result tables, JSON artifacts and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// A delimited table with a fixed header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("missing artifact {}", path.display()))?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    /// Rows as column-name maps.
    pub fn records(&self) -> Vec<BTreeMap<&str, &str>> {
        self.rows
            .iter()
            .map(|row| self.header.iter().map(String::as_str).zip(row.iter().map(String::as_str)).collect())
            .collect()
    }
}

/// Shortest round-trip text of a float.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return None;
    }
    Some(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Everything a task run produces, before it is written out.
#[derive(Default)]
pub struct Artifacts {
    pub tables: Vec<(String, Table)>,
    pub json: Vec<(String, serde_json::Value)>,
    pub failures: usize,
    pub statistics: BTreeMap<String, f64>,
}

impl Artifacts {
    pub fn table(&mut self, name: &str, table: Table) {
        self.tables.push((format!("{name}.csv"), table));
    }

    pub fn json(&mut self, rel: String, value: serde_json::Value) {
        self.json.push((rel, value));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub task: String,
    pub config_hash: String,
    pub seed_root: u64,
    pub config: serde_json::Value,
    pub files: Vec<String>,
    pub failed_points: usize,
    #[serde(default)]
    pub statistics: BTreeMap<String, f64>,
    pub versions: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).with_context(|| format!("missing artifact {}", path.display()))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("reading {}", path.display()))?)
    }
}

/// Write every artifact below `dir` and the manifest describing them.
pub fn write_all(dir: &Path, artifacts: &Artifacts, mut manifest: Manifest) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    for (name, table) in &artifacts.tables {
        table.write(&dir.join(name))?;
        files.push(name.clone());
    }
    for (rel, value) in &artifacts.json {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
        files.push(rel.clone());
    }
    manifest.files = files;
    manifest.failed_points = artifacts.failures;
    manifest.statistics = artifacts.statistics.clone();
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(0.1), "x,y".into()]);
        t.push(vec![num(f64::NAN), "".into()]);
        let path = dir.path().join("t.csv");
        t.write(&path).unwrap();
        let back = Table::read(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.records()[0]["b"], "x,y");
        assert!(back.records()[1]["a"].parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn matrices_round_trip() {
        let m = DMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64 + 0.25);
        assert_eq!(matrix_from_rows(&matrix_rows(&m)).unwrap(), m);
        assert!(matrix_from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_none());
    }
}
