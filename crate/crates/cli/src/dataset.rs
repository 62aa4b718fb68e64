//! On-disk dataset bundle: `meta.json` plus one CSV per matrix, each value
//! written in shortest round-trip decimal form.

use anyhow::{bail, ensure, Context, Result};
use gravnet::{Matrix, StiefelBasis};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const FORMAT: &str = "f64-csv-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub sigma: f64,
    pub seed: u64,
    pub format: String,
    /// Planted cluster count; absent for single-cluster data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub meta: Meta,
    /// First planted center; further centers live in `centers`.
    pub centers: Vec<StiefelBasis>,
    pub ground_truth: StiefelBasis,
    pub bases: Vec<StiefelBasis>,
    pub start: Option<StiefelBasis>,
    pub labels: Option<Vec<usize>>,
}

pub fn basis_file(i: usize) -> String {
    format!("basis_{i:03}.csv")
}

fn center_file(c: usize) -> String {
    if c == 0 {
        "center.csv".to_string()
    } else {
        format!("center_{c:03}.csv")
    }
}

pub fn write_matrix(path: &Path, a: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    for row in a.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in r.records() {
        let record = record.with_context(|| format!("malformed CSV in {}", path.display()))?;
        match cols {
            None => cols = Some(record.len()),
            Some(c) => ensure!(c == record.len(), "ragged row {} in {}", rows + 1, path.display()),
        }
        for field in record.iter() {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad number {field:?} in {}", path.display()))?,
            );
        }
        rows += 1;
    }
    let cols = cols.with_context(|| format!("{} is empty", path.display()))?;
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

fn read_basis(dir: &Path, name: &str, shape: (usize, usize)) -> Result<StiefelBasis> {
    let a = read_matrix(&dir.join(name))?;
    ensure!(a.shape() == shape, "{name}: expected {}x{}, found {}x{}", shape.0, shape.1, a.nrows(), a.ncols());
    StiefelBasis::new(a).with_context(|| format!("{name} is not an orthonormal basis"))
}

impl Dataset {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let meta = serde_json::to_string_pretty(&self.meta)?;
        fs::write(dir.join("meta.json"), meta + "\n").with_context(|| format!("cannot write into {}", dir.display()))?;
        for (c, center) in self.centers.iter().enumerate() {
            write_matrix(&dir.join(center_file(c)), center.matrix())?;
        }
        write_matrix(&dir.join("ground_truth.csv"), self.ground_truth.matrix())?;
        for (i, b) in self.bases.iter().enumerate() {
            write_matrix(&dir.join(basis_file(i)), b.matrix())?;
        }
        if let Some(start) = &self.start {
            write_matrix(&dir.join("start.csv"), start.matrix())?;
        }
        if let Some(labels) = &self.labels {
            let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
            fs::write(dir.join("labels.csv"), text)?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Dataset> {
        let meta_path = dir.join("meta.json");
        let text = fs::read_to_string(&meta_path).with_context(|| format!("cannot read {}", meta_path.display()))?;
        let meta: Meta = serde_json::from_str(&text).with_context(|| format!("malformed {}", meta_path.display()))?;
        if meta.format != FORMAT {
            bail!("unsupported dataset format {:?} (expected {FORMAT})", meta.format);
        }
        let shape = (meta.n, meta.k);
        let centers = (0..meta.clusters.unwrap_or(1))
            .map(|c| read_basis(dir, &center_file(c), shape))
            .collect::<Result<Vec<_>>>()?;
        let ground_truth = read_basis(dir, "ground_truth.csv", shape)?;
        let bases = (0..meta.m)
            .map(|i| read_basis(dir, &basis_file(i), shape))
            .collect::<Result<Vec<_>>>()?;
        let start = if dir.join("start.csv").exists() {
            Some(read_basis(dir, "start.csv", shape)?)
        } else {
            None
        };
        let labels = match fs::read_to_string(dir.join("labels.csv")) {
            Ok(text) => {
                let labels = text
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(|l| l.trim().parse::<usize>().with_context(|| format!("bad label {l:?}")))
                    .collect::<Result<Vec<_>>>()?;
                ensure!(labels.len() == meta.m, "labels.csv has {} entries for {} bases", labels.len(), meta.m);
                Some(labels)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e).context("cannot read labels.csv"),
        };
        Ok(Dataset { meta, centers, ground_truth, bases, start, labels })
    }
}
