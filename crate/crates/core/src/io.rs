//! Problem files: a JSON manifest plus one CSV per matrix or vector.
//!
//! CSV files are row-major, one row per line, comma separated, no header.
//! Vectors are stored as a single column. Values are written in Rust's
//! shortest round-trip form, so load → save → load is bit-exact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blockspace::{BlockSpec, LinearMap, Objective, SeparableProblem};
use crate::error::{Error, Group, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), msg: msg.into() }
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 24);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{:?}", m[(i, j)]).expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, format!("line {}: {f:?}: {e}", line_no + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    format!("line {} has {} fields, expected {}", line_no + 1, row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, matrix_to_csv(m)).map_err(io_err(path))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    matrix_from_csv(&text, path)
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(parse_err(path, format!("expected one column, found {}", m.ncols())));
    }
    Ok(DVector::from_column_slice(m.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum ObjectiveEntry {
    Quadratic { hessian_file: String, linear_file: String },
    LogdetTrace { cost_file: String },
    L1 { weight: f64 },
    TracePsd { weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub group: Group,
    pub dim: usize,
    /// Dense map stored as CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_file: Option<String>,
    /// `scale · I` instead of a map file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_scale: Option<f64>,
    pub objective: ObjectiveEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub c_file: String,
    pub blocks: Vec<BlockEntry>,
}

fn resolve(dir: &Path, file: &str) -> PathBuf {
    dir.join(file)
}

/// Loads a problem from its manifest; file names resolve relative to the
/// manifest's directory.
pub fn load_problem(manifest_path: &Path) -> Result<SeparableProblem> {
    let text = std::fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let manifest: ProblemManifest =
        serde_json::from_str(&text).map_err(|e| parse_err(manifest_path, e.to_string()))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let c = read_vector(&resolve(dir, &manifest.c_file))?;
    if c.len() != manifest.n {
        return Err(Error::Dimension(format!("c has length {}, manifest says n = {}", c.len(), manifest.n)));
    }
    let mut x_blocks = Vec::new();
    let mut y_blocks = Vec::new();
    for (i, entry) in manifest.blocks.iter().enumerate() {
        let map = match (&entry.map_file, entry.map_scale) {
            (Some(f), None) => LinearMap::Dense(read_matrix(&resolve(dir, f))?),
            (None, Some(scale)) => LinearMap::scaled(entry.dim, scale),
            _ => {
                return Err(parse_err(manifest_path, format!("block {i}: give exactly one of map_file, map_scale")));
            }
        };
        let objective = match &entry.objective {
            ObjectiveEntry::Quadratic { hessian_file, linear_file } => Objective::Quadratic {
                hessian: read_matrix(&resolve(dir, hessian_file))?,
                linear: read_vector(&resolve(dir, linear_file))?,
            },
            ObjectiveEntry::LogdetTrace { cost_file } => Objective::LogDetTrace { cost: read_matrix(&resolve(dir, cost_file))? },
            ObjectiveEntry::L1 { weight } => Objective::L1 { weight: *weight },
            ObjectiveEntry::TracePsd { weight } => Objective::TracePsd { weight: *weight },
        };
        let block = BlockSpec::new(map, objective)?;
        if block.dim != entry.dim {
            return Err(Error::BlockDimension { group: entry.group, index: i, expected: entry.dim, got: block.dim });
        }
        match entry.group {
            Group::X => x_blocks.push(block),
            Group::Y => y_blocks.push(block),
        }
    }
    if x_blocks.len() != manifest.p || y_blocks.len() != manifest.q {
        return Err(parse_err(
            manifest_path,
            format!("manifest declares p = {}, q = {} but lists {} x and {} y blocks", manifest.p, manifest.q, x_blocks.len(), y_blocks.len()),
        ));
    }
    SeparableProblem::new(x_blocks, y_blocks, c)
}

/// Writes `problem.json` and its CSV files into `dir`; returns the manifest
/// path.
pub fn save_problem(problem: &SeparableProblem, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut blocks = Vec::new();
    for (group, index, block) in problem.blocks() {
        let stem = format!("{group}{index}");
        let (map_file, map_scale) = match block.map.as_scaled_identity() {
            Some(scale) => (None, Some(scale)),
            None => {
                let name = format!("{stem}_map.csv");
                write_matrix(&dir.join(&name), &block.map.to_dense())?;
                (Some(name), None)
            }
        };
        let objective = match &block.objective {
            Objective::Quadratic { hessian, linear } => {
                let (h, l) = (format!("{stem}_hessian.csv"), format!("{stem}_linear.csv"));
                write_matrix(&dir.join(&h), hessian)?;
                write_vector(&dir.join(&l), linear)?;
                ObjectiveEntry::Quadratic { hessian_file: h, linear_file: l }
            }
            Objective::LogDetTrace { cost } => {
                let name = format!("{stem}_cost.csv");
                write_matrix(&dir.join(&name), cost)?;
                ObjectiveEntry::LogdetTrace { cost_file: name }
            }
            Objective::L1 { weight } => ObjectiveEntry::L1 { weight: *weight },
            Objective::TracePsd { weight } => ObjectiveEntry::TracePsd { weight: *weight },
        };
        blocks.push(BlockEntry { group, dim: block.dim, map_file, map_scale, objective });
    }
    write_vector(&dir.join("c.csv"), &problem.c)?;
    let manifest = ProblemManifest { n: problem.n(), p: problem.p(), q: problem.q(), c_file: "c.csv".into(), blocks };
    let path = dir.join("problem.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| parse_err(&path, e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(path)
}
