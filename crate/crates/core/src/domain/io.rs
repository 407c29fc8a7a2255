//! Text container for snapshots and space-time fields, plus CSV export.
//!
//! The container is JSON: a header with the grid description and time
//! metadata, followed by the row-major values (time level outermost, `x`
//! fastest).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::field::{Field, Snapshot};
use crate::domain::grid::{Face, SpatialGrid, TimeGrid};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub dim: usize,
    pub extents: Vec<(f64, f64)>,
    pub n_cells: Vec<usize>,
    pub gamma: Vec<Face>,
}

impl GridHeader {
    pub fn of(grid: &SpatialGrid) -> Self {
        let dim = grid.dim();
        Self {
            dim,
            extents: (0..dim).map(|a| (grid.lo(a), grid.hi(a))).collect(),
            n_cells: (0..dim).map(|a| grid.n_cells(a)).collect(),
            gamma: grid.gamma().to_vec(),
        }
    }

    pub fn to_grid(&self) -> Result<SpatialGrid> {
        if self.extents.len() != self.dim {
            return Err(Error::InvalidGrid(format!(
                "header declares dim {} but lists {} extents",
                self.dim,
                self.extents.len()
            )));
        }
        SpatialGrid::new(&self.extents, &self.n_cells, &self.gamma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeHeader {
    pub t_final: f64,
    pub n_steps: usize,
    pub t0_index: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotFile {
    pub grid: GridHeader,
    pub time: Option<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    pub grid: GridHeader,
    pub times: TimeHeader,
    pub values: Vec<f64>,
}

impl SnapshotFile {
    pub fn of(s: &Snapshot) -> Self {
        Self {
            grid: GridHeader::of(s.grid()),
            time: s.time(),
            values: s.values().to_vec(),
        }
    }

    pub fn into_snapshot(self) -> Result<Snapshot> {
        Snapshot::new(self.grid.to_grid()?, self.time, self.values)
    }
}

impl FieldFile {
    pub fn of(f: &Field) -> Self {
        let t = f.times();
        Self {
            grid: GridHeader::of(f.grid()),
            times: TimeHeader {
                t_final: t.t_final(),
                n_steps: t.n_steps(),
                t0_index: t.t0_index(),
                delta: t.delta(),
            },
            values: f.values().to_vec(),
        }
    }

    pub fn into_field(self) -> Result<Field> {
        let grid = self.grid.to_grid()?;
        let h = self.times;
        let times = TimeGrid::new(h.t_final, h.n_steps, h.t0_index, h.delta)?;
        Field::from_values(&grid, &times, self.values)
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io(format!("malformed container: {e}"))
}

pub fn snapshot_to_json(s: &Snapshot) -> String {
    serde_json::to_string_pretty(&SnapshotFile::of(s)).expect("snapshot serializes")
}

pub fn snapshot_from_json(text: &str) -> Result<Snapshot> {
    serde_json::from_str::<SnapshotFile>(text).map_err(json_err)?.into_snapshot()
}

pub fn field_to_json(f: &Field) -> String {
    serde_json::to_string_pretty(&FieldFile::of(f)).expect("field serializes")
}

pub fn field_from_json(text: &str) -> Result<Field> {
    serde_json::from_str::<FieldFile>(text).map_err(json_err)?.into_field()
}

fn csv_header(dim: usize) -> &'static str {
    if dim == 1 {
        "t,x,value\n"
    } else {
        "t,x,y,value\n"
    }
}

fn push_row(out: &mut String, grid: &SpatialGrid, t: Option<f64>, node: usize, v: f64) {
    let x = grid.coords(node);
    match t {
        Some(t) => write!(out, "{t:e}").unwrap(),
        None => out.push_str("nan"),
    }
    write!(out, ",{:e}", x[0]).unwrap();
    if grid.dim() == 2 {
        write!(out, ",{:e}", x[1]).unwrap();
    }
    writeln!(out, ",{v:e}").unwrap();
}

/// CSV with columns `t, x[, y], value`. A time-less snapshot writes `nan`
/// in the `t` column.
pub fn snapshot_to_csv(s: &Snapshot) -> String {
    let grid = s.grid();
    let mut out = String::from(csv_header(grid.dim()));
    for (node, &v) in s.values().iter().enumerate() {
        push_row(&mut out, grid, s.time(), node, v);
    }
    out
}

pub fn field_to_csv(f: &Field) -> String {
    let grid = f.grid();
    let mut out = String::from(csv_header(grid.dim()));
    for level in 0..f.n_levels() {
        let t = f.times().t(level);
        for (node, &v) in f.level(level).iter().enumerate() {
            push_row(&mut out, grid, Some(t), node, v);
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}
