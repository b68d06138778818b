//! Cross-product parameter sweeps.

use std::path::{Path, PathBuf};

use log::error;
use rayon::prelude::*;
use serde::Serialize;
use xdc_core::image_io::write_png;
use xdc_core::sampler::Silent;
use xdc_core::Grid;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::mosaic::{tile_sheet, Tile};
use crate::pipeline::{self, Inputs};

/// One point of the sweep and where it lands in the sheet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub t_in: f64,
    pub n_in: usize,
    pub r: f64,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("T{} N{} R{}", self.t_in, self.n_in, self.r)
    }

    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        cfg.t_in = self.t_in;
        cfg.n_in = self.n_in;
        cfg.r = self.r;
        cfg.sweep_t_in.clear();
        cfg.sweep_n_in.clear();
        cfg.sweep_r.clear();
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub cells: Vec<Cell>,
    pub rows: usize,
    pub cols: usize,
}

/// Enumerates `t_in × n_in × r` with `r` varying fastest. Missing axes fall
/// back to the single configured value. Columns follow the innermost axis
/// that has more than one value, so a one-axis sweep is a single row.
pub fn plan(cfg: &RunConfig) -> Result<Plan, CliError> {
    if cfg.sweep_t_in.is_empty() && cfg.sweep_n_in.is_empty() && cfg.sweep_r.is_empty() {
        return Err(CliError::Input("sweep needs at least one of --sweep-t-in, --sweep-n-in, --sweep-r".into()));
    }
    let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let t_in = or(&cfg.sweep_t_in, cfg.t_in);
    let r = or(&cfg.sweep_r, cfg.r);
    let n_in = if cfg.sweep_n_in.is_empty() { vec![cfg.n_in] } else { cfg.sweep_n_in.clone() };
    let cols = [r.len(), n_in.len(), t_in.len()].into_iter().find(|&n| n > 1).unwrap_or(1);
    let mut cells = Vec::new();
    for &a in &t_in {
        for &b in &n_in {
            for &c in &r {
                let index = cells.len();
                cells.push(Cell { index, row: index / cols, col: index % cols, t_in: a, n_in: b, r: c });
            }
        }
    }
    let rows = cells.len().div_ceil(cols);
    Ok(Plan { cells, rows, cols })
}

pub fn cells_dir(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sweep".into());
    output.with_file_name(format!("{stem}_cells"))
}

#[derive(Debug, Serialize)]
pub struct CellReport {
    #[serde(flatten)]
    pub cell: Cell,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs every cell (in parallel up to `cfg.workers`), writes per-cell images
/// with sidecars and the tiled sheet. Failed cells are reported and left
/// blank; the first failure is returned after everything else finished.
pub fn run(cfg: &RunConfig, inputs: &Inputs, output: &Path) -> Result<(Vec<CellReport>, Option<CliError>), CliError> {
    let plan = plan(cfg)?;
    let dir = cells_dir(output);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let results: Vec<Result<(Grid, PathBuf), CliError>> = pool.install(|| {
        plan.cells
            .par_iter()
            .map(|cell| {
                let cell_cfg = cell.apply(cfg);
                let out = pipeline::run(&cell_cfg, inputs, &mut Silent)?;
                let path = dir.join(format!("cell_{:03}.png", cell.index));
                pipeline::write_outputs(&cell_cfg, &out, &path)?;
                Ok((out.image, path))
            })
            .collect()
    });

    let (h, w) = match results.iter().find_map(|r| r.as_ref().ok()) {
        Some((g, _)) => (g.height(), g.width()),
        None => (inputs.reference.height(), inputs.reference.width()),
    };
    let mut tiles = Vec::new();
    let mut reports = Vec::new();
    let mut first_error = None;
    for (cell, result) in plan.cells.iter().zip(results) {
        match result {
            Ok((image, path)) => {
                reports.push(CellReport { cell: cell.clone(), ok: true, path: Some(path), error: None });
                tiles.push((Some(image), cell.label()));
            }
            Err(e) => {
                error!("cell {} ({}) failed: {e}", cell.index, cell.label());
                reports.push(CellReport { cell: cell.clone(), ok: false, path: None, error: Some(e.to_string()) });
                tiles.push((None, format!("{} ERR", cell.label())));
                first_error.get_or_insert(e);
            }
        }
    }
    let tiles: Vec<Tile> = tiles.iter().map(|(g, l)| Tile { image: g.as_ref(), label: l.clone() }).collect();
    let sheet = tile_sheet(&tiles, plan.rows, plan.cols, h, w);
    write_png(&sheet, output)?;
    Ok((reports, first_error))
}
