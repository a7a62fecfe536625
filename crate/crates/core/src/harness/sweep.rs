//! Grid sweeps over lambda0, participation and seed.

use std::fs;
use std::path::{Path, PathBuf};

use log::{error, info};
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::RunConfig;
use super::output::{format_float, SUMMARY_FILE};
use super::run::{reference_for, run_to_dir_with_reference, run_with, RunOutput};

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub lambda0: f64,
    pub participation: f64,
    pub seed: u64,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        format!(
            "lambda0-{}_p-{}_seed-{}",
            self.lambda0, self.participation, self.seed
        )
    }
}

/// Final numbers of a cell, or the error that stopped it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub cell: Cell,
    pub dir: Option<PathBuf>,
    pub result: std::result::Result<CellSummary, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub final_objective: f64,
    pub final_residual: Option<f64>,
    pub final_fw_gap: f64,
    pub final_surrogate_gap: f64,
    /// Surrogate gap after the first round.
    pub first_surrogate_gap: f64,
    pub final_consensus_distance: f64,
}

impl From<&RunOutput> for CellSummary {
    fn from(out: &RunOutput) -> Self {
        let last = out.last();
        let first = out.rows.get(1).unwrap_or(last);
        Self {
            final_objective: last.metrics.objective,
            final_residual: last.residual,
            final_fw_gap: last.metrics.fw_gap,
            final_surrogate_gap: last.metrics.surrogate_gap,
            first_surrogate_gap: first.metrics.surrogate_gap,
            final_consensus_distance: last.metrics.consensus_distance,
        }
    }
}

/// Cartesian product of the sweep axes; a missing axis uses the base value.
pub fn grid(cfg: &RunConfig) -> Vec<Cell> {
    let sweep = cfg.sweep.clone().unwrap_or_default();
    let or = |v: Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v };
    let lambdas = or(sweep.lambda0, cfg.schedule.lambda0);
    let ps = or(sweep.participation, cfg.run.participation);
    let seeds = if sweep.seeds.is_empty() {
        vec![cfg.run.seed]
    } else {
        sweep.seeds
    };
    let mut cells = Vec::new();
    for &lambda0 in &lambdas {
        for &participation in &ps {
            for &seed in &seeds {
                cells.push(Cell {
                    lambda0,
                    participation,
                    seed,
                });
            }
        }
    }
    cells
}

/// Runs every cell on `run.workers` threads (each cell single-threaded) and, when `out`
/// is given, writes one directory per cell and `summary.csv`. Failing cells
/// are recorded and do not stop the sweep. The cells share one reference
/// solution, since the axes never change the problem.
pub fn sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<CellOutcome>> {
    let cells = grid(cfg);
    info!("sweeping {} cells", cells.len());
    let reference = reference_for(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| {
                let mut c = cfg.with_cell(cell.lambda0, cell.participation, cell.seed);
                c.run.workers = 1;
                let dir = out.map(|o| o.join(cell.dir_name()));
                let result = match &dir {
                    Some(d) => run_to_dir_with_reference(&c, d, reference.clone()),
                    None => run_with(&c, None, reference.clone()).map(|(o, _)| o),
                };
                let result = result.map(|o| CellSummary::from(&o)).map_err(|e| {
                    error!("cell {} failed: {e}", cell.dir_name());
                    e.to_string()
                });
                CellOutcome { cell, dir, result }
            })
            .collect()
    });
    if let Some(o) = out {
        fs::create_dir_all(o)?;
        fs::write(o.join(SUMMARY_FILE), summary_csv(&outcomes))?;
    }
    Ok(outcomes)
}

pub fn summary_csv(outcomes: &[CellOutcome]) -> String {
    let mut s = String::from(
        "lambda0,participation,seed,status,final_objective,final_residual,final_fw_gap,final_surrogate_gap,first_surrogate_gap,final_consensus_distance,error\n",
    );
    for o in outcomes {
        let c = o.cell;
        let head = format!(
            "{},{},{}",
            format_float(c.lambda0),
            format_float(c.participation),
            c.seed
        );
        match &o.result {
            Ok(r) => s.push_str(&format!(
                "{head},ok,{},{},{},{},{},{},\n",
                format_float(r.final_objective),
                r.final_residual.map(format_float).unwrap_or_default(),
                format_float(r.final_fw_gap),
                format_float(r.final_surrogate_gap),
                format_float(r.first_surrogate_gap),
                format_float(r.final_consensus_distance),
            )),
            Err(e) => s.push_str(&format!(
                "{head},failed,,,,,,,{}\n",
                e.replace([',', '\n'], ";")
            )),
        }
    }
    s
}
