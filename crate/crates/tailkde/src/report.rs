//! JSON/CSV output schemas: fit reports and density-grid exports shared
//! with the CLI.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::TailRegion;
use crate::error::Result;
use crate::estimators::FittedEstimator;
use crate::grid::DensityGrid;
use crate::mat::SymMat;

pub const SCHEMA_VERSION: u32 = 1;

/// Row-major density grid export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridExport {
    pub axes: Vec<Vec<f64>>,
    /// Row-major (last axis fastest) density values.
    pub values: Vec<f64>,
    pub normalizer: f64,
    pub estimator_id: String,
    pub bandwidth: Option<Vec<Vec<f64>>>,
}

impl GridExport {
    pub fn new(
        grid: &DensityGrid<f64>,
        normalizer: f64,
        estimator_id: &str,
        bandwidth: Option<&SymMat<f64>>,
    ) -> Self {
        Self {
            axes: grid.axes().to_vec(),
            values: grid.values().to_vec(),
            normalizer,
            estimator_id: estimator_id.to_string(),
            bandwidth: bandwidth.map(mat_rows),
        }
    }

    /// Long-format CSV: x1,…,xd,density.
    pub fn write_csv<W: Write>(&self, grid: &DensityGrid<f64>, mut w: W) -> Result<()> {
        let d = grid.dim();
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        header.push("density".into());
        writeln!(w, "{}", header.join(","))?;
        for flat in 0..grid.len() {
            let x = grid.point(flat);
            let mut row: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
            row.push(format!("{}", grid.values()[flat]));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

pub fn mat_rows(m: &SymMat<f64>) -> Vec<Vec<f64>> {
    let d = m.dim();
    (0..d).map(|i| (0..d).map(|j| m.get(i, j)).collect()).collect()
}

/// Estimator identity, parameters, normalization constant and diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub estimator: String,
    pub threshold: TailRegion,
    pub normalizer: f64,
    pub bandwidth: Option<Vec<Vec<f64>>>,
    pub pilot_bandwidth: Option<Vec<Vec<f64>>>,
    pub binwidths: Option<Vec<f64>>,
    pub params: Vec<(String, f64)>,
    pub loglik: Option<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub n: usize,
    pub dim: usize,
    pub grid: GridExport,
}

impl FitReport {
    pub fn from_fitted(est: &FittedEstimator, n: usize) -> Self {
        let tail = &est.tail;
        Self {
            schema_version: SCHEMA_VERSION,
            estimator: est.token.label().to_string(),
            threshold: tail.region().clone(),
            normalizer: tail.normalizer(),
            bandwidth: est.bandwidth.as_ref().map(mat_rows),
            pilot_bandwidth: est
                .selector
                .as_ref()
                .and_then(|s| s.pilot_g.as_ref())
                .map(mat_rows),
            binwidths: est.binwidths.clone(),
            params: est
                .params
                .iter()
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            loglik: est.loglik,
            converged: est.converged,
            warnings: est.warnings.clone(),
            n,
            dim: tail.grid().dim(),
            grid: GridExport::new(
                tail.grid(),
                tail.normalizer(),
                est.token.label(),
                est.bandwidth.as_ref(),
            ),
        }
    }
}
