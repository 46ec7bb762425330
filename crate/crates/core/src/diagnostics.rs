//! Convergence metrics and trajectory export.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polytope::{dist, PolytopeError, Polyhedron};
use crate::state::StackedState;

pub const CSV_HEADER: &str = "k,dist,normalized_dist,consensus_residual,block_sum_gap";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub k: usize,
    #[serde(rename = "dist")]
    pub dist_core_consensus: f64,
    /// `dist(w(k)) / dist(w(0))`, or 0 when the start is already a fixed point.
    pub normalized_dist: f64,
    pub consensus_residual: f64,
    pub block_sum_gap: f64,
}

#[derive(Debug, Error)]
#[error("failed to write {path}: {source}")]
pub struct ExportError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

/// `dist(w, C ∩ A)`.
///
/// For consensus points `1⊗x`, `‖w - 1⊗x‖² = Σ‖w_i - w̄‖² + N‖w̄ - x‖²`, so the
/// nearest point of `C ∩ A` is `1⊗proj(w̄)`.
pub fn dist_core_consensus(poly: &Polyhedron, w: &StackedState) -> Result<f64, PolytopeError> {
    let mean = w.block_mean();
    let spread: f64 = w.blocks().map(|b| dist(b, &mean).powi(2)).sum();
    let p = poly.project(&mean)?;
    let offset = dist(&mean, &p);
    Ok((spread + w.n_agents() as f64 * offset * offset).sqrt())
}

/// `max_{i,j} ‖w_i - w_j‖`.
pub fn consensus_residual(w: &StackedState) -> f64 {
    let n = w.n_agents();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max(dist(w.block(i), w.block(j)));
        }
    }
    worst
}

/// `max_i |Σ_j w_ij - budget|`.
pub fn block_sum_gap(w: &StackedState, budget: f64) -> f64 {
    w.blocks()
        .map(|b| (b.iter().sum::<f64>() - budget).abs())
        .fold(0.0, f64::max)
}

/// Writes rows as CSV. Floats use the shortest representation that
/// round-trips, so output is byte-stable for a fixed trajectory.
pub fn write_csv<W: Write>(rows: &[TrajectoryRow], out: W) -> io::Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    wtr.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()
}

pub fn export_csv(rows: &[TrajectoryRow], path: &Path) -> Result<(), ExportError> {
    let wrap = |source| ExportError {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(wrap)?;
    write_csv(rows, io::BufWriter::new(file)).map_err(wrap)
}
