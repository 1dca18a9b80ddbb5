//! CSV writers for traces, summaries and fields.

use std::path::Path;

use serde::Serialize;

use crate::covariance::{kernel_table, MaternParams};
use crate::diagnostics::{MetricsRecord, ReplicateStats};
use crate::error::Result;
use crate::grid::GridField;

/// Serializes `rows` with a header derived from the row type.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-iteration trace. Wall time is zeroed unless `timed`, so repeated runs
/// produce identical files.
pub fn write_trace(path: &Path, history: &[MetricsRecord], timed: bool) -> Result<()> {
    let rows: Vec<MetricsRecord> = history
        .iter()
        .map(|m| MetricsRecord {
            wall_ms: if timed { m.wall_ms } else { 0.0 },
            ..m.clone()
        })
        .collect();
    if rows.is_empty() {
        // serde only writes headers alongside a first record
        std::fs::write(path, "iter,alpha,rel_err,residual_t,param_err_d,sketch_gap,wall_ms\n")?;
        return Ok(());
    }
    write_rows(path, &rows)
}

#[derive(Serialize)]
struct StatsRow {
    iter: usize,
    count: usize,
    rel_err_mean: Option<f64>,
    rel_err_lo: Option<f64>,
    rel_err_hi: Option<f64>,
    residual_t_mean: Option<f64>,
    param_err_d_mean: Option<f64>,
}

pub fn write_replicate_stats(path: &Path, stats: &[ReplicateStats]) -> Result<()> {
    let rows: Vec<StatsRow> = stats
        .iter()
        .map(|s| StatsRow {
            iter: s.iter,
            count: s.count,
            rel_err_mean: s.rel_err.map(|e| e.mean),
            rel_err_lo: s.rel_err.map(|e| e.lo),
            rel_err_hi: s.rel_err.map(|e| e.hi),
            residual_t_mean: s.residual_t.map(|e| e.mean),
            param_err_d_mean: s.param_err_d.map(|e| e.mean),
        })
        .collect();
    write_rows(path, &rows)
}

#[derive(Serialize)]
struct FieldRow {
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    value: f64,
}

/// One row per node: `i, j, x, y, value`.
pub fn write_field(path: &Path, field: &GridField) -> Result<()> {
    let g = *field.grid();
    let mut rows = Vec::with_capacity(g.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            rows.push(FieldRow {
                i,
                j,
                x: i as f64 * g.hx(),
                y: j as f64 * g.hy(),
                value: field.get(i, j),
            });
        }
    }
    write_rows(path, &rows)
}

/// Rows sampled at each iteration, as space-separated index lists.
pub fn write_sketches(path: &Path, plans: &[Vec<usize>]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        iter: usize,
        rows: String,
    }
    let rows: Vec<Row> = plans
        .iter()
        .enumerate()
        .map(|(n, p)| Row {
            iter: n + 1,
            rows: p.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" "),
        })
        .collect();
    write_rows(path, &rows)
}

/// Kernel values `c(r)` on `samples` radii spread over `[0, r_max]`.
pub fn write_kernel(path: &Path, params: &MaternParams, r_max: f64, samples: usize) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        r: f64,
        c: f64,
    }
    let radii: Vec<f64> = (0..samples)
        .map(|k| r_max * k as f64 / (samples.max(2) - 1) as f64)
        .collect();
    let rows: Vec<Row> = kernel_table(params, &radii)
        .into_iter()
        .map(|(r, c)| Row { r, c })
        .collect();
    write_rows(path, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    #[test]
    fn field_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::square(3, 2.0).unwrap();
        let f = GridField::new(g, (0..9).map(f64::from).collect()).unwrap();
        let p = dir.path().join("f.csv");
        write_field(&p, &f).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i,j,x,y,value");
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[6], "2,1,2.0,1.0,5.0");
    }

    #[test]
    fn empty_trace_keeps_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trace(&p, &[], false).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap().trim(),
            "iter,alpha,rel_err,residual_t,param_err_d,sketch_gap,wall_ms"
        );
    }
}
