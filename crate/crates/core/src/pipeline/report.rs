use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::PipelineReport;
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

/// Paths written by [`emit_report`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmittedFiles {
    pub report: PathBuf,
    pub levels_csv: PathBuf,
    pub cross_levels_csv: PathBuf,
    pub density_csv: PathBuf,
    pub plot_data: PathBuf,
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::invalid(e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::invalid(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LevelRow {
    n: usize,
    delta: f64,
    edge_count: usize,
    mixing: bool,
    period: usize,
    mixing_constant: Option<usize>,
    ergodic_count: usize,
    ergodic_truncated: bool,
}

/// Writes `report.json`, CSV tables and `plot_data.json` into `dir`.
pub fn emit_report(report: &PipelineReport, dir: &Path) -> Result<EmittedFiles> {
    std::fs::create_dir_all(dir)?;
    let files = EmittedFiles {
        report: dir.join("report.json"),
        levels_csv: dir.join("levels.csv"),
        cross_levels_csv: dir.join("cross_levels.csv"),
        density_csv: dir.join("density.csv"),
        plot_data: dir.join("plot_data.json"),
    };
    write_json(&files.report, report)?;
    write_csv(
        &files.levels_csv,
        report.levels.iter().map(|l| LevelRow {
            n: l.n,
            delta: l.delta,
            edge_count: l.edge_count,
            mixing: l.certificate.is_mixing(),
            period: l.certificate.period,
            mixing_constant: l.certificate.mixing_constant,
            ergodic_count: l.ergodic_count,
            ergodic_truncated: l.ergodic_truncated,
        }),
    )?;
    write_csv(&files.cross_levels_csv, &report.cross_levels)?;
    write_csv(&files.density_csv, report.density.iter().flat_map(|d| &d.rows))?;

    let plot = json!({
        "level_vs_distance": report.trend.points.iter()
            .map(|p| json!({"n": p.n, "distance": p.distance_to_finest}))
            .collect::<Vec<_>>(),
        "scale_vs_distance": report.density.iter().flat_map(|d| &d.rows)
            .map(|r| json!({"scale": r.scale, "weakstar": r.weakstar, "pi_bar": r.pi_bar}))
            .collect::<Vec<_>>(),
    });
    write_json(&files.plot_data, &plot)?;
    Ok(files)
}

pub fn load_report(path: &Path) -> Result<PipelineReport> {
    read_json(path)
}

/// The report as JSON with the timestamp removed, for reproducibility
/// comparisons.
pub fn strip_timestamp(report: &PipelineReport) -> Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    if let Value::Object(map) = &mut v {
        map.remove("generated_at");
    }
    v
}
