//! Run artifacts: trace CSV, summary JSON and SVG panels.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::sim::trace::{write_csv, TraceTable};
use crate::sim::{AbortInfo, MonitorReport, TraceRecord, TraceShape};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error on {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("plot error on {path}: {message}")]
    Plot { path: String, message: String },
    #[error("trace {path} lacks column {column}")]
    MissingColumn { path: String, column: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Formats {
    pub fn all() -> Self {
        Self { csv: true, json: true, svg: true }
    }

    /// Parses a comma list such as `csv,json`. CSV and JSON are always
    /// emitted; the list only adds SVG.
    pub fn parse(list: &str) -> Result<Self, String> {
        let mut f = Self { csv: true, json: true, svg: false };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "csv" | "json" => {}
                "svg" => f.svg = true,
                other => return Err(format!("unknown output format '{other}'")),
            }
        }
        Ok(f)
    }
}

/// Everything written to `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub mode: String,
    pub n_followers: usize,
    pub order: usize,
    pub initial_r_norm: f64,
    pub disturbance_amplitudes: Vec<f64>,
    pub completed: bool,
    pub abort: Option<AbortInfo>,
    pub report: Option<MonitorReport>,
    /// The corrective term needs `(L+B)⁻¹A`, which no single follower knows.
    pub corrective_signal: &'static str,
    pub config: String,
}

pub const CORRECTIVE_NOTE: &str =
    "computed centrally from (L+B)^-1 A and all network estimates; not locally implementable";

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<(), OutputError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, summary).map_err(|e| OutputError::Io {
        path: path.display().to_string(),
        source: e.into(),
    })?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn write_trace(path: &Path, shape: &TraceShape, trace: &[TraceRecord]) -> Result<(), OutputError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_csv(BufWriter::new(file), shape, trace).map_err(|source| OutputError::Csv {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_trace(path: &Path) -> Result<TraceTable, OutputError> {
    let file = File::open(path).map_err(io_err(path))?;
    TraceTable::read(file).map_err(|source| OutputError::Csv {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `trace.csv` and `summary.json` (always) and the SVG panels when
/// requested. Returns the files written.
pub fn emit_outputs(
    outdir: &Path,
    shape: &TraceShape,
    trace: &[TraceRecord],
    summary: &RunSummary,
    mu: f64,
    formats: Formats,
) -> Result<Vec<PathBuf>, OutputError> {
    std::fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    let mut written = Vec::new();
    let csv_path = outdir.join("trace.csv");
    write_trace(&csv_path, shape, trace)?;
    written.push(csv_path.clone());
    let json_path = outdir.join("summary.json");
    write_summary(&json_path, summary)?;
    written.push(json_path);
    if formats.svg && !trace.is_empty() {
        let table = read_trace(&csv_path)?;
        written.extend(plot_panels(&table, Some(mu), outdir, &csv_path)?);
    }
    Ok(written)
}

struct Series {
    label: String,
    values: Vec<f64>,
}

fn column(table: &TraceTable, name: &str, source: &Path) -> Result<Vec<f64>, OutputError> {
    table
        .column(name)
        .map(<[f64]>::to_vec)
        .ok_or_else(|| OutputError::MissingColumn {
            path: source.display().to_string(),
            column: name.into(),
        })
}

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

fn draw_panel(path: &Path, title: &str, y_label: &str, t: &[f64], series: &[Series]) -> Result<(), OutputError> {
    let plot_err = |e: &dyn std::fmt::Display| OutputError::Plot {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let (t_min, t_max) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for &v in s.values.iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    let t_hi = if t_max > t_min { t_max } else { t_min + 1.0 };

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(t_min..t_hi, (lo - pad)..(hi + pad))
        .map_err(|e| plot_err(&e))?;
    chart
        .configure_mesh()
        .x_desc("t")
        .y_desc(y_label)
        .draw()
        .map_err(|e| plot_err(&e))?;
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(
                t.iter().copied().zip(s.values.iter().copied()).filter(|(_, v)| v.is_finite()),
                color.stroke_width(2),
            ))
            .map_err(|e| plot_err(&e))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(&e))?;
    root.present().map_err(|e| plot_err(&e))?;
    Ok(())
}

/// Draws the state, `‖r‖_P` and weight-norm panels from a trace table.
pub fn plot_panels(
    table: &TraceTable,
    mu: Option<f64>,
    outdir: &Path,
    source: &Path,
) -> Result<Vec<PathBuf>, OutputError> {
    std::fs::create_dir_all(outdir).map_err(io_err(outdir))?;
    let t = column(table, "t", source)?;
    let n = table.count_matching("W_norm_", 1);
    let m = table.count_matching("x0_", 1);
    let layers = if n > 0 { table.count_matching("V_norm_", 2) / n } else { 0 };
    let mut written = Vec::new();

    let names = ["positions", "velocities", "accelerations"];
    for (k, name) in names.iter().enumerate().take(m.min(3)) {
        let order = k + 1;
        let mut series = Vec::with_capacity(n + 1);
        series.push(Series {
            label: "leader".into(),
            values: column(table, &format!("x0_{order}"), source)?,
        });
        for i in 1..=n {
            series.push(Series {
                label: format!("agent {i}"),
                values: column(table, &format!("x_{i}_{order}"), source)?,
            });
        }
        let path = outdir.join(format!("{name}.svg"));
        draw_panel(&path, &format!("x^{order}"), &format!("x^{order}"), &t, &series)?;
        written.push(path);
    }

    let mut series = vec![Series {
        label: "‖r‖_P".into(),
        values: column(table, "r_norm_P", source)?,
    }];
    if let Some(mu) = mu {
        series.push(Series {
            label: "μ".into(),
            values: vec![mu; t.len()],
        });
    }
    let path = outdir.join("r_norm.svg");
    draw_panel(&path, "weighted sliding norm", "‖r‖_P", &t, &series)?;
    written.push(path);

    let series = (1..=n)
        .map(|i| {
            Ok(Series {
                label: format!("agent {i}"),
                values: column(table, &format!("W_norm_{i}"), source)?,
            })
        })
        .collect::<Result<Vec<_>, OutputError>>()?;
    let path = outdir.join("w_norms.svg");
    draw_panel(&path, "outer weights", "‖Ŵ_i‖", &t, &series)?;
    written.push(path);

    let series = (0..layers)
        .map(|j| {
            Ok(Series {
                label: format!("layer {j}"),
                values: column(table, &format!("V_norm_1_{j}"), source)?,
            })
        })
        .collect::<Result<Vec<_>, OutputError>>()?;
    let path = outdir.join("v_norms_agent1.svg");
    draw_panel(&path, "inner weights of agent 1", "‖V̂_1j‖_F", &t, &series)?;
    written.push(path);

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_list() {
        assert_eq!(Formats::parse("csv").unwrap(), Formats { csv: true, json: true, svg: false });
        assert_eq!(Formats::parse("csv,json,svg").unwrap(), Formats::all());
        assert!(Formats::parse("png").is_err());
    }
}
