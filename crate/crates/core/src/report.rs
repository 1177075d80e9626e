//! Report files: parameter tables, loss histories, predicted-vs-data series,
//! simulation summaries and optional SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::data::{ArcDataset, RATE_FLOOR};
use crate::fitting::{FitMethod, FitResult};
use crate::integrate::SimulationResult;
use crate::kinetics::{kelvin_to_celsius, StageKinetics, ThermalModel};
use crate::objective::Prediction;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV output: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialisation: {0}")]
    Serialize(String),
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    std::fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, ReportError> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => ReportError::Io {
            path: path.display().to_string(),
            source,
        },
        other => ReportError::Serialize(format!("{other:?}")),
    })
}

/// One row per stage: `stage,c0,A_per_s,Ea_J,h_J,m,n,eta,gate_temperature_K`.
pub fn write_parameters_csv(path: &Path, model: &ThermalModel, etas: &[f64]) -> Result<(), ReportError> {
    let mut w = csv_writer(path)?;
    w.write_record(["stage", "c0", "A_per_s", "Ea_J", "h_J", "m", "n", "eta", "gate_temperature_K"])?;
    for (i, s) in model.stages.iter().enumerate() {
        let eta = etas.get(i).map_or(String::new(), f64::to_string);
        let gate = s.gate_temperature.map_or(String::new(), |g| g.to_string());
        w.write_record([
            (i + 1).to_string(),
            s.c0.to_string(),
            s.frequency_factor.to_string(),
            s.activation_energy.to_string(),
            s.enthalpy.to_string(),
            s.m.to_string(),
            s.n.to_string(),
            eta,
            gate,
        ])?;
    }
    w.flush().map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// `run,iteration,loss` for every PSO run.
pub fn write_loss_histories_csv(path: &Path, histories: &[Vec<f64>]) -> Result<(), ReportError> {
    let mut w = csv_writer(path)?;
    w.write_record(["run", "iteration", "loss"])?;
    for (run, h) in histories.iter().enumerate() {
        for (it, v) in h.iter().enumerate() {
            w.write_record([(run + 1).to_string(), it.to_string(), v.to_string()])?;
        }
    }
    w.flush().map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Data and prediction side by side on the data timestamps, plus each
/// stage's cumulative heat when available.
pub fn write_prediction_csv(path: &Path, dataset: &ArcDataset, prediction: &Prediction) -> Result<(), ReportError> {
    let mut w = csv_writer(path)?;
    let n_stages = prediction
        .stage_heat
        .as_ref()
        .and_then(|h| h.first())
        .map_or(0, Vec::len);
    let mut header: Vec<String> = ["t_s", "T_data_K", "T_pred_K", "dTdt_data_K_per_s", "dTdt_pred_K_per_s"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=n_stages).map(|i| format!("Q_stage{i}_J")));
    w.write_record(&header)?;
    let data_rate = dataset.rate.as_deref();
    for k in 0..prediction.time.len().min(dataset.len()) {
        let mut row = vec![
            dataset.time[k].to_string(),
            dataset.temperature[k].to_string(),
            prediction.temperature[k].to_string(),
            data_rate.map_or(String::new(), |r| r[k].to_string()),
            prediction.rate[k].to_string(),
        ];
        if let Some(heat) = &prediction.stage_heat {
            row.extend(heat[k].iter().map(f64::to_string));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_model_toml(path: &Path, model: &ThermalModel) -> Result<(), ReportError> {
    let text = toml::to_string_pretty(model).map_err(|e| ReportError::Serialize(e.to_string()))?;
    write_file(path, &text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ReportError::Serialize(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    write_file(path, text)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct FitReport {
    pub method: FitMethod,
    pub seed: u64,
    pub n_stages: usize,
    pub final_loss: f64,
    pub run_losses: Vec<f64>,
    pub evaluations: u64,
    pub wall_time_s: f64,
    pub heat_capacity_J_per_K: f64,
    pub etas: Vec<f64>,
    pub stages: Vec<StageKinetics>,
}

impl FitReport {
    pub fn new(fit: &FitResult, seed: u64) -> Self {
        Self {
            method: fit.method,
            seed,
            n_stages: fit.model.num_stages(),
            final_loss: fit.final_loss,
            run_losses: fit.run_losses.clone(),
            evaluations: fit.evaluations,
            wall_time_s: fit.wall_time_s,
            heat_capacity_J_per_K: fit.model.heat_capacity,
            etas: fit.etas.clone(),
            stages: fit.model.stages.clone(),
        }
    }
}

/// Every file describing one fit, named `<prefix>_*` inside `dir`.
pub fn write_fit_outputs(dir: &Path, prefix: &str, fit: &FitResult, seed: u64, svg: bool) -> Result<(), ReportError> {
    write_json(&dir.join(format!("{prefix}_report.json")), &FitReport::new(fit, seed))?;
    write_parameters_csv(&dir.join(format!("{prefix}_parameters.csv")), &fit.model, &fit.etas)?;
    write_model_toml(&dir.join(format!("{prefix}_model.toml")), &fit.model)?;
    write_loss_histories_csv(&dir.join(format!("{prefix}_loss_history.csv")), &fit.loss_histories)?;
    write_prediction_csv(&dir.join(format!("{prefix}_prediction.csv")), &fit.dataset, &fit.prediction)?;
    if svg {
        let data_rate = fit.dataset.rate.clone().unwrap_or_default();
        let rate_plot = svg_plot(
            "self-heating rate",
            "T (°C)",
            "dT/dt (K/s)",
            true,
            &[
                Series::new("data", celsius(&fit.dataset.temperature), data_rate),
                Series::new(
                    "model",
                    celsius(&fit.prediction.temperature),
                    fit.prediction.rate.clone(),
                ),
            ],
        );
        write_file(&dir.join(format!("{prefix}_rate_vs_T.svg")), &rate_plot)?;
        let temp_plot = svg_plot(
            "temperature",
            "t (s)",
            "T (°C)",
            false,
            &[
                Series::new("data", fit.dataset.time.clone(), celsius(&fit.dataset.temperature)),
                Series::new("model", fit.prediction.time.clone(), celsius(&fit.prediction.temperature)),
            ],
        );
        write_file(&dir.join(format!("{prefix}_T_vs_t.svg")), &temp_plot)?;
    }
    Ok(())
}

fn celsius(t: &[f64]) -> Vec<f64> {
    t.iter().map(|&v| kelvin_to_celsius(v)).collect()
}

/// Row of the simulation summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct RunSummary {
    pub scenario: String,
    pub oven_temperature_C: Option<f64>,
    pub tr_time_s: Option<f64>,
    pub peak_temperature_C: f64,
    pub trajectory_file: String,
}

impl RunSummary {
    pub fn new(scenario: String, oven_c: Option<f64>, sim: &SimulationResult, file: String) -> Self {
        Self {
            scenario,
            oven_temperature_C: oven_c,
            tr_time_s: sim.tr_time,
            peak_temperature_C: kelvin_to_celsius(sim.peak_temperature),
            trajectory_file: file,
        }
    }
}

pub fn write_summary_csv(path: &Path, rows: &[RunSummary]) -> Result<(), ReportError> {
    let mut w = csv_writer(path)?;
    w.write_record(["scenario", "oven_temperature_C", "tr_time_s", "peak_temperature_C", "trajectory_file"])?;
    for r in rows {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        w.write_record([
            r.scenario.clone(),
            opt(r.oven_temperature_C),
            opt(r.tr_time_s),
            r.peak_temperature_C.to_string(),
            r.trajectory_file.clone(),
        ])?;
    }
    w.flush().map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Plain-text table of a summary, for the terminal.
pub fn format_summary(rows: &[RunSummary]) -> String {
    let mut out = String::from("scenario        oven (°C)   tr_time (s)     peak (°C)\n");
    for r in rows {
        let oven = r.oven_temperature_C.map_or("-".into(), |v| format!("{v:.1}"));
        let tr = r.tr_time_s.map_or("no runaway".into(), |v| format!("{v:.1}"));
        let _ = writeln!(out, "{:<15} {:>9} {:>13} {:>13.2}", r.scenario, oven, tr, r.peak_temperature_C);
    }
    out
}

pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Series {
    pub fn new(label: &str, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            x,
            y,
        }
    }
}

const COLOURS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Minimal line plot. With `log_y`, values are floored at the rate floor.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, log_y: bool, series: &[Series]) -> String {
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 30.0, 50.0);
    let ty = |v: f64| if log_y { v.max(RATE_FLOOR).log10() } else { v };
    let points = || {
        series
            .iter()
            .flat_map(|s| s.x.iter().zip(&s.y).map(|(&x, &y)| (x, ty(y))))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
    };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in points() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y0 -= 0.5;
        y1 = y0 + 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (width - left - right);
    let py = |y: f64| height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle">{title}</text>"#, width / 2.0);
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        width - left - right,
        height - top - bottom
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let ylab = if log_y { format!("1e{fy:.1}") } else { format!("{fy:.4}") };
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.4}</text>"#,
            px(fx),
            height - bottom + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ylab}</text>"#,
            left - 4.0,
            py(fy) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        width / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        height / 2.0,
        height / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let mut path = String::new();
        for (&x, &y) in s.x.iter().zip(&s.y) {
            let y = ty(y);
            if x.is_finite() && y.is_finite() {
                let _ = write!(path, "{:.2},{:.2} ", px(x), py(y));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            path.trim_end()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            width - right - 90.0,
            top + 16.0 * (i + 1) as f64,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    #[test]
    fn parameter_table_mirrors_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_parameters_csv(&path, &reference::open_test_model(), &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "stage,c0,A_per_s,Ea_J,h_J,m,n,eta,gate_temperature_K");
        assert_eq!(lines.count(), 4);
        assert!(text.contains("18224"));
    }

    #[test]
    fn model_toml_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        let model = reference::closed_test_model();
        write_model_toml(&path, &model).unwrap();
        let back: ThermalModel = toml::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = svg_plot(
            "t",
            "x",
            "y",
            true,
            &[Series::new("a", vec![1.0, 2.0, 3.0], vec![1e-3, 1e-2, 0.0])],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn summary_table_lists_runs() {
        let rows = vec![RunSummary {
            scenario: "oven".into(),
            oven_temperature_C: Some(140.0),
            tr_time_s: None,
            peak_temperature_C: 141.0,
            trajectory_file: "oven_140.csv".into(),
        }];
        assert!(format_summary(&rows).contains("no runaway"));
    }
}
