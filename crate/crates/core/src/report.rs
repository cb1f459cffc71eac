//! Versioned CSV and JSON writers shared by the harness and the CLI.
//!
//! Every CSV schema is versioned: the *first header cell* carries the
//! schema string (e.g. `scan-v1`), and the column below it is the 0-based
//! row index (which doubles as the step index in trace files and the point
//! id in cloud files). Numbers are written in Rust's shortest round-trip
//! decimal form, so files are byte-stable across runs, platforms, and
//! thread counts, and parse back to the exact same values.
//!
//! The run manifest is a JSON object: the resolved experiment config with a
//! `schema` marker and a `run` metadata block (null until the run
//! finishes). Because config loading accepts those two extra keys, a
//! manifest can be passed back in as a config to reproduce the run.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::harness::{
    ExperimentConfig, PcaActivationReport, PcaSignatureResult, PerturbationMemberRow,
    ReadoutOnlyResult, RunInfo, ScanRow,
};
use crate::reservoir::ActivationTrace;
use crate::tasks::Dataset;

/// Schema string of `manifest.json`.
pub const MANIFEST_SCHEMA: &str = "manifest-v1";
/// Schema string of scan result tables.
pub const SCAN_SCHEMA: &str = "scan-v1";
/// Schema string of activation traces.
pub const TRACE_SCHEMA: &str = "trace-v1";
/// Schema string of trace-difference tables.
pub const DIFF_SCHEMA: &str = "diff-v1";
/// Schema string of perturbation summaries.
pub const PERTURBATION_SCHEMA: &str = "perturbation-v1";
/// Schema string of projected point clouds.
pub const POINTS_SCHEMA: &str = "points-v1";
/// Schema string of PCA separability summaries.
pub const PCA_SCHEMA: &str = "pca-v1";
/// Schema string of PCA variance spectra.
pub const VARIANCE_SCHEMA: &str = "variance-v1";
/// Schema string of readout-only summaries.
pub const READOUT_SCHEMA: &str = "readout-v1";
/// Schema string of pre-argmax score tables.
pub const Z_SCHEMA: &str = "z-v1";
/// Schema string of dense learned-label grids.
pub const GRID_SCHEMA: &str = "grid-v1";
/// Schema string of dataset exports (CSV and JSON manifest).
pub const DATASET_SCHEMA: &str = "dataset-v1";

/// Shortest decimal representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

fn open_csv(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

// ---------------------------------------------------------------------------
// Scan tables.

const SCAN_HEADER: [&str; 16] = [
    SCAN_SCHEMA,
    "label",
    "w",
    "b",
    "s",
    "row_seed",
    "f_mean",
    "f_se",
    "c_mean",
    "c_se",
    "alpha_mean",
    "alpha_se",
    "rms_mean",
    "rms_se",
    "accuracy_mean",
    "accuracy_se",
];

/// Incremental scan-table writer: rows are flushed as they are written, so
/// a failed sweep leaves all finished rows on disk.
pub struct ScanCsvWriter {
    writer: csv::Writer<fs::File>,
    row: usize,
}

impl ScanCsvWriter {
    /// Creates the file and writes the header.
    pub fn create(path: &Path) -> Result<Self> {
        let mut writer = open_csv(path)?;
        writer.write_record(SCAN_HEADER)?;
        writer.flush()?;
        Ok(ScanCsvWriter { writer, row: 0 })
    }

    /// Appends and flushes one row. Rows without accuracy leave those two
    /// cells empty.
    pub fn write_row(&mut self, row: &ScanRow) -> Result<()> {
        let (acc_mean, acc_se) = match &row.accuracy {
            Some(a) => (format_float(a.mean), format_float(a.se)),
            None => (String::new(), String::new()),
        };
        self.writer.write_record([
            self.row.to_string(),
            row.label.clone(),
            format_float(row.w),
            format_float(row.b),
            format_float(row.s),
            row.row_seed.to_string(),
            format_float(row.fluctuation.mean),
            format_float(row.fluctuation.se),
            format_float(row.correlation.mean),
            format_float(row.correlation.se),
            format_float(row.nonlinearity.mean),
            format_float(row.nonlinearity.se),
            format_float(row.rms.mean),
            format_float(row.rms.se),
            acc_mean,
            acc_se,
        ])?;
        self.writer.flush()?;
        self.row += 1;
        Ok(())
    }

    /// Flushes and closes the file.
    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Writes a whole scan in one call.
pub fn write_scan_csv(path: &Path, rows: &[ScanRow]) -> Result<()> {
    let mut writer = ScanCsvWriter::create(path)?;
    for row in rows {
        writer.write_row(row)?;
    }
    writer.finish()
}

// ---------------------------------------------------------------------------
// Traces and trace differences.

/// Writes a trace: row index = step `t`, one `y{k}` column per neuron.
pub fn write_trace_csv(path: &Path, trace: &ActivationTrace) -> Result<()> {
    let mut writer = open_csv(path)?;
    let mut header = vec![TRACE_SCHEMA.to_string()];
    header.extend((0..trace.n_neurons()).map(|k| format!("y{k}")));
    writer.write_record(&header)?;
    for t in 0..trace.n_steps() {
        let mut record = vec![t.to_string()];
        record.extend(trace.values().row(t).iter().map(|v| format_float(*v)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a trace difference: row index = step `t`, one `d{k}` column per
/// covered neuron index.
pub fn write_diff_csv(path: &Path, diff: &DMatrix<f64>, neurons: &[usize]) -> Result<()> {
    if diff.ncols() != neurons.len() {
        return Err(Error::invalid(format!(
            "difference has {} columns but {} neuron indices were given",
            diff.ncols(),
            neurons.len()
        )));
    }
    let mut writer = open_csv(path)?;
    let mut header = vec![DIFF_SCHEMA.to_string()];
    header.extend(neurons.iter().map(|k| format!("d{k}")));
    writer.write_record(&header)?;
    for t in 0..diff.nrows() {
        let mut record = vec![t.to_string()];
        record.extend(diff.row(t).iter().map(|v| format_float(*v)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Perturbation summaries.

const PERTURBATION_HEADER: [&str; 5] =
    [PERTURBATION_SCHEMA, "b", "member", "row_seed", "max_abs_diff"];

/// Incremental perturbation-summary writer (one row per ensemble member
/// per balance value).
pub struct PerturbationCsvWriter {
    writer: csv::Writer<fs::File>,
    row: usize,
}

impl PerturbationCsvWriter {
    /// Creates the file and writes the header.
    pub fn create(path: &Path) -> Result<Self> {
        let mut writer = open_csv(path)?;
        writer.write_record(PERTURBATION_HEADER)?;
        writer.flush()?;
        Ok(PerturbationCsvWriter { writer, row: 0 })
    }

    /// Appends and flushes one member row.
    pub fn write_row(&mut self, row: &PerturbationMemberRow) -> Result<()> {
        self.writer.write_record([
            self.row.to_string(),
            format_float(row.b),
            row.member.to_string(),
            row.row_seed.to_string(),
            format_float(row.max_abs_diff),
        ])?;
        self.writer.flush()?;
        self.row += 1;
        Ok(())
    }

    /// Flushes and closes the file.
    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// PCA outputs.

/// Writes a projected state cloud: row index = point id, then the episode
/// label and one `c{d}` column per projected component.
pub fn write_cloud_csv(path: &Path, report: &PcaActivationReport) -> Result<()> {
    let mut writer = open_csv(path)?;
    let mut header = vec![POINTS_SCHEMA.to_string(), "label".to_string()];
    header.extend(report.dims.iter().map(|d| format!("c{d}")));
    writer.write_record(&header)?;
    for p in 0..report.projected.nrows() {
        let mut record = vec![p.to_string(), report.labels[p].to_string()];
        record.extend(report.projected.row(p).iter().map(|v| format_float(*v)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the per-pair separability summary of a PCA-signature run.
pub fn write_pca_summary_csv(path: &Path, result: &PcaSignatureResult) -> Result<()> {
    let mut writer = open_csv(path)?;
    writer.write_record([PCA_SCHEMA, "activation", "dim_a", "dim_b", "separability"])?;
    let mut row = 0usize;
    for report in &result.reports {
        for pair in &report.pairs {
            writer.write_record([
                row.to_string(),
                report.activation.slug().to_string(),
                pair.dims.0.to_string(),
                pair.dims.1.to_string(),
                format_float(pair.separability),
            ])?;
            row += 1;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Writes the full explained-variance spectrum of each transfer function.
pub fn write_variances_csv(path: &Path, result: &PcaSignatureResult) -> Result<()> {
    let mut writer = open_csv(path)?;
    writer.write_record([VARIANCE_SCHEMA, "activation", "component", "variance"])?;
    let mut row = 0usize;
    for report in &result.reports {
        for (component, variance) in report.variances.iter().enumerate() {
            writer.write_record([
                row.to_string(),
                report.activation.slug().to_string(),
                component.to_string(),
                format_float(*variance),
            ])?;
            row += 1;
        }
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Readout-only outputs.

/// Writes the one-line readout-only summary.
pub fn write_readout_summary_csv(path: &Path, result: &ReadoutOnlyResult) -> Result<()> {
    let mut writer = open_csv(path)?;
    writer.write_record([READOUT_SCHEMA, "task", "row_seed", "train_accuracy", "test_accuracy"])?;
    writer.write_record([
        "0".to_string(),
        result.task.name().to_string(),
        result.row_seed.to_string(),
        format_float(result.train_accuracy),
        format_float(result.accuracy),
    ])?;
    writer.flush()?;
    Ok(())
}

/// Writes per-test-point pre-argmax scores: row index = test episode.
pub fn write_z_csv(path: &Path, result: &ReadoutOnlyResult) -> Result<()> {
    let mut writer = open_csv(path)?;
    let classes = result.scores.ncols();
    let mut header = vec![
        Z_SCHEMA.to_string(),
        "x0".to_string(),
        "x1".to_string(),
        "label".to_string(),
        "predicted".to_string(),
    ];
    header.extend((0..classes).map(|k| format!("z{k}")));
    writer.write_record(&header)?;
    for p in 0..result.scores.nrows() {
        let mut record = vec![
            p.to_string(),
            format_float(result.test_points[(p, 0)]),
            format_float(result.test_points[(p, 1)]),
            result.test_labels[p].to_string(),
            result.predictions[p].to_string(),
        ];
        record.extend(result.scores.row(p).iter().map(|v| format_float(*v)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the dense learned-label grid over the input square.
pub fn write_grid_csv(path: &Path, result: &ReadoutOnlyResult) -> Result<()> {
    let mut writer = open_csv(path)?;
    writer.write_record([GRID_SCHEMA, "x0", "x1", "predicted"])?;
    for (row, cell) in result.grid.iter().enumerate() {
        writer.write_record([
            row.to_string(),
            format_float(cell.x0),
            format_float(cell.x1),
            cell.predicted.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Dataset exports.

/// Writes every frame of a dataset: row index = global frame index, with
/// episode id, within-episode step, one `x{c}` column per channel, and the
/// episode label.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut writer = open_csv(path)?;
    let mut header =
        vec![DATASET_SCHEMA.to_string(), "episode".to_string(), "t".to_string()];
    header.extend((0..data.channel_count).map(|c| format!("x{c}")));
    header.push("label".to_string());
    writer.write_record(&header)?;
    let mut row = 0usize;
    for (e, episode) in data.episodes.iter().enumerate() {
        for t in 0..data.episode_steps {
            let mut record = vec![row.to_string(), e.to_string(), t.to_string()];
            record.extend(episode.frames.row(t).iter().map(|v| format_float(*v)));
            record.push(episode.label.to_string());
            writer.write_record(&record)?;
            row += 1;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Writes the JSON sidecar describing a dataset export: task kind and
/// parameters, shape, and the stream id it was drawn from.
pub fn write_dataset_manifest(path: &Path, data: &Dataset, seed: u64) -> Result<()> {
    let doc = serde_json::json!({
        "schema": DATASET_SCHEMA,
        "task": data.kind,
        "episode_steps": data.episode_steps,
        "episodes": data.len(),
        "classes": data.class_count,
        "channels": data.channel_count,
        "seed": seed,
    });
    fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Run manifest.

/// Writes `manifest.json`: the resolved config plus a `schema` marker and a
/// `run` metadata block (null before the run finishes). Keys are sorted, so
/// the bytes are deterministic.
pub fn write_manifest(path: &Path, cfg: &ExperimentConfig, run: Option<&RunInfo>) -> Result<()> {
    let mut doc = match serde_json::to_value(cfg)? {
        serde_json::Value::Object(map) => map,
        _ => return Err(Error::invalid("config did not serialize to a JSON object")),
    };
    doc.insert("schema".to_string(), serde_json::Value::String(MANIFEST_SCHEMA.to_string()));
    let run_value = match run {
        Some(info) => serde_json::to_value(info)?,
        None => serde_json::Value::Null,
    };
    doc.insert("run".to_string(), run_value);
    fs::write(path, serde_json::to_string_pretty(&serde_json::Value::Object(doc))? + "\n")?;
    Ok(())
}
