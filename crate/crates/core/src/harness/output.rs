//! On-disk artifacts: metrics CSV, timing CSV, model files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::metrics::RoundMetrics;

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const MODEL_FILE: &str = "final_model.bin";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";
pub const NAIVE_FILE: &str = "naive_baseline.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

pub const METRICS_COLUMNS: [&str; 15] = [
    "t",
    "objective",
    "residual",
    "fw_gap",
    "surrogate_gap",
    "surrogate_value",
    "surrogate_residual",
    "consensus_distance",
    "bound",
    "consensus_bound",
    "eta",
    "lambda",
    "rho",
    "active",
    "x_bar_feasible",
];

const MODEL_MAGIC: &[u8; 8] = b"FEDFWMDL";
const MODEL_VERSION: u32 = 1;

/// One line of `metrics.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub metrics: RoundMetrics,
    /// `F(x̄) - F*` when a reference value is known.
    pub residual: Option<f64>,
    /// `F̂_t(X) - F*` when a reference value is known.
    pub surrogate_residual: Option<f64>,
    /// The guarantee that applies to this run and row, if any.
    pub bound: Option<f64>,
    pub consensus_bound: Option<f64>,
}

/// Round-trip exact: 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        let m = &self.metrics;
        [
            m.t.to_string(),
            format_float(m.objective),
            opt(self.residual),
            format_float(m.fw_gap),
            format_float(m.surrogate_gap),
            format_float(m.surrogate_value),
            opt(self.surrogate_residual),
            format_float(m.consensus_distance),
            opt(self.bound),
            opt(self.consensus_bound),
            format_float(m.eta),
            format_float(m.lambda),
            opt(m.rho),
            m.active.to_string(),
            u8::from(m.x_bar_feasible).to_string(),
        ]
        .join(",")
    }
}

/// Streams metric rows and wall-clock timings to two CSV files.
pub struct MetricsWriter {
    metrics: BufWriter<File>,
    timing: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut metrics = BufWriter::new(File::create(dir.join(METRICS_FILE))?);
        let mut timing = BufWriter::new(File::create(dir.join(TIMING_FILE))?);
        writeln!(metrics, "{}", METRICS_COLUMNS.join(","))?;
        writeln!(timing, "t,wall_ms")?;
        Ok(Self { metrics, timing })
    }

    pub fn write(&mut self, row: &MetricsRow, wall_ms: f64) -> Result<()> {
        writeln!(self.metrics, "{}", row.to_csv())?;
        writeln!(self.timing, "{},{wall_ms:.3}", row.metrics.t)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.metrics.flush()?;
        self.timing.flush()?;
        Ok(())
    }
}

/// `FEDFWMDL`, u32 version, u32 dim, then `dim` f64 values, all little-endian.
pub fn encode_model(x: &[f64]) -> Result<Vec<u8>> {
    let dim = u32::try_from(x.len())
        .map_err(|_| Error::ModelFormat(format!("dimension {} exceeds u32", x.len())))?;
    let mut out = Vec::with_capacity(16 + 8 * x.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    x.iter()
        .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<Vector> {
    if bytes.len() < 16 || &bytes[..8] != MODEL_MAGIC {
        return Err(Error::ModelFormat("missing FEDFWMDL header".into()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let version = word(8);
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let dim = word(12) as usize;
    let body = &bytes[16..];
    if body.len() != 8 * dim {
        return Err(Error::ModelFormat(format!(
            "expected {} payload bytes, found {}",
            8 * dim,
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn save_model(path: &Path, x: &[f64]) -> Result<()> {
    fs::write(path, encode_model(x)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Vector> {
    decode_model(&fs::read(path)?)
}

/// A CSV file read back as strings, for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .unwrap_or_default()
            .split(',')
            .map(str::to_owned)
            .collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').map(str::to_owned).collect())
            .collect();
        Ok(Self { header, rows })
    }

    /// Values of a column; empty cells become `None`.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("no column {name:?}")))?;
        self.rows
            .iter()
            .map(|r| {
                let cell = r.get(idx).map(String::as_str).unwrap_or("");
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>()
                        .map(Some)
                        .map_err(|e| Error::Config(format!("column {name}: {e}")))
                }
            })
            .collect()
    }
}
