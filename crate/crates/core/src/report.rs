//! Run reports and their JSON / CSV serialization.
//!
//! Reports hold only deterministic quantities. Wall-clock timings live in
//! [`Timings`], which callers write next to the report.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::dataio::Provenance;
use crate::eigopt::{EigOptSolution, RepairRecord, SolveDiagnostics};
use crate::error::{FpcaError, Result};
use crate::fairloss::{self, LossOperator};
use crate::linalg::{EigMode, SymOperator};

/// Losses below `UNDEFINED_RATIO_TOL * scale` make the loss ratio undefined.
pub const UNDEFINED_RATIO_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "pca")]
    Pca,
    #[serde(rename = "fpca-eigopt")]
    FpcaEigopt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = FpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(FpcaError::arg(format!("unknown format {other:?}"))),
        }
    }
}

/// Settings a report was produced with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub rank: usize,
    pub tol: f64,
    pub eig_mode: EigMode,
    pub seed: u64,
    pub grid: usize,
    pub provenance: Provenance,
}

/// Quality of one basis `U` for the dataset and both groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisMetrics {
    pub loss_a: f64,
    pub loss_b: f64,
    pub error_overall: f64,
    pub error_a: f64,
    pub error_b: f64,
    /// `|loss_A / loss_B - 1|`, absent when either loss is negligible.
    pub fairness_ratio_error: Option<f64>,
    /// `max(||H_A||, ||H_B||)`.
    pub scale: f64,
}

impl BasisMetrics {
    pub fn compute(m: &DMatrix<f64>, la: &LossOperator, lb: &LossOperator, u: &DMatrix<f64>) -> Result<Self> {
        let loss_a = fairloss::loss(la, u)?;
        let loss_b = fairloss::loss(lb, u)?;
        let scale = la.norm_bound().max(lb.norm_bound());
        Ok(Self {
            loss_a,
            loss_b,
            error_overall: fairloss::reconstruction_error(m, u)?,
            error_a: fairloss::reconstruction_error(la.data(), u)?,
            error_b: fairloss::reconstruction_error(lb.data(), u)?,
            fairness_ratio_error: fairness_ratio_error(loss_a, loss_b, scale),
            scale,
        })
    }

    pub fn loss_gap(&self) -> f64 {
        (self.loss_a - self.loss_b).abs()
    }
}

pub fn fairness_ratio_error(loss_a: f64, loss_b: f64, scale: f64) -> Option<f64> {
    let floor = UNDEFINED_RATIO_TOL * scale;
    (loss_a >= floor && loss_b >= floor && loss_b > 0.0).then(|| (loss_a / loss_b - 1.0).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiSample {
    pub t: f64,
    pub phi: f64,
}

/// Solver outcome carried in a fair PCA report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub t_star: f64,
    pub phi_star: f64,
    pub y_star: [f64; 2],
    pub fairness_residual: f64,
    pub degenerate: bool,
    pub repair: Option<RepairRecord>,
    pub diagnostics: SolveDiagnostics,
}

impl From<&EigOptSolution> for SolverSummary {
    fn from(sol: &EigOptSolution) -> Self {
        Self {
            t_star: sol.t_star,
            phi_star: sol.phi_star,
            y_star: sol.y_star,
            fairness_residual: sol.fairness_residual(),
            degenerate: sol.degenerate,
            repair: sol.repair.clone(),
            diagnostics: sol.diagnostics.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub rank: usize,
    pub n_features: usize,
    pub rows_a: usize,
    pub rows_b: usize,
    pub metrics: BasisMetrics,
    /// Leading variances of `M^T M` (PCA runs only).
    pub variances: Option<Vec<f64>>,
    pub solver: Option<SolverSummary>,
    pub phi_profile: Vec<PhiSample>,
    pub config: ConfigEcho,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub pca: RunReport,
    pub fpca: RunReport,
    /// `100 * (error_fpca - error_pca) / error_pca`, absent when PCA is exact.
    pub error_increase_percent: Option<f64>,
    pub pca_loss_gap: f64,
    pub fpca_loss_gap: f64,
}

impl CompareReport {
    pub fn new(pca: RunReport, fpca: RunReport) -> Self {
        let e0 = pca.metrics.error_overall;
        let e1 = fpca.metrics.error_overall;
        let floor = UNDEFINED_RATIO_TOL * pca.metrics.scale;
        Self {
            error_increase_percent: (e0 > floor).then(|| 100.0 * (e1 - e0) / e0),
            pca_loss_gap: pca.metrics.loss_gap(),
            fpca_loss_gap: fpca.metrics.loss_gap(),
            pca,
            fpca,
        }
    }
}

/// Wall-clock seconds per named stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
    /// EigOpt wall clock (loss setup and solve) over standard PCA, when both ran.
    pub eigopt_over_pca: Option<f64>,
}

impl Timings {
    pub fn push(&mut self, stage: impl Into<String>, seconds: f64) {
        self.stages.push((stage.into(), seconds));
    }

    pub fn total(&self) -> f64 {
        self.stages.iter().map(|(_, s)| s).sum()
    }
}

/// JSON pretty-printing with every float written as `d.dddddddddddddddde±x`.
struct SeventeenDigits<'a>(PrettyFormatter<'a>);

impl Formatter for SeventeenDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|source| FpcaError::Json {
        path: "<memory>".into(),
        source,
    })?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Flattens a serialized value into `(name, value)` rows sorted by key at
/// each level. Nested keys are joined with `.`, array elements use their index, and null becomes an
/// empty string.
pub fn flatten<T: Serialize>(value: &T) -> Result<Vec<(String, String)>> {
    let v = serde_json::to_value(value).map_err(|source| FpcaError::Json {
        path: "<memory>".into(),
        source,
    })?;
    let mut rows = Vec::new();
    flatten_into(&v, String::new(), &mut rows);
    Ok(rows)
}

fn flatten_into(v: &Value, prefix: String, rows: &mut Vec<(String, String)>) {
    let join = |key: &str| {
        if prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}.{key}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten_into(child, join(k), rows);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten_into(child, join(&i.to_string()), rows);
            }
        }
        Value::Null => rows.push((prefix, String::new())),
        Value::Bool(b) => rows.push((prefix, b.to_string())),
        Value::String(s) => rows.push((prefix, s.clone())),
        Value::Number(n) => {
            let text = match (n.as_u64(), n.as_i64()) {
                (Some(u), _) => u.to_string(),
                (None, Some(i)) => i.to_string(),
                _ => format_float(n.as_f64().unwrap_or(f64::NAN)),
            };
            rows.push((prefix, text));
        }
    }
}

/// Float text used in CSV output; parses back to the same value.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn save_report<T: Serialize>(report: &T, path: &Path, format: Format) -> Result<()> {
    let io_err = |source| FpcaError::Io {
        path: path.to_path_buf(),
        source,
    };
    match format {
        Format::Json => {
            let text = to_json_string(report)?;
            std::fs::write(path, text).map_err(io_err)
        }
        Format::Csv => {
            let rows = flatten(report)?;
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path).map_err(io_err)?));
            let csv_err = |source| FpcaError::Csv {
                path: path.to_path_buf(),
                source,
            };
            w.write_record(["name", "value"]).map_err(csv_err)?;
            for (name, value) in rows {
                w.write_record([name, value]).map_err(csv_err)?;
            }
            w.flush().map_err(io_err)
        }
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| FpcaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FpcaError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads the `name,value` rows written by [`save_report`] in CSV format.
pub fn load_csv_rows(path: &Path) -> Result<Vec<(String, String)>> {
    let csv_err = |source| FpcaError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader
        .records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok((rec[0].to_string(), rec.get(1).unwrap_or("").to_string()))
        })
        .collect()
}

/// Writes a matrix as headerless CSV, one row per line.
pub fn save_matrix(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut text = String::with_capacity(m.nrows() * m.ncols() * 24);
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|&x| format_float(x)).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|source| FpcaError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| FpcaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let parsed: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| FpcaError::data(format!("{}: line {}: not a number", path.display(), i + 1)))?;
        if *cols.get_or_insert(parsed.len()) != parsed.len() {
            return Err(FpcaError::data(format!("{}: line {}: ragged row", path.display(), i + 1)));
        }
        values.extend(parsed);
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols.unwrap_or(0), &values))
}
