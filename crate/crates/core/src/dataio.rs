//! CSV ingestion, centering and group splitting.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FpcaError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

/// Declares which column and values split the rows into the two groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub column: String,
    pub a_value: String,
    pub b_value: String,
}

/// Numeric rows as read from disk, before centering.
#[derive(Clone, Debug)]
pub struct RawDataset {
    pub feature_names: Vec<String>,
    pub matrix: DMatrix<f64>,
    /// Group of each row, in file order.
    pub groups: Vec<Group>,
    /// Rows whose group value matched neither declared value.
    pub dropped_rows: usize,
    pub source: PathBuf,
    pub spec: GroupSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterMode {
    Global,
    PerGroup,
}

impl std::str::FromStr for CenterMode {
    type Err = FpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(CenterMode::Global),
            "per-group" => Ok(CenterMode::PerGroup),
            other => Err(FpcaError::arg(format!("unknown centering mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: PathBuf,
    pub group_column: String,
    pub group_a_value: String,
    pub group_b_value: String,
    pub centering: CenterMode,
    pub standardized: bool,
    pub dropped_rows: usize,
}

/// Centered data `M` with the row partition into groups A and B.
#[derive(Clone, Debug)]
pub struct CenteredDataset {
    pub feature_names: Vec<String>,
    /// Centered rows in file order.
    pub matrix: DMatrix<f64>,
    pub group_a: Vec<usize>,
    pub group_b: Vec<usize>,
    /// Subtracted column means (global mode) or zeros (per-group mode).
    pub mean: DVector<f64>,
    /// Column divisors applied after centering, when standardized.
    pub scale: Option<DVector<f64>>,
    pub provenance: Provenance,
}

impl CenteredDataset {
    pub fn n_features(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn a(&self) -> DMatrix<f64> {
        self.matrix.select_rows(&self.group_a)
    }

    pub fn b(&self) -> DMatrix<f64> {
        self.matrix.select_rows(&self.group_b)
    }
}

/// Reads a headed, comma-separated file.
///
/// `features` selects and orders the numeric columns; by default every
/// column except the group column is used. Data rows are numbered from 1 in
/// error messages, not counting the header.
pub fn load_csv(path: &Path, spec: &GroupSpec, features: Option<&[String]>) -> Result<RawDataset> {
    let csv_err = |source| FpcaError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(|source| FpcaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FpcaError::data(format!("{}: no column named {name:?}", path.display())))
    };
    let group_col = find(&spec.column)?;
    let feature_cols: Vec<usize> = match features {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..header.len()).filter(|&i| i != group_col).collect(),
    };
    if feature_cols.is_empty() {
        return Err(FpcaError::data(format!("{}: no feature columns", path.display())));
    }
    if feature_cols.contains(&group_col) {
        return Err(FpcaError::data("the group column cannot also be a feature"));
    }

    let mut values = Vec::new();
    let mut groups = Vec::new();
    let mut dropped = 0;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(csv_err)?;
        let group = match record.get(group_col) {
            Some(v) if v == spec.a_value => Group::A,
            Some(v) if v == spec.b_value => Group::B,
            _ => {
                dropped += 1;
                continue;
            }
        };
        for &c in &feature_cols {
            let cell = record.get(c).unwrap_or("");
            let name = &header[c];
            if cell.is_empty() {
                return Err(FpcaError::data(format!(
                    "{}: row {row}, column {name:?}: missing value",
                    path.display()
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                FpcaError::data(format!(
                    "{}: row {row}, column {name:?}: cannot parse {cell:?} as a number",
                    path.display()
                ))
            })?;
            if !v.is_finite() {
                return Err(FpcaError::data(format!(
                    "{}: row {row}, column {name:?}: non-finite value {cell:?}",
                    path.display()
                )));
            }
            values.push(v);
        }
        groups.push(group);
    }

    for (g, value) in [(Group::A, &spec.a_value), (Group::B, &spec.b_value)] {
        if !groups.contains(&g) {
            return Err(FpcaError::data(format!(
                "{}: no rows with {} = {value:?}",
                path.display(),
                spec.column
            )));
        }
    }

    let matrix = DMatrix::from_row_slice(groups.len(), feature_cols.len(), &values);
    Ok(RawDataset {
        feature_names: feature_cols.iter().map(|&c| header[c].clone()).collect(),
        matrix,
        groups,
        dropped_rows: dropped,
        source: path.to_path_buf(),
        spec: spec.clone(),
    })
}

/// Centers the data (globally or per group), optionally scales each column
/// to unit standard deviation, and records the row partition.
pub fn center_and_split(raw: &RawDataset, mode: CenterMode, standardize: bool) -> Result<CenteredDataset> {
    let group_a: Vec<usize> = (0..raw.groups.len()).filter(|&i| raw.groups[i] == Group::A).collect();
    let group_b: Vec<usize> = (0..raw.groups.len()).filter(|&i| raw.groups[i] == Group::B).collect();
    if group_a.is_empty() || group_b.is_empty() {
        return Err(FpcaError::data("both groups need at least one row"));
    }
    let n = raw.matrix.ncols();
    let mut matrix = raw.matrix.clone();
    let mean = match mode {
        CenterMode::Global => {
            let mean = column_mean(&matrix, None);
            subtract_rows(&mut matrix, None, &mean);
            mean
        }
        CenterMode::PerGroup => {
            for rows in [&group_a, &group_b] {
                let mean = column_mean(&matrix, Some(rows));
                subtract_rows(&mut matrix, Some(rows), &mean);
            }
            DVector::zeros(n)
        }
    };
    let scale = standardize.then(|| {
        let m = matrix.nrows() as f64;
        let sd = DVector::from_iterator(n, matrix.column_iter().map(|c| (c.norm_squared() / m).sqrt()));
        for (j, s) in sd.iter().enumerate() {
            if *s > 0.0 {
                matrix.column_mut(j).unscale_mut(*s);
            }
        }
        sd.map(|s| if s > 0.0 { s } else { 1.0 })
    });
    Ok(CenteredDataset {
        feature_names: raw.feature_names.clone(),
        matrix,
        group_a,
        group_b,
        mean,
        scale,
        provenance: Provenance {
            source: raw.source.clone(),
            group_column: raw.spec.column.clone(),
            group_a_value: raw.spec.a_value.clone(),
            group_b_value: raw.spec.b_value.clone(),
            centering: mode,
            standardized: standardize,
            dropped_rows: raw.dropped_rows,
        },
    })
}

fn column_mean(m: &DMatrix<f64>, rows: Option<&[usize]>) -> DVector<f64> {
    let n = m.ncols();
    match rows {
        None => DVector::from_iterator(n, m.column_iter().map(|c| c.sum() / m.nrows() as f64)),
        Some(rows) => DVector::from_iterator(
            n,
            (0..n).map(|j| rows.iter().map(|&i| m[(i, j)]).sum::<f64>() / rows.len() as f64),
        ),
    }
}

fn subtract_rows(m: &mut DMatrix<f64>, rows: Option<&[usize]>, mean: &DVector<f64>) {
    match rows {
        None => {
            for (j, mu) in mean.iter().enumerate() {
                m.column_mut(j).add_scalar_mut(-mu);
            }
        }
        Some(rows) => {
            for &i in rows {
                for (j, mu) in mean.iter().enumerate() {
                    m[(i, j)] -= mu;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn spec() -> GroupSpec {
        GroupSpec {
            column: "sex".into(),
            a_value: "F".into(),
            b_value: "M".into(),
        }
    }

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_file() {
        let f = write("x,sex,y,z\n1,F,2,3\n4,M,5,6\n7,F,8,9\n1,M,0,1\n");
        let raw = load_csv(f.path(), &spec(), None).unwrap();
        assert_eq!(raw.matrix.shape(), (4, 3));
        assert_eq!(raw.feature_names, vec!["x", "y", "z"]);
        assert_eq!(raw.groups, vec![Group::A, Group::B, Group::A, Group::B]);
        assert_eq!(raw.matrix[(2, 1)], 8.0);
    }

    #[test]
    fn unparseable_cell_names_row_and_column() {
        let mut body = String::from("age,sex\n");
        for i in 1..=10 {
            let sex = if i % 2 == 0 { "F" } else { "M" };
            if i == 7 {
                body.push_str(&format!("abc,{sex}\n"));
            } else {
                body.push_str(&format!("{i},{sex}\n"));
            }
        }
        let f = write(&body);
        let err = load_csv(f.path(), &spec(), None).unwrap_err().to_string();
        assert!(err.contains("row 7"), "{err}");
        assert!(err.contains("\"age\""), "{err}");
    }

    #[test]
    fn rejects_missing_and_nonfinite_values() {
        let f = write("a,sex\n1,F\n,M\n");
        assert!(load_csv(f.path(), &spec(), None).unwrap_err().to_string().contains("missing"));
        let f = write("a,sex\n1,F\ninf,M\n");
        assert!(load_csv(f.path(), &spec(), None).unwrap_err().to_string().contains("non-finite"));
        let f = write("a,sex\n1,F\nNaN,M\n");
        assert!(load_csv(f.path(), &spec(), None).is_err());
    }

    #[test]
    fn missing_column_and_empty_group() {
        let f = write("a,b\n1,2\n");
        assert!(matches!(load_csv(f.path(), &spec(), None), Err(FpcaError::Data(_))));
        let f = write("a,sex\n1,F\n2,F\n");
        let err = load_csv(f.path(), &spec(), None).unwrap_err().to_string();
        assert!(err.contains("no rows"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv(Path::new("/nonexistent/data.csv"), &spec(), None).unwrap_err();
        assert!(matches!(err, FpcaError::Io { .. }));
    }

    #[test]
    fn other_group_values_are_dropped() {
        let f = write("a,sex\n1,F\n2,X\n3,M\n4,\n");
        let raw = load_csv(f.path(), &spec(), None).unwrap();
        assert_eq!(raw.dropped_rows, 2);
        assert_eq!(raw.matrix.nrows(), 2);
    }

    #[test]
    fn explicit_feature_selection() {
        let f = write("a,b,sex,c\n1,2,F,3\n4,5,M,6\n");
        let names = vec!["c".to_string(), "a".to_string()];
        let raw = load_csv(f.path(), &spec(), Some(&names)).unwrap();
        assert_eq!(raw.matrix, DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 6.0, 4.0]));
        let bad = vec!["sex".to_string()];
        assert!(load_csv(f.path(), &spec(), Some(&bad)).is_err());
    }

    fn raw(m: DMatrix<f64>, groups: Vec<Group>) -> RawDataset {
        RawDataset {
            feature_names: (0..m.ncols()).map(|j| format!("f{j}")).collect(),
            matrix: m,
            groups,
            dropped_rows: 0,
            source: PathBuf::from("mem"),
            spec: spec(),
        }
    }

    #[test]
    fn centered_input_is_unchanged() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, -1.0, 2.0]);
        let d = center_and_split(&raw(m.clone(), vec![Group::A, Group::B]), CenterMode::Global, false).unwrap();
        assert!((d.matrix - m).amax() <= 1e-14);
    }

    #[test]
    fn constant_column_becomes_zero() {
        let m = DMatrix::from_row_slice(3, 2, &[5.0, 1.0, 5.0, 2.0, 5.0, 4.0]);
        let d = center_and_split(&raw(m, vec![Group::A, Group::B, Group::A]), CenterMode::Global, true).unwrap();
        assert!(d.matrix.column(0).iter().all(|&v| v == 0.0));
        let sd = (d.matrix.column(1).norm_squared() / 3.0).sqrt();
        assert!((sd - 1.0).abs() < 1e-14);
    }

    #[test]
    fn per_group_centering_zeroes_each_group_mean() {
        let m = DMatrix::from_row_slice(4, 1, &[1.0, 10.0, 3.0, 20.0]);
        let d = center_and_split(&raw(m, vec![Group::A, Group::B, Group::A, Group::B]), CenterMode::PerGroup, false)
            .unwrap();
        assert_eq!(d.a().as_slice(), &[-1.0, 1.0]);
        assert_eq!(d.b().as_slice(), &[-5.0, 5.0]);
        assert_eq!(d.provenance.centering, CenterMode::PerGroup);
    }

    #[test]
    fn empty_group_is_rejected() {
        let m = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(center_and_split(&raw(m, vec![Group::A, Group::A]), CenterMode::Global, false).is_err());
    }
}
