//! Numeric data containers, CSV ingestion, centering and standardization.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SdrError};
use crate::linalg::{sqrt_psd, symmetrize_upper};

/// Response plus centered covariates.
///
/// Rows of `x` are samples. Columns are always centered to empirical mean
/// zero; with standardization they are also scaled to unit variance using
/// the n divisor.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    column_means: DVector<f64>,
    column_sds: Option<DVector<f64>>,
}

impl Dataset {
    /// Builds a dataset from raw (uncentered) covariates.
    pub fn new(y: DVector<f64>, x_raw: DMatrix<f64>, standardize: bool) -> Result<Self> {
        let (n, p) = x_raw.shape();
        if y.len() != n {
            return Err(SdrError::Dimension(format!(
                "response has {} entries but covariates have {n} rows",
                y.len()
            )));
        }
        if n < 2 || p < 1 {
            return Err(SdrError::Dimension(format!(
                "need n >= 2 and p >= 1, got n={n}, p={p}"
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(SdrError::Ingestion {
                row: i,
                column: 0,
                message: "non-finite response".into(),
            });
        }
        for j in 0..p {
            if let Some(i) = x_raw.column(j).iter().position(|v| !v.is_finite()) {
                return Err(SdrError::Ingestion {
                    row: i,
                    column: j,
                    message: "non-finite covariate".into(),
                });
            }
        }

        let mut x = x_raw;
        let mut means = DVector::zeros(p);
        let mut sds = standardize.then(|| DVector::zeros(p));
        for j in 0..p {
            let mut col = x.column_mut(j);
            let mean = col.sum() / n as f64;
            col.add_scalar_mut(-mean);
            means[j] = mean;
            if let Some(sds) = sds.as_mut() {
                let var = col.norm_squared() / n as f64;
                let sd = var.sqrt();
                if !(sd > 1e-12 * (1.0 + mean.abs())) {
                    return Err(SdrError::Ingestion {
                        row: 0,
                        column: j,
                        message: "zero variance column cannot be standardized".into(),
                    });
                }
                col.scale_mut(1.0 / sd);
                sds[j] = sd;
            }
        }
        Ok(Dataset {
            y,
            x,
            column_means: means,
            column_sds: sds,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Centered (and possibly standardized) covariates.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn is_centered(&self) -> bool {
        true
    }

    pub fn column_means(&self) -> &DVector<f64> {
        &self.column_means
    }

    pub fn column_sds(&self) -> Option<&DVector<f64>> {
        self.column_sds.as_ref()
    }

    /// Applies this dataset's centering and scaling to a new raw observation.
    pub fn transform_row(&self, raw: &[f64]) -> Result<DVector<f64>> {
        if raw.len() != self.p() {
            return Err(SdrError::Dimension(format!(
                "observation has {} covariates, dataset has {}",
                raw.len(),
                self.p()
            )));
        }
        let mut out = DVector::from_column_slice(raw) - &self.column_means;
        if let Some(sds) = &self.column_sds {
            out.component_div_assign(sds);
        }
        Ok(out)
    }

    /// Covariate columns restricted to `cols`, in the given order.
    pub fn columns(&self, cols: &[usize]) -> DMatrix<f64> {
        self.x.select_columns(cols)
    }
}

/// Sample covariance with divisor n.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    sigma_hat: DMatrix<f64>,
    root: DMatrix<f64>,
}

impl CovarianceEstimate {
    pub fn sigma_hat(&self) -> &DMatrix<f64> {
        &self.sigma_hat
    }

    pub fn p(&self) -> usize {
        self.sigma_hat.nrows()
    }

    /// A factor `R` with `RᵀR = Σ̂` and min(n, p) rows.
    pub fn root(&self) -> &DMatrix<f64> {
        &self.root
    }

    /// Wraps an arbitrary symmetric positive semidefinite matrix.
    pub fn from_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() {
            return Err(SdrError::Dimension("covariance must be square".into()));
        }
        let mut s = sigma;
        let sym = (&s + s.transpose()) * 0.5;
        s.copy_from(&sym);
        let root = sqrt_psd(&s);
        Ok(CovarianceEstimate {
            sigma_hat: s,
            root,
        })
    }
}

/// Σ̂ = XᵀX / n over the centered columns.
pub fn sample_covariance(d: &Dataset) -> CovarianceEstimate {
    let n = d.n() as f64;
    let x = d.x();
    let mut sigma = x.tr_mul(x) / n;
    symmetrize_upper(&mut sigma);
    let root = if d.n() <= d.p() {
        x / n.sqrt()
    } else {
        sqrt_psd(&sigma)
    };
    CovarianceEstimate {
        sigma_hat: sigma,
        root,
    }
}

/// How the response column is identified in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseColumn {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for ResponseColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().parse::<usize>() {
            Ok(i) => ResponseColumn::Index(i),
            Err(_) => ResponseColumn::Name(s.trim().to_string()),
        })
    }
}

/// A rectangular numeric table with an optional header.
#[derive(Debug, Clone)]
pub struct NumericTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn ncols(&self) -> usize {
        self.header
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.rows.first().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let ncols = self.ncols();
        DMatrix::from_fn(self.rows.len(), ncols, |i, j| self.rows[i][j])
    }
}

/// Reads a comma-separated numeric table.
///
/// The first line is treated as a header when any of its fields fails to
/// parse as a number. Row numbers in errors are 1-based file lines.
pub fn read_numeric_csv(path: &Path) -> Result<NumericTable> {
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line, record) in reader.records().enumerate() {
        let line = line + 1;
        let record = record.map_err(|e| SdrError::Ingestion {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        if line == 1 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(SdrError::Ingestion {
                row: line,
                column: record.len().min(expected),
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (col, field) in record.iter().enumerate() {
            let value = field.parse::<f64>().map_err(|_| SdrError::Ingestion {
                row: line,
                column: col,
                message: if field.is_empty() {
                    "missing value".into()
                } else {
                    format!("non-numeric value {field:?}")
                },
            })?;
            if !value.is_finite() {
                return Err(SdrError::Ingestion {
                    row: line,
                    column: col,
                    message: format!("non-finite value {field:?}"),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SdrError::Ingestion {
            row: 0,
            column: 0,
            message: "no data rows".into(),
        });
    }
    Ok(NumericTable { header, rows })
}

/// Loads a dataset from CSV, splitting off the response column.
pub fn load_csv(path: &Path, response: &ResponseColumn, standardize: bool) -> Result<Dataset> {
    let table = read_numeric_csv(path)?;
    let ncols = table.ncols();
    let ycol = match response {
        ResponseColumn::Index(i) => *i,
        ResponseColumn::Name(name) => table
            .header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| SdrError::Ingestion {
                row: 1,
                column: 0,
                message: format!("response column {name:?} not found in header"),
            })?,
    };
    if ycol >= ncols {
        return Err(SdrError::Ingestion {
            row: 1,
            column: ycol,
            message: format!("response column {ycol} out of range ({ncols} columns)"),
        });
    }
    if ncols < 2 {
        return Err(SdrError::Ingestion {
            row: 1,
            column: 0,
            message: "table needs a response and at least one covariate".into(),
        });
    }
    let n = table.rows.len();
    let y = DVector::from_fn(n, |i, _| table.rows[i][ycol]);
    let covariates: Vec<usize> = (0..ncols).filter(|&c| c != ycol).collect();
    let x = DMatrix::from_fn(n, covariates.len(), |i, j| table.rows[i][covariates[j]]);
    Dataset::new(y, x, standardize).map_err(|e| match e {
        // report ingestion problems against file coordinates
        SdrError::Ingestion { row, column, message } => SdrError::Ingestion {
            row: row + 1 + usize::from(table.header.is_some()),
            column: covariates.get(column).copied().unwrap_or(column),
            message,
        },
        other => other,
    })
}

/// Writes a matrix as headerless CSV, one row per line.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|v| format_float(*v)))
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes response plus raw covariates with a `y,x1,...,xp` header.
pub fn write_dataset_csv(path: &Path, y: &DVector<f64>, x: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = vec!["y".to_string()];
    header.extend((1..=x.ncols()).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..x.nrows() {
        let row: Vec<String> = std::iter::once(y[i])
            .chain(x.row(i).iter().copied())
            .map(format_float)
            .collect();
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same f64.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn csv_io(e: csv::Error) -> SdrError {
    SdrError::Io(std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn temp_csv(name: &str, body: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("irpsdr-data-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_and_centers() {
        let path = temp_csv("toy.csv", "1,2,3\n2,4,6\n3,6,9\n");
        let d = load_csv(&path, &ResponseColumn::Index(0), false).unwrap();
        assert_eq!(d.y().as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(d.p(), 2);
        assert_eq!(d.x().column(0).as_slice(), &[-2.0, 0.0, 2.0]);
        assert_eq!(d.x().column(1).as_slice(), &[-3.0, 0.0, 3.0]);
        assert_eq!(d.column_means().as_slice(), &[4.0, 6.0]);
        let again = load_csv(&path, &ResponseColumn::Index(0), false).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn header_detected_and_named_response() {
        let path = temp_csv("hdr.csv", "a,resp,b\n1,5,2\n2,6,1\n4,7,0\n");
        let d = load_csv(&path, &"resp".parse().unwrap(), false).unwrap();
        assert_eq!(d.y().as_slice(), &[5.0, 6.0, 7.0]);
        assert_eq!(d.p(), 2);
    }

    #[test]
    fn non_numeric_cell_names_location() {
        let path = temp_csv("bad.csv", "1,2\n3,x\n");
        match load_csv(&path, &ResponseColumn::Index(0), false) {
            Err(SdrError::Ingestion { row, column, .. }) => assert_eq!((row, column), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
        let path = temp_csv("missing.csv", "1,2\n3,\n4,5\n");
        match load_csv(&path, &ResponseColumn::Index(0), false) {
            Err(SdrError::Ingestion { row, column, message }) => {
                assert_eq!((row, column), (2, 1));
                assert!(message.contains("missing"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let path = temp_csv("ragged.csv", "1,2,3\n3,4\n");
        assert!(matches!(
            load_csv(&path, &ResponseColumn::Index(0), false),
            Err(SdrError::Ingestion { row: 2, .. })
        ));
    }

    #[test]
    fn constant_column_cannot_be_standardized() {
        let path = temp_csv("const.csv", "1,2,5\n2,4,5\n3,7,5\n");
        assert!(load_csv(&path, &ResponseColumn::Index(0), false).is_ok());
        match load_csv(&path, &ResponseColumn::Index(0), true) {
            Err(SdrError::Ingestion { column, .. }) => assert_eq!(column, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn standardized_columns_have_unit_variance() {
        let x = DMatrix::from_fn(30, 4, |i, j| ((i * 7 + j * 3) % 11) as f64 * (j + 1) as f64);
        let y = DVector::from_fn(30, |i, _| i as f64);
        let d = Dataset::new(y, x, true).unwrap();
        for j in 0..4 {
            let col = d.x().column(j);
            assert!(col.sum().abs() < 1e-10);
            assert!((col.norm_squared() / 30.0 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn eeg_shaped_table() {
        let mut body = String::new();
        for i in 0..122 {
            let row: Vec<String> = (0..513)
                .map(|j| if j == 0 { (i % 2).to_string() } else { ((i * j) % 17).to_string() })
                .collect();
            body.push_str(&row.join(","));
            body.push('\n');
        }
        let path = temp_csv("eeg.csv", &body);
        let d = load_csv(&path, &ResponseColumn::Index(0), false).unwrap();
        assert_eq!((d.n(), d.p()), (122, 512));
    }

    #[test]
    fn covariance_small_cases() {
        let d = Dataset::new(
            DVector::from_vec(vec![0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
            false,
        )
        .unwrap();
        let s = sample_covariance(&d);
        assert_eq!(s.sigma_hat(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let d = Dataset::new(
            DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0]),
            DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 4.0, 9.0]),
            false,
        )
        .unwrap();
        let s = sample_covariance(&d);
        let mean = 4.0;
        let var = [1.0f64, 2.0, 4.0, 9.0].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((s.sigma_hat()[(0, 0)] - var).abs() < 1e-12);
    }

    #[test]
    fn covariance_matches_pairwise_oracle_and_root() {
        let raw = DMatrix::from_fn(5, 3, |i, j| ((i * 13 + j * 29) % 7) as f64 - 0.5 * j as f64);
        let d = Dataset::new(DVector::zeros(5), raw.clone(), false).unwrap();
        let s = sample_covariance(&d);
        for a in 0..3 {
            for b in 0..3 {
                // textbook form: average of products of deviations about raw means
                let ma = raw.column(a).mean();
                let mb = raw.column(b).mean();
                let mut acc = 0.0;
                for i in 0..5 {
                    acc += (raw[(i, a)] - ma) * (raw[(i, b)] - mb);
                }
                assert!((s.sigma_hat()[(a, b)] - acc / 5.0).abs() < 1e-12);
            }
        }
        assert_eq!(s.sigma_hat(), &s.sigma_hat().transpose());
        let r = s.root();
        assert!((r.tr_mul(r) - s.sigma_hat()).norm() < 1e-10);
    }

    #[test]
    fn transform_row_matches_training_rows() {
        let raw = DMatrix::from_fn(6, 2, |i, j| (i * (j + 2)) as f64 + 0.25 * j as f64);
        let d = Dataset::new(DVector::zeros(6), raw.clone(), true).unwrap();
        let r = d.transform_row(&[raw[(3, 0)], raw[(3, 1)]]).unwrap();
        assert!((r[0] - d.x()[(3, 0)]).abs() < 1e-12);
        assert!((r[1] - d.x()[(3, 1)]).abs() < 1e-12);
    }
}
