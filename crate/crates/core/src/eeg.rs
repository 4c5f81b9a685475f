//! Median downsampling of per-sample time × channel recordings.
//!
//! Raw input is a long CSV table with header `sample_id,y,c1,...,cC`: one row
//! per time point, rows of a sample contiguous and in time order, and `y`
//! constant within a sample.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Result, SdrError};

pub const DEFAULT_TIME_POINTS: usize = 256;
pub const DEFAULT_CHANNELS: usize = 64;
pub const DEFAULT_BLOCK: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct EegSample {
    pub id: String,
    pub y: f64,
    /// time × channel
    pub raw: DMatrix<f64>,
}

/// Expected raw shape and the downsampling block length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EegLayout {
    pub time_points: usize,
    pub channels: usize,
    pub block: usize,
}

impl Default for EegLayout {
    fn default() -> Self {
        EegLayout {
            time_points: DEFAULT_TIME_POINTS,
            channels: DEFAULT_CHANNELS,
            block: DEFAULT_BLOCK,
        }
    }
}

impl EegLayout {
    pub fn periods(&self) -> usize {
        self.time_points / self.block
    }

    pub fn output_dim(&self) -> usize {
        self.periods() * self.channels
    }
}

/// Median; an even count averages the two middle order statistics.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Block medians per channel, vectorized channel-major: period j of channel k
/// lands at index `k·periods + j`.
pub fn downsample(raw: &DMatrix<f64>, layout: &EegLayout) -> Result<DVector<f64>> {
    if layout.block == 0 || layout.time_points % layout.block != 0 {
        return Err(SdrError::Parameter(format!(
            "block {} does not divide {} time points",
            layout.block, layout.time_points
        )));
    }
    if raw.nrows() != layout.time_points || raw.ncols() != layout.channels {
        return Err(SdrError::Ingestion {
            row: 0,
            column: 0,
            message: format!(
                "expected a {}×{} recording, got {}×{}",
                layout.time_points,
                layout.channels,
                raw.nrows(),
                raw.ncols()
            ),
        });
    }
    let periods = layout.periods();
    let mut out = DVector::zeros(layout.output_dim());
    for k in 0..layout.channels {
        let col = raw.column(k);
        for j in 0..periods {
            let block: Vec<f64> = col.rows(j * layout.block, layout.block).iter().copied().collect();
            out[k * periods + j] = median(&block);
        }
    }
    Ok(out)
}

/// Downsamples every sample into one row of a dataset.
pub fn eeg_preprocess(samples: &[EegSample], layout: &EegLayout, standardize: bool) -> Result<Dataset> {
    let (y, x) = eeg_matrix(samples, layout)?;
    Dataset::new(y, x, standardize)
}

/// Raw (uncentered) downsampled design with the responses.
pub fn eeg_matrix(samples: &[EegSample], layout: &EegLayout) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if samples.is_empty() {
        return Err(SdrError::Ingestion {
            row: 0,
            column: 0,
            message: "no samples".into(),
        });
    }
    let mut x = DMatrix::zeros(samples.len(), layout.output_dim());
    for (i, s) in samples.iter().enumerate() {
        let v = downsample(&s.raw, layout).map_err(|e| match e {
            SdrError::Ingestion { message, .. } => SdrError::Ingestion {
                row: 0,
                column: 0,
                message: format!("sample {:?}: {message}", s.id),
            },
            other => other,
        })?;
        x.set_row(i, &v.transpose());
    }
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.y));
    Ok((y, x))
}

fn ingest_err(row: usize, column: usize, message: String) -> SdrError {
    SdrError::Ingestion { row, column, message }
}

/// Reads the long-table layout described in the module docs.
pub fn read_eeg_long_csv(path: &Path) -> Result<Vec<EegSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(std::fs::File::open(path)?);
    let header = reader
        .headers()
        .map_err(|e| ingest_err(1, 0, e.to_string()))?
        .clone();
    if header.len() < 3 {
        return Err(ingest_err(1, 0, "need sample_id, y and at least one channel column".into()));
    }
    let channels = header.len() - 2;
    let mut samples: Vec<EegSample> = Vec::new();
    let mut current: Option<(String, f64, Vec<f64>)> = None;
    let mut seen = std::collections::HashSet::new();

    let finish = |cur: (String, f64, Vec<f64>), samples: &mut Vec<EegSample>| {
        let (id, y, data) = cur;
        let t = data.len() / channels;
        samples.push(EegSample {
            id,
            y,
            raw: DMatrix::from_row_slice(t, channels, &data),
        });
    };

    for (idx, rec) in reader.records().enumerate() {
        // 1-based file line, header is line 1
        let line = idx + 2;
        let rec = rec.map_err(|e| ingest_err(line, 0, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(ingest_err(
                line,
                0,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let id = rec[0].to_string();
        let parse = |c: usize| -> Result<f64> {
            let s = &rec[c];
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ingest_err(line, c, format!("non-numeric value {s:?}")))
        };
        let y = parse(1)?;
        let same = matches!(&current, Some((cid, _, _)) if *cid == id);
        if !same {
            if let Some(cur) = current.take() {
                finish(cur, &mut samples);
            }
            if !seen.insert(id.clone()) {
                return Err(ingest_err(line, 0, format!("rows of sample {id:?} are not contiguous")));
            }
            current = Some((id, y, Vec::new()));
        }
        let cur = current.as_mut().expect("current sample");
        if cur.1 != y {
            return Err(ingest_err(line, 1, format!("response changes within sample {:?}", cur.0)));
        }
        for c in 2..header.len() {
            cur.2.push(parse(c)?);
        }
    }
    if let Some(cur) = current.take() {
        finish(cur, &mut samples);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_median() {
        let v: Vec<f64> = (1..=32).map(f64::from).collect();
        assert_eq!(median(&v), 16.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn constant_channel() {
        let layout = EegLayout::default();
        let mut raw = DMatrix::from_element(256, 64, 0.0);
        raw.column_mut(5).fill(2.5);
        let v = downsample(&raw, &layout).unwrap();
        assert_eq!(v.len(), 512);
        assert!((40..48).all(|i| v[i] == 2.5));
        assert!(v.iter().enumerate().all(|(i, &x)| (40..48).contains(&i) || x == 0.0));
    }

    #[test]
    fn channel_major_order() {
        let layout = EegLayout {
            time_points: 4,
            channels: 2,
            block: 2,
        };
        let raw = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 3.0, 30.0, 5.0, 50.0, 7.0, 70.0]);
        let v = downsample(&raw, &layout).unwrap();
        assert_eq!(v.as_slice(), &[2.0, 6.0, 20.0, 60.0]);
    }

    #[test]
    fn reapplying_is_rejected() {
        let layout = EegLayout::default();
        let out = downsample(&DMatrix::zeros(256, 64), &layout).unwrap();
        let as_matrix = DMatrix::from_column_slice(8, 64, out.as_slice());
        assert!(matches!(downsample(&as_matrix, &layout), Err(SdrError::Ingestion { .. })));
    }

    #[test]
    fn block_must_divide() {
        let layout = EegLayout {
            time_points: 10,
            channels: 1,
            block: 3,
        };
        assert!(downsample(&DMatrix::zeros(10, 1), &layout).is_err());
    }
}
