//! Sample distance covariance and squared distance correlation.
//!
//! Both use the V-statistic (n divisor) form:
//!
//! ```text
//! dcov²(v1, v2) = mean(A∘B) + mean(A)·mean(B) − 2·meanᵢ(Āᵢ·B̄ᵢ)
//! ```
//!
//! where `A`, `B` are the pairwise Euclidean distance matrices of the two
//! samples and `Āᵢ`, `B̄ᵢ` their row means. The two samples may have any
//! number of columns as long as the row counts agree.

use nalgebra::DMatrix;

use crate::error::{Result, SdrError};

/// Denominators at or below this are treated as degenerate.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-14;

const NEGATIVE_ROUNDING: f64 = 1e-12;

/// Squared distance correlation together with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcorValue {
    pub dcov2: f64,
    pub dcor2: f64,
    /// sqrt(dcov²(v1,v1)·dcov²(v2,v2))
    pub denominator: f64,
    /// Set when the denominator vanished and `dcor2` was forced to zero.
    pub degenerate: bool,
}

impl DcorValue {
    fn from_parts(dcov2: f64, self1: f64, self2: f64) -> Self {
        let denominator = (self1 * self2).max(0.0).sqrt();
        if denominator > DEGENERATE_DENOMINATOR {
            DcorValue {
                dcov2,
                dcor2: dcov2 / denominator,
                denominator,
                degenerate: false,
            }
        } else {
            DcorValue {
                dcov2,
                dcor2: 0.0,
                denominator,
                degenerate: true,
            }
        }
    }
}

fn clamp_rounding(v: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        assert!(
            v > -NEGATIVE_ROUNDING,
            "sample distance covariance is negative beyond rounding: {v}"
        );
        0.0
    }
}

/// Distance matrix of one sample with its row means and grand mean.
struct DistanceSummary {
    dist: DMatrix<f64>,
    row_means: Vec<f64>,
    grand_mean: f64,
}

impl DistanceSummary {
    fn new(v: &DMatrix<f64>) -> Self {
        let n = v.nrows();
        let mut dist = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let mut s = 0.0;
                for k in 0..v.ncols() {
                    let d = v[(i, k)] - v[(j, k)];
                    s += d * d;
                }
                let d = s.sqrt();
                dist[(i, j)] = d;
                dist[(j, i)] = d;
            }
        }
        let row_means: Vec<f64> = (0..n).map(|i| dist.column(i).sum() / n as f64).collect();
        let grand_mean = row_means.iter().sum::<f64>() / n as f64;
        DistanceSummary {
            dist,
            row_means,
            grand_mean,
        }
    }

    fn dcov2_with(&self, other: &DistanceSummary) -> f64 {
        let n = self.row_means.len() as f64;
        let cross = self.dist.dot(&other.dist) / (n * n);
        let rows = self
            .row_means
            .iter()
            .zip(&other.row_means)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n;
        clamp_rounding(cross + self.grand_mean * other.grand_mean - 2.0 * rows)
    }
}

fn check_rows(v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> Result<()> {
    if v1.nrows() != v2.nrows() {
        return Err(SdrError::Dimension(format!(
            "distance covariance needs equal row counts, got {} and {}",
            v1.nrows(),
            v2.nrows()
        )));
    }
    if v1.nrows() < 2 {
        return Err(SdrError::Dimension("distance covariance needs n >= 2".into()));
    }
    Ok(())
}

/// Sample distance covariance dcov²(v1, v2).
pub fn dcov2_sample(v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> Result<f64> {
    check_rows(v1, v2)?;
    let a = DistanceSummary::new(v1);
    let b = DistanceSummary::new(v2);
    Ok(a.dcov2_with(&b))
}

/// Sample squared distance correlation.
///
/// A vanishing denominator (one side constant) yields `dcor2 = 0` with the
/// degenerate flag rather than an error.
pub fn dcor2_sample(v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> Result<DcorValue> {
    check_rows(v1, v2)?;
    let a = DistanceSummary::new(v1);
    let b = DistanceSummary::new(v2);
    Ok(DcorValue::from_parts(
        a.dcov2_with(&b),
        a.dcov2_with(&a),
        b.dcov2_with(&b),
    ))
}

/// Cached distance structure of the response, used to score many covariate
/// blocks against the same `y` without materializing their distance matrices.
#[derive(Debug, Clone)]
pub struct ResponseDistances {
    n: usize,
    // upper triangle (i < j), row-major
    packed: Vec<f64>,
    row_means: Vec<f64>,
    grand_mean: f64,
    self_dcov2: f64,
}

impl ResponseDistances {
    pub fn new(y: &[f64]) -> Self {
        let n = y.len();
        let mut packed = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        let mut row_sums = vec![0.0; n];
        let mut sq = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (y[i] - y[j]).abs();
                packed.push(d);
                row_sums[i] += d;
                row_sums[j] += d;
                sq += d * d;
            }
        }
        let nf = n as f64;
        let row_means: Vec<f64> = row_sums.iter().map(|s| s / nf).collect();
        let grand_mean = row_means.iter().sum::<f64>() / nf;
        let rows = row_means.iter().map(|r| r * r).sum::<f64>() / nf;
        let self_dcov2 = clamp_rounding(2.0 * sq / (nf * nf) + grand_mean * grand_mean - 2.0 * rows);
        ResponseDistances {
            n,
            packed,
            row_means,
            grand_mean,
            self_dcov2,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Scratch space large enough for [`Self::score_block`].
    pub fn scratch(&self) -> Vec<f64> {
        vec![0.0; self.packed.len()]
    }

    /// dcor²(y, x[:, cols]).
    ///
    /// `scratch` must come from [`Self::scratch`]; it is overwritten.
    pub fn score_block(&self, x: &DMatrix<f64>, cols: &[usize], scratch: &mut [f64]) -> DcorValue {
        let n = self.n;
        debug_assert_eq!(x.nrows(), n);
        debug_assert_eq!(scratch.len(), self.packed.len());
        scratch.fill(0.0);
        for &c in cols {
            let col = x.column(c);
            let col = col.as_slice();
            let mut idx = 0;
            for i in 0..n {
                let xi = col[i];
                let tail = &col[i + 1..];
                let out = &mut scratch[idx..idx + tail.len()];
                for (o, &xj) in out.iter_mut().zip(tail) {
                    let d = xi - xj;
                    *o += d * d;
                }
                idx += tail.len();
            }
        }
        self.finish_block(scratch)
    }

    fn finish_block(&self, scratch: &mut [f64]) -> DcorValue {
        let n = self.n;
        let sq = lane_sum(scratch);
        for v in scratch.iter_mut() {
            *v = v.sqrt();
        }
        let cross = lane_dot(scratch, &self.packed);
        let mut row_sums = vec![0.0; n];
        let mut idx = 0;
        for i in 0..n {
            let len = n - i - 1;
            let seg = &scratch[idx..idx + len];
            row_sums[i] += lane_sum(seg);
            for (r, &b) in row_sums[i + 1..].iter_mut().zip(seg) {
                *r += b;
            }
            idx += len;
        }

        let nf = n as f64;
        let row_means: Vec<f64> = row_sums.iter().map(|s| s / nf).collect();
        let grand_mean = row_means.iter().sum::<f64>() / nf;
        let (mut rows_ab, mut rows_bb) = (0.0, 0.0);
        for (a, b) in self.row_means.iter().zip(&row_means) {
            rows_ab += a * b;
            rows_bb += b * b;
        }
        let dcov2 = clamp_rounding(
            2.0 * cross / (nf * nf) + self.grand_mean * grand_mean - 2.0 * rows_ab / nf,
        );
        let self_block = clamp_rounding(
            2.0 * sq / (nf * nf) + grand_mean * grand_mean - 2.0 * rows_bb / nf,
        );
        DcorValue::from_parts(dcov2, self.self_dcov2, self_block)
    }
}

// Four independent accumulators so the reductions vectorize.
fn lane_sum(a: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.chunks_exact(4);
    let rest: f64 = chunks.remainder().iter().sum();
    for c in chunks {
        for k in 0..4 {
            acc[k] += c[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest
}

fn lane_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let rest: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest
}
