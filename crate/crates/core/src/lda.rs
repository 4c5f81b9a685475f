//! Two-class linear discriminant on a one-dimensional projection.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdrError};

/// The two distinct values of a binary response, ascending.
pub fn binary_classes(y: &[f64]) -> Result<[f64; 2]> {
    let mut values: Vec<f64> = Vec::new();
    for &v in y {
        if !values.contains(&v) {
            values.push(v);
            if values.len() > 2 {
                return Err(SdrError::Parameter(
                    "classification needs a binary response; found more than two distinct values".into(),
                ));
            }
        }
    }
    if values.len() < 2 {
        return Err(SdrError::Parameter("classification needs both classes present".into()));
    }
    values.sort_by(f64::total_cmp);
    Ok([values[0], values[1]])
}

/// Equal-variance Gaussian discriminant with class-frequency priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lda1d {
    pub classes: [f64; 2],
    pub means: [f64; 2],
    pub priors: [f64; 2],
    /// Pooled within-class variance (divisor n − 2).
    pub variance: f64,
}

impl Lda1d {
    pub fn fit(z: &[f64], y: &[f64]) -> Result<Self> {
        if z.len() != y.len() {
            return Err(SdrError::Dimension(format!(
                "{} projections but {} labels",
                z.len(),
                y.len()
            )));
        }
        let classes = binary_classes(y)?;
        let mut sums = [0.0; 2];
        let mut counts = [0usize; 2];
        for (&zi, &yi) in z.iter().zip(y) {
            let k = usize::from(yi == classes[1]);
            sums[k] += zi;
            counts[k] += 1;
        }
        let means = [sums[0] / counts[0] as f64, sums[1] / counts[1] as f64];
        let ss: f64 = z
            .iter()
            .zip(y)
            .map(|(&zi, &yi)| (zi - means[usize::from(yi == classes[1])]).powi(2))
            .sum();
        let n = z.len();
        let variance = if n > 2 { ss / (n - 2) as f64 } else { 0.0 };
        Ok(Lda1d {
            classes,
            means,
            priors: [counts[0] as f64 / n as f64, counts[1] as f64 / n as f64],
            variance,
        })
    }

    /// Discriminant score of class 1 minus class 0.
    pub fn score(&self, z: f64) -> f64 {
        let [m0, m1] = self.means;
        if self.variance > 0.0 {
            (z * (m1 - m0) - 0.5 * (m1 * m1 - m0 * m0)) / self.variance + (self.priors[1] / self.priors[0]).ln()
        } else {
            // zero within-class spread: nearest mean
            (z - m0).abs() - (z - m1).abs()
        }
    }

    /// Ties go to the first class.
    pub fn predict(&self, z: f64) -> f64 {
        if self.score(z) > 0.0 {
            self.classes[1]
        } else {
            self.classes[0]
        }
    }
}
