//! Structural dimension from a kernel spectrum via a BIC-type criterion.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdrError};

/// Whether the criterion is maximized or minimized over k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    OptimizeMax,
    OptimizeMin,
}

impl std::str::FromStr for Direction {
    type Err = SdrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" | "optimize-max" => Ok(Direction::OptimizeMax),
            "min" | "optimize-min" => Ok(Direction::OptimizeMin),
            other => Err(SdrError::Parameter(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionChoice {
    pub d_hat: usize,
    /// Criterion at k = 1..=p (index k-1).
    pub criterion_values: Vec<f64>,
    pub c_n: f64,
}

/// Default penalty `C_n = √n`.
pub fn default_penalty(n: usize) -> f64 {
    (n as f64).sqrt()
}

/// `ln(1+ℓ) − ℓ`, accurate for small ℓ.
fn log_term(l: f64) -> f64 {
    if l < 1e-4 {
        let l2 = l * l;
        -l2 / 2.0 + l2 * l / 3.0 - l2 * l2 / 4.0
    } else {
        l.ln_1p() - l
    }
}

/// Evaluates
///
/// ```text
/// G(k) = n·Σ_{j≤k} f(ℓⱼ) / (2·Σ_{j≤p} f(ℓⱼ)) − 2·C_n·k(k−1)/(2p),  f(ℓ) = ln(ℓ+1) − ℓ
/// ```
///
/// for k = 1..=p with p the spectrum length, and returns its optimizer.
pub fn select_dimension(spectrum: &[f64], n: usize, c_n: f64, direction: Direction) -> Result<DimensionChoice> {
    select_dimension_in(spectrum, n, c_n, direction, spectrum.len())
}

/// As [`select_dimension`] with an explicit `p` in the penalty term.
pub fn select_dimension_in(
    spectrum: &[f64],
    n: usize,
    c_n: f64,
    direction: Direction,
    penalty_dim: usize,
) -> Result<DimensionChoice> {
    if spectrum.is_empty() || penalty_dim == 0 {
        return Err(SdrError::Selection("empty spectrum".into()));
    }
    if spectrum.iter().any(|v| !v.is_finite()) {
        return Err(SdrError::Selection("non-finite eigenvalue".into()));
    }
    if !(c_n.is_finite() && c_n > 0.0) {
        return Err(SdrError::Parameter(format!("penalty C_n must be positive, got {c_n}")));
    }
    let terms: Vec<f64> = spectrum.iter().map(|&l| log_term(l.max(0.0))).collect();
    let total: f64 = terms.iter().sum();
    if total == 0.0 {
        return Err(SdrError::Selection("spectrum carries no signal (all zero)".into()));
    }
    let scale = n as f64 / (2.0 * total);
    let pd = penalty_dim as f64;
    let mut partial = 0.0;
    let criterion_values: Vec<f64> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            partial += t;
            let k = (i + 1) as f64;
            scale * partial - 2.0 * c_n * k * (k - 1.0) / (2.0 * pd)
        })
        .collect();

    let mut best = 0;
    for (i, &g) in criterion_values.iter().enumerate().skip(1) {
        let better = match direction {
            Direction::OptimizeMax => g > criterion_values[best],
            Direction::OptimizeMin => g < criterion_values[best],
        };
        if better {
            best = i;
        }
    }
    Ok(DimensionChoice {
        d_hat: best + 1,
        criterion_values,
        c_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_spike() {
        let mut spec = vec![0.0; 20];
        spec[0] = 0.8;
        let c = select_dimension(&spec, 100, 10.0, Direction::OptimizeMax).unwrap();
        assert_eq!(c.d_hat, 1);
    }

    #[test]
    fn two_equal_spikes_small_penalty() {
        // G(1) = n/4, G(2) = n/2 − 2c/p, G(k>2) = n/2 − c·k(k−1)/p
        let mut spec = vec![0.0; 10];
        spec[0] = 0.5;
        spec[1] = 0.5;
        let c = select_dimension(&spec, 100, 1.0, Direction::OptimizeMax).unwrap();
        assert_eq!(c.d_hat, 2);
        assert!((c.criterion_values[0] - 25.0).abs() < 1e-12);
        assert!((c.criterion_values[1] - (50.0 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn argmin_with_light_penalty_picks_one() {
        let spec = [0.9, 0.7, 0.5, 0.1];
        let c = select_dimension(&spec, 100, 1.0, Direction::OptimizeMin).unwrap();
        assert_eq!(c.d_hat, 1);
    }

    #[test]
    fn ratio_term_at_full_rank_is_half_n() {
        let spec = [3.0, 1.0, 0.2, 0.05];
        for scale in [0.01, 1.0, 250.0] {
            let s: Vec<f64> = spec.iter().map(|v| v * scale).collect();
            let c = select_dimension(&s, 77, 1e-9, Direction::OptimizeMax).unwrap();
            let penalty = 2.0 * 1e-9 * 4.0 * 3.0 / 8.0;
            assert!((c.criterion_values[3] + penalty - 38.5).abs() < 1e-9);
        }
    }

    #[test]
    fn appended_zeros_do_not_change_choice() {
        let spec = vec![1.2, 0.9, 0.05, 0.01, 0.0];
        let base = select_dimension_in(&spec, 100, 10.0, Direction::OptimizeMax, 5).unwrap();
        let mut longer = spec.clone();
        longer.extend(std::iter::repeat(0.0).take(40));
        let ext = select_dimension_in(&longer, 100, 10.0, Direction::OptimizeMax, 5).unwrap();
        assert_eq!(base.d_hat, ext.d_hat);
    }

    #[test]
    fn zero_spectrum_is_an_error() {
        assert!(matches!(
            select_dimension(&[0.0, 0.0], 10, 1.0, Direction::OptimizeMax),
            Err(SdrError::Selection(_))
        ));
        // negative rounding clamps to zero as well
        assert!(select_dimension(&[-1e-15, 0.0], 10, 1.0, Direction::OptimizeMax).is_err());
    }
}
