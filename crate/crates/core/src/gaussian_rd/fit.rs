//! Gaussian fit to a sample matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::Spectrum;
use crate::error::{domain, Error, Result};

const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FittedSpectrum {
    pub spectrum: Spectrum,
    pub mean: Vec<f64>,
    /// Columns are eigenvectors, ordered like `spectrum`.
    pub rotation: DMatrix<f64>,
    /// Set when some eigenvalue fell below the floor and was clamped.
    pub rank_deficient: bool,
}

/// Eigen-decomposes the sample covariance of `samples` (one row per sample).
pub fn fit_spectrum(samples: &[Vec<f64>]) -> Result<FittedSpectrum> {
    let dim = samples.first().map_or(0, Vec::len);
    if dim == 0 {
        return domain("no samples or zero-dimensional samples");
    }
    if samples.len() < dim + 1 {
        return domain(format!(
            "{} samples cannot fit a {dim}-dimensional covariance",
            samples.len()
        ));
    }
    if let Some(row) = samples.iter().position(|r| r.len() != dim) {
        return Err(Error::Shape {
            expected: dim,
            got: samples[row].len(),
        });
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return domain("samples contain non-finite values");
    }
    let n = samples.len() as f64;
    let mut mean = DVector::<f64>::zeros(dim);
    for row in samples {
        mean += DVector::from_column_slice(row);
    }
    mean /= n;
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for row in samples {
        let d = DVector::from_column_slice(row) - &mean;
        cov.syger(1.0, &d, &d, 1.0);
    }
    cov /= n - 1.0;
    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let mut rank_deficient = false;
    let lambdas: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v = eigen.eigenvalues[i];
            if v < EIGEN_FLOOR {
                rank_deficient = true;
            }
            v.max(EIGEN_FLOOR)
        })
        .collect();
    let rotation = DMatrix::from_fn(dim, dim, |r, c| eigen.eigenvectors[(r, order[c])]);
    Ok(FittedSpectrum {
        spectrum: Spectrum::new(lambdas)?,
        mean: mean.iter().copied().collect(),
        rotation,
        rank_deficient,
    })
}

/// Parses a plain matrix: one sample per line, values separated by commas or whitespace.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    Error::Format(format!("line {}: cannot parse {t:?}", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
