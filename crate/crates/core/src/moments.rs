//! Sample moments, weight policies and structured covariances.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_all_finite, Error, Result};
use crate::numerics::SymMatrix;

/// Degrees-of-freedom correction of the sample covariance: the divisor is
/// `T − COVARIANCE_DDOF`.
pub const COVARIANCE_DDOF: usize = 1;

/// `T` observations of a `p`-vector, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    t_obs: usize,
    dim: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(t_obs: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("data must have at least one column"));
        }
        if values.len() != t_obs * dim {
            return Err(Error::domain(format!(
                "expected {} values for {t_obs} rows of {dim}, got {}",
                t_obs * dim,
                values.len()
            )));
        }
        ensure_all_finite(&values, "data")?;
        Ok(Self { t_obs, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::domain(format!(
                "row {bad} has {} values, expected {dim}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn t_obs(&self) -> usize {
        self.t_obs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// How the per-coordinate weights `θ̂` are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightPolicy {
    /// User-supplied strictly positive weights.
    Fixed { theta: Vec<f64> },
    /// `θ̂_j = 1/√v̂_jj`, i.e. the test runs on t-ratios.
    InverseStd,
    /// Inverse standard deviations with coordinate `index` (zero-based)
    /// multiplied by `1 + eps`. Breaks the symmetry that would otherwise
    /// make `Ψ̂ᵀΔ̂V̂Δ̂Ψ̂` vanish for a singular `V`.
    InverseStdPerturbed { index: usize, eps: f64 },
}

impl Default for WeightPolicy {
    fn default() -> Self {
        WeightPolicy::InverseStd
    }
}

impl WeightPolicy {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            WeightPolicy::Fixed { theta } => {
                if theta.len() != dim {
                    return Err(Error::domain(format!(
                        "fixed weights have length {}, expected {dim}",
                        theta.len()
                    )));
                }
                if let Some(j) = theta.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
                    return Err(Error::domain(format!(
                        "fixed weight {j} must be positive and finite, got {}",
                        theta[j]
                    )));
                }
            }
            WeightPolicy::InverseStd => {}
            WeightPolicy::InverseStdPerturbed { index, eps } => {
                if *index >= dim {
                    return Err(Error::domain(format!(
                        "perturbed index {index} out of range for dimension {dim}"
                    )));
                }
                if !(eps.is_finite() && *eps > -1.0 && *eps != 0.0) {
                    return Err(Error::domain(format!(
                        "perturbation must satisfy eps > -1 and eps != 0, got {eps}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Column means and the sample covariance with divisor `T − 1`.
pub fn sample_moments(x: &DataMatrix) -> Result<(Vec<f64>, SymMatrix)> {
    let (t, p) = (x.t_obs(), x.dim());
    if t < 2 {
        return Err(Error::domain(format!(
            "need at least 2 observations, got {t}"
        )));
    }
    let mut mean = vec![0.0; p];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for (j, m) in mean.iter_mut().enumerate() {
        let first = x.row(0)[j];
        // a constant column must come out with exactly zero variance
        if x.rows().all(|r| r[j] == first) {
            *m = first;
        } else {
            *m /= t as f64;
        }
    }
    let mut cov = vec![0.0; p * p];
    let mut dev = vec![0.0; p];
    for row in x.rows() {
        for ((d, v), m) in dev.iter_mut().zip(row).zip(&mean) {
            *d = v - m;
        }
        for i in 0..p {
            for j in i..p {
                cov[i * p + j] += dev[i] * dev[j];
            }
        }
    }
    let denom = (t - COVARIANCE_DDOF) as f64;
    for i in 0..p {
        for j in i..p {
            let c = cov[i * p + j] / denom;
            cov[i * p + j] = c;
            cov[j * p + i] = c;
        }
    }
    Ok((mean, SymMatrix::new(p, cov)?))
}

/// Resolves a weight policy against an estimated covariance.
pub fn resolve_weights(policy: &WeightPolicy, v_hat: &SymMatrix) -> Result<Vec<f64>> {
    let p = v_hat.dim();
    policy.validate(p)?;
    let inverse_std = || -> Result<Vec<f64>> {
        v_hat
            .diag()
            .into_iter()
            .enumerate()
            .map(|(j, v)| {
                if v > 0.0 && v.is_finite() {
                    Ok(1.0 / v.sqrt())
                } else {
                    Err(Error::DegenerateVariance {
                        coordinate: j,
                        variance: v,
                    })
                }
            })
            .collect()
    };
    match policy {
        WeightPolicy::Fixed { theta } => Ok(theta.clone()),
        WeightPolicy::InverseStd => inverse_std(),
        WeightPolicy::InverseStdPerturbed { index, eps } => {
            let mut theta = inverse_std()?;
            theta[*index] *= 1.0 + eps;
            Ok(theta)
        }
    }
}

/// `V_ij = ρ^|i−j|`.
pub fn toeplitz_cov(p: usize, rho: f64) -> Result<SymMatrix> {
    if p == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::domain(format!(
            "Toeplitz correlation must satisfy |rho| < 1, got {rho}"
        )));
    }
    let data = (0..p * p)
        .map(|k| rho.powi((k / p).abs_diff(k % p) as i32))
        .collect();
    SymMatrix::new(p, data)
}
