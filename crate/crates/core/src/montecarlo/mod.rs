//! Data-generating processes and simulation campaigns.
//!
//! Observations follow `x_t = μ + V^{1/2} w_t` with `V` a Toeplitz
//! correlation matrix, `V^{1/2}` its symmetric square root, and `w_t`
//! i.i.d. standardized noise drawn by inversion from a counter-based
//! stream.

mod campaign;
mod table;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_all_finite, Error, Result};
use crate::moments::{toeplitz_cov, DataMatrix, WeightPolicy};
use crate::numerics::{psd_sqrt, quantile, SymMatrix};
use crate::rng::Stream;

pub use campaign::{
    run_campaign, run_campaign_with_threads, CampaignSpec, PowerGrid, Replication, TestSpec,
};
pub use table::{
    aggregate, format_summary, AggregateGrid, AggregateMode, RejectionRow, RejectionTable,
    SummaryRow,
};

/// Distribution of the standardized noise `w_{t,j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Gaussian,
    Logistic,
    /// `U(−1, 2)`, centered and scaled.
    #[serde(rename = "uniform_m1_2")]
    UniformM1To2,
}

impl Noise {
    pub const ALL: [Noise; 3] = [Noise::Gaussian, Noise::Logistic, Noise::UniformM1To2];

    pub fn name(self) -> &'static str {
        match self {
            Noise::Gaussian => "gaussian",
            Noise::Logistic => "logistic",
            Noise::UniformM1To2 => "uniform_m1_2",
        }
    }

    #[inline]
    fn transform(self, u: f64) -> f64 {
        match self {
            Noise::Gaussian => quantile(u),
            Noise::Logistic => (3.0_f64.sqrt() / PI) * (u / (1.0 - u)).ln(),
            Noise::UniformM1To2 => (3.0 * u - 1.5) / 0.75_f64.sqrt(),
        }
    }
}

impl fmt::Display for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inverse-transform draw with mean 0 and variance 1.
pub fn standardized_noise(noise: Noise, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("uniform must lie in (0, 1), got {u}")));
    }
    Ok(noise.transform(u))
}

/// Which experimental design produced a scenario's mean vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum Design {
    /// `μ_1 = 0`, `μ_j = λ(j−1)/(p−1)`.
    Size { lambda: f64 },
    /// `μ = −δVθ + εμ̃`.
    Power { delta: f64, epsilon: f64 },
    /// Anything else.
    Custom,
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Design::Size { .. } => "size",
            Design::Power { .. } => "power",
            Design::Custom => "custom",
        }
    }
}

/// One simulation cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpScenario {
    pub p: usize,
    pub t_obs: usize,
    pub mu: Vec<f64>,
    pub rho: f64,
    pub noise: Noise,
    #[serde(default)]
    pub weight_policy: WeightPolicy,
    #[serde(flatten)]
    pub design: Design,
}

impl DgpScenario {
    /// Null design cell.
    pub fn size(p: usize, t_obs: usize, lambda: f64, rho: f64, noise: Noise) -> Result<Self> {
        Ok(Self {
            p,
            t_obs,
            mu: mu_size_design(p, lambda)?,
            rho,
            noise,
            weight_policy: WeightPolicy::InverseStd,
            design: Design::Size { lambda },
        })
    }

    /// Alternative design cell with `θ_j = 1/√v_jj` of the true `V`.
    pub fn power(
        p: usize,
        t_obs: usize,
        delta: f64,
        epsilon: f64,
        rho: f64,
        noise: Noise,
    ) -> Result<Self> {
        let v = toeplitz_cov(p, rho)?;
        let theta: Vec<f64> = v.diag().iter().map(|d| 1.0 / d.sqrt()).collect();
        Ok(Self {
            p,
            t_obs,
            mu: mu_power_design(p, delta, epsilon, &v, &theta)?,
            rho,
            noise,
            weight_policy: WeightPolicy::InverseStd,
            design: Design::Power { delta, epsilon },
        })
    }

    /// Arbitrary mean vector.
    pub fn custom(mu: Vec<f64>, t_obs: usize, rho: f64, noise: Noise) -> Self {
        Self {
            p: mu.len(),
            t_obs,
            mu,
            rho,
            noise,
            weight_policy: WeightPolicy::InverseStd,
            design: Design::Custom,
        }
    }

    pub fn with_weights(mut self, policy: WeightPolicy) -> Self {
        self.weight_policy = policy;
        self
    }

    pub fn covariance(&self) -> Result<SymMatrix> {
        toeplitz_cov(self.p, self.rho)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.mu.len() != self.p {
            return Err(Error::domain(format!(
                "mean has length {}, expected p = {}",
                self.mu.len(),
                self.p
            )));
        }
        if self.t_obs < 3 {
            return Err(Error::domain(format!(
                "sample size must be at least 3, got {}",
                self.t_obs
            )));
        }
        ensure_all_finite(&self.mu, "mu")?;
        self.weight_policy.validate(self.p)?;
        self.covariance().map(|_| ())
    }
}

/// Scenario with its covariance root precomputed.
#[derive(Debug, Clone)]
pub(crate) struct PreparedScenario<'a> {
    pub scenario: &'a DgpScenario,
    root: SymMatrix,
}

impl<'a> PreparedScenario<'a> {
    pub fn new(scenario: &'a DgpScenario) -> Result<Self> {
        scenario.validate()?;
        let root = psd_sqrt(&scenario.covariance()?)?;
        Ok(Self { scenario, root })
    }

    pub fn sample(&self, stream: &mut Stream) -> Result<DataMatrix> {
        let s = self.scenario;
        let p = s.p;
        let root = self.root.as_slice();
        let mut values = Vec::with_capacity(s.t_obs * p);
        let mut w = vec![0.0; p];
        for _ in 0..s.t_obs {
            for x in w.iter_mut() {
                *x = s.noise.transform(stream.uniform());
            }
            for i in 0..p {
                let row = &root[i * p..(i + 1) * p];
                values.push(s.mu[i] + row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>());
            }
        }
        DataMatrix::new(s.t_obs, p, values)
    }
}

/// Draws one `T × p` sample. Rows are consumed from `stream` in order, one
/// uniform per entry.
pub fn generate_sample(scenario: &DgpScenario, stream: &mut Stream) -> Result<DataMatrix> {
    PreparedScenario::new(scenario)?.sample(stream)
}

/// `μ_1 = 0`, `μ_j = λ(j−1)/(p−1)` for `j ≥ 2`.
pub fn mu_size_design(p: usize, lambda: f64) -> Result<Vec<f64>> {
    if p < 2 {
        return Err(Error::domain(format!("size design needs p >= 2, got {p}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("lambda must be non-negative, got {lambda}")));
    }
    Ok((0..p)
        .map(|j| lambda * j as f64 / (p - 1) as f64)
        .collect())
}

/// `μ = −δVθ + εμ̃` with `μ̃_j = δ` on the first half and `−δ` on the second.
pub fn mu_power_design(
    p: usize,
    delta: f64,
    epsilon: f64,
    v: &SymMatrix,
    theta: &[f64],
) -> Result<Vec<f64>> {
    if p == 0 || p % 2 != 0 {
        return Err(Error::domain(format!("power design needs an even p, got {p}")));
    }
    if v.dim() != p || theta.len() != p {
        return Err(Error::domain("covariance and weights must have dimension p"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let v_theta = v.mul_vec(theta);
    Ok(v_theta
        .iter()
        .enumerate()
        .map(|(j, vt)| {
            let tilt = if j < p / 2 { delta } else { -delta };
            -delta * vt + epsilon * tilt
        })
        .collect())
}
