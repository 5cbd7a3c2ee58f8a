//! Comparison tests with generalized-moment-selection critical values.
//!
//! Each test computes a statistic `S(m, Ω)` on the standardized vector
//! `m = √T·Δ̂μ̂` with `Ω = Δ̂V̂Δ̂`, then compares it with the `1 − α`
//! quantile of `S(Z + K(T)·Δ̂μ̃, Ω)`, where `Z ~ N(0, Ω)` and `μ̃` zeroes the
//! coordinates whose standardized estimate is not clearly positive.
//!
//! Critical-value draws read the stream `(seed, 0)` in order: `p` uniforms
//! per parametric draw, `T` row indices per bootstrap draw. Draw `r` is
//! therefore a pure function of `(seed, r)`, and statistics evaluated on
//! the same seed see the same draws.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_all_finite, ensure_finite, Error, Result};
use crate::moments::{sample_moments, DataMatrix};
use crate::numerics::{psd_sqrt, SymMatrix};
use crate::qp::NnProjector;
use crate::rng::Stream;
use crate::smoothers::Tuner;
use crate::statistic::check_alpha;

/// Smallest number of simulation draws accepted.
pub const MIN_REPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GmsStatistic {
    /// Extreme value, `−min(m_1, …, m_p, 0)`.
    S1,
    /// Quasi-likelihood ratio, `min_{t ≥ 0} (m − t)ᵀΩ⁻¹(m − t)`.
    S2,
    /// Modified method of moments, `Σ min(m_j, 0)²`.
    S3,
    /// Sum of negative parts, `Σ −min(m_j, 0)`.
    S4,
}

impl GmsStatistic {
    pub const ALL: [GmsStatistic; 4] = [
        GmsStatistic::S1,
        GmsStatistic::S2,
        GmsStatistic::S3,
        GmsStatistic::S4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GmsStatistic::S1 => "s1",
            GmsStatistic::S2 => "s2",
            GmsStatistic::S3 => "s3",
            GmsStatistic::S4 => "s4",
        }
    }
}

impl fmt::Display for GmsStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GmsStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(GmsStatistic::S1),
            "s2" => Ok(GmsStatistic::S2),
            "s3" => Ok(GmsStatistic::S3),
            "s4" => Ok(GmsStatistic::S4),
            other => Err(Error::domain(format!("unknown statistic {other:?}"))),
        }
    }
}

/// How critical-value draws are produced.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resample {
    /// `Z ~ N(0, Δ̂V̂Δ̂)` through the symmetric square root.
    #[default]
    Parametric,
    /// i.i.d. row bootstrap; `Z* = √T·Δ̂(μ̂* − μ̂)`. Needs the data matrix.
    #[serde(alias = "iid_bootstrap")]
    Bootstrap,
}

impl FromStr for Resample {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parametric" => Ok(Resample::Parametric),
            "bootstrap" | "iid_bootstrap" => Ok(Resample::Bootstrap),
            other => Err(Error::domain(format!("unknown resampling mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmsConfig {
    pub stat: GmsStatistic,
    pub tuner: Tuner,
    pub reps: usize,
    pub alpha: f64,
    #[serde(default)]
    pub resample: Resample,
    pub seed: u64,
}

impl GmsConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.reps < MIN_REPS {
            return Err(Error::domain(format!(
                "need at least {MIN_REPS} critical-value draws, got {}",
                self.reps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmsResult {
    pub stat: GmsStatistic,
    pub statistic: f64,
    pub critical_value: f64,
    /// Recentered mean; each entry is either 0 or the matching `μ̂_j`.
    pub mu_tilde: Vec<f64>,
    pub reject: bool,
}

/// Estimates handed to a GMS test.
#[derive(Debug, Clone, Copy)]
pub struct GmsInput<'a> {
    pub mu_hat: &'a [f64],
    pub v_hat: &'a SymMatrix,
    pub theta_hat: &'a [f64],
    pub t_obs: u64,
    /// Needed only for bootstrap critical values.
    pub data: Option<&'a DataMatrix>,
}

impl GmsInput<'_> {
    fn validate(&self) -> Result<()> {
        let p = self.mu_hat.len();
        if p == 0 || self.v_hat.dim() != p || self.theta_hat.len() != p {
            return Err(Error::domain(format!(
                "dimension mismatch: mu_hat {p}, v_hat {}, theta_hat {}",
                self.v_hat.dim(),
                self.theta_hat.len()
            )));
        }
        ensure_all_finite(self.mu_hat, "mu_hat")?;
        ensure_all_finite(self.theta_hat, "theta_hat")?;
        if self.theta_hat.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::domain("theta_hat must be strictly positive"));
        }
        if self.t_obs == 0 {
            return Err(Error::domain("sample size must be positive"));
        }
        if let Some(d) = self.data {
            if d.dim() != p || d.t_obs() as u64 != self.t_obs {
                return Err(Error::domain("data matrix does not match the estimates"));
            }
        }
        Ok(())
    }
}

/// Evaluates one statistic repeatedly for a fixed `Ω`.
#[derive(Debug, Clone)]
enum Evaluator {
    S1,
    S2(NnProjector),
    S3,
    S4,
}

impl Evaluator {
    fn new(kind: GmsStatistic, omega: &SymMatrix) -> Result<Self> {
        Ok(match kind {
            GmsStatistic::S1 => Evaluator::S1,
            GmsStatistic::S2 => Evaluator::S2(NnProjector::new(omega)?),
            GmsStatistic::S3 => Evaluator::S3,
            GmsStatistic::S4 => Evaluator::S4,
        })
    }

    #[inline]
    fn eval(&self, m: &[f64]) -> f64 {
        match self {
            Evaluator::S1 => -m.iter().fold(0.0_f64, |a, &x| a.min(x)),
            Evaluator::S2(proj) => proj.value(m),
            Evaluator::S3 => m.iter().map(|&x| x.min(0.0).powi(2)).sum(),
            Evaluator::S4 => m.iter().map(|&x| -x.min(0.0)).sum(),
        }
    }
}

/// `S(m, Ω)` for standardized `m` and weighted covariance `Ω`.
pub fn statistic_value(kind: GmsStatistic, m: &[f64], omega: &SymMatrix) -> Result<f64> {
    ensure_all_finite(m, "m")?;
    if m.len() != omega.dim() {
        return Err(Error::domain(format!(
            "vector has length {}, expected {}",
            m.len(),
            omega.dim()
        )));
    }
    Ok(Evaluator::new(kind, omega)?.eval(m))
}

/// Basic moment selection: `μ̃_j = 0` when `K·θ̂_j·μ̂_j ≤ 1`, else `μ̂_j`.
pub fn gms_recenter(mu_hat: &[f64], theta_hat: &[f64], k_of_t: f64) -> Result<Vec<f64>> {
    ensure_all_finite(mu_hat, "mu_hat")?;
    ensure_finite(k_of_t, "K(T)")?;
    if !(k_of_t > 0.0) {
        return Err(Error::domain(format!("K(T) must be positive, got {k_of_t}")));
    }
    if theta_hat.len() != mu_hat.len() || theta_hat.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::domain("theta_hat must be positive and match mu_hat"));
    }
    Ok(mu_hat
        .iter()
        .zip(theta_hat)
        .map(|(&m, &t)| if k_of_t * t * m <= 1.0 { 0.0 } else { m })
        .collect())
}

/// 1-based rank of the `1 − α` order statistic among `reps` draws.
pub(crate) fn quantile_rank(alpha: f64, reps: usize) -> usize {
    let k = ((1.0 - alpha) * reps as f64 - 1e-9).ceil() as usize;
    k.clamp(1, reps)
}

fn order_statistic(draws: &mut [f64], rank: usize) -> f64 {
    let (_, v, _) = draws.select_nth_unstable_by(rank - 1, f64::total_cmp);
    *v
}

/// Critical values for several statistics computed on one common set of
/// draws. Results equal those of separate calls with the same seed.
#[allow(clippy::too_many_arguments)]
pub fn gms_critical_values(
    kinds: &[GmsStatistic],
    tuner: Tuner,
    reps: usize,
    alpha: f64,
    resample: Resample,
    seed: u64,
    mu_tilde: &[f64],
    input: &GmsInput<'_>,
) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if reps < MIN_REPS {
        return Err(Error::domain(format!(
            "need at least {MIN_REPS} critical-value draws, got {reps}"
        )));
    }
    input.validate()?;
    let p = input.mu_hat.len();
    if mu_tilde.len() != p {
        return Err(Error::domain("mu_tilde has the wrong length"));
    }
    let k = tuner.eval(input.t_obs)?;
    let omega = input.v_hat.scale_by(input.theta_hat);
    let evaluators = kinds
        .iter()
        .map(|&kind| Evaluator::new(kind, &omega))
        .collect::<Result<Vec<_>>>()?;
    let shift: Vec<f64> = mu_tilde
        .iter()
        .zip(input.theta_hat)
        .map(|(m, t)| k * t * m)
        .collect();

    let mut draws = vec![Vec::with_capacity(reps); kinds.len()];
    let mut z = vec![0.0; p];
    let mut stream = Stream::new(seed, 0);
    match resample {
        Resample::Parametric => {
            let root = psd_sqrt(&omega)?;
            let mut w = vec![0.0; p];
            for _ in 0..reps {
                for x in w.iter_mut() {
                    *x = stream.normal();
                }
                for (i, zi) in z.iter_mut().enumerate() {
                    let row = &root.as_slice()[i * p..(i + 1) * p];
                    *zi = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + shift[i];
                }
                for (ev, out) in evaluators.iter().zip(draws.iter_mut()) {
                    out.push(ev.eval(&z));
                }
            }
        }
        Resample::Bootstrap => {
            let data = input.data.ok_or_else(|| {
                Error::domain("bootstrap critical values need the data matrix")
            })?;
            let (mean, _) = sample_moments(data)?;
            let t = data.t_obs();
            let sqrt_t = (t as f64).sqrt();
            let mut boot = vec![0.0; p];
            for _ in 0..reps {
                boot.iter_mut().for_each(|b| *b = 0.0);
                for _ in 0..t {
                    let row = data.row(stream.index(t));
                    for (b, x) in boot.iter_mut().zip(row) {
                        *b += x;
                    }
                }
                for i in 0..p {
                    let resampled = boot[i] / t as f64;
                    z[i] = sqrt_t * input.theta_hat[i] * (resampled - mean[i]) + shift[i];
                }
                for (ev, out) in evaluators.iter().zip(draws.iter_mut()) {
                    out.push(ev.eval(&z));
                }
            }
        }
    }
    let rank = quantile_rank(alpha, reps);
    Ok(draws
        .iter_mut()
        .map(|d| order_statistic(d, rank))
        .collect())
}

/// Simulated `1 − α` quantile of `S(Z + K(T)·Δ̂μ̃, Δ̂V̂Δ̂)`.
pub fn gms_critical_value(
    config: &GmsConfig,
    mu_tilde: &[f64],
    input: &GmsInput<'_>,
) -> Result<f64> {
    config.validate()?;
    let cv = gms_critical_values(
        &[config.stat],
        config.tuner,
        config.reps,
        config.alpha,
        config.resample,
        config.seed,
        mu_tilde,
        input,
    )?;
    Ok(cv[0])
}

/// Runs several GMS tests that share tuner, draws, level and seed.
pub fn run_gms_tests(
    kinds: &[GmsStatistic],
    tuner: Tuner,
    reps: usize,
    alpha: f64,
    resample: Resample,
    seed: u64,
    input: &GmsInput<'_>,
) -> Result<Vec<GmsResult>> {
    input.validate()?;
    let k = tuner.eval(input.t_obs)?;
    let sqrt_t = (input.t_obs as f64).sqrt();
    let m: Vec<f64> = input
        .mu_hat
        .iter()
        .zip(input.theta_hat)
        .map(|(mu, t)| sqrt_t * t * mu)
        .collect();
    let omega = input.v_hat.scale_by(input.theta_hat);
    let mu_tilde = gms_recenter(input.mu_hat, input.theta_hat, k)?;
    let cvs = gms_critical_values(kinds, tuner, reps, alpha, resample, seed, &mu_tilde, input)?;
    kinds
        .iter()
        .zip(cvs)
        .map(|(&kind, critical_value)| {
            let statistic = Evaluator::new(kind, &omega)?.eval(&m);
            Ok(GmsResult {
                stat: kind,
                statistic,
                critical_value,
                mu_tilde: mu_tilde.clone(),
                reject: statistic > critical_value,
            })
        })
        .collect()
}

/// Computes the statistic, the recentered mean and the critical value, and
/// rejects when the statistic exceeds the critical value.
pub fn run_gms_test(config: &GmsConfig, input: &GmsInput<'_>) -> Result<GmsResult> {
    config.validate()?;
    let mut out = run_gms_tests(
        &[config.stat],
        config.tuner,
        config.reps,
        config.alpha,
        config.resample,
        config.seed,
        input,
    )?;
    Ok(out.remove(0))
}
