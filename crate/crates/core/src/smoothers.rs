//! Smoothed indicators `Ψ` and tuning sequences `K(T)`.
//!
//! A smoothed indicator is a non-increasing function with values in `[0, 1]`
//! that is continuously differentiable near the origin and tends to one on
//! the far left. The smoothed version of `1{x ≤ 0}` used at sample size `T`
//! is `Ψ(K(T)·x)`.
//!
//! The set of smoothers is closed: the adjustment term needs the location
//! and size of every jump plus the left-limit derivative, and an arbitrary
//! closure cannot declare those. To add a kind, extend [`Smoother`] and fill
//! in every method below (`psi`, `ext_deriv`, `psi0`, `jumps`,
//! `deriv_bound`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::numerics::{cdf, pdf};

/// A jump discontinuity at `at`, of size `Ψ(at⁻) − Ψ(at⁺) ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub at: f64,
    pub size: f64,
}

const STEP_JUMPS: [Jump; 1] = [Jump { at: 1.0, size: 1.0 }];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoother {
    /// `1{x ≤ 1}`.
    Step,
    /// `(1 + eˣ)⁻¹`.
    Logistic,
    /// `1 − Φ(x)`.
    Normal,
}

impl Smoother {
    pub const ALL: [Smoother; 3] = [Smoother::Step, Smoother::Logistic, Smoother::Normal];

    /// `Ψ(x)`.
    pub fn eval(self, x: f64) -> Result<f64> {
        ensure_finite(x, "x")?;
        Ok(self.psi(x))
    }

    /// Left-limit derivative `ψ̃(x) = lim_{y→x⁻} ψ(y)`.
    pub fn ext_deriv_at(self, x: f64) -> Result<f64> {
        ensure_finite(x, "x")?;
        Ok(self.ext_deriv(x))
    }

    #[inline]
    pub(crate) fn psi(self, x: f64) -> f64 {
        match self {
            Smoother::Step => {
                if x <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Smoother::Logistic => 1.0 / (1.0 + x.exp()),
            Smoother::Normal => cdf(-x),
        }
    }

    #[inline]
    pub(crate) fn ext_deriv(self, x: f64) -> f64 {
        match self {
            Smoother::Step => 0.0,
            // -eˣ/(1+eˣ)² written so that it does not overflow
            Smoother::Logistic => {
                let s = 1.0 / (1.0 + x.exp());
                -s * (1.0 - s)
            }
            Smoother::Normal => -pdf(x),
        }
    }

    /// `Ψ(0)`, strictly positive for every kind.
    pub fn psi0(self) -> f64 {
        match self {
            Smoother::Step => 1.0,
            Smoother::Logistic | Smoother::Normal => 0.5,
        }
    }

    /// Jump discontinuities in increasing order of location.
    pub fn jumps(self) -> &'static [Jump] {
        match self {
            Smoother::Step => &STEP_JUMPS,
            Smoother::Logistic | Smoother::Normal => &[],
        }
    }

    /// `sup |ψ|` over the smooth pieces.
    pub fn deriv_bound(self) -> f64 {
        match self {
            Smoother::Step => 0.0,
            Smoother::Logistic => 0.25,
            Smoother::Normal => 0.398_942_280_401_432_7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Smoother::Step => "step",
            Smoother::Logistic => "logistic",
            Smoother::Normal => "normal",
        }
    }
}

impl fmt::Display for Smoother {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Smoother {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(Smoother::Step),
            "logistic" => Ok(Smoother::Logistic),
            "normal" => Ok(Smoother::Normal),
            other => Err(Error::domain(format!("unknown smoother {other:?}"))),
        }
    }
}

/// Tuning sequence `K(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuner {
    /// `√(T / ln T)`.
    Sic,
    /// `√(T / (2 ln ln T))`.
    Lil,
}

impl Tuner {
    pub const ALL: [Tuner; 2] = [Tuner::Sic, Tuner::Lil];

    /// `K(T)` for `T ≥ 3`.
    pub fn eval(self, t_obs: u64) -> Result<f64> {
        if t_obs < 3 {
            return Err(Error::domain(format!(
                "tuner needs a sample size of at least 3, got {t_obs}"
            )));
        }
        let t = t_obs as f64;
        Ok(match self {
            Tuner::Sic => (t / t.ln()).sqrt(),
            Tuner::Lil => (t / (2.0 * t.ln().ln())).sqrt(),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Tuner::Sic => "sic",
            Tuner::Lil => "lil",
        }
    }
}

impl fmt::Display for Tuner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tuner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sic" => Ok(Tuner::Sic),
            "lil" => Ok(Tuner::Lil),
            other => Err(Error::domain(format!("unknown tuner {other:?}"))),
        }
    }
}
