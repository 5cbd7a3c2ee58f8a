//! Closed-form local power and the Neyman–Pearson envelope.
//!
//! Along `μ_j = γ_j + c_j/√T` with `γ ≥ 0`, the rejection probability of the
//! smoothed test tends to `Φ(z_α − τ/√κ)` where only the binding
//! coordinates (`γ_j = 0`) enter:
//!
//! ```text
//! τ = Σ_{γ_j = 0} θ_j c_j
//! κ = Σ_{γ_i = 0} Σ_{γ_j = 0} θ_i θ_j v_ij
//! ```
//!
//! For drifts toward the origin along `c = −δVθ` this equals the envelope
//! `Φ(z_α + √(cᵀV⁻¹c))`, which bounds the local power of every test of
//! exact asymptotic level `α`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_all_finite, Error, Result};
use crate::numerics::{cdf, cholesky, dot, quantile, SymMatrix};
use crate::statistic::check_alpha;

/// `|γ_j|` at or below this counts as a binding coordinate.
pub const BINDING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalAlternative {
    /// Boundary point, elementwise non-negative.
    pub gamma: Vec<f64>,
    /// Drift.
    pub c: Vec<f64>,
    pub theta: Vec<f64>,
    pub v: SymMatrix,
}

impl LocalAlternative {
    /// Drift toward the origin (`γ = 0`).
    pub fn at_origin(c: Vec<f64>, theta: Vec<f64>, v: SymMatrix) -> Self {
        Self {
            gamma: vec![0.0; c.len()],
            c,
            theta,
            v,
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.c.len();
        if p == 0 || self.gamma.len() != p || self.theta.len() != p || self.v.dim() != p {
            return Err(Error::domain(format!(
                "dimension mismatch: gamma {}, c {p}, theta {}, v {}",
                self.gamma.len(),
                self.theta.len(),
                self.v.dim()
            )));
        }
        ensure_all_finite(&self.gamma, "gamma")?;
        ensure_all_finite(&self.c, "c")?;
        ensure_all_finite(&self.theta, "theta")?;
        if self.gamma.iter().any(|g| *g < -BINDING_TOL) {
            return Err(Error::domain("boundary point gamma must be non-negative"));
        }
        if self.theta.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::domain("theta must be strictly positive"));
        }
        Ok(())
    }

    fn binding(&self) -> Vec<usize> {
        (0..self.gamma.len())
            .filter(|&j| self.gamma[j].abs() <= BINDING_TOL)
            .collect()
    }

    /// `(τ, κ)`.
    pub fn drift_and_variance(&self) -> Result<(f64, f64)> {
        self.validate()?;
        let b = self.binding();
        let tau = b.iter().map(|&j| self.theta[j] * self.c[j]).sum();
        let kappa = b
            .iter()
            .flat_map(|&i| b.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.theta[i] * self.theta[j] * self.v.get(i, j))
            .sum();
        Ok((tau, kappa))
    }
}

/// Asymptotic rejection probability `Φ(z_α − τ/√κ)` of the smoothed test.
pub fn local_power(alt: &LocalAlternative, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let (tau, kappa) = alt.drift_and_variance()?;
    if !(kappa > 0.0) {
        return Err(Error::Numeric(format!(
            "kappa = {kappa:e} is not positive; local power is undefined"
        )));
    }
    Ok(cdf(quantile(alpha) - tau / kappa.sqrt()))
}

/// Neyman–Pearson bound `Φ(z_α + √(cᵀV⁻¹c))` for a drift toward the origin.
pub fn np_bound(c: &[f64], v: &SymMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    ensure_all_finite(c, "c")?;
    if c.len() != v.dim() {
        return Err(Error::domain("drift and covariance dimensions differ"));
    }
    if c.iter().all(|x| *x == 0.0) {
        return Err(Error::domain("drift must be non-zero"));
    }
    let y = cholesky(v)?.forward(c);
    Ok(cdf(quantile(alpha) + dot(&y, &y).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::toeplitz_cov;

    #[test]
    fn size_at_boundary() {
        let alt = LocalAlternative::at_origin(vec![0.0], vec![1.0], SymMatrix::identity(1));
        assert!((local_power(&alt, 0.05).unwrap() - 0.05).abs() < 1e-14);
    }

    #[test]
    fn unit_drift() {
        let alt = LocalAlternative::at_origin(vec![-1.0], vec![1.0], SymMatrix::identity(1));
        assert!((local_power(&alt, 0.05).unwrap() - 0.259_511_022_841_444).abs() < 1e-12);
        let bound = np_bound(&[-1.0, 0.0], &SymMatrix::identity(2), 0.05).unwrap();
        assert!((bound - 0.259_511_022_841_444).abs() < 1e-12);
    }

    #[test]
    fn toeplitz_pair() {
        let v = toeplitz_cov(2, 0.5).unwrap();
        let alt = LocalAlternative::at_origin(vec![-1.0, -1.0], vec![1.0, 1.0], v);
        assert!((local_power(&alt, 0.05).unwrap() - 0.312_012_786_818_454_2).abs() < 1e-12);
    }

    #[test]
    fn slack_coordinates_are_ignored() {
        let v = toeplitz_cov(2, 0.3).unwrap();
        let base = LocalAlternative::at_origin(vec![-0.7, -0.2], vec![1.0, 2.0], v);
        let mut rows = base.v.to_rows();
        rows.iter_mut().for_each(|r| r.push(0.4));
        rows.push(vec![0.4, 0.4, 1.0]);
        let extended = LocalAlternative {
            gamma: vec![0.0, 0.0, 0.3],
            c: vec![-0.7, -0.2, 5.0],
            theta: vec![1.0, 2.0, 1.0],
            v: SymMatrix::from_rows(&rows).unwrap(),
        };
        assert_eq!(
            local_power(&base, 0.05).unwrap(),
            local_power(&extended, 0.05).unwrap()
        );
    }

    #[test]
    fn envelope_identity_along_v_theta() {
        for rho in [-0.5, 0.0, 0.5, 0.9] {
            let v = toeplitz_cov(4, rho).unwrap();
            let theta = vec![1.0, 0.5, 2.0, 1.5];
            for delta in [0.1, 0.7, 2.0] {
                let c: Vec<f64> = v.mul_vec(&theta).iter().map(|x| -delta * x).collect();
                let alt = LocalAlternative::at_origin(c.clone(), theta.clone(), v.clone());
                let lp = local_power(&alt, 0.05).unwrap();
                let nb = np_bound(&c, &v, 0.05).unwrap();
                assert!((lp - nb).abs() < 1e-10, "rho {rho} delta {delta}");
                assert!(nb >= 0.05);
            }
        }
    }

    #[test]
    fn degenerate_kappa() {
        let alt = LocalAlternative {
            gamma: vec![1.0, 2.0],
            c: vec![-1.0, -1.0],
            theta: vec![1.0, 1.0],
            v: SymMatrix::identity(2),
        };
        assert!(matches!(local_power(&alt, 0.05), Err(Error::Numeric(_))));
        let singular = SymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let alt = LocalAlternative::at_origin(vec![-1.0, -1.0], vec![1.0, 1.0], singular.clone());
        assert!(local_power(&alt, 0.05).is_err());
        assert!(np_bound(&[-1.0, 0.0], &singular, 0.05).is_err());
        assert!(np_bound(&[0.0, 0.0], &SymMatrix::identity(2), 0.05).is_err());
    }

    #[test]
    fn decreasing_in_binding_drift_and_scale_free() {
        let v = toeplitz_cov(3, -0.4).unwrap();
        let theta = vec![1.0, 2.0, 0.5];
        let mut prev = 1.0;
        for k in 0..50 {
            let c0 = -3.0 + 0.1 * k as f64;
            let alt = LocalAlternative::at_origin(vec![c0, -0.5, 0.2], theta.clone(), v.clone());
            let lp = local_power(&alt, 0.05).unwrap();
            assert!(lp < prev);
            prev = lp;
            let scaled = LocalAlternative {
                theta: theta.iter().map(|t| 3.7 * t).collect(),
                ..alt.clone()
            };
            assert!((local_power(&scaled, 0.05).unwrap() - lp).abs() < 1e-12);
        }
    }
}
