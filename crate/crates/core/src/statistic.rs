//! The smoothed-indicator statistic `Q` and its fixed-critical-value rule.
//!
//! For weights `θ̂`, estimates `μ̂` and covariance `V̂` at sample size `T`:
//!
//! ```text
//! Ψ̂_j = Ψ(K(T) θ̂_j μ̂_j)
//! Λ̂_j = Λ_T(θ̂_j μ̂_j, θ̂_j² v̂_jj)
//! Q1  = √T Σ_j Ψ̂_j θ̂_j μ̂_j − Σ_j Λ̂_j
//! Q2  = √(Ψ̂ᵀ Δ̂ V̂ Δ̂ Ψ̂)
//! Q   = Φ(Q1 / Q2), or 1 when Q2 = 0
//! ```
//!
//! `H0: μ ≥ 0` is rejected at level `α` when `Q < α`; no simulation is
//! involved.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_all_finite, ensure_finite, Error, Result};
use crate::numerics::{cdf, pdf, SymMatrix};
use crate::smoothers::{Smoother, Tuner};

/// `Q2²` is treated as zero below this multiple of `max(1, max|Δ̂V̂Δ̂|)`.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// Inputs of the smoothed-indicator test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestInput {
    pub mu_hat: Vec<f64>,
    pub v_hat: SymMatrix,
    pub t_obs: u64,
    pub theta_hat: Vec<f64>,
    pub smoother: Smoother,
    pub tuner: Tuner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub q1: f64,
    pub q2: f64,
    /// `Φ(Q1/Q2)`, a p-value-like quantity.
    pub q: f64,
    pub psi_hat: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    /// `Q2` was treated as zero and `Q` set to one.
    pub degenerate: bool,
}

/// Finite-sample adjustment `Λ_T(m, v)`.
///
/// `m` is a weighted estimate `θ̂_j μ̂_j` and `v` its weighted variance
/// `θ̂_j² v̂_jj`. The value is never positive.
pub fn lambda_adjustment(
    smoother: Smoother,
    tuner: Tuner,
    t_obs: u64,
    m: f64,
    v: f64,
) -> Result<f64> {
    let k = tuner.eval(t_obs)?;
    let h = k / (t_obs as f64).sqrt();
    lambda_at_scale(smoother, k, h, m, v)
}

/// `Λ` with the tuner value `k = K(T)` and bandwidth `h = K(T)/√T` given
/// directly:
///
/// `v·ψ̃(k·m)·h − √v · Σ_i jump_i · φ(a_i / (√v·h))`.
pub fn lambda_at_scale(smoother: Smoother, k: f64, h: f64, m: f64, v: f64) -> Result<f64> {
    ensure_finite(m, "m")?;
    ensure_finite(v, "v")?;
    if !(v > 0.0) {
        return Err(Error::domain(format!("variance must be positive, got {v}")));
    }
    if !(k > 0.0 && h > 0.0 && k.is_finite() && h.is_finite()) {
        return Err(Error::domain(format!(
            "tuner value and bandwidth must be positive, got k = {k}, h = {h}"
        )));
    }
    Ok(lambda_raw(smoother, k, h, m, v))
}

#[inline]
fn lambda_raw(smoother: Smoother, k: f64, h: f64, m: f64, v: f64) -> f64 {
    let sd = v.sqrt();
    let slope = v * smoother.ext_deriv(k * m) * h;
    let jumps: f64 = smoother
        .jumps()
        .iter()
        .map(|j| j.size * pdf(j.at / (sd * h)))
        .sum();
    slope - sd * jumps
}

impl TestInput {
    pub fn dim(&self) -> usize {
        self.mu_hat.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.mu_hat.len();
        if p == 0 {
            return Err(Error::domain("need at least one inequality"));
        }
        if self.v_hat.dim() != p || self.theta_hat.len() != p {
            return Err(Error::domain(format!(
                "dimension mismatch: mu_hat {p}, v_hat {}, theta_hat {}",
                self.v_hat.dim(),
                self.theta_hat.len()
            )));
        }
        ensure_all_finite(&self.mu_hat, "mu_hat")?;
        ensure_all_finite(&self.theta_hat, "theta_hat")?;
        if let Some(j) = self.theta_hat.iter().position(|t| !(*t > 0.0)) {
            return Err(Error::domain(format!(
                "theta_hat[{j}] must be positive, got {}",
                self.theta_hat[j]
            )));
        }
        if let Some((j, v)) = self.v_hat.diag().into_iter().enumerate().find(|(_, v)| *v < 0.0) {
            return Err(Error::domain(format!(
                "v_hat diagonal entry {j} is negative ({v})"
            )));
        }
        Ok(())
    }
}

/// Computes `(Q1, Q2, Q)` with per-coordinate diagnostics.
///
/// A coordinate with `v̂_jj = 0` gets `Λ̂_j = 0`, the limit of `Λ_T` as the
/// variance vanishes.
pub fn compute_statistic(input: &TestInput) -> Result<TestOutcome> {
    input.validate()?;
    let k = input.tuner.eval(input.t_obs)?;
    let sqrt_t = (input.t_obs as f64).sqrt();
    let h = k / sqrt_t;
    let p = input.dim();

    let mut psi_hat = Vec::with_capacity(p);
    let mut lambda_hat = Vec::with_capacity(p);
    let mut weighted = Vec::with_capacity(p);
    let mut sum = 0.0;
    for j in 0..p {
        let theta = input.theta_hat[j];
        let m = theta * input.mu_hat[j];
        let v = theta * theta * input.v_hat.get(j, j);
        let psi = input.smoother.psi(k * m);
        let lambda = if v > 0.0 {
            lambda_raw(input.smoother, k, h, m, v)
        } else {
            0.0
        };
        sum += psi * m;
        psi_hat.push(psi);
        lambda_hat.push(lambda);
        weighted.push(theta * psi);
    }
    let q1 = sqrt_t * sum - lambda_hat.iter().sum::<f64>();

    let q2_sq = input.v_hat.quad_form(&weighted);
    let scale = input.v_hat.scale_by(&input.theta_hat).max_abs().max(1.0);
    if q2_sq < -1e-12 * scale {
        return Err(Error::Numeric(format!(
            "Psi' D V D Psi = {q2_sq:e} is negative; v_hat is not positive semi-definite"
        )));
    }
    let degenerate = q2_sq <= DEGENERACY_TOL * scale;
    let (q2, q) = if degenerate {
        (0.0, 1.0)
    } else {
        let q2 = q2_sq.sqrt();
        (q2, cdf(q1 / q2))
    };
    if !q1.is_finite() || !q.is_finite() {
        return Err(Error::Numeric(format!(
            "statistic is not finite (Q1 = {q1}, Q2 = {q2})"
        )));
    }
    Ok(TestOutcome {
        q1,
        q2,
        q,
        psi_hat,
        lambda_hat,
        degenerate,
    })
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "significance level must lie in (0, 0.5), got {alpha}"
        )))
    }
}

/// Rejects `H0` iff `Q < α`.
pub fn decide(outcome: &TestOutcome, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    Ok(outcome.q < alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_input(smoother: Smoother, t_obs: u64, mu: f64) -> TestInput {
        TestInput {
            mu_hat: vec![mu],
            v_hat: SymMatrix::identity(1),
            t_obs,
            theta_hat: vec![1.0],
            smoother,
            tuner: Tuner::Sic,
        }
    }

    #[test]
    fn lambda_examples() {
        let step = lambda_adjustment(Smoother::Step, Tuner::Sic, 250, 0.37, 1.0).unwrap();
        assert!((step + 0.025_231_325_220_201_6).abs() < 1e-12);
        let step_other_m = lambda_adjustment(Smoother::Step, Tuner::Sic, 250, -4.0, 1.0).unwrap();
        assert_eq!(step, step_other_m);

        let logistic = lambda_adjustment(Smoother::Logistic, Tuner::Sic, 250, 0.0, 1.0).unwrap();
        assert!((logistic + 0.106_392_988_343_542_18).abs() < 1e-12);

        let big = lambda_adjustment(Smoother::Step, Tuner::Sic, 1_000, 0.0, 1.0).unwrap();
        let huge = lambda_adjustment(Smoother::Step, Tuner::Sic, 1_000_000, 0.0, 1.0).unwrap();
        assert!((big + 0.012_615_662_610_100_8).abs() < 1e-12);
        assert!((huge + 0.000_398_942_280_401_432_7).abs() < 1e-12);
        assert!(step < big && big < huge && huge < 0.0);
    }

    #[test]
    fn lambda_rejects_bad_variance() {
        for v in [0.0, -1.0, f64::NAN] {
            assert!(lambda_adjustment(Smoother::Logistic, Tuner::Sic, 250, 0.0, v).is_err());
        }
        assert!(lambda_adjustment(Smoother::Logistic, Tuner::Sic, 2, 0.0, 1.0).is_err());
    }

    #[test]
    fn degenerate_branch() {
        let out = compute_statistic(&scalar_input(Smoother::Step, 250, 10.0)).unwrap();
        assert_eq!(out.psi_hat, vec![0.0]);
        assert!(out.degenerate);
        assert_eq!(out.q2, 0.0);
        assert_eq!(out.q, 1.0);
        assert!(!decide(&out, 0.05).unwrap());
    }

    #[test]
    fn logistic_hand_example() {
        let out = compute_statistic(&scalar_input(Smoother::Logistic, 100, 0.0)).unwrap();
        assert_eq!(out.psi_hat, vec![0.5]);
        assert!((out.lambda_hat[0] + 0.116_497_650_446_164_02).abs() < 1e-12);
        assert!((out.q1 - 0.116_497_650_446_164_02).abs() < 1e-12);
        assert!((out.q2 - 0.5).abs() < 1e-15);
        assert!((out.q - 0.592_117_472_644_748_9).abs() < 1e-10);
        assert!(!out.degenerate);
    }

    #[test]
    fn decision_rule() {
        let mut out = compute_statistic(&scalar_input(Smoother::Step, 250, 10.0)).unwrap();
        assert!(!decide(&out, 0.05).unwrap());
        out.q = 0.049;
        assert!(decide(&out, 0.05).unwrap());
        out.q = 0.05;
        assert!(!decide(&out, 0.05).unwrap());
        for alpha in [0.0, 0.5, 0.7, -0.1, f64::NAN] {
            assert!(decide(&out, alpha).is_err());
        }
    }

    #[test]
    fn bad_inputs_are_errors() {
        let mut input = scalar_input(Smoother::Logistic, 100, f64::NAN);
        assert!(compute_statistic(&input).is_err());
        input.mu_hat = vec![0.1];
        input.theta_hat = vec![0.0];
        assert!(compute_statistic(&input).is_err());
        input.theta_hat = vec![1.0, 1.0];
        assert!(compute_statistic(&input).is_err());
        input.theta_hat = vec![1.0];
        input.t_obs = 2;
        assert!(compute_statistic(&input).is_err());
    }

    #[test]
    fn indefinite_covariance_is_numeric_error() {
        let input = TestInput {
            mu_hat: vec![0.0, 0.0],
            v_hat: SymMatrix::from_rows(&[vec![1.0, -2.0], vec![-2.0, 1.0]]).unwrap(),
            t_obs: 100,
            theta_hat: vec![1.0, 1.0],
            smoother: Smoother::Logistic,
            tuner: Tuner::Sic,
        };
        assert!(matches!(compute_statistic(&input), Err(Error::Numeric(_))));
    }

    #[test]
    fn zero_variance_coordinate() {
        let input = TestInput {
            mu_hat: vec![0.0, -0.2],
            v_hat: SymMatrix::diagonal(&[0.0, 1.0]),
            t_obs: 100,
            theta_hat: vec![1.0, 1.0],
            smoother: Smoother::Normal,
            tuner: Tuner::Lil,
        };
        let out = compute_statistic(&input).unwrap();
        assert_eq!(out.lambda_hat[0], 0.0);
        assert!(out.lambda_hat[1] < 0.0);
    }

    fn random_input(
        mu: Vec<f64>,
        theta: Vec<f64>,
        a: Vec<f64>,
        smoother: Smoother,
        tuner: Tuner,
        t_obs: u64,
    ) -> TestInput {
        let p = mu.len();
        // A Aᵀ + 0.1 I is positive definite
        let mut v = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                v[i * p + j] = (0..p).map(|k| a[i * p + k] * a[j * p + k]).sum::<f64>()
                    + if i == j { 0.1 } else { 0.0 };
            }
        }
        TestInput {
            mu_hat: mu,
            v_hat: SymMatrix::new(p, v).unwrap(),
            t_obs,
            theta_hat: theta,
            smoother,
            tuner,
        }
    }

    fn arb_input() -> impl Strategy<Value = TestInput> {
        (1usize..6).prop_flat_map(|p| {
            (
                prop::collection::vec(-0.5f64..0.5, p),
                prop::collection::vec(0.2f64..5.0, p),
                prop::collection::vec(-1.0f64..1.0, p * p),
                prop::sample::select(Smoother::ALL.to_vec()),
                prop::sample::select(Tuner::ALL.to_vec()),
                10u64..5000,
            )
                .prop_map(|(mu, theta, a, s, k, t)| random_input(mu, theta, a, s, k, t))
        })
    }

    proptest! {
        #[test]
        fn outcome_invariants(input in arb_input()) {
            let out = compute_statistic(&input).unwrap();
            prop_assert!(out.lambda_hat.iter().all(|l| *l <= 0.0));
            prop_assert!(out.psi_hat.iter().all(|s| (0.0..=1.0).contains(s)));
            prop_assert!((0.0..=1.0).contains(&out.q));
            if out.degenerate {
                prop_assert_eq!(out.q, 1.0);
            } else {
                prop_assert_eq!(out.q, cdf(out.q1 / out.q2));
            }
        }

        #[test]
        fn permutation_invariance(input in arb_input(), seed in any::<u64>()) {
            let p = input.dim();
            let mut perm: Vec<usize> = (0..p).collect();
            // cheap deterministic shuffle
            let mut s = seed;
            for i in (1..p).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted = TestInput {
                mu_hat: perm.iter().map(|&i| input.mu_hat[i]).collect(),
                theta_hat: perm.iter().map(|&i| input.theta_hat[i]).collect(),
                v_hat: input.v_hat.permute(&perm),
                ..input.clone()
            };
            let a = compute_statistic(&input).unwrap();
            let b = compute_statistic(&permuted).unwrap();
            prop_assert!((a.q1 - b.q1).abs() < 1e-10);
            prop_assert!((a.q2 - b.q2).abs() < 1e-10);
            prop_assert!((a.q - b.q).abs() < 1e-10);
        }

        #[test]
        fn diagonal_scale_invariance(input in arb_input(), c in prop::collection::vec(0.1f64..10.0, 6)) {
            let p = input.dim();
            let c = &c[..p];
            let scaled = TestInput {
                mu_hat: input.mu_hat.iter().zip(c).map(|(m, c)| m * c).collect(),
                theta_hat: input.theta_hat.iter().zip(c).map(|(t, c)| t / c).collect(),
                v_hat: input.v_hat.scale_by(c),
                ..input.clone()
            };
            let a = compute_statistic(&input).unwrap();
            let b = compute_statistic(&scaled).unwrap();
            prop_assert!((a.q1 - b.q1).abs() < 1e-10 * (1.0 + a.q1.abs()));
            prop_assert!((a.q2 - b.q2).abs() < 1e-10 * (1.0 + a.q2));
            prop_assert!((a.q - b.q).abs() < 1e-10);
        }
    }
}
