//! Projection onto the non-negative orthant in the `Ω⁻¹` metric:
//!
//! ```text
//! min_{t ≥ 0} (m − t)ᵀ Ω⁻¹ (m − t)
//! ```
//!
//! Solved with a Lawson–Hanson active-set iteration. With `Ω = L Lᵀ` the
//! problem is the non-negative least squares fit of `L⁻¹ m` by `L⁻¹ t`, so
//! the passive-set subproblems are solves against principal submatrices of
//! the Gram matrix `G = Ω⁻¹`. Termination is finite and there is nothing
//! to tune.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_all_finite, Error, Result};
use crate::numerics::{cholesky, dot, SymMatrix};

/// Absolute KKT tolerance, scaled by `max(1, ‖Ω⁻¹m‖∞)`.
pub const KKT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnlsSolution {
    /// `t* ≥ 0`.
    pub minimizer: Vec<f64>,
    /// `(m − t*)ᵀ Ω⁻¹ (m − t*)`.
    pub value: f64,
    /// Coordinates with `t*_j = 0`.
    pub active_set: Vec<usize>,
    /// Largest KKT violation of the returned point, in gradient units.
    pub kkt_residual: f64,
}

/// Reusable projector for a fixed `Ω`; factor once, project many vectors.
#[derive(Debug, Clone)]
pub struct NnProjector {
    gram: SymMatrix,
}

impl NnProjector {
    pub fn new(omega: &SymMatrix) -> Result<Self> {
        let gram = cholesky(omega)?.inverse();
        Ok(Self { gram })
    }

    pub fn dim(&self) -> usize {
        self.gram.dim()
    }

    /// `Ω⁻¹`.
    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    pub fn project(&self, m: &[f64]) -> Result<NnlsSolution> {
        if m.len() != self.dim() {
            return Err(Error::domain(format!(
                "vector has length {}, expected {}",
                m.len(),
                self.dim()
            )));
        }
        ensure_all_finite(m, "m")?;
        let t = self.solve(m);
        Ok(self.finish(m, t))
    }

    /// Only the optimal value; skips the diagnostics.
    pub fn value(&self, m: &[f64]) -> f64 {
        if m.iter().all(|x| *x >= 0.0) {
            return 0.0;
        }
        let t = self.solve(m);
        let r: Vec<f64> = m.iter().zip(&t).map(|(a, b)| a - b).collect();
        self.gram.quad_form(&r).max(0.0)
    }

    fn solve(&self, m: &[f64]) -> Vec<f64> {
        let p = self.dim();
        let g = &self.gram;
        let c = g.mul_vec(m);
        let scale = c.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
        let enter_tol = 1e-13 * scale;

        let mut t = vec![0.0; p];
        let mut passive = vec![false; p];
        if m.iter().all(|x| *x >= 0.0) {
            return m.to_vec();
        }

        let max_outer = 3 * p + 10;
        for _ in 0..max_outer {
            // w = G (m − t), the negative half-gradient
            let w: Vec<f64> = (0..p)
                .map(|j| c[j] - dot(&g.as_slice()[j * p..(j + 1) * p], &t))
                .collect();
            let entering = (0..p)
                .filter(|&j| !passive[j])
                .max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)));
            let Some(j) = entering.filter(|&j| w[j] > enter_tol) else {
                break;
            };
            passive[j] = true;

            loop {
                let z = self.passive_solve(&passive, &c);
                let blocking: Vec<usize> = (0..p).filter(|&i| passive[i] && z[i] <= 0.0).collect();
                if blocking.is_empty() {
                    t = z;
                    break;
                }
                let mut step = f64::INFINITY;
                for &i in &blocking {
                    let s = t[i] / (t[i] - z[i]);
                    if s < step {
                        step = s;
                    }
                }
                for i in 0..p {
                    if passive[i] {
                        t[i] += step * (z[i] - t[i]);
                    }
                }
                for i in 0..p {
                    if passive[i] && t[i] <= 1e-14 * scale {
                        passive[i] = false;
                        t[i] = 0.0;
                    }
                }
                if !passive.iter().any(|&f| f) {
                    break;
                }
            }
            if passive.iter().all(|&f| f) {
                break;
            }
        }
        t
    }

    /// Solves `G_PP z_P = c_P` with `z` zero off the passive set.
    fn passive_solve(&self, passive: &[bool], c: &[f64]) -> Vec<f64> {
        let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
        let n = idx.len();
        let mut sub = Vec::with_capacity(n * n);
        for &i in &idx {
            for &j in &idx {
                sub.push(self.gram.get(i, j));
            }
        }
        let rhs: Vec<f64> = idx.iter().map(|&i| c[i]).collect();
        let mut z = vec![0.0; passive.len()];
        // principal submatrices of an SPD matrix are SPD
        let sol = SymMatrix::new(n, sub)
            .and_then(|s| cholesky(&s))
            .map(|l| l.solve(&rhs))
            .expect("principal submatrix of the Gram matrix is positive definite");
        for (k, &i) in idx.iter().enumerate() {
            z[i] = sol[k];
        }
        z
    }

    fn finish(&self, m: &[f64], mut t: Vec<f64>) -> NnlsSolution {
        for x in t.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        let r: Vec<f64> = m.iter().zip(&t).map(|(a, b)| a - b).collect();
        let value = self.gram.quad_form(&r).max(0.0);
        let grad: Vec<f64> = self.gram.mul_vec(&r).into_iter().map(|x| -2.0 * x).collect();
        let active_set: Vec<usize> = (0..t.len()).filter(|&j| t[j] == 0.0).collect();
        let kkt_residual = grad
            .iter()
            .zip(&t)
            .map(|(g, x)| if *x == 0.0 { (-g).max(0.0) } else { g.abs() })
            .fold(0.0, f64::max);
        NnlsSolution {
            minimizer: t,
            value,
            active_set,
            kkt_residual,
        }
    }

    /// Whether a solution passes the KKT check at [`KKT_TOL`].
    pub fn kkt_ok(&self, m: &[f64], sol: &NnlsSolution) -> bool {
        let c = self.gram.mul_vec(m);
        let scale = c.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
        sol.minimizer.iter().all(|x| *x >= 0.0) && sol.kkt_residual <= KKT_TOL * scale
    }
}

/// One-shot projection of `m` for covariance `omega`.
pub fn nn_project(m: &[f64], omega: &SymMatrix) -> Result<NnlsSolution> {
    NnProjector::new(omega)?.project(m)
}

/// Quasi-likelihood-ratio statistic `min_{μ ≥ 0} T (μ̂ − μ)ᵀ V̂⁻¹ (μ̂ − μ)`.
pub fn qlr_statistic(mu_hat: &[f64], v_hat: &SymMatrix, t_obs: u64) -> Result<f64> {
    if t_obs == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    Ok(t_obs as f64 * nn_project(mu_hat, v_hat)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omega_half() -> SymMatrix {
        SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap()
    }

    #[test]
    fn feasible_point_projects_to_itself() {
        let sol = nn_project(&[0.3, 0.0, 2.0], &SymMatrix::identity(3)).unwrap();
        assert_eq!(sol.minimizer, vec![0.3, 0.0, 2.0]);
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.active_set, vec![1]);
    }

    #[test]
    fn half_line() {
        let sol = nn_project(&[-2.0], &SymMatrix::identity(1)).unwrap();
        assert_eq!(sol.minimizer, vec![0.0]);
        assert!((sol.value - 4.0).abs() < 1e-14);
    }

    #[test]
    fn two_dim_example() {
        let omega = omega_half();
        let sol = nn_project(&[-1.0, 3.0], &omega).unwrap();
        assert!(sol.minimizer[0] == 0.0);
        assert!((sol.minimizer[1] - 3.5).abs() < 1e-12);
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert_eq!(sol.active_set, vec![0]);
        assert!(NnProjector::new(&omega).unwrap().kkt_ok(&[-1.0, 3.0], &sol));
    }

    #[test]
    fn qlr_examples() {
        assert_eq!(qlr_statistic(&[0.1, 0.2], &omega_half(), 100).unwrap(), 0.0);
        let v = qlr_statistic(&[-0.2], &SymMatrix::identity(1), 100).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        let v = qlr_statistic(&[-0.1, 0.3], &omega_half(), 100).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let sol = nn_project(&[-0.1, 0.3], &omega_half()).unwrap();
        assert!((sol.minimizer[1] - 0.35).abs() < 1e-12);
    }

    #[test]
    fn singular_omega() {
        let singular = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            nn_project(&[-1.0, 0.0], &singular),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn value_shortcut_matches_project() {
        let omega = SymMatrix::from_rows(&[
            vec![1.0, -0.5, 0.25],
            vec![-0.5, 1.0, -0.5],
            vec![0.25, -0.5, 1.0],
        ])
        .unwrap();
        let proj = NnProjector::new(&omega).unwrap();
        for m in [[-1.0, -1.0, -1.0], [2.0, -0.1, 0.3], [-3.0, 1.0, -0.5]] {
            let full = proj.project(&m).unwrap();
            assert!((proj.value(&m) - full.value).abs() < 1e-14);
            assert!(proj.kkt_ok(&m, &full));
        }
    }

    #[test]
    fn monotone_in_negative_coordinate() {
        let omega = omega_half();
        let proj = NnProjector::new(&omega).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=100 {
            let m0 = -3.0 + 3.0 * k as f64 / 100.0;
            let v = proj.value(&[m0, -0.5]);
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }
}
