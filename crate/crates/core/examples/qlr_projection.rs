//! The QLR statistic as a projection onto the non-negative orthant.

use onesided::{nn_project, qlr_statistic, toeplitz_cov};

fn main() -> onesided::Result<()> {
    let v = toeplitz_cov(3, -0.5)?;
    let mu_hat = [-0.08, 0.05, -0.02];
    let sol = nn_project(&mu_hat, &v)?;
    println!("projection of {mu_hat:?}: {:.5?}", sol.minimizer);
    println!("binding coordinates: {:?}", sol.active_set);
    println!("KKT residual: {:.2e}", sol.kkt_residual);
    println!("QLR at T = 250: {:.4}", qlr_statistic(&mu_hat, &v, 250)?);
    Ok(())
}
