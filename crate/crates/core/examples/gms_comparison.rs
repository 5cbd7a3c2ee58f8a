//! Compares the smoothed test with the four GMS tests on one sample, using
//! parametric and bootstrap critical values.

use onesided::{
    compute_statistic, run_gms_tests, sample_moments, DgpScenario, GmsInput, GmsStatistic, Noise,
    Replication, Resample, Smoother, TestInput, Tuner,
};

fn main() -> onesided::Result<()> {
    let scenario = DgpScenario::custom(vec![-0.12, 0.05, 0.3, 0.6], 250, 0.5, Noise::Logistic);
    let rep = Replication::generate(&scenario, 11, 0, 0)?;
    let (mu_hat, v_hat) = sample_moments(&rep.data)?;

    let q = compute_statistic(&TestInput {
        mu_hat: mu_hat.clone(),
        v_hat: v_hat.clone(),
        t_obs: rep.t_obs(),
        theta_hat: rep.theta_hat.clone(),
        smoother: Smoother::Logistic,
        tuner: Tuner::Sic,
    })?;
    println!("Q(logistic,sic) = {:.4}, reject = {}", q.q, q.q < 0.05);

    let input = GmsInput {
        mu_hat: &mu_hat,
        v_hat: &v_hat,
        theta_hat: &rep.theta_hat,
        t_obs: rep.t_obs(),
        data: Some(&rep.data),
    };
    for resample in [Resample::Parametric, Resample::Bootstrap] {
        let results = run_gms_tests(&GmsStatistic::ALL, Tuner::Sic, 2000, 0.05, resample, 7, &input)?;
        println!("{resample:?} critical values (mu_tilde = {:.3?})", results[0].mu_tilde);
        for r in results {
            println!(
                "  {}: statistic {:7.3}  critical value {:6.3}  reject {}",
                r.stat, r.statistic, r.critical_value, r.reject
            );
        }
    }
    Ok(())
}
