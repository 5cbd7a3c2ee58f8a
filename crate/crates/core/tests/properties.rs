//! Cross-module properties: solver optimality, GMS calibration and
//! selection, and campaign invariants.

use onesided::montecarlo::run_campaign_with_threads;
use onesided::{
    gms_recenter, nn_project, run_campaign, DgpScenario, GmsStatistic, Noise, NnProjector,
    Replication, Smoother, SymMatrix, TestSpec, Tuner,
};
use proptest::prelude::*;

fn spd(p: usize, entries: &[f64]) -> SymMatrix {
    let mut data = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            data[i * p + j] = (0..p)
                .map(|k| entries[i * p + k] * entries[j * p + k])
                .sum::<f64>()
                + if i == j { 0.2 } else { 0.0 };
        }
    }
    SymMatrix::new(p, data).unwrap()
}

/// Smallest objective over all feasible points `t ≥ 0` whose support is a
/// given set, over all sets.
fn enumerate(m: &[f64], omega: &SymMatrix) -> f64 {
    let p = m.len();
    let g = NnProjector::new(omega).unwrap().gram().clone();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << p) {
        let free: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
        let mut t = vec![0.0; p];
        if !free.is_empty() {
            let n = free.len();
            let sub: Vec<f64> = free
                .iter()
                .flat_map(|&i| free.iter().map(move |&j| (i, j)))
                .map(|(i, j)| g.get(i, j))
                .collect();
            let rhs: Vec<f64> = free
                .iter()
                .map(|&i| (0..p).map(|j| g.get(i, j) * m[j]).sum())
                .collect();
            let sol = onesided::solve_spd(&SymMatrix::new(n, sub).unwrap(), &rhs).unwrap();
            for (k, &i) in free.iter().enumerate() {
                t[i] = sol[k];
            }
            if t.iter().any(|x| *x < 0.0) {
                continue;
            }
        }
        let r: Vec<f64> = m.iter().zip(&t).map(|(a, b)| a - b).collect();
        best = best.min(g.quad_form(&r));
    }
    best
}

fn instance() -> impl Strategy<Value = (Vec<f64>, SymMatrix)> {
    (1usize..=6).prop_flat_map(|p| {
        (
            prop::collection::vec(-3.0..3.0f64, p),
            prop::collection::vec(-1.5..1.5f64, p * p),
        )
            .prop_map(move |(m, e)| (m, spd(p, &e)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_matches_enumeration((m, omega) in instance()) {
        let sol = nn_project(&m, &omega).unwrap();
        let brute = enumerate(&m, &omega);
        prop_assert!((sol.value - brute).abs() <= 1e-8 * brute.max(1.0));
        prop_assert!(NnProjector::new(&omega).unwrap().kkt_ok(&m, &sol));
        prop_assert!(sol.minimizer.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn recentering_keeps_only_clear_positives(
        mu in prop::collection::vec(-1.0..1.0f64, 1..6),
        k in 1.0..20.0f64,
    ) {
        let theta = vec![1.0; mu.len()];
        let tilde = gms_recenter(&mu, &theta, k).unwrap();
        for (m, t) in mu.iter().zip(&tilde) {
            if k * m <= 1.0 {
                prop_assert_eq!(*t, 0.0);
            } else {
                prop_assert_eq!(t, m);
            }
        }
    }
}

#[test]
fn gms_selection_is_consistent() {
    // slack coordinates stop being recentered to zero once T is large
    let scenario = DgpScenario::custom(vec![0.0, 0.5], 2000, 0.0, Noise::Gaussian);
    for r in 0..20 {
        let rep = Replication::generate(&scenario, 5, 0, r).unwrap();
        let k = Tuner::Sic.eval(rep.t_obs()).unwrap();
        let tilde = gms_recenter(&rep.mu_hat, &rep.theta_hat, k).unwrap();
        assert!(tilde[1] > 0.0);
    }
}

#[test]
fn gms_size_at_the_boundary() {
    let scenario = DgpScenario::custom(vec![0.0, 0.0], 250, 0.0, Noise::Gaussian);
    let tests: Vec<TestSpec> = GmsStatistic::ALL
        .iter()
        .map(|&s| TestSpec::gms(s, Tuner::Sic, 300))
        .collect();
    let table = run_campaign(&[scenario], &tests, 600, 0.05, 17).unwrap();
    for row in &table.rows {
        let rate = row.rate.unwrap();
        // five binomial standard errors at R = 600
        assert!((rate - 0.05).abs() < 0.045, "{}: {rate}", row.test_id);
    }
}

#[test]
fn deep_interior_is_never_rejected() {
    let scenario = DgpScenario::custom(vec![5.0, 5.0], 250, 0.0, Noise::Gaussian);
    let tests = [TestSpec::smoothed(Smoother::Step, Tuner::Sic)];
    let table = run_campaign(&[scenario], &tests, 2000, 0.05, 3).unwrap();
    assert!(table.rows[0].rate.unwrap() <= 0.001);
}

#[test]
fn constant_tests_and_rate_bounds() {
    let scenarios = [
        DgpScenario::size(2, 40, 0.25, -0.5, Noise::UniformM1To2).unwrap(),
        DgpScenario::power(2, 40, 0.1, 0.5, 0.5, Noise::Logistic).unwrap(),
    ];
    let tests = [
        TestSpec::Constant { reject: true },
        TestSpec::Constant { reject: false },
        TestSpec::smoothed(Smoother::Normal, Tuner::Lil),
    ];
    let table = run_campaign(&scenarios, &tests, 200, 0.05, 8).unwrap();
    for row in &table.rows {
        let rate = row.rate.unwrap();
        assert!((0.0..=1.0).contains(&rate));
        let se = (rate * (1.0 - rate) / 200.0).sqrt();
        assert_eq!(row.se.unwrap(), se);
        match row.test_id.as_str() {
            "always_reject" => assert_eq!(rate, 1.0),
            "never_reject" => assert_eq!(rate, 0.0),
            _ => {}
        }
    }
}

#[test]
fn campaign_is_thread_and_seed_deterministic() {
    let scenarios = [
        DgpScenario::size(3, 50, 0.0, 0.5, Noise::Gaussian).unwrap(),
        DgpScenario::custom(vec![-0.2, 0.1, 0.1], 50, 0.0, Noise::Logistic),
    ];
    let tests = [
        TestSpec::smoothed(Smoother::Step, Tuner::Sic),
        TestSpec::gms(GmsStatistic::S2, Tuner::Sic, 100),
        TestSpec::gms(GmsStatistic::S3, Tuner::Sic, 100),
    ];
    let one = run_campaign_with_threads(&scenarios, &tests, 150, 0.05, 99, 1).unwrap();
    let many = run_campaign_with_threads(&scenarios, &tests, 150, 0.05, 99, 4).unwrap();
    assert_eq!(one.to_csv().unwrap(), many.to_csv().unwrap());
    let other = run_campaign_with_threads(&scenarios, &tests, 150, 0.05, 100, 1).unwrap();
    assert_ne!(one.to_csv().unwrap(), other.to_csv().unwrap());
}

#[test]
fn tests_share_the_sample_within_a_replication() {
    // a campaign with one test equals the matching column of a larger one
    let scenario = DgpScenario::size(4, 80, 0.25, 0.0, Noise::Gaussian).unwrap();
    let q = TestSpec::smoothed(Smoother::Logistic, Tuner::Sic);
    let s1 = TestSpec::gms(GmsStatistic::S1, Tuner::Sic, 100);
    let alone = run_campaign(&[scenario.clone()], &[q], 300, 0.1, 4).unwrap();
    let joint = run_campaign(&[scenario.clone()], &[s1, q], 300, 0.1, 4).unwrap();
    assert_eq!(alone.rows[0].rejections, joint.rows[1].rejections);

    let rep = Replication::generate(&scenario, 4, 0, 7).unwrap();
    let decisions = rep.decisions(&[q, s1], 0.1);
    assert_eq!(
        *decisions[0].as_ref().unwrap(),
        rep.smoothed(Smoother::Logistic, Tuner::Sic).unwrap().q < 0.1
    );
}
