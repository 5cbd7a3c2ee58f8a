//! Campaign orchestration: stream derivation, per-replication evaluation of
//! every listed test on one shared sample, and a deterministic reduction.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::{AggregateGrid, RejectionRow, RejectionTable};
use super::{DgpScenario, Noise, PreparedScenario};
use crate::error::{Error, Result};
use crate::gms::{run_gms_tests, GmsInput, GmsStatistic, Resample, MIN_REPS};
use crate::moments::{resolve_weights, sample_moments, DataMatrix, WeightPolicy};
use crate::numerics::SymMatrix;
use crate::rng::Stream;
use crate::smoothers::{Smoother, Tuner};
use crate::statistic::{check_alpha, compute_statistic, decide, TestInput, TestOutcome};

fn default_gms_reps() -> usize {
    1000
}

/// A test applied in every replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestSpec {
    /// `Q(Ψ, K)`.
    Smoothed { smoother: Smoother, tuner: Tuner },
    /// GMS comparison test.
    Gms {
        stat: GmsStatistic,
        tuner: Tuner,
        #[serde(default = "default_gms_reps")]
        reps: usize,
        #[serde(default)]
        resample: Resample,
    },
    /// Ignores the data. Useful for checking the harness itself.
    Constant { reject: bool },
}

impl TestSpec {
    pub fn smoothed(smoother: Smoother, tuner: Tuner) -> Self {
        TestSpec::Smoothed { smoother, tuner }
    }

    pub fn gms(stat: GmsStatistic, tuner: Tuner, reps: usize) -> Self {
        TestSpec::Gms {
            stat,
            tuner,
            reps,
            resample: Resample::Parametric,
        }
    }

    /// Label used in tables, e.g. `Q(step,sic)` or `S2(lil)`.
    pub fn id(&self) -> String {
        match self {
            TestSpec::Smoothed { smoother, tuner } => format!("Q({smoother},{tuner})"),
            TestSpec::Gms {
                stat,
                tuner,
                resample: Resample::Parametric,
                ..
            } => format!("{}({tuner})", stat.name().to_uppercase()),
            TestSpec::Gms {
                stat,
                tuner,
                resample: Resample::Bootstrap,
                ..
            } => format!("{}({tuner},bootstrap)", stat.name().to_uppercase()),
            TestSpec::Constant { reject: true } => "always_reject".into(),
            TestSpec::Constant { reject: false } => "never_reject".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let TestSpec::Gms { reps, .. } = self {
            if *reps < MIN_REPS {
                return Err(Error::domain(format!(
                    "GMS tests need at least {MIN_REPS} draws, got {reps}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for TestSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// One simulated sample with its estimates.
#[derive(Debug, Clone)]
pub struct Replication {
    pub data: DataMatrix,
    pub mu_hat: Vec<f64>,
    pub v_hat: SymMatrix,
    pub theta_hat: Vec<f64>,
    /// Seed for critical-value draws, shared by all GMS tests.
    pub gms_seed: u64,
}

impl Replication {
    /// Replication `rep` of scenario `scenario_id` under campaign `seed`.
    pub fn generate(scenario: &DgpScenario, seed: u64, scenario_id: u32, rep: u32) -> Result<Self> {
        Self::from_prepared(&PreparedScenario::new(scenario)?, seed, scenario_id, rep)
    }

    fn from_prepared(
        prepared: &PreparedScenario<'_>,
        seed: u64,
        scenario_id: u32,
        rep: u32,
    ) -> Result<Self> {
        let mut stream = Stream::for_replication(seed, scenario_id, rep);
        let data = prepared.sample(&mut stream)?;
        let gms_seed = stream.next_u64();
        let (mu_hat, v_hat) = sample_moments(&data)?;
        let theta_hat = resolve_weights(&prepared.scenario.weight_policy, &v_hat)?;
        Ok(Self {
            data,
            mu_hat,
            v_hat,
            theta_hat,
            gms_seed,
        })
    }

    pub fn t_obs(&self) -> u64 {
        self.data.t_obs() as u64
    }

    /// Smoothed statistic on this sample.
    pub fn smoothed(&self, smoother: Smoother, tuner: Tuner) -> Result<TestOutcome> {
        compute_statistic(&TestInput {
            mu_hat: self.mu_hat.clone(),
            v_hat: self.v_hat.clone(),
            t_obs: self.t_obs(),
            theta_hat: self.theta_hat.clone(),
            smoother,
            tuner,
        })
    }

    fn gms_input(&self) -> GmsInput<'_> {
        GmsInput {
            mu_hat: &self.mu_hat,
            v_hat: &self.v_hat,
            theta_hat: &self.theta_hat,
            t_obs: self.t_obs(),
            data: Some(&self.data),
        }
    }

    /// Decisions of every test, in order. GMS tests sharing tuner, draw
    /// count and resampling mode are evaluated on one set of draws.
    pub fn decisions(&self, tests: &[TestSpec], alpha: f64) -> Vec<Result<bool>> {
        let mut out: Vec<Option<Result<bool>>> = (0..tests.len()).map(|_| None).collect();
        for (i, test) in tests.iter().enumerate() {
            match *test {
                TestSpec::Smoothed { smoother, tuner } => {
                    out[i] = Some(self.smoothed(smoother, tuner).and_then(|o| decide(&o, alpha)));
                }
                TestSpec::Constant { reject } => out[i] = Some(Ok(reject)),
                TestSpec::Gms { .. } => {}
            }
        }
        for group in gms_groups(tests) {
            let kinds: Vec<GmsStatistic> = group.members.iter().map(|(_, s)| *s).collect();
            let res = run_gms_tests(
                &kinds,
                group.tuner,
                group.reps,
                alpha,
                group.resample,
                self.gms_seed,
                &self.gms_input(),
            );
            match res {
                Ok(results) => {
                    for ((i, _), r) in group.members.iter().zip(results) {
                        out[*i] = Some(Ok(r.reject));
                    }
                }
                // isolate the failing statistic; the draws do not change
                Err(_) if group.members.len() > 1 => {
                    for &(i, kind) in &group.members {
                        out[i] = Some(
                            run_gms_tests(
                                &[kind],
                                group.tuner,
                                group.reps,
                                alpha,
                                group.resample,
                                self.gms_seed,
                                &self.gms_input(),
                            )
                            .map(|r| r[0].reject),
                        );
                    }
                }
                Err(e) => out[group.members[0].0] = Some(Err(e)),
            }
        }
        out.into_iter()
            .map(|o| o.expect("every test is evaluated"))
            .collect()
    }
}

struct GmsGroup {
    tuner: Tuner,
    reps: usize,
    resample: Resample,
    members: Vec<(usize, GmsStatistic)>,
}

fn gms_groups(tests: &[TestSpec]) -> Vec<GmsGroup> {
    let mut groups: Vec<GmsGroup> = Vec::new();
    for (i, test) in tests.iter().enumerate() {
        if let TestSpec::Gms {
            stat,
            tuner,
            reps,
            resample,
        } = *test
        {
            match groups
                .iter_mut()
                .find(|g| g.tuner == tuner && g.reps == reps && g.resample == resample)
            {
                Some(g) => g.members.push((i, stat)),
                None => groups.push(GmsGroup {
                    tuner,
                    reps,
                    resample,
                    members: vec![(i, stat)],
                }),
            }
        }
    }
    groups
}

/// Per-cell accumulator: rejection counts and the earliest failure.
#[derive(Clone)]
struct Tally {
    rejections: Vec<u64>,
    failures: Vec<Option<(u32, String)>>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self {
            rejections: vec![0; n],
            failures: vec![None; n],
        }
    }

    fn record(mut self, rep: u32, decisions: Vec<Result<bool, String>>) -> Self {
        for (i, d) in decisions.into_iter().enumerate() {
            match d {
                Ok(true) => self.rejections[i] += 1,
                Ok(false) => {}
                Err(e) => keep_earliest(&mut self.failures[i], (rep, e)),
            }
        }
        self
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.rejections.iter_mut().zip(other.rejections) {
            *a += b;
        }
        for (a, b) in self.failures.iter_mut().zip(other.failures) {
            if let Some(b) = b {
                keep_earliest(a, b);
            }
        }
        self
    }
}

fn keep_earliest(slot: &mut Option<(u32, String)>, new: (u32, String)) {
    if slot.as_ref().map_or(true, |(r, _)| new.0 < *r) {
        *slot = Some(new);
    }
}

/// Runs every test on `replications` samples of every scenario.
///
/// Replication `r` of scenario `s` draws from the stream derived from
/// `(seed, s, r)` alone, and counts are summed as integers, so the table
/// does not depend on the number of worker threads. A test that fails in
/// any replication of a cell yields a row with no rate and the first
/// failure message.
pub fn run_campaign(
    scenarios: &[DgpScenario],
    tests: &[TestSpec],
    replications: usize,
    alpha: f64,
    seed: u64,
) -> Result<RejectionTable> {
    check_alpha(alpha)?;
    if replications < 100 {
        return Err(Error::domain(format!(
            "need at least 100 replications, got {replications}"
        )));
    }
    if replications > u32::MAX as usize || scenarios.len() > u32::MAX as usize {
        return Err(Error::domain("campaign too large for 32-bit stream indices"));
    }
    if scenarios.is_empty() || tests.is_empty() {
        return Err(Error::domain("campaign needs at least one scenario and one test"));
    }
    for t in tests {
        t.validate()?;
    }
    let prepared = scenarios
        .iter()
        .map(PreparedScenario::new)
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(scenarios.len() * tests.len());
    for (s, prep) in prepared.iter().enumerate() {
        let tally = (0..replications as u32)
            .into_par_iter()
            .fold(
                || Tally::new(tests.len()),
                |acc, r| {
                    let decisions: Vec<Result<bool, String>> =
                        match Replication::from_prepared(prep, seed, s as u32, r) {
                            Ok(rep) => rep
                                .decisions(tests, alpha)
                                .into_iter()
                                .map(|d| d.map_err(|e| e.to_string()))
                                .collect(),
                            Err(e) => {
                                let msg = e.to_string();
                                tests.iter().map(|_| Err(msg.clone())).collect()
                            }
                        };
                    acc.record(r, decisions)
                },
            )
            .reduce(|| Tally::new(tests.len()), Tally::merge);
        for (i, test) in tests.iter().enumerate() {
            rows.push(RejectionRow::new(
                test.id(),
                s,
                prep.scenario,
                tally.rejections[i],
                replications,
                seed,
                tally.failures[i]
                    .as_ref()
                    .map(|(r, msg)| format!("replication {r}: {msg}")),
            ));
        }
    }
    Ok(RejectionTable {
        alpha,
        replications,
        seed,
        rows,
    })
}

/// [`run_campaign`] on a dedicated pool with `threads` workers.
pub fn run_campaign_with_threads(
    scenarios: &[DgpScenario],
    tests: &[TestSpec],
    replications: usize,
    alpha: f64,
    seed: u64,
    threads: usize,
) -> Result<RejectionTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_campaign(scenarios, tests, replications, alpha, seed))
}

fn default_t_obs() -> usize {
    250
}

fn default_rhos() -> Vec<f64> {
    vec![0.0, -0.5, 0.5]
}

fn default_lambdas() -> Vec<f64> {
    vec![0.0, 0.25, 0.5]
}

fn default_deltas() -> Vec<f64> {
    vec![0.15, 0.1, 0.05]
}

fn default_epsilons() -> Vec<f64> {
    vec![0.0, 0.5, 0.8]
}

fn default_power() -> Option<PowerGrid> {
    Some(PowerGrid::default())
}

fn default_replications() -> usize {
    2000
}

fn default_alpha() -> f64 {
    0.05
}

/// Alternative cells `μ = −δVθ + εμ̃`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerGrid {
    #[serde(default = "default_deltas")]
    pub delta: Vec<f64>,
    #[serde(default = "default_epsilons")]
    pub epsilon: Vec<f64>,
}

impl Default for PowerGrid {
    fn default() -> Self {
        Self {
            delta: default_deltas(),
            epsilon: default_epsilons(),
        }
    }
}

/// Full description of a simulation campaign, as read by `simulate`.
///
/// Every field except `seed` and `tests` has a default matching the
/// desk-scale experiment: `T = 250`, `R = 2000`, `α = 0.05`, the 9 null
/// cells `λ × ρ` and the 27 alternative cells `δ × ρ × ε`. Set `power` to
/// `null` or `lambda` to `[]` to drop either half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSpec {
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub tests: Vec<TestSpec>,
    pub p: Vec<usize>,
    #[serde(default = "default_t_obs")]
    pub t_obs: usize,
    pub noise: Vec<Noise>,
    #[serde(default = "default_rhos")]
    pub rho: Vec<f64>,
    #[serde(default = "default_lambdas")]
    pub lambda: Vec<f64>,
    #[serde(default = "default_power")]
    pub power: Option<PowerGrid>,
    #[serde(default)]
    pub weight_policy: WeightPolicy,
    /// Worker threads; the machine default when absent. Results do not
    /// depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl CampaignSpec {
    /// Parses and validates a JSON document. Errors carry a JSON pointer.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            pointer: json_pointer(&e.path().to_string()),
            message: e.inner().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |pointer: String, message: String| Error::Schema { pointer, message };
        if self.replications < 100 {
            return Err(schema("/replications".into(), "must be at least 100".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(schema("/alpha".into(), "must lie in (0, 0.5)".into()));
        }
        if self.tests.is_empty() {
            return Err(schema("/tests".into(), "must list at least one test".into()));
        }
        for (i, t) in self.tests.iter().enumerate() {
            t.validate()
                .map_err(|e| schema(format!("/tests/{i}"), e.to_string()))?;
        }
        if self.p.is_empty() {
            return Err(schema("/p".into(), "must list at least one dimension".into()));
        }
        for (i, &p) in self.p.iter().enumerate() {
            if p < 2 || (self.power.is_some() && p % 2 != 0) {
                return Err(schema(
                    format!("/p/{i}"),
                    format!("dimension {p} must be at least 2, and even when power cells are requested"),
                ));
            }
        }
        if self.t_obs < 3 {
            return Err(schema("/t_obs".into(), "must be at least 3".into()));
        }
        if self.noise.is_empty() {
            return Err(schema("/noise".into(), "must list at least one noise family".into()));
        }
        if self.rho.is_empty() {
            return Err(schema("/rho".into(), "must list at least one correlation".into()));
        }
        for (i, r) in self.rho.iter().enumerate() {
            if !(r.abs() < 1.0) {
                return Err(schema(format!("/rho/{i}"), format!("{r} is not in (-1, 1)")));
            }
        }
        for (i, l) in self.lambda.iter().enumerate() {
            if !(*l >= 0.0 && l.is_finite()) {
                return Err(schema(format!("/lambda/{i}"), format!("{l} must be non-negative")));
            }
        }
        if let Some(power) = &self.power {
            for (i, d) in power.delta.iter().enumerate() {
                if !(*d > 0.0 && d.is_finite()) {
                    return Err(schema(format!("/power/delta/{i}"), format!("{d} must be positive")));
                }
            }
            for (i, e) in power.epsilon.iter().enumerate() {
                if !(*e >= 0.0 && e.is_finite()) {
                    return Err(schema(
                        format!("/power/epsilon/{i}"),
                        format!("{e} must be non-negative"),
                    ));
                }
            }
            if power.delta.is_empty() || power.epsilon.is_empty() {
                return Err(schema("/power".into(), "delta and epsilon must be non-empty".into()));
            }
        }
        if self.lambda.is_empty() && self.power.is_none() {
            return Err(schema("/lambda".into(), "the grid has no cells".into()));
        }
        for &p in &self.p {
            self.weight_policy
                .validate(p)
                .map_err(|e| schema("/weight_policy".into(), e.to_string()))?;
        }
        if self.threads == Some(0) {
            return Err(schema("/threads".into(), "must be positive".into()));
        }
        Ok(())
    }

    /// Cells in a fixed order: per noise, per `p`, the null cells (`λ`
    /// outer, `ρ` inner) then the alternative cells (`ε`, `δ`, `ρ`).
    pub fn scenarios(&self) -> Result<Vec<DgpScenario>> {
        let mut out = Vec::new();
        for &noise in &self.noise {
            for &p in &self.p {
                for &lambda in &self.lambda {
                    for &rho in &self.rho {
                        out.push(
                            DgpScenario::size(p, self.t_obs, lambda, rho, noise)?
                                .with_weights(self.weight_policy.clone()),
                        );
                    }
                }
                if let Some(power) = &self.power {
                    for &eps in &power.epsilon {
                        for &delta in &power.delta {
                            for &rho in &self.rho {
                                out.push(
                                    DgpScenario::power(p, self.t_obs, delta, eps, rho, noise)?
                                        .with_weights(self.weight_policy.clone()),
                                );
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Grid used to aggregate the null cells.
    pub fn null_grid(&self) -> AggregateGrid {
        AggregateGrid {
            rhos: self.rho.clone(),
            levels: self.lambda.clone(),
        }
    }

    /// Grid used to aggregate the alternative cells.
    pub fn power_grid(&self) -> AggregateGrid {
        AggregateGrid {
            rhos: self.rho.clone(),
            levels: self.power.as_ref().map(|p| p.delta.clone()).unwrap_or_default(),
        }
    }

    pub fn run(&self) -> Result<RejectionTable> {
        let scenarios = self.scenarios()?;
        match self.threads {
            Some(n) => run_campaign_with_threads(
                &scenarios,
                &self.tests,
                self.replications,
                self.alpha,
                self.seed,
                n,
            ),
            None => run_campaign(&scenarios, &self.tests, self.replications, self.alpha, self.seed),
        }
    }
}

/// Converts a `serde_path_to_error` path (`a.b[2].c`) to a JSON pointer.
fn json_pointer(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for part in path.split('.') {
        let mut rest = part;
        if let Some(open) = rest.find('[') {
            let head = &rest[..open];
            if !head.is_empty() {
                out.push('/');
                out.push_str(&head.replace('~', "~0").replace('/', "~1"));
            }
            rest = &rest[open..];
            while let Some(close) = rest.find(']') {
                out.push('/');
                out.push_str(&rest[1..close]);
                rest = &rest[close + 1..];
            }
        } else {
            out.push('/');
            out.push_str(&rest.replace('~', "~0").replace('/', "~1"));
        }
    }
    out
}
