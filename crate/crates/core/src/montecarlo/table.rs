//! Rejection tables, MNRP/AP aggregation and text rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Design, DgpScenario, Noise};
use crate::error::{Error, Result};

/// Grid values are matched to cells with this absolute tolerance.
const LEVEL_TOL: f64 = 1e-9;

/// One `(test, scenario)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub test_id: String,
    pub scenario_id: usize,
    pub design: String,
    pub p: usize,
    pub t_obs: usize,
    pub noise: Noise,
    pub rho: f64,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub rejections: u64,
    pub reps: usize,
    /// `None` when the test failed in some replication.
    pub rate: Option<f64>,
    /// Binomial standard error `√(rate(1 − rate)/R)`.
    pub se: Option<f64>,
    pub seed: u64,
    pub error: Option<String>,
}

impl RejectionRow {
    pub(crate) fn new(
        test_id: String,
        scenario_id: usize,
        scenario: &DgpScenario,
        rejections: u64,
        reps: usize,
        seed: u64,
        error: Option<String>,
    ) -> Self {
        let (lambda, delta, epsilon) = match scenario.design {
            Design::Size { lambda } => (Some(lambda), None, None),
            Design::Power { delta, epsilon } => (None, Some(delta), Some(epsilon)),
            Design::Custom => (None, None, None),
        };
        let (rate, se) = if error.is_some() {
            (None, None)
        } else {
            let r = rejections as f64 / reps as f64;
            (Some(r), Some((r * (1.0 - r) / reps as f64).sqrt()))
        };
        Self {
            test_id,
            scenario_id,
            design: scenario.design.name().to_string(),
            p: scenario.p,
            t_obs: scenario.t_obs,
            noise: scenario.noise,
            rho: scenario.rho,
            lambda,
            delta,
            epsilon,
            rejections,
            reps,
            rate,
            se,
            seed,
            error,
        }
    }
}

/// Output of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    /// CSV with one line per row; floats keep full precision.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)
                .map_err(|e| Error::Numeric(format!("cannot serialize row: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Numeric(format!("cannot flush CSV: {e}")))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    /// Rows of one test, in scenario order.
    pub fn rows_for<'a>(&'a self, test_id: &'a str) -> impl Iterator<Item = &'a RejectionRow> + 'a {
        self.rows.iter().filter(move |r| r.test_id == test_id)
    }

    /// Rate of `test_id` in scenario `scenario_id`.
    pub fn rate(&self, test_id: &str, scenario_id: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.test_id == test_id && r.scenario_id == scenario_id)
            .and_then(|r| r.rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    /// Maximum over the null cells.
    Mnrp,
    /// Mean over the alternative cells at fixed `ε`.
    Ap,
}

/// Cells every group must contain: `levels × rhos`, where the levels are
/// `λ` values for MNRP and `δ` values for AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateGrid {
    pub rhos: Vec<f64>,
    pub levels: Vec<f64>,
}

impl AggregateGrid {
    pub fn paper_null() -> Self {
        Self {
            rhos: vec![0.0, -0.5, 0.5],
            levels: vec![0.0, 0.25, 0.5],
        }
    }

    pub fn paper_power() -> Self {
        Self {
            rhos: vec![0.0, -0.5, 0.5],
            levels: vec![0.15, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub test_id: String,
    pub mode: AggregateMode,
    pub noise: Noise,
    pub p: usize,
    pub t_obs: usize,
    /// Set for AP rows.
    pub epsilon: Option<f64>,
    pub value: f64,
    /// Standard error: of the maximizing cell for MNRP, of the mean for AP.
    pub se: f64,
    pub cells: usize,
    pub reps: usize,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    order: usize,
    test_id: String,
    noise: Noise,
    p: usize,
    t_obs: usize,
    epsilon_bits: Option<u64>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= LEVEL_TOL
}

/// MNRP or AP per `(test, noise, p, T)` group, plus `ε` for AP.
///
/// Every group must contain each grid cell exactly once with a valid rate
/// and a common replication count.
pub fn aggregate(
    table: &RejectionTable,
    mode: AggregateMode,
    grid: &AggregateGrid,
) -> Result<Vec<SummaryRow>> {
    let design = match mode {
        AggregateMode::Mnrp => "size",
        AggregateMode::Ap => "power",
    };
    let mut first_seen: Vec<(String, Noise, usize, usize, Option<u64>)> = Vec::new();
    let mut groups: BTreeMap<GroupKey, Vec<&RejectionRow>> = BTreeMap::new();
    for row in table.rows.iter().filter(|r| r.design == design) {
        let eps = match mode {
            AggregateMode::Mnrp => None,
            AggregateMode::Ap => row.epsilon.map(f64::to_bits),
        };
        let ident = (row.test_id.clone(), row.noise, row.p, row.t_obs, eps);
        let order = match first_seen.iter().position(|k| *k == ident) {
            Some(i) => i,
            None => {
                first_seen.push(ident);
                first_seen.len() - 1
            }
        };
        let key = GroupKey {
            order,
            test_id: row.test_id.clone(),
            noise: row.noise,
            p: row.p,
            t_obs: row.t_obs,
            epsilon_bits: eps,
        };
        groups.entry(key).or_default().push(row);
    }

    let mut out = Vec::with_capacity(groups.len());
    for (key, rows) in groups {
        let label = match key.epsilon_bits {
            Some(bits) => format!(
                "{} {} p={} T={} eps={}",
                key.test_id,
                key.noise,
                key.p,
                key.t_obs,
                f64::from_bits(bits)
            ),
            None => format!("{} {} p={} T={}", key.test_id, key.noise, key.p, key.t_obs),
        };
        let mut cells = Vec::with_capacity(grid.levels.len() * grid.rhos.len());
        let mut missing = Vec::new();
        for &level in &grid.levels {
            for &rho in &grid.rhos {
                let found = rows.iter().find(|r| {
                    let l = match mode {
                        AggregateMode::Mnrp => r.lambda,
                        AggregateMode::Ap => r.delta,
                    };
                    close(r.rho, rho) && l.is_some_and(|l| close(l, level))
                });
                match found {
                    Some(r) => cells.push(*r),
                    None => {
                        let name = if mode == AggregateMode::Mnrp { "lambda" } else { "delta" };
                        missing.push(format!("{name}={level},rho={rho}"));
                    }
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::IncompleteGroup {
                group: label,
                missing,
            });
        }
        if cells.is_empty() {
            continue;
        }
        let reps = cells[0].reps;
        if cells.iter().any(|c| c.reps != reps) {
            return Err(Error::domain(format!(
                "group {label} mixes replication counts"
            )));
        }
        let mut rates = Vec::with_capacity(cells.len());
        for c in &cells {
            match c.rate {
                Some(r) => rates.push(r),
                None => {
                    return Err(Error::Numeric(format!(
                        "group {label}: scenario {} failed: {}",
                        c.scenario_id,
                        c.error.as_deref().unwrap_or("no rate")
                    )))
                }
            }
        }
        let binom = |r: f64| (r * (1.0 - r) / reps as f64).sqrt();
        let (value, se) = match mode {
            AggregateMode::Mnrp => {
                let (i, max) = rates
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
                (max, binom(rates[i]))
            }
            AggregateMode::Ap => {
                let n = rates.len() as f64;
                let mean = rates.iter().sum::<f64>() / n;
                let var: f64 = rates.iter().map(|&r| binom(r).powi(2)).sum();
                (mean, var.sqrt() / n)
            }
        };
        out.push(SummaryRow {
            test_id: key.test_id,
            mode,
            noise: key.noise,
            p: key.p,
            t_obs: key.t_obs,
            epsilon: key.epsilon_bits.map(f64::from_bits),
            value,
            se,
            cells: cells.len(),
            reps,
        });
    }
    Ok(out)
}

/// Three decimals without the leading zero, as in `.049`.
fn three_decimals(x: f64) -> String {
    let s = format!("{x:.3}");
    match s.strip_prefix("0.") {
        Some(rest) => format!(".{rest}"),
        None => s,
    }
}

/// Renders summary rows as fixed-width tables: one MNRP block, then one AP
/// block per `ε`. Rows are tests; columns are noise families, each split
/// by `p`.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut blocks: Vec<(AggregateMode, Option<u64>)> = Vec::new();
    for r in rows {
        let b = (r.mode, r.epsilon.map(f64::to_bits));
        if !blocks.contains(&b) {
            blocks.push(b);
        }
    }
    blocks.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            let x = a.1.map(f64::from_bits).unwrap_or(0.0);
            let y = b.1.map(f64::from_bits).unwrap_or(0.0);
            x.total_cmp(&y)
        })
    });

    let mut out = String::new();
    for (mode, eps) in blocks {
        let in_block: Vec<&SummaryRow> = rows
            .iter()
            .filter(|r| r.mode == mode && r.epsilon.map(f64::to_bits) == eps)
            .collect();
        let mut columns: Vec<(Noise, usize)> = Vec::new();
        let mut tests: Vec<&str> = Vec::new();
        for r in &in_block {
            if !columns.contains(&(r.noise, r.p)) {
                columns.push((r.noise, r.p));
            }
            if !tests.contains(&r.test_id.as_str()) {
                tests.push(&r.test_id);
            }
        }
        columns.sort();
        let title = match (mode, eps) {
            (AggregateMode::Mnrp, _) => "MNRP".to_string(),
            (AggregateMode::Ap, Some(bits)) => format!("AP, eps = {}", f64::from_bits(bits)),
            (AggregateMode::Ap, None) => "AP".to_string(),
        };
        let width = tests.iter().map(|t| t.len()).max().unwrap_or(4).max(4);
        let _ = writeln!(out, "{title}");
        let mut header = format!("{:width$}", "");
        let mut sub = format!("{:width$}", "");
        for (noise, p) in &columns {
            let _ = write!(header, " {:>14}", noise.name());
            let _ = write!(sub, " {:>14}", format!("p={p}"));
        }
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{sub}");
        for t in tests {
            let mut line = format!("{t:width$}");
            for (noise, p) in &columns {
                let cell = in_block
                    .iter()
                    .find(|r| r.test_id == t && r.noise == *noise && r.p == *p)
                    .map(|r| three_decimals(r.value))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(line, " {cell:>14}");
            }
            let _ = writeln!(out, "{line}");
        }
        out.push('\n');
    }
    out
}
