//! A small size/power campaign in the layout of the published tables.
//!
//! ```text
//! cargo run --release --example size_power_campaign [replications]
//! ```

use onesided::montecarlo::format_summary;
use onesided::{aggregate, AggregateMode, CampaignSpec};

fn main() -> onesided::Result<()> {
    let reps: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);
    let spec = CampaignSpec::from_json(&format!(
        r#"{{
            "seed": 42,
            "replications": {reps},
            "tests": [
                {{"kind": "smoothed", "smoother": "step", "tuner": "sic"}},
                {{"kind": "smoothed", "smoother": "logistic", "tuner": "sic"}},
                {{"kind": "gms", "stat": "s1", "tuner": "sic", "reps": 500}},
                {{"kind": "gms", "stat": "s3", "tuner": "sic", "reps": 500}}
            ],
            "p": [4],
            "noise": ["gaussian", "logistic"],
            "power": {{"epsilon": [0.0, 0.5]}}
        }}"#
    ))?;
    let table = spec.run()?;
    let mut summary = aggregate(&table, AggregateMode::Mnrp, &spec.null_grid())?;
    summary.extend(aggregate(&table, AggregateMode::Ap, &spec.power_grid())?);
    print!("{}", format_summary(&summary));
    Ok(())
}
