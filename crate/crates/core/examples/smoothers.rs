//! Smoothers, tuners and the finite-sample adjustment `Λ_T(0, 1)` across
//! sample sizes.

use onesided::{lambda_adjustment, Smoother, Tuner};

fn main() -> onesided::Result<()> {
    println!("{:>6} {:>10} {:>10}", "x", "logistic", "normal");
    for k in -4..=4 {
        let x = k as f64;
        println!(
            "{x:>6.1} {:>10.5} {:>10.5}",
            Smoother::Logistic.eval(x)?,
            Smoother::Normal.eval(x)?
        );
    }

    println!();
    println!("{:>8} {:>8} {:>8}  Lambda_T(0, 1) for step / logistic / normal with K_SIC", "T", "K_SIC", "K_LIL");
    for t in [50u64, 100, 250, 1000, 10_000, 100_000] {
        let lam: Vec<String> = Smoother::ALL
            .iter()
            .map(|&s| lambda_adjustment(s, Tuner::Sic, t, 0.0, 1.0).map(|l| format!("{l:>9.5}")))
            .collect::<Result<_, _>>()?;
        println!(
            "{t:>8} {:>8.3} {:>8.3}  {}",
            Tuner::Sic.eval(t)?,
            Tuner::Lil.eval(t)?,
            lam.join(" ")
        );
    }
    Ok(())
}
