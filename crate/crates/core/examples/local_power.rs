//! Closed-form local power along `c = −δVθ` next to the Neyman–Pearson
//! envelope, and along a direction where the two differ.

use onesided::{local_power, np_bound, toeplitz_cov, LocalAlternative};

fn main() -> onesided::Result<()> {
    let v = toeplitz_cov(4, 0.5)?;
    let theta = vec![1.0; 4];
    let v_theta = v.mul_vec(&theta);

    println!("{:>6} {:>12} {:>12}", "delta", "local power", "NP bound");
    for k in 0..=10 {
        let delta = 0.1 * k as f64;
        let c: Vec<f64> = v_theta.iter().map(|x| -delta * x).collect();
        let power = local_power(&LocalAlternative::at_origin(c.clone(), theta.clone(), v.clone()), 0.05)?;
        let bound = if delta > 0.0 { np_bound(&c, &v, 0.05)? } else { 0.05 };
        println!("{delta:>6.1} {power:>12.4} {bound:>12.4}");
    }

    // one negative drift; the other coordinates bind with positive drift
    let c = vec![-2.0, 0.5, 0.5, 0.5];
    let power = local_power(&LocalAlternative::at_origin(c.clone(), theta.clone(), v.clone()), 0.05)?;
    println!("c = {c:?}: local power {power:.4}, NP bound {:.4}", np_bound(&c, &v, 0.05)?);

    // making the positive coordinates slack removes their drag
    let alt = LocalAlternative {
        gamma: vec![0.0, 0.3, 0.3, 0.3],
        c,
        theta,
        v,
    };
    println!("same drift with slack coordinates: {:.4}", local_power(&alt, 0.05)?);
    Ok(())
}
